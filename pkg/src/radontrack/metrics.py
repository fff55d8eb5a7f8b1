"""Evaluation metrics: unbalanced transport divergence, cluster
extraction from grid weights, and correct-reconstruction matching.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage, sparse
from scipy.optimize import linprog
from scipy.sparse.csgraph import maximum_bipartite_matching

from .geometry import GridSpec
from .measures import DiscreteMeasure

__all__ = [
    "UwResult",
    "unbalanced_wasserstein",
    "uw_mass_terms",
    "cluster_extract",
    "match_configs",
]


@dataclass(frozen=True)
class UwResult:
    """Optimal value and decomposition of the unbalanced transport cost.

    ``value`` equals ``sum_ij plan_ij * dist(x_i, y_j)^p
    + (R^p / 2) * (removed + created)`` by construction.
    """

    value: float
    transported_mass: float
    removed_mass: float
    created_mass: float
    plan: tuple

    def __post_init__(self):
        if self.value < -1e-12:
            raise ValueError("divergence must be nonnegative")


def unbalanced_wasserstein(
    nu1: DiscreteMeasure, nu2: DiscreteMeasure, R: float, p: float = 2.0
) -> UwResult:
    """Transport divergence with mass creation/removal at price R^p / 2.

    The divergence is

        ``inf_nu  W_p^p(nu, nu2) + (R^p / 2) * |nu1 - nu|``

    over intermediate nonnegative measures ``nu``.  For finite supports
    the intermediate measure can be eliminated: removing mass anywhere
    costs R^p/2 per unit, and creating mass costs the same regardless of
    position, so created mass is placed exactly at the destination atoms
    and never transported (creating elsewhere and moving it could only
    add cost).  Likewise the transported part of ``nu`` never exceeds
    ``nu1`` atom-wise, since topping up at a source and shipping costs at
    least as much as creating at the target.  What remains is the finite
    program over plans ``pi >= 0`` with row sums <= masses of ``nu1`` and
    column sums <= masses of ``nu2``:

        ``min  sum_ij pi_ij d_ij^p
               + (R^p/2) * (|nu1| - sum pi)    # removed
               + (R^p/2) * (|nu2| - sum pi)    # created``

    Transporting over a distance d > R is never optimal (remove + create
    costs R^p < d^p), so the plan search is restricted to pairs with
    d <= R and the linear program is solved exactly.
    """
    if R <= 0:
        raise ValueError("R must be positive")
    m = nu1.weights
    n = nu2.weights
    n1, n2 = nu1.n_atoms, nu2.n_atoms
    surplus = 0.5 * R**p

    if n1 == 0 or n2 == 0:
        return UwResult(
            value=surplus * (m.sum() + n.sum()),
            transported_mass=0.0,
            removed_mass=float(m.sum()),
            created_mass=float(n.sum()),
            plan=(),
        )

    diff = nu1.points[:, None, :] - nu2.points[None, :, :]
    dist = np.sqrt((diff**2).sum(axis=2))
    cost = dist**p

    # candidate transport pairs: strictly cheaper than remove + create
    ii, jj = np.nonzero(cost < R**p)
    if ii.size == 0:
        return UwResult(
            value=surplus * (m.sum() + n.sum()),
            transported_mass=0.0,
            removed_mass=float(m.sum()),
            created_mass=float(n.sum()),
            plan=(),
        )

    nvar = ii.size
    c = cost[ii, jj] - R**p
    rows = np.concatenate([ii, n1 + jj])
    cols = np.concatenate([np.arange(nvar), np.arange(nvar)])
    A_ub = sparse.csr_matrix(
        (np.ones(2 * nvar), (rows, cols)), shape=(n1 + n2, nvar)
    )
    b_ub = np.concatenate([m, n])
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=(0, None), method="highs")
    if not res.success:
        raise RuntimeError(f"transport LP failed: {res.message}")
    pi = res.x
    total_pi = float(pi.sum())
    value = float(
        np.dot(pi, cost[ii, jj]) + surplus * (m.sum() - total_pi + n.sum() - total_pi)
    )
    keep = pi > 1e-12
    plan = tuple(
        (int(i), int(j), float(w)) for i, j, w in zip(ii[keep], jj[keep], pi[keep])
    )
    return UwResult(
        value=value,
        transported_mass=total_pi,
        removed_mass=float(m.sum() - total_pi),
        created_mass=float(n.sum() - total_pi),
        plan=plan,
    )


def uw_mass_terms(nu1: DiscreteMeasure, nu2: DiscreteMeasure, R: float, p: float = 2.0):
    """Mass statistics (A, B, C_p) bounding the divergence from above.

    With open balls ``B_R`` around the atoms of ``nu1``:

      A   - mass of ``nu2`` outside all balls,
      B   - sum over atoms i of ``|m_i - nu2(B_R(x_i))|``,
      C_p - sum over atoms i of the p-th moment of ``nu2`` within
            ``B_R(x_i)`` about ``x_i``.

    The bound ``UW <= (R^p/2)(A + B) + C_p`` holds whenever the atoms of
    ``nu1`` are pairwise at least 2R apart (so the balls are disjoint).
    """
    if nu1.n_atoms == 0:
        return float(nu2.total_mass), 0.0, 0.0
    if nu2.n_atoms == 0:
        return 0.0, float(nu1.total_mass), 0.0
    diff = nu1.points[:, None, :] - nu2.points[None, :, :]
    dist = np.sqrt((diff**2).sum(axis=2))  # (n1, n2)
    inside = dist < R
    outside_all = ~inside.any(axis=0)
    A = float(nu2.weights[outside_all].sum())
    ball_mass = (inside * nu2.weights[None, :]).sum(axis=1)
    B = float(np.abs(nu1.weights - ball_mass).sum())
    C = float((inside * dist**p * nu2.weights[None, :]).sum())
    return A, B, C


def cluster_extract(
    weights: np.ndarray, grid: GridSpec, w_min: float = 0.1
) -> DiscreteMeasure:
    """Particles detected from a grid-weight vector.

    Weights below ``w_min`` are zeroed; the remaining cells are grouped
    into connected components under 8-neighbour adjacency on the grid
    lattice, and each component becomes one atom at its mass-weighted
    centre of mass carrying the component's total mass.
    """
    if grid.dim != 2:
        raise ValueError("cluster extraction works on 2-D grids")
    w = np.asarray(weights, dtype=float).copy()
    if w.shape != (grid.n_cells,):
        raise ValueError("weight vector length must equal the cell count")
    w[w < w_min] = 0.0
    mask = (w > 0).reshape(grid.M, grid.M)
    labels, n_comp = ndimage.label(mask, structure=np.ones((3, 3), dtype=int))
    if n_comp == 0:
        return DiscreteMeasure(np.empty((0, 2)), np.empty(0))
    lab = labels.ravel()
    centers = grid.centers()
    pts = np.empty((n_comp, 2))
    ms = np.empty(n_comp)
    for k in range(1, n_comp + 1):
        sel = lab == k
        wk = w[sel]
        ms[k - 1] = wk.sum()
        pts[k - 1] = (centers[sel] * wk[:, None]).sum(axis=0) / wk.sum()
    return DiscreteMeasure(pts, ms)


def match_configs(
    recon: DiscreteMeasure, truth: DiscreteMeasure, radius: float = 0.01
) -> bool:
    """Whether reconstructed and true particles pair up within ``radius``.

    True iff there is a perfect matching in the bipartite graph joining
    reconstructed to true atoms at distance strictly less than ``radius``
    (no unpaired atoms on either side).
    """
    nr, nt = recon.n_atoms, truth.n_atoms
    if nr != nt:
        return False
    if nr == 0:
        return True
    diff = recon.points[:, None, :] - truth.points[None, :, :]
    dist = np.sqrt((diff**2).sum(axis=2))
    adj = sparse.csr_matrix(dist < radius)
    if adj.nnz == 0:
        return False
    matching = maximum_bipartite_matching(adj, perm_type="column")
    return bool((matching >= 0).all())
