"""Independent brute-force oracles used by the test suite.

These deliberately avoid the code paths they check: the transport oracle
enumerates polytope vertices instead of calling an LP solver, and the
ghost-delta oracle scans a dense parameter grid instead of solving
min-max programs.
"""

import itertools
import math

import numpy as np


def uw_exhaustive(points1, masses1, points2, masses2, R, p=2.0):
    """Exact unbalanced transport cost by vertex enumeration.

    The feasible plans form the bounded polytope
    ``{pi >= 0 : row sums <= masses1, column sums <= masses2}`` in
    R^(n1*n2); a linear objective attains its minimum at a vertex, and a
    vertex is a basic solution with n1*n2 linearly independent active
    constraints.  All candidate active sets are enumerated (fine for
    up to 3 atoms per side).
    """
    x = np.atleast_2d(np.asarray(points1, dtype=float))
    y = np.atleast_2d(np.asarray(points2, dtype=float))
    m = np.asarray(masses1, dtype=float).ravel()
    n = np.asarray(masses2, dtype=float).ravel()
    n1, n2 = len(m), len(n)
    surplus = 0.5 * R**p
    if n1 == 0 or n2 == 0:
        return surplus * (m.sum() + n.sum())

    diff = x[:, None, :] - y[None, :, :]
    cost = np.sqrt((diff**2).sum(axis=2)) ** p
    nvar = n1 * n2

    # constraint rows: n1 row sums, n2 column sums, nvar nonnegativity
    rows = []
    rhs = []
    for i in range(n1):
        g = np.zeros(nvar)
        g[i * n2 : (i + 1) * n2] = 1.0
        rows.append(g)
        rhs.append(m[i])
    for j in range(n2):
        g = np.zeros(nvar)
        g[j::n2] = 1.0
        rows.append(g)
        rhs.append(n[j])
    for k in range(nvar):
        g = np.zeros(nvar)
        g[k] = -1.0
        rows.append(g)
        rhs.append(0.0)
    G = np.array(rows)
    h = np.array(rhs)

    obj_lin = cost.ravel() - R**p
    const = surplus * (m.sum() + n.sum())

    best = const  # the zero plan is always feasible
    for active in itertools.combinations(range(len(G)), nvar):
        Ga = G[list(active)]
        ha = h[list(active)]
        try:
            pi = np.linalg.solve(Ga, ha)
        except np.linalg.LinAlgError:
            continue
        if np.any(pi < -1e-9):
            continue
        if np.any(G @ pi > h + 1e-9):
            continue
        best = min(best, const + float(obj_lin @ pi))
    return best


def _ghost_delta_values(anchors, functionals, X, V):
    """Best non-constant-assignment deviation at each grid point.

    The unconstrained per-functional minimum over particles decomposes;
    where the minimizing particle indices are all equal, the best
    non-constant assignment swaps exactly one functional to its
    second-nearest particle.
    """
    A = functionals
    K = A.shape[0]
    proj = A[:, 0][:, None] * X[None, :] + A[:, 1][:, None] * V[None, :]  # (K, m)
    d = np.abs(proj[:, :, None] - anchors[:, None, :])  # (K, m, N)
    part = np.partition(d, 1, axis=2)
    d1 = part[:, :, 0]
    d2 = part[:, :, 1]
    i1 = np.argmin(d, axis=2)
    val = d1.max(axis=0)
    constant = (i1 == i1[0]).all(axis=0)
    if constant.any():
        d1c = d1[:, constant]
        d2c = d2[:, constant]
        srt = np.sort(d1c, axis=0)
        m1 = srt[-1]
        m2 = srt[-2] if K >= 2 else np.zeros_like(m1)
        amax = np.argmax(d1c, axis=0)
        swap = np.empty((K, d1c.shape[1]))
        for k in range(K):
            rest = np.where(amax == k, m2, m1)
            swap[k] = np.maximum(d2c[k], rest)
        val[constant] = swap.min(axis=0)
    return val


def ghost_delta_grid_search(anchors, functionals, x_range, v_range, step,
                            coarse_factor=10):
    """Smallest max-deviation over grid points and non-constant assignments.

    ``anchors[k, i]`` is the target value of functional k at particle i.
    A coarse scan at ``coarse_factor * step`` discards grid regions first:
    the objective is piecewise linear with Lipschitz constant
    ``L = max_k |a_k|_1`` in the max-norm, so the coarse point nearest
    the true minimizer scores at most ``true_min + L * coarse_step``;
    every coarse point within that margin of the coarse minimum is then
    refined at the fine step.
    """
    anchors = np.asarray(anchors, dtype=float)
    A = np.asarray(functionals, dtype=float)
    L = float(np.abs(A).sum(axis=1).max())
    cs = step * coarse_factor

    xs = np.arange(x_range[0], x_range[1] + cs / 2, cs)
    vs = np.arange(v_range[0], v_range[1] + cs / 2, cs)
    Xc, Vc = map(np.ravel, np.meshgrid(xs, vs, indexing="ij"))
    coarse = _ghost_delta_values(anchors, A, Xc, Vc)
    keep = coarse <= coarse.min() + L * cs

    best = math.inf
    fine = np.arange(-cs, cs + step / 2, step)
    for x0, v0 in zip(Xc[keep], Vc[keep]):
        Xf, Vf = map(np.ravel, np.meshgrid(x0 + fine, v0 + fine, indexing="ij"))
        best = min(best, float(_ghost_delta_values(anchors, A, Xf, Vf).min()))
    return best
