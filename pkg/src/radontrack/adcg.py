"""Full-dimensional baseline: conditional gradient over phase space.

Atoms (position, velocity, mass) are placed directly in the feasible
phase region.  Outer iterations alternate between (1) scanning a coarse
phase-space grid for the candidate most correlated with the data
residual and refining it by projected gradient ascent, (2) a nonnegative
weight refit by coordinate descent, and (3) joint local descent over all
atom parameters with backtracking and projection back into the feasible
region.  The fidelity term is penalized rather than constrained, with
the same regularization weight rule as the coupled solver.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .discretize import fourier_frequencies
from .geometry import phase_domain_contains

__all__ = ["AdcgParams", "AtomicSolution", "FourierModel", "solve_adcg"]


@dataclass(frozen=True)
class AdcgParams:
    """Termination and search parameters."""

    max_outer: int = 100
    max_coord_descent: int = 200
    init_grid: int = 20
    min_gap: float = 1e-5
    min_progress: float = 1e-4

    def __post_init__(self):
        if min(
            self.max_outer, self.max_coord_descent, self.init_grid
        ) < 1 or min(self.min_gap, self.min_progress) <= 0:
            raise ValueError("all parameters must be positive")


@dataclass
class AtomicSolution:
    """Recovered atoms plus solve diagnostics."""

    positions: np.ndarray
    velocities: np.ndarray
    masses: np.ndarray
    objective: float
    termination: str
    objective_trace: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def n_atoms(self) -> int:
        return self.masses.size


class FourierModel:
    """Stacked Fourier features of a moving atom, with gradients.

    The feature vector of an atom at (x, v) stacks, per measurement time,
    the real then imaginary parts of ``exp(-i 2 pi (x + t v) . xi)`` over
    all frequencies with max-norm at most ``cutoff``.
    """

    def __init__(self, times, cutoff: int, T: float | None = None):
        self.times = tuple(float(t) for t in times)
        self.cutoff = int(cutoff)
        self.freqs = fourier_frequencies(cutoff, 2)
        self.T = float(T) if T is not None else max(abs(t) for t in self.times)
        self.n_freqs = self.freqs.shape[0]
        self.dim = 2 * self.n_freqs * len(self.times)

    def _complex_features(self, x, v):
        # (n_times, n_freqs) complex
        s = np.asarray(x)[None, :] + np.array(self.times)[:, None] * np.asarray(v)
        return np.exp(-2j * np.pi * (s @ self.freqs.T))

    def features(self, x, v) -> np.ndarray:
        c = self._complex_features(x, v)
        return np.concatenate([np.concatenate([row.real, row.imag]) for row in c])

    def features_grad(self, x, v) -> np.ndarray:
        """Jacobian of the features w.r.t. (x1, x2, v1, v2), shape (dim, 4)."""
        c = self._complex_features(x, v)  # (nt, nf)
        out = np.zeros((self.dim, 4))
        nf = self.n_freqs
        for k, t in enumerate(self.times):
            dc = -2j * np.pi * self.freqs.T[None, :, :] * c[k][None, None, :]
            # dc shape: (1, 2, nf) per position component
            dx = dc[0]  # (2, nf) derivative w.r.t. x components
            dv = t * dx
            base = 2 * nf * k
            for j in range(2):
                out[base : base + nf, j] = dx[j].real
                out[base + nf : base + 2 * nf, j] = dx[j].imag
                out[base : base + nf, 2 + j] = dv[j].real
                out[base + nf : base + 2 * nf, 2 + j] = dv[j].imag
        return out

    def stack(self, per_time_complex) -> np.ndarray:
        """Stack per-time complex coefficient rows into one real vector."""
        return np.concatenate(
            [np.concatenate([row.real, row.imag]) for row in per_time_complex]
        )

    def unstack_complex(self, vec: np.ndarray) -> np.ndarray:
        """Inverse of ``stack``: (n_times, n_freqs) complex."""
        nf = self.n_freqs
        rows = []
        for k in range(len(self.times)):
            base = 2 * nf * k
            rows.append(vec[base : base + nf] + 1j * vec[base + nf : base + 2 * nf])
        return np.array(rows)

    def correlation_grid(self, residual: np.ndarray, X: np.ndarray, V: np.ndarray):
        """Correlations of all (position, velocity) grid combinations.

        Factorizes ``exp(-i2pi(x + t v).xi)`` into a position factor and a
        velocity factor, so the scan costs one small matrix product per
        time instead of one feature evaluation per candidate.
        """
        rho = self.unstack_complex(residual)  # (nt, nf)
        Ex = np.exp(-2j * np.pi * (X @ self.freqs.T))  # (nx, nf)
        W = np.zeros((V.shape[0], self.n_freqs), dtype=complex)
        for k, t in enumerate(self.times):
            Ev = np.exp(-2j * np.pi * t * (V @ self.freqs.T))
            W += Ev * np.conj(rho[k])[None, :]
        return (Ex @ W.T).real  # (nx, nv)


def _project_phase(x, v, T):
    """Exact projection of each (x_j, v_j) pair onto the feasible slab.

    Per component the feasible set is the convex quadrilateral
    ``{(a, b) : 0 <= a + T b <= 1, 0 <= a - T b <= 1}``; points outside
    are moved to the nearest boundary point among the four edges.
    """
    verts = np.array([[0.0, 0.0], [0.5, 1.0 / (2 * T)], [1.0, 0.0],
                      [0.5, -1.0 / (2 * T)]])
    edges = [(verts[k], verts[(k + 1) % 4]) for k in range(4)]
    x = np.array(x, dtype=float)
    v = np.array(v, dtype=float)
    for j in range(x.size):
        a, b = x[j], v[j]
        fwd = a + T * b
        bwd = a - T * b
        if 0 <= fwd <= 1 and 0 <= bwd <= 1:
            continue
        best, bd = None, np.inf
        p = np.array([a, b])
        for q0, q1 in edges:
            e = q1 - q0
            s = np.clip(np.dot(p - q0, e) / np.dot(e, e), 0.0, 1.0)
            cand = q0 + s * e
            d = np.dot(p - cand, p - cand)
            if d < bd:
                bd, best = d, cand
        x[j], v[j] = best
    return x, v


def solve_adcg(
    model: FourierModel,
    data: np.ndarray,
    params: AdcgParams = AdcgParams(),
    alpha: float = 0.005,
) -> AtomicSolution:
    """Greedy atom insertion with local refinement.

    Minimizes ``1/2 |F(atoms) - data|^2 + alpha * total mass`` over
    finitely many atoms constrained to the feasible phase region with
    nonnegative masses.  The objective never increases across outer
    iterations: every substep accepts improving moves only.
    """
    data = np.asarray(data, dtype=float)
    if data.shape != (model.dim,):
        raise ValueError("data length does not match the model dimension")
    T = model.T
    G = params.init_grid
    centers1 = (np.arange(G) + 0.5) / G
    XX, YY = np.meshgrid(centers1, centers1, indexing="xy")
    Xgrid = np.column_stack([XX.ravel(), YY.ravel()])
    vmax = 1.0 / (2.0 * T)
    Vgrid = (Xgrid * 2.0 - 1.0) * vmax  # same lattice scaled to velocity box

    # feasibility of every (position, velocity) lattice combination
    fwd = Xgrid[:, None, :] + T * Vgrid[None, :, :]
    bwd = Xgrid[:, None, :] - T * Vgrid[None, :, :]
    feasible = ((fwd >= 0) & (fwd <= 1) & (bwd >= 0) & (bwd <= 1)).all(axis=2)

    atoms_x = np.zeros((0, 2))
    atoms_v = np.zeros((0, 2))
    masses = np.zeros(0)
    feats = np.zeros((model.dim, 0))

    def model_vec():
        return feats @ masses

    def objective():
        r = model_vec() - data
        return 0.5 * float(r @ r) + alpha * float(masses.sum())

    def check_finite(arr, what):
        if not np.all(np.isfinite(arr)):
            raise RuntimeError(f"non-finite {what} encountered in atom refinement")

    trace = [objective()]
    termination = "max_outer"

    for _ in range(params.max_outer):
        residual = data - model_vec()

        # (1) candidate scan: strongest absolute correlation on the grid
        scores = model.correlation_grid(residual, Xgrid, Vgrid)
        scores = np.where(feasible, scores, 0.0)
        flat = int(np.argmax(np.abs(scores)))
        ia, ib = np.unravel_index(flat, scores.shape)
        cx, cv = Xgrid[ia].copy(), Vgrid[ib].copy()
        sign = 1.0 if scores[ia, ib] >= 0 else -1.0

        # refine by projected gradient ascent on the (signed) correlation
        def corr_and_grad(x, v):
            psi = model.features(x, v)
            jac = model.features_grad(x, v)
            val = float(psi @ residual)
            grad = jac.T @ residual  # (4,)
            return val, grad

        val, grad = corr_and_grad(cx, cv)
        check_finite(grad, "correlation gradient")
        step = 0.1
        for _ in range(25):
            nx = cx + sign * step * grad[:2]
            nv = cv + sign * step * grad[2:]
            nx, nv = _project_phase(nx, nv, T)
            nval, ngrad = corr_and_grad(nx, nv)
            if sign * nval > sign * val:
                cx, cv, val, grad = nx, nv, nval, ngrad
                check_finite(grad, "correlation gradient")
                step *= 1.5
            else:
                step *= 0.5
                if step < 1e-12:
                    break

        # certificate: no atom can decrease the objective at rate > gap
        gap = val - alpha
        if gap < params.min_gap and masses.size == 0:
            termination = "gap"
            break

        if gap >= params.min_gap:
            atoms_x = np.vstack([atoms_x, cx])
            atoms_v = np.vstack([atoms_v, cv])
            masses = np.append(masses, 0.0)
            feats = np.column_stack([feats, model.features(cx, cv)])

        # (2) nonnegative weight refit by coordinate descent
        G_mat = feats.T @ feats
        h = feats.T @ data
        for _ in range(params.max_coord_descent):
            delta = 0.0
            for k in range(masses.size):
                old = masses[k]
                resid_k = h[k] - alpha - (G_mat[k] @ masses - G_mat[k, k] * old)
                new = max(0.0, resid_k / G_mat[k, k])
                masses[k] = new
                delta = max(delta, abs(new - old))
            if delta < 1e-12:
                break

        keep = masses > 1e-12
        if not np.all(keep):
            atoms_x, atoms_v = atoms_x[keep], atoms_v[keep]
            masses = masses[keep]
            feats = feats[:, keep]

        # (3) joint local descent over positions, velocities and masses
        step = 0.05
        for _ in range(15):
            if masses.size == 0:
                break
            r = model_vec() - data
            gx = np.zeros_like(atoms_x)
            gv = np.zeros_like(atoms_v)
            gm = np.zeros_like(masses)
            for k in range(masses.size):
                jac = model.features_grad(atoms_x[k], atoms_v[k])
                g = jac.T @ r
                check_finite(g, "atom gradient")
                gx[k] = masses[k] * g[:2]
                gv[k] = masses[k] * g[2:]
                gm[k] = float(feats[:, k] @ r) + alpha
            cur = objective()
            improved = False
            while step >= 1e-12:
                tx = atoms_x - step * gx
                tv = atoms_v - step * gv
                tm = np.maximum(masses - step * gm, 0.0)
                for k in range(masses.size):
                    tx[k], tv[k] = _project_phase(tx[k], tv[k], T)
                tf = np.column_stack(
                    [model.features(tx[k], tv[k]) for k in range(masses.size)]
                )
                rr = tf @ tm - data
                tobj = 0.5 * float(rr @ rr) + alpha * float(tm.sum())
                if tobj < cur - 1e-14:
                    atoms_x, atoms_v, masses, feats = tx, tv, tm, tf
                    improved = True
                    step *= 1.3
                    break
                step *= 0.5
            if not improved:
                break

        obj = objective()
        progress = trace[-1] - obj
        trace.append(obj)
        if gap < params.min_gap:
            termination = "gap"
            break
        if progress < params.min_progress:
            termination = "progress"
            break

    return AtomicSolution(
        positions=atoms_x,
        velocities=atoms_v,
        masses=masses,
        objective=trace[-1],
        termination=termination,
        objective_trace=np.asarray(trace),
    )
