"""Degeneracy analysis of particle configurations.

A configuration is degenerate for the reconstruction problem when two
particles share a position at an observation time (a coincidence) or
when a phantom straight trajectory passes through some true particle
position at every observation time with pairwise-distinct particle
indices (a ghost).  Their quantitative relaxations ask how large a
per-time tolerance must be before such an event appears; these minimal
tolerances control the radii in the reconstruction error bounds.

Everything is computed for plain configurations with respect to a time
set, and for projected configurations: either the 1-D projections of a
planar configuration analysed over times, or a single snapshot analysed
over a set of projection directions.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import linprog
from scipy.sparse.csgraph import maximum_bipartite_matching

from .measures import ParticleConfig, joint_radon, move

__all__ = [
    "GhostReport",
    "find_coincidences",
    "find_ghosts",
    "min_coincidence_delta",
    "min_ghost_delta",
    "projected_degeneracy",
]

ASSIGNMENT_CAP = 10**6


@dataclass(frozen=True)
class GhostReport:
    """Degeneracy summary of one (projected) configuration.

    ``ghosts`` holds ``(point, assignment)`` pairs where ``assignment``
    maps each label (time or direction index) to the particle index met
    there.  ``coincidences`` holds ``(label, i, j, distance)`` tuples.
    The two deltas are the minimal tolerances at which a relaxed
    coincidence / ghost first appears (0 when exact ones exist).
    """

    labels: tuple
    ghosts: tuple
    coincidences: tuple
    min_coincidence_delta: float
    min_ghost_delta: float

    def to_json(self) -> str:
        return json.dumps(
            {
                "labels": list(self.labels),
                "ghosts": [
                    {"point": list(pt), "assignment": list(asg)}
                    for pt, asg in self.ghosts
                ],
                "coincidences": [
                    {"label": lab, "i": i, "j": j, "distance": d}
                    for lab, i, j, d in self.coincidences
                ],
                "min_coincidence_delta": self.min_coincidence_delta,
                "min_ghost_delta": self.min_ghost_delta,
            }
        )


def _as_2d(arr) -> np.ndarray:
    a = np.asarray(arr, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    return a


def find_coincidences(positions, velocities, times, delta: float = 0.0):
    """All (t, i, j, distance) with particles i < j within ``delta`` at t.

    ``delta = 0`` returns exact coincidences (distance 0 up to floating
    point).  Positions and velocities may be 1-D or (N, d) arrays.
    """
    x = _as_2d(positions)
    v = _as_2d(velocities)
    n = x.shape[0]
    out = []
    iu, ju = np.triu_indices(n, k=1)
    for t in times:
        pos = x + t * v
        diff = pos[iu] - pos[ju]
        dist = np.sqrt((diff**2).sum(axis=1))
        for i, j, d in zip(iu, ju, dist):
            if d <= delta + 1e-15:
                out.append((float(t), int(i), int(j), float(d)))
    return out


def min_coincidence_delta(positions, velocities, times) -> float:
    """Smallest delta at which a relaxed coincidence appears.

    Equals the minimal pairwise distance over the given times; infinite
    for configurations with fewer than two particles.
    """
    x = _as_2d(positions)
    v = _as_2d(velocities)
    n = x.shape[0]
    if n < 2:
        return math.inf
    iu, ju = np.triu_indices(n, k=1)
    best = math.inf
    for t in times:
        pos = x + t * v
        diff = pos[iu] - pos[ju]
        best = min(best, float(np.sqrt((diff**2).sum(axis=1)).min()))
    return best


def _distinct_representatives(incidence: np.ndarray):
    """A perfect matching of rows (labels) to columns (particles), or None.

    ``incidence[k, i]`` marks that particle i is admissible at label k.
    """
    k, n = incidence.shape
    if k > n:
        return None
    adj = sparse.csr_matrix(incidence)
    if adj.nnz < k:
        return None
    match = maximum_bipartite_matching(adj, perm_type="column")
    if (match < 0).any():
        return None
    return tuple(int(i) for i in match)


def find_ghosts(positions, velocities, times, tol: float = 1e-9):
    """Exact ghost trajectories of a configuration w.r.t. >= 2 times.

    A ghost is a phase point (x, v) outside the configuration whose
    position x + t v coincides with some particle's position at every
    given time, with pairwise-distinct particle indices across times.
    Since two incidence constraints at distinct times already determine
    (x, v) uniquely, all candidates arise as intersections of one
    constraint from each of two times; candidates are then screened for
    full incidence with a distinct-index assignment.

    Returns ``(point, assignment)`` pairs: ``point`` is the (x, v)
    vector of length 2d and ``assignment`` the particle index matched at
    each time (in the order of ``times``).
    """
    x = _as_2d(positions)
    v = _as_2d(velocities)
    times = [float(t) for t in times]
    if len(times) < 2:
        raise ValueError("ghost search needs at least two times")
    if len(set(times)) != len(times):
        raise ValueError("times must be distinct")
    n, d = x.shape

    traj = {t: x + t * v for t in times}
    found = []

    def incident_sets(gx, gv):
        inc = np.zeros((len(times), n), dtype=bool)
        for k, t in enumerate(times):
            pos = gx + t * gv
            dist = np.sqrt(((traj[t] - pos) ** 2).sum(axis=1))
            inc[k] = dist <= tol
        return inc

    for (k1, t1), (k2, t2) in itertools.combinations(enumerate(times), 2):
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                a = traj[t1][i]
                b = traj[t2][j]
                gv = (b - a) / (t2 - t1)
                gx = a - t1 * gv
                # candidate must be a new phase point, not a particle
                phase_dist = np.sqrt(
                    ((x - gx) ** 2).sum(axis=1) + ((v - gv) ** 2).sum(axis=1)
                )
                if phase_dist.min() <= tol:
                    continue
                inc = incident_sets(gx, gv)
                if not inc.any(axis=1).all():
                    continue
                assignment = _distinct_representatives(inc)
                if assignment is None:
                    continue
                point = np.concatenate([gx, gv])
                if any(
                    np.abs(point - np.asarray(p)).max() <= 10 * tol
                    for p, _ in found
                ):
                    continue
                found.append((tuple(point), assignment))
    return found


def _chebyshev_fit(functionals: np.ndarray, targets: np.ndarray) -> float:
    """Minimal uniform deviation of a 2-parameter affine family.

    Solves ``min_z max_k |a_k . z - b_k|`` as a small linear program in
    epigraph form (variables z1, z2, delta).
    """
    K = functionals.shape[0]
    c = np.array([0.0, 0.0, 1.0])
    A_ub = np.zeros((2 * K, 3))
    b_ub = np.zeros(2 * K)
    A_ub[:K, :2] = functionals
    A_ub[:K, 2] = -1.0
    b_ub[:K] = targets
    A_ub[K:, :2] = -functionals
    A_ub[K:, 2] = -1.0
    b_ub[K:] = -targets
    res = linprog(
        c,
        A_ub=A_ub,
        b_ub=b_ub,
        bounds=[(None, None), (None, None), (0, None)],
        method="highs",
    )
    if not res.success:
        raise RuntimeError(f"min-max fit failed: {res.message}")
    return float(res.fun)


def _min_ghost_delta_core(
    functionals: np.ndarray, anchors: np.ndarray, max_assignments: int
) -> float:
    """Minimum over non-constant index assignments of the best uniform fit.

    ``anchors[k, i]`` is the target of functional k for particle i.  An
    assignment picks one particle per functional; constant assignments
    are excluded (they reproduce an existing particle exactly).
    """
    K, n = anchors.shape
    total = n**K - n
    if total > max_assignments:
        raise ValueError(
            f"{total} index assignments exceed the cap {max_assignments}; "
            "reduce the number of labels or particles"
        )
    best = math.inf
    for assignment in itertools.product(range(n), repeat=K):
        first = assignment[0]
        if all(a == first for a in assignment):
            continue
        b = anchors[np.arange(K), assignment]
        val = _chebyshev_fit(functionals, b)
        if val < best:
            best = val
            if best <= 1e-14:
                break
    return best


def min_ghost_delta(
    positions, velocities, times, max_assignments: int = ASSIGNMENT_CAP
) -> float:
    """Smallest tolerance at which a relaxed ghost appears (1-D case).

    For each assignment of one particle per time (not all equal), the
    inner problem minimizes over trajectories (x, v) the worst per-time
    distance to the assigned particle; the outer minimum enumerates
    assignments.  Zero iff an exact ghost exists or a coincidence makes
    some particle trackable by two different index patterns.
    """
    x = _as_2d(positions)
    v = _as_2d(velocities)
    if x.shape[1] != 1:
        raise ValueError("the relaxed ghost tolerance is computed for 1-D configs")
    times = [float(t) for t in times]
    functionals = np.array([[1.0, t] for t in times])
    anchors = np.array([(x[:, 0] + t * v[:, 0]) for t in times])
    if x.shape[0] < 2:
        return math.inf
    return _min_ghost_delta_core(functionals, anchors, max_assignments)


def _find_direction_ghosts(points: np.ndarray, thetas: np.ndarray, tol: float):
    """Exact ghosts of a planar point set w.r.t. projection directions."""
    n = points.shape[0]
    K = thetas.shape[0]
    if K < 2:
        raise ValueError("ghost search needs at least two directions")
    proj = points @ thetas.T  # (n, K)
    found = []
    for k1, k2 in itertools.combinations(range(K), 2):
        A = np.vstack([thetas[k1], thetas[k2]])
        if abs(np.linalg.det(A)) < 1e-12:
            continue
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                z = np.linalg.solve(A, np.array([proj[i, k1], proj[j, k2]]))
                if np.sqrt(((points - z) ** 2).sum(axis=1)).min() <= tol:
                    continue
                inc = np.abs((thetas @ z)[:, None] - proj.T) <= tol  # (K, n)
                if not inc.any(axis=1).all():
                    continue
                assignment = _distinct_representatives(inc)
                if assignment is None:
                    continue
                if any(
                    np.abs(z - np.asarray(p)).max() <= 10 * tol for p, _ in found
                ):
                    continue
                found.append((tuple(z), assignment))
    return found


def projected_degeneracy(
    config: ParticleConfig,
    directions,
    times,
    mode: str = "time",
    delta: float = 0.0,
    max_assignments: int = ASSIGNMENT_CAP,
):
    """Degeneracy reports for projections of a planar configuration.

    ``mode="time"``: for every direction, the configuration is projected
    to the 1-D phase pair (theta.x, theta.v) and analysed over ``times``;
    one report per direction.

    ``mode="direction"``: for every time, the snapshot at that time is
    analysed with respect to the direction set (projected distances
    ``|theta . (x_i - x_j)|``); one report per time.
    """
    thetas = np.atleast_2d(np.asarray(directions, dtype=float))
    times = [float(t) for t in times]
    reports = []
    if mode == "time":
        for theta in thetas:
            gamma = joint_radon(config, theta)
            y = config.positions @ theta
            w = config.velocities @ theta
            coincidences = find_coincidences(y, w, times, delta=delta)
            ghosts = find_ghosts(y, w, times) if len(times) >= 2 else []
            mcd = min_coincidence_delta(y, w, times)
            mgd = min_ghost_delta(y, w, times, max_assignments)
            reports.append(
                GhostReport(
                    labels=tuple(times),
                    ghosts=tuple(ghosts),
                    coincidences=tuple(coincidences),
                    min_coincidence_delta=mcd,
                    min_ghost_delta=mgd,
                )
            )
        return reports
    if mode != "direction":
        raise ValueError("mode must be 'time' or 'direction'")
    for t in times:
        snap = move(config, t)
        pts = config.positions + t * config.velocities
        proj = pts @ thetas.T  # (n, K)
        coincidences = []
        n = pts.shape[0]
        for k in range(thetas.shape[0]):
            for i in range(n):
                for j in range(i + 1, n):
                    d = abs(proj[i, k] - proj[j, k])
                    if d <= delta + 1e-15:
                        coincidences.append((k, i, j, float(d)))
        ghosts = _find_direction_ghosts(pts, thetas, tol=1e-9)
        if n >= 2:
            mcd = float(
                min(
                    abs(proj[i, k] - proj[j, k])
                    for k in range(thetas.shape[0])
                    for i in range(n)
                    for j in range(i + 1, n)
                )
            )
            mgd = _min_ghost_delta_core(
                thetas, proj.T.copy(), max_assignments
            )
        else:
            mcd = math.inf
            mgd = math.inf
        reports.append(
            GhostReport(
                labels=tuple(range(thetas.shape[0])),
                ghosts=tuple(ghosts),
                coincidences=tuple(coincidences),
                min_coincidence_delta=mcd,
                min_ghost_delta=mgd,
            )
        )
    return reports
