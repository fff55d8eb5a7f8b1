"""Exact calculus of finitely supported nonnegative measures.

Pushforwards (projection, joint projection, motion), Fourier transforms
and separation statistics are computed in closed form on the atoms.
These operations are the analytic ground truth that the discretized
operators are tested against.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DiscreteMeasure",
    "ParticleConfig",
    "radon_project",
    "joint_radon",
    "move",
    "move1d",
    "fourier",
    "dynamic_separation",
]

MERGE_TOL = 1e-12


@dataclass(frozen=True)
class DiscreteMeasure:
    """Weighted point list: ``sum_i weights[i] * delta_{points[i]}``.

    Points are stored as an (n, k) array (1-D input is reshaped to a
    column) and weights must be nonnegative.
    """

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2:
            raise ValueError("points must be an (n, k) array")
        w = np.asarray(self.weights, dtype=float).ravel()
        if w.size != pts.shape[0]:
            raise ValueError("points and weights must have equal length")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def n_atoms(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    def merged(self, tol: float = MERGE_TOL) -> "DiscreteMeasure":
        """Canonical form: atoms sorted lexicographically, duplicates summed.

        Atoms whose coordinates agree within ``tol`` (absolute, per
        coordinate) are treated as one.  Pushforwards of distinct atoms
        can collide exactly, so every operation returns merged output.
        """
        if self.n_atoms == 0:
            return self
        order = np.lexsort(self.points.T[::-1])
        pts = self.points[order]
        w = self.weights[order]
        keep_pts = [pts[0]]
        keep_w = [w[0]]
        for p, wi in zip(pts[1:], w[1:]):
            if np.all(np.abs(p - keep_pts[-1]) <= tol):
                keep_w[-1] += wi
            else:
                keep_pts.append(p)
                keep_w.append(wi)
        return DiscreteMeasure(np.array(keep_pts), np.array(keep_w))

    def allclose(self, other: "DiscreteMeasure", tol: float = 1e-12) -> bool:
        """Equality of canonical forms, atom for atom."""
        a = self.merged(tol)
        b = other.merged(tol)
        if a.n_atoms != b.n_atoms or a.dim != b.dim:
            return False
        return bool(
            np.all(np.abs(a.points - b.points) <= tol)
            and np.all(np.abs(a.weights - b.weights) <= 1e-9)
        )


@dataclass(frozen=True)
class ParticleConfig:
    """Finite set of moving particles: (position, velocity, mass) triples."""

    positions: np.ndarray
    velocities: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.positions, dtype=float))
        v = np.atleast_2d(np.asarray(self.velocities, dtype=float))
        m = np.asarray(self.masses, dtype=float).ravel()
        if x.shape != v.shape or x.shape[0] != m.size:
            raise ValueError("positions, velocities, masses must be consistent")
        if np.any(m <= 0):
            raise ValueError("masses must be positive")
        phase = np.hstack([x, v])
        if len(np.unique(phase, axis=0)) != len(phase):
            raise ValueError("(position, velocity) pairs must be pairwise distinct")
        object.__setattr__(self, "positions", x)
        object.__setattr__(self, "velocities", v)
        object.__setattr__(self, "masses", m)

    @property
    def n_particles(self) -> int:
        return self.masses.size

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    @property
    def total_mass(self) -> float:
        return float(self.masses.sum())

    def phase_points(self) -> np.ndarray:
        """Stacked (x, v) rows, shape (N, 2d)."""
        return np.hstack([self.positions, self.velocities])

    def to_json(self) -> str:
        """JSON object with fields positions, velocities, masses (in that order)."""
        return json.dumps(
            {
                "positions": self.positions.tolist(),
                "velocities": self.velocities.tolist(),
                "masses": self.masses.tolist(),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "ParticleConfig":
        obj = json.loads(text)
        return cls(
            np.array(obj["positions"], dtype=float),
            np.array(obj["velocities"], dtype=float),
            np.array(obj["masses"], dtype=float),
        )


def radon_project(nu: DiscreteMeasure, theta) -> DiscreteMeasure:
    """Pushforward under ``x -> theta . x``; colliding images are merged."""
    theta = np.asarray(theta, dtype=float)
    return DiscreteMeasure(nu.points @ theta, nu.weights).merged()


def joint_radon(config: ParticleConfig, theta) -> DiscreteMeasure:
    """Pushforward under ``(x, v) -> (theta . x, theta . v)``."""
    theta = np.asarray(theta, dtype=float)
    pts = np.column_stack([config.positions @ theta, config.velocities @ theta])
    return DiscreteMeasure(pts, config.masses).merged()


def move(config: ParticleConfig, t: float) -> DiscreteMeasure:
    """Snapshot at time t: pushforward under ``(x, v) -> x + t v``."""
    return DiscreteMeasure(
        config.positions + t * config.velocities, config.masses
    ).merged()


def move1d(gamma: DiscreteMeasure, t: float) -> DiscreteMeasure:
    """1-D motion applied to a projected position-velocity measure."""
    if gamma.dim != 2:
        raise ValueError("move1d expects a measure on (position, velocity) pairs")
    pts = gamma.points @ np.array([1.0, float(t)])
    return DiscreteMeasure(pts, gamma.weights).merged()


def fourier(nu: DiscreteMeasure, xi) -> complex | np.ndarray:
    """Fourier transform ``sum_i w_i exp(-i x_i . xi)``.

    ``xi`` may be a single frequency (shape (k,)) or a stack (m, k); the
    result is a complex scalar or an (m,) complex array accordingly.
    """
    xi = np.asarray(xi, dtype=float)
    single = xi.ndim == 1
    xi2 = np.atleast_2d(xi)
    if xi2.shape[1] != nu.dim:
        raise ValueError("frequency dimension mismatch")
    phases = nu.points @ xi2.T
    vals = (np.exp(-1j * phases) * nu.weights[:, None]).sum(axis=0)
    return complex(vals[0]) if single else vals


def dynamic_separation(config: ParticleConfig, times) -> float:
    """Minimal pairwise particle distance over the given times.

    Returns ``inf`` for configurations with fewer than two particles.
    """
    if config.n_particles < 2:
        return math.inf
    best = math.inf
    iu = np.triu_indices(config.n_particles, k=1)
    for t in times:
        pos = config.positions + t * config.velocities
        diff = pos[iu[0]] - pos[iu[1]]
        best = min(best, float(np.sqrt((diff**2).sum(axis=1)).min()))
    return best
