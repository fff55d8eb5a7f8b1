"""Supports of the reconstruction variables and tailored grids on them.

Particles live in the unit box ``Omega = [0,1]^d`` and must stay inside it
at every measurement time.  Given the half-width ``T`` of the (centred)
measurement times, the feasible phase-space region is

    ``{(x, v) : x + t*v in [0,1]^d for all |t| <= T}``,

and every reconstruction variable is supported on an explicitly computable
image of this region: a parallelogram for the projected position-velocity
variables, a box for the snapshots, and an interval for the 1-D bins that
couple the two.  ``make_grid`` turns any of these domains into a regular
grid by an affine map of the unit square / unit interval, so all grids
share one cell geometry and one (row-major) ordering convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "TimeGrid",
    "Parallelogram",
    "Box",
    "GridSpec",
    "phase_domain_contains",
    "projected_phase_domain",
    "snapshot_domain",
    "bin_interval",
    "make_grid",
    "unit_direction",
]

_UNIT_TOL = 1e-12


def unit_direction(theta) -> np.ndarray:
    """Validate and return ``theta`` as a unit vector (norm within 1e-12)."""
    theta = np.asarray(theta, dtype=float)
    if theta.ndim != 1:
        raise ValueError("direction must be a 1-D vector")
    nrm = np.linalg.norm(theta)
    if abs(nrm - 1.0) > _UNIT_TOL:
        raise ValueError(f"direction must have unit norm, got |theta| = {nrm!r}")
    return theta


@dataclass(frozen=True)
class TimeGrid:
    """Measurement times (centred around 0) plus optional auxiliary times.

    ``measurement_times`` is the set of observation instants; it must be
    sorted and symmetric in the sense min = -T, max = +T where
    ``T = max |t|``.  ``extra_times`` are additional snapshot instants
    carrying no data; they may lie outside ``[-T, T]``.
    """

    measurement_times: tuple
    extra_times: tuple = field(default=())

    def __post_init__(self):
        meas = tuple(float(t) for t in self.measurement_times)
        extra = tuple(float(t) for t in self.extra_times)
        if not meas:
            raise ValueError("measurement_times must be nonempty")
        if list(meas) != sorted(meas):
            raise ValueError("measurement_times must be sorted")
        T = max(abs(t) for t in meas)
        if not (math.isclose(meas[0], -T) and math.isclose(meas[-1], T)):
            raise ValueError("measurement_times must be centred: min = -T, max = +T")
        if set(meas) & set(extra):
            raise ValueError("extra_times must be disjoint from measurement_times")
        object.__setattr__(self, "measurement_times", meas)
        object.__setattr__(self, "extra_times", extra)

    @classmethod
    def from_k(cls, k: int, extra_times=()) -> "TimeGrid":
        """Times ``{j/k : j = -k..k}``, i.e. 2k+1 instants on [-1, 1]."""
        if k < 1:
            raise ValueError("k must be >= 1")
        return cls(tuple(j / k for j in range(-k, k + 1)), tuple(extra_times))

    @property
    def half_width(self) -> float:
        return max(abs(t) for t in self.measurement_times)

    @property
    def all_times(self) -> tuple:
        """Measurement and extra times, sorted ascending."""
        return tuple(sorted(set(self.measurement_times) | set(self.extra_times)))


@dataclass(frozen=True)
class Parallelogram:
    """Support of a projected position-velocity variable.

    Vertices are stored in the closed-form order produced by
    ``projected_phase_domain``: the two points on the position axis first,
    then the top and bottom midline points.
    """

    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.shape != (4, 2):
            raise ValueError("a parallelogram needs four 2-D vertices")
        object.__setattr__(self, "vertices", v)
        a, b, c, d = v
        # opposite-edge midpoints coincide: (a+b)/2 == (c+d)/2
        if not np.allclose((a + b) / 2, (c + d) / 2, atol=1e-9):
            raise ValueError("vertices do not form a parallelogram (midpoint test)")

    @property
    def cyclic_vertices(self) -> np.ndarray:
        """Vertices in cyclic (boundary) order a, c, b, d."""
        v = self.vertices
        return v[[0, 2, 1, 3]]

    @property
    def area(self) -> float:
        return shoelace_area(self.cyclic_vertices)

    def contains(self, points, tol: float = 1e-9):
        """Membership test via the affine pull-back to the unit square."""
        grid = make_grid(self, 1)
        ref = grid.to_reference(points)
        return np.all((ref >= -tol) & (ref <= 1 + tol), axis=-1)


@dataclass(frozen=True)
class Box:
    """Axis-aligned product of closed intervals in R^d."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("lo and hi must be 1-D arrays of equal length")
        if np.any(lo > hi):
            raise ValueError("box needs lo <= hi per axis")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return self.lo.size


def shoelace_area(vertices) -> float:
    """Area of a simple polygon given by vertices in boundary order."""
    v = np.asarray(vertices, dtype=float)
    x, y = v[:, 0], v[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def phase_domain_contains(position, velocity, T: float):
    """Whether straight trajectories stay inside [0,1]^d for |t| <= T.

    Containment is checked at t = -T and t = +T only; since [0,1]^d is
    convex and trajectories are straight lines, the endpoints decide
    membership for every intermediate time.

    Accepts single points (shape ``(d,)``) or stacks (shape ``(n, d)``);
    returns a bool or a bool array accordingly.
    """
    if T <= 0:
        raise ValueError("T must be positive")
    p = np.asarray(position, dtype=float)
    v = np.asarray(velocity, dtype=float)
    fwd = p + T * v
    bwd = p - T * v
    ok = (
        np.all((fwd >= 0.0) & (fwd <= 1.0), axis=-1)
        & np.all((bwd >= 0.0) & (bwd <= 1.0), axis=-1)
    )
    return bool(ok) if np.isscalar(ok) or ok.ndim == 0 else ok


def projected_phase_domain(theta, T: float) -> Parallelogram:
    """Exact support of the position-velocity variable for direction theta.

    With ``s+`` / ``s-`` the sums of positive / negative components of
    theta, the support is the parallelogram with vertices

        (s-, 0), (s+, 0),
        ((s+ + s-)/2, (s+ - s-)/(2T)), ((s+ + s-)/2, (s- - s+)/(2T)).
    """
    theta = unit_direction(theta)
    if T <= 0:
        raise ValueError("T must be positive")
    s_plus = float(np.sum(theta[theta > 0]))
    s_minus = float(np.sum(theta[theta < 0]))
    mid = 0.5 * (s_plus + s_minus)
    h = (s_plus - s_minus) / (2.0 * T)
    verts = np.array([[s_minus, 0.0], [s_plus, 0.0], [mid, h], [mid, -h]])
    return Parallelogram(verts)


def snapshot_domain(t: float, T: float, d: int = 2) -> Box:
    """Exact support of the snapshot at time t.

    The unit box for |t| <= T; for later/earlier times the support grows
    symmetrically about its centre to ``[1/2 - |t|/(2T), 1/2 + |t|/(2T)]^d``.
    """
    if T <= 0:
        raise ValueError("T must be positive")
    if abs(t) <= T:
        lo, hi = 0.0, 1.0
    else:
        half = abs(t) / (2.0 * T)
        lo, hi = 0.5 - half, 0.5 + half
    return Box(np.full(d, lo), np.full(d, hi))


def bin_interval(theta, t: float, T: float) -> tuple:
    """Range of projected positions at time t along direction theta.

    The projected support is the image of the phase parallelogram under
    the linear functional (y, w) -> y + t*w, hence exactly the interval
    spanned by the images of the four vertices.
    """
    para = projected_phase_domain(theta, T)
    vals = para.vertices @ np.array([1.0, float(t)])
    return float(vals.min()), float(vals.max())


@dataclass(frozen=True)
class GridSpec:
    """Regular grid as an affine image of the unit square or interval.

    The map is ``z -> A @ z + b`` on ``[0,1]^k`` with ``M`` cells per axis.
    All cells are congruent translates with volume ``|det A| / M^k``.
    Cells are ordered row-major over the reference square: the first axis
    varies fastest, so cell (ix, iy) has flat index ``iy * M + ix``.
    """

    A: np.ndarray
    b: np.ndarray
    M: int

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or b.shape != (A.shape[0],):
            raise ValueError("A must be (k,k) and b (k,)")
        if self.M < 1:
            raise ValueError("M must be >= 1")
        if abs(np.linalg.det(A)) < 1e-300:
            raise ValueError("degenerate grid domain (zero area/length)")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    @property
    def n_cells(self) -> int:
        return self.M ** self.dim

    @property
    def cell_volume(self) -> float:
        return abs(np.linalg.det(self.A)) / self.n_cells

    @property
    def domain_volume(self) -> float:
        return abs(np.linalg.det(self.A))

    def _reference_centers(self) -> np.ndarray:
        M = self.M
        c1 = (np.arange(M) + 0.5) / M
        if self.dim == 1:
            return c1[:, None]
        ix, iy = np.meshgrid(c1, c1, indexing="xy")
        return np.column_stack([ix.ravel(), iy.ravel()])

    def centers(self) -> np.ndarray:
        """Cell centers, shape (n_cells, k), in flat cell order."""
        return self._reference_centers() @ self.A.T + self.b

    def breakpoints(self) -> np.ndarray:
        """1-D grids only: the M+1 cell boundaries in world coordinates."""
        if self.dim != 1:
            raise ValueError("breakpoints are defined for 1-D grids")
        z = np.arange(self.M + 1) / self.M
        return z * self.A[0, 0] + self.b[0]

    def cell_vertices(self) -> np.ndarray:
        """2-D grids only: per-cell corner quadruples, shape (n_cells, 4, 2).

        Corners are listed in boundary order of the reference square
        (0,0), (1,0), (1,1), (0,1), scaled to the cell.
        """
        if self.dim != 2:
            raise ValueError("cell_vertices is defined for 2-D grids")
        M = self.M
        i1 = np.arange(M) / M
        ix, iy = np.meshgrid(i1, i1, indexing="xy")
        origin = np.column_stack([ix.ravel(), iy.ravel()])
        corners = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]) / M
        ref = origin[:, None, :] + corners[None, :, :]
        return ref @ self.A.T + self.b

    def domain_vertices(self) -> np.ndarray:
        """Images of the reference-square corners (boundary order)."""
        if self.dim == 1:
            ref = np.array([[0.0], [1.0]])
        else:
            ref = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
        return ref @ self.A.T + self.b

    def to_reference(self, points) -> np.ndarray:
        """Pull world points back to the reference square, shape (n, k)."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        return np.linalg.solve(self.A, (p - self.b).T).T

    def locate(self, points, tol: float = 1e-9) -> np.ndarray:
        """Flat cell indices of world points.

        Points on a shared cell boundary are assigned to the lower cell
        index.  Points outside the domain (beyond ``tol`` in reference
        coordinates) raise ValueError.
        """
        ref = self.to_reference(points)
        if np.any(ref < -tol) or np.any(ref > 1 + tol):
            raise ValueError("point outside grid domain")
        c = np.clip(ref, 0.0, 1.0) * self.M
        idx = np.ceil(c).astype(int) - 1
        idx = np.clip(idx, 0, self.M - 1)
        if self.dim == 1:
            return idx[:, 0]
        return idx[:, 1] * self.M + idx[:, 0]


def make_grid(domain, M: int) -> GridSpec:
    """Grid with M^k congruent cells tiling the given domain.

    ``domain`` may be a Parallelogram, a Box, or an (lo, hi) interval
    tuple.  Degenerate domains (zero area or length) are rejected.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    if isinstance(domain, Parallelogram):
        v = domain.vertices
        A = np.column_stack([v[2] - v[0], v[3] - v[0]])
        b = v[0].copy()
    elif isinstance(domain, Box):
        width = domain.hi - domain.lo
        if np.any(width <= 0):
            raise ValueError("degenerate box domain")
        A = np.diag(width)
        b = domain.lo.copy()
    else:
        lo, hi = float(domain[0]), float(domain[1])
        if hi <= lo:
            raise ValueError("degenerate interval domain")
        A = np.array([[hi - lo]])
        b = np.array([lo])
    return GridSpec(A, b, M)
