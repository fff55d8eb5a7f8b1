"""Assembly of the discretized projection and observation operators.

Projection matrices (plain projection along a direction, and 1-D motion
of position-velocity variables) are built by exact polygon clipping:
each matrix entry is the relative area of intersection between a grid
cell and a strip between two consecutive bin boundaries.  Exact clipping
keeps every column an exact partition of unity, which the mass-related
tests rely on.

The observation operator is a truncated Fourier series sampled at the
cell centers, with real and imaginary parts stacked into real rows.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .geometry import GridSpec
from .measures import DiscreteMeasure

__all__ = [
    "ProjectionMatrix",
    "ObservationMatrix",
    "assemble_radon_matrix",
    "assemble_move_matrix",
    "assemble_fourier_matrix",
    "fourier_frequencies",
    "stack_complex",
    "rasterize",
]


@dataclass(frozen=True)
class ProjectionMatrix:
    """Dense (M, M^2) matrix mapping cell masses to bin masses.

    Every column sums to one: a cell's area is fully distributed over the
    bins its projection covers.
    """

    matrix: np.ndarray
    grid: GridSpec
    bins: GridSpec
    tag: tuple

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (self.bins.M, self.grid.n_cells):
            raise ValueError("matrix shape inconsistent with grid/bins")
        object.__setattr__(self, "matrix", m)


@dataclass(frozen=True)
class ObservationMatrix:
    """Stacked real/imaginary Fourier features of the cell-center atoms.

    Row layout: all real parts in frequency order, then all imaginary
    parts; ``2 * (2*cutoff+1)^d`` rows in total.
    """

    matrix: np.ndarray
    frequencies: np.ndarray
    grid: GridSpec
    time: float

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        f = np.asarray(self.frequencies)
        if m.shape != (2 * f.shape[0], self.grid.n_cells):
            raise ValueError("observation matrix shape inconsistent")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "frequencies", f)


def fourier_frequencies(cutoff: int, d: int = 2) -> np.ndarray:
    """Integer frequencies with max-norm at most ``cutoff``, fixed order.

    The order is ``itertools.product(range(-cutoff, cutoff+1), repeat=d)``
    (first coordinate slowest); all observation stacking uses it.
    """
    if cutoff < 0:
        raise ValueError("cutoff must be >= 0")
    return np.array(
        list(itertools.product(range(-cutoff, cutoff + 1), repeat=d)), dtype=float
    )


def stack_complex(values: np.ndarray) -> np.ndarray:
    """Stack a complex feature vector as [Re..., Im...] real rows."""
    values = np.asarray(values)
    return np.concatenate([values.real, values.imag])


def _clip_halfplane(poly, normal, offset, keep_leq):
    """Sutherland-Hodgman clip of a convex polygon by one half-plane.

    Keeps ``normal . p <= offset`` (or >= when ``keep_leq`` is false).
    ``poly`` is a list of (x, y) tuples in boundary order.
    """
    if not poly:
        return poly
    nx, ny = normal
    out = []
    n = len(poly)
    for i in range(n):
        sx, sy = poly[i]
        ex, ey = poly[(i + 1) % n]
        sv = nx * sx + ny * sy - offset
        ev = nx * ex + ny * ey - offset
        if not keep_leq:
            sv, ev = -sv, -ev
        s_in = sv <= 0.0
        e_in = ev <= 0.0
        if s_in:
            out.append((sx, sy))
        if s_in != e_in:
            t = sv / (sv - ev)
            out.append((sx + t * (ex - sx), sy + t * (ey - sy)))
    return out


def _poly_area(poly) -> float:
    if len(poly) < 3:
        return 0.0
    a = 0.0
    n = len(poly)
    for i in range(n):
        x0, y0 = poly[i]
        x1, y1 = poly[(i + 1) % n]
        a += x0 * y1 - x1 * y0
    return 0.5 * abs(a)


def _assemble_strip_matrix(grid: GridSpec, functional, bins: GridSpec, tag):
    """Projection matrix for the linear functional ``p -> functional . p``.

    Entry (i, j) is the area fraction of cell j lying in the strip
    ``breaks[i] <= functional . p <= breaks[i+1]``, computed by clipping
    the cell quadrilateral against the two strip half-planes.
    """
    if grid.dim != 2:
        raise ValueError("projection matrices are assembled from 2-D grids")
    c = np.asarray(functional, dtype=float)
    breaks = bins.breakpoints()
    M = bins.M

    verts = grid.cell_vertices()  # (n_cells, 4, 2)
    proj = verts @ c  # (n_cells, 4)
    pmin = proj.min(axis=1)
    pmax = proj.max(axis=1)

    tol = 1e-9 * max(1.0, abs(breaks[-1] - breaks[0]))
    if pmin.min() < breaks[0] - tol or pmax.max() > breaks[-1] + tol:
        raise ValueError("bins do not cover the image interval of the grid domain")

    cell_area = grid.cell_volume
    out = np.zeros((M, grid.n_cells))
    # 0-based index of the first bin whose upper boundary exceeds pmin
    first = np.clip(np.searchsorted(breaks, pmin, side="right") - 1, 0, M - 1)
    last = np.clip(np.searchsorted(breaks, pmax, side="left") - 1, 0, M - 1)
    cx, cy = float(c[0]), float(c[1])

    for j in range(grid.n_cells):
        i0, i1 = first[j], last[j]
        if i0 == i1:
            out[i0, j] = 1.0
            continue
        poly0 = [(float(x), float(y)) for x, y in verts[j]]
        for i in range(i0, i1 + 1):
            poly = poly0
            if i > i0:
                poly = _clip_halfplane(poly, (cx, cy), breaks[i], keep_leq=False)
            if i < i1:
                poly = _clip_halfplane(poly, (cx, cy), breaks[i + 1], keep_leq=True)
            out[i, j] = _poly_area(poly) / cell_area
    return ProjectionMatrix(out, grid, bins, tag)


def assemble_radon_matrix(grid: GridSpec, theta, bins: GridSpec) -> ProjectionMatrix:
    """Discrete projection along the unit direction ``theta``.

    ``bins`` must cover the image interval of the grid domain under
    ``x -> theta . x``; otherwise assembly is rejected.
    """
    theta = np.asarray(theta, dtype=float)
    return _assemble_strip_matrix(grid, theta, bins, ("radon", tuple(theta)))


def assemble_move_matrix(grid: GridSpec, t: float, bins: GridSpec) -> ProjectionMatrix:
    """Discrete 1-D motion ``(y, w) -> y + t w`` of a phase grid.

    Equivalent to projecting along ``(1, t)/sqrt(1+t^2)`` with bin
    boundaries rescaled by ``1/sqrt(1+t^2)``; the unnormalized functional
    ``(1, t)`` against the original bins realizes exactly that.
    """
    return _assemble_strip_matrix(grid, np.array([1.0, float(t)]), bins, ("move", t))


def assemble_fourier_matrix(
    grid: GridSpec, cutoff: int, time: float = 0.0
) -> ObservationMatrix:
    """Truncated Fourier observation applied to cell-center Dirac atoms.

    Column j holds the stacked real and imaginary parts of
    ``exp(-i 2 pi c_j . xi)`` over all frequencies with max-norm <= cutoff,
    ``c_j`` the center of cell j.
    """
    freqs = fourier_frequencies(cutoff, grid.dim)
    phases = 2.0 * np.pi * (grid.centers() @ freqs.T)  # (n_cells, F)
    block = np.exp(-1j * phases).T  # (F, n_cells)
    matrix = np.vstack([block.real, block.imag])
    return ObservationMatrix(matrix, freqs, grid, time)


def rasterize(nu: DiscreteMeasure, grid: GridSpec) -> np.ndarray:
    """Cell-mass vector of a discrete measure: each atom's mass goes to
    the cell containing it (boundary ties to the lower cell index).

    Atoms outside the grid domain raise ValueError.
    """
    out = np.zeros(grid.n_cells)
    if nu.n_atoms == 0:
        return out
    idx = grid.locate(nu.points)
    np.add.at(out, idx, nu.weights)
    return out
