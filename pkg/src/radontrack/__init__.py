"""Reconstruction of linearly moving point particles from few snapshots.

The package solves a dimension-reduced convex program coupling per-time
snapshots with per-direction position-velocity projections, plus the
baselines, evaluation metrics, degeneracy analysis and experiment
harness needed to study it numerically.
"""

__version__ = "0.1.0"

from .geometry import (
    Box,
    GridSpec,
    Parallelogram,
    TimeGrid,
    bin_interval,
    make_grid,
    phase_domain_contains,
    projected_phase_domain,
    snapshot_domain,
)
from .measures import (
    DiscreteMeasure,
    ParticleConfig,
    dynamic_separation,
    fourier,
    joint_radon,
    move,
    move1d,
    radon_project,
)
from .discretize import (
    ObservationMatrix,
    ProjectionMatrix,
    assemble_fourier_matrix,
    assemble_move_matrix,
    assemble_radon_matrix,
    fourier_frequencies,
    rasterize,
    stack_complex,
)

__all__ = [
    "Box",
    "GridSpec",
    "Parallelogram",
    "TimeGrid",
    "bin_interval",
    "make_grid",
    "phase_domain_contains",
    "projected_phase_domain",
    "snapshot_domain",
    "DiscreteMeasure",
    "ParticleConfig",
    "dynamic_separation",
    "fourier",
    "joint_radon",
    "move",
    "move1d",
    "radon_project",
    "ObservationMatrix",
    "ProjectionMatrix",
    "assemble_fourier_matrix",
    "assemble_move_matrix",
    "assemble_radon_matrix",
    "fourier_frequencies",
    "rasterize",
    "stack_complex",
]
