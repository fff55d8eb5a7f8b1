"""Experiment machinery: operator setup, instance pipeline, result files.

Directions are placed as equidistributed points on the right half of the
unit circle; auxiliary snapshot times are placed by the same rule after
mapping times to circle points via ``t -> (1, t)/sqrt(1+t^2)`` (greedy
splitting of the largest angular gaps).  All matrices for one
(directions, times, resolution, cutoff) signature are assembled once and
reused across instances; a per-process cache keeps them warm for worker
pools.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .adcg import AdcgParams, FourierModel, solve_adcg
from .datagen import add_noise, measure
from .discretize import (
    assemble_fourier_matrix,
    assemble_move_matrix,
    assemble_radon_matrix,
)
from .geometry import (
    GridSpec,
    TimeGrid,
    bin_interval,
    make_grid,
    projected_phase_domain,
    snapshot_domain,
)
from .measures import DiscreteMeasure, ParticleConfig, dynamic_separation, move
from .metrics import cluster_extract, match_configs, unbalanced_wasserstein
from .solver import ReducedProblem, solve_reduced, solve_static

__all__ = [
    "half_circle_directions",
    "extra_times",
    "ProblemSetup",
    "build_setup",
    "build_reduced_problem",
    "reconstruct_instance",
    "run_reconstruction",
    "config_hash",
    "RESULT_FIELDS",
    "save_matrix_cache",
    "load_matrix_cache",
]

RESULT_FIELDS = [
    "instance_id",
    "method",
    "delta",
    "uw",
    "matched",
    "runtime_ms",
    "config_hash",
    "n_particles",
    "dyn_separation",
    "solver_iterations",
    "consistency_residual",
    "n_clusters",
]


def half_circle_directions(n: int) -> np.ndarray:
    """n unit vectors equidistributed on the right half circle."""
    if n < 1:
        raise ValueError("need at least one direction")
    angles = np.pi * (np.arange(n) / n - 0.5)
    return np.column_stack([np.cos(angles), np.sin(angles)])


def extra_times(measurement_times, n: int) -> tuple:
    """n auxiliary times placed like the directions, in angle space.

    Each time maps to the angle of ``(1, t)/sqrt(1+t^2)``; new times
    split the largest angular gaps (boundary gaps towards +-pi/2
    included) at their midpoints, greedily and deterministically.
    """
    if n == 0:
        return ()
    angles = sorted(math.atan(float(t)) for t in measurement_times)
    angles = [-math.pi / 2] + angles + [math.pi / 2]
    new = []
    for _ in range(n):
        widths = [angles[i + 1] - angles[i] for i in range(len(angles) - 1)]
        k = int(np.argmax(widths))
        mid = 0.5 * (angles[k] + angles[k + 1])
        new.append(mid)
        angles.insert(k + 1, mid)
    return tuple(sorted(math.tan(a) for a in new))


@dataclass(frozen=True)
class ProblemSetup:
    """All grids and matrices for one operator signature."""

    time_grid: TimeGrid
    thetas: np.ndarray
    M: int
    cutoff: int
    gamma_grids: tuple
    u_grids: tuple
    move_mats: tuple
    radon_mats: tuple
    obs_mats: tuple
    meas_indices: tuple

    @property
    def sigma_times(self) -> tuple:
        return self.time_grid.all_times

    @property
    def u0_index(self) -> int:
        return self.sigma_times.index(0.0)


_SETUP_CACHE: dict = {}


def _setup_signature(time_grid: TimeGrid, thetas, M: int, cutoff: int):
    th = np.atleast_2d(np.asarray(thetas, dtype=float))
    return (
        time_grid.measurement_times,
        time_grid.extra_times,
        th.tobytes(),
        th.shape,
        int(M),
        int(cutoff),
    )


def build_setup(
    time_grid: TimeGrid, thetas, M: int, cutoff: int, use_cache: bool = True
) -> ProblemSetup:
    """Assemble (or fetch) all operators for one signature.

    The per-process cache makes repeated instance solves share one set of
    immutable matrices.
    """
    sig = _setup_signature(time_grid, thetas, M, cutoff)
    if use_cache and sig in _SETUP_CACHE:
        return _SETUP_CACHE[sig]

    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    T = time_grid.half_width
    sigma = time_grid.all_times

    gamma_grids = tuple(
        make_grid(projected_phase_domain(th, T), M) for th in thetas
    )
    u_grids = tuple(make_grid(snapshot_domain(t, T), M) for t in sigma)

    move_mats, radon_mats = [], []
    for th, ggrid in zip(thetas, gamma_grids):
        mrow, rrow = [], []
        for t, ugrid in zip(sigma, u_grids):
            bins = make_grid(bin_interval(th, t, T), M)
            mrow.append(assemble_move_matrix(ggrid, t, bins).matrix)
            rrow.append(assemble_radon_matrix(ugrid, th, bins).matrix)
        move_mats.append(tuple(mrow))
        radon_mats.append(tuple(rrow))

    meas_indices = tuple(sigma.index(t) for t in time_grid.measurement_times)
    obs_mats = tuple(
        assemble_fourier_matrix(u_grids[j], cutoff, sigma[j]).matrix
        for j in meas_indices
    )
    setup = ProblemSetup(
        time_grid=time_grid,
        thetas=thetas,
        M=M,
        cutoff=cutoff,
        gamma_grids=gamma_grids,
        u_grids=u_grids,
        move_mats=tuple(move_mats),
        radon_mats=tuple(radon_mats),
        obs_mats=obs_mats,
        meas_indices=meas_indices,
    )
    if use_cache:
        _SETUP_CACHE[sig] = setup
    return setup


def build_reduced_problem(
    setup: ProblemSetup, data, alpha: float, tau: float
) -> ReducedProblem:
    return ReducedProblem(
        move_mats=setup.move_mats,
        radon_mats=setup.radon_mats,
        obs_mats=setup.obs_mats,
        data=tuple(np.asarray(f, dtype=float) for f in data),
        meas_indices=setup.meas_indices,
        alpha=alpha,
        tau=tau,
    )


def config_hash(obj: dict) -> str:
    """Stable short hash of a configuration dictionary."""
    canon = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:12]


def reconstruct_instance(
    setup: ProblemSetup,
    config: ParticleConfig,
    instance_id: int,
    method: str,
    delta: float,
    alpha: float,
    tau: float,
    seed: int,
    run_hash: str,
    solver_opts: dict | None = None,
    adcg_params: AdcgParams | None = None,
    uw_radius: float = 0.05,
    match_radius: float = 0.01,
    w_min: float = 0.1,
) -> dict:
    """Measure, reconstruct, and evaluate one configuration.

    Noise is drawn from a stream seeded by (seed, instance id) so rows do
    not depend on scheduling order.  Evaluation is at the central time:
    the transport divergence compares the raw reconstructed weights
    against the exact snapshot, and the matching verdict compares the
    extracted clusters against the true particles.
    """
    solver_opts = dict(solver_opts or {})
    t_begin = time.perf_counter()
    meas_times = setup.time_grid.measurement_times
    data = measure(config, meas_times, setup.cutoff)
    if delta > 0:
        rng = np.random.default_rng((seed, instance_id))
        data = add_noise(data, delta, rng)

    truth0 = move(config, 0.0)
    iters = 0
    cons_res = 0.0

    if method == "static":
        k0 = meas_times.index(0.0)
        u0, report = solve_static(
            setup.obs_mats[k0], data[k0], alpha, **solver_opts
        )
        iters = report.iterations
        recon = DiscreteMeasure(setup.u_grids[setup.u0_index].centers(), u0)
        clusters = cluster_extract(u0, setup.u_grids[setup.u0_index], w_min)
    elif method == "reduced":
        prob = build_reduced_problem(setup, data, alpha, tau)
        us, _, report = solve_reduced(prob, **solver_opts)
        iters = report.iterations
        cons_res = report.consistency_residual
        u0 = us[setup.u0_index]
        recon = DiscreteMeasure(setup.u_grids[setup.u0_index].centers(), u0)
        clusters = cluster_extract(u0, setup.u_grids[setup.u0_index], w_min)
    elif method == "adcg":
        model = FourierModel(meas_times, setup.cutoff, setup.time_grid.half_width)
        sol = solve_adcg(
            model,
            np.concatenate(data),
            adcg_params or AdcgParams(),
            alpha=alpha,
        )
        iters = len(sol.objective_trace) - 1
        if sol.n_atoms:
            recon = DiscreteMeasure(sol.positions, sol.masses)
            keep = sol.masses >= w_min
            clusters = DiscreteMeasure(sol.positions[keep], sol.masses[keep])
        else:
            recon = DiscreteMeasure(np.empty((0, 2)), np.empty(0))
            clusters = recon
    else:
        raise ValueError(f"unknown method {method!r}")

    uw = unbalanced_wasserstein(truth0, recon, uw_radius).value
    truth_atoms = DiscreteMeasure(truth0.points, truth0.weights)
    matched = match_configs(clusters, truth_atoms, match_radius)
    runtime_ms = (time.perf_counter() - t_begin) * 1000.0

    return {
        "instance_id": instance_id,
        "method": method,
        "delta": delta,
        "uw": uw,
        "matched": matched,
        "runtime_ms": runtime_ms,
        "config_hash": run_hash,
        "n_particles": config.n_particles,
        "dyn_separation": dynamic_separation(config, meas_times),
        "solver_iterations": iters,
        "consistency_residual": cons_res,
        "n_clusters": clusters.n_atoms,
    }


def _row_to_csv(row: dict) -> list:
    return [row[k] for k in RESULT_FIELDS]


def read_done_ids(path) -> set:
    """Instance ids already present in a results file."""
    if not os.path.exists(path):
        return set()
    done = set()
    with open(path) as fh:
        reader = csv.DictReader(fh)
        for rec in reader:
            done.add(int(rec["instance_id"]))
    return done


_WORKER_STATE: dict = {}


def _worker_init(setup_payload, kwargs):
    _WORKER_STATE["setup"] = setup_payload
    _WORKER_STATE["kwargs"] = kwargs


def _worker_run(item):
    idx, cfg_json = item
    cfg = ParticleConfig.from_json(cfg_json)
    return reconstruct_instance(
        _WORKER_STATE["setup"], cfg, idx, **_WORKER_STATE["kwargs"]
    )


def run_reconstruction(
    setup: ProblemSetup,
    configs,
    out_path,
    method: str,
    delta: float,
    alpha: float,
    tau: float,
    seed: int,
    run_config: dict,
    solver_opts: dict | None = None,
    adcg_params: AdcgParams | None = None,
    resume: bool = False,
    workers: int = 1,
    uw_radius: float = 0.05,
    match_radius: float = 0.01,
    w_min: float = 0.1,
    log=None,
):
    """Reconstruct a dataset, appending one evaluated CSV row per instance.

    Rows are written in instance order and flushed to disk immediately;
    with ``resume`` set, instances already present in the file are
    skipped.  Worker processes share the immutable setup.
    """
    run_hash = config_hash(run_config)
    done = read_done_ids(out_path) if resume else set()
    todo = [(i, cfg) for i, cfg in enumerate(configs) if i not in done]

    new_file = not (resume and os.path.exists(out_path))
    fh = open(out_path, "w" if new_file else "a", newline="")
    writer = csv.writer(fh)
    if new_file:
        writer.writerow(RESULT_FIELDS)
        fh.flush()
        os.fsync(fh.fileno())

    kwargs = dict(
        method=method,
        delta=delta,
        alpha=alpha,
        tau=tau,
        seed=seed,
        run_hash=run_hash,
        solver_opts=solver_opts,
        adcg_params=adcg_params,
        uw_radius=uw_radius,
        match_radius=match_radius,
        w_min=w_min,
    )

    rows = []

    def emit(row):
        rows.append(row)
        writer.writerow(_row_to_csv(row))
        fh.flush()
        os.fsync(fh.fileno())
        if log:
            log(row)

    try:
        if workers <= 1:
            for i, cfg in todo:
                emit(reconstruct_instance(setup, cfg, i, **kwargs))
        else:
            items = [(i, cfg.to_json()) for i, cfg in todo]
            with ProcessPoolExecutor(
                max_workers=workers,
                initializer=_worker_init,
                initargs=(setup, kwargs),
            ) as pool:
                # map preserves submission order, so rows stay ordered
                for row in pool.map(_worker_run, items, chunksize=1):
                    emit(row)
    finally:
        fh.close()
    return rows


def save_matrix_cache(path, matrix: np.ndarray, key: dict):
    """Binary matrix file: one JSON header line plus raw rows.

    Payload is little-endian float64 in row-major order.
    """
    arr = np.ascontiguousarray(np.asarray(matrix, dtype="<f8"))
    header = {"key": key, "shape": list(arr.shape), "dtype": "<f8", "order": "C"}
    with open(path, "wb") as fh:
        fh.write((json.dumps(header, sort_keys=True) + "\n").encode())
        fh.write(arr.tobytes())


def load_matrix_cache(path):
    """Read a cached matrix; returns (matrix, key)."""
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode())
        arr = np.frombuffer(fh.read(), dtype=header["dtype"])
    return arr.reshape(header["shape"]).copy(), header["key"]
