import numpy as np
import pytest

from radontrack.adcg import AdcgParams, FourierModel, solve_adcg, _project_phase
from radontrack.datagen import measure
from radontrack.geometry import phase_domain_contains
from radontrack.measures import ParticleConfig

TIMES = (-1.0, 0.0, 1.0)


def sample_feasible(rng, n):
    xs, vs = [], []
    while len(xs) < n:
        x = rng.uniform(0, 1, 2)
        v = rng.uniform(-0.5, 0.5, 2)
        if phase_domain_contains(x, v, 1.0):
            xs.append(x)
            vs.append(v)
    return ParticleConfig(np.array(xs), np.array(vs), rng.uniform(0.9, 1.1, n))


class TestFourierModel:
    def test_features_match_measurement_stack(self):
        rng = np.random.default_rng(0)
        cfg = sample_feasible(rng, 1)
        model = FourierModel(TIMES, 2)
        psi = model.features(cfg.positions[0], cfg.velocities[0])
        f = np.concatenate(measure(cfg, TIMES, 2)) / cfg.masses[0]
        np.testing.assert_allclose(psi, f, atol=1e-12)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(1)
        model = FourierModel(TIMES, 2)
        h = 1e-6
        for _ in range(10):
            x = rng.uniform(0.2, 0.8, 2)
            v = rng.uniform(-0.2, 0.2, 2)
            jac = model.features_grad(x, v)
            num = np.zeros_like(jac)
            for j in range(4):
                dx = np.zeros(2)
                dv = np.zeros(2)
                if j < 2:
                    dx[j] = h
                else:
                    dv[j - 2] = h
                num[:, j] = (
                    model.features(x + dx, v + dv) - model.features(x - dx, v - dv)
                ) / (2 * h)
            rel = np.abs(jac - num).max() / np.abs(num).max()
            assert rel <= 1e-5

    def test_correlation_grid_matches_features(self):
        rng = np.random.default_rng(2)
        model = FourierModel(TIMES, 2)
        r = rng.normal(size=model.dim)
        X = rng.uniform(0, 1, (4, 2))
        V = rng.uniform(-0.3, 0.3, (5, 2))
        grid = model.correlation_grid(r, X, V)
        for a in range(4):
            for b in range(5):
                want = model.features(X[a], V[b]) @ r
                assert grid[a, b] == pytest.approx(want, abs=1e-10)


class TestProjection:
    def test_inside_unchanged(self):
        x, v = _project_phase([0.5, 0.3], [0.2, -0.1], T=1.0)
        np.testing.assert_allclose(x, [0.5, 0.3])
        np.testing.assert_allclose(v, [0.2, -0.1])

    def test_outside_lands_on_boundary(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            x0 = rng.uniform(-0.5, 1.5, 2)
            v0 = rng.uniform(-1.0, 1.0, 2)
            x, v = _project_phase(x0, v0, T=1.0)
            assert phase_domain_contains(x, v, 1.0) or np.allclose(
                np.clip(x + v, 0, 1), x + v, atol=1e-9
            )
            # projection never moves a feasible point
            if phase_domain_contains(x0, v0, 1.0):
                np.testing.assert_allclose([x, v], [x0, v0])

    def test_projection_is_nearest_point(self):
        # verify against dense sampling of the feasible quadrilateral
        rng = np.random.default_rng(4)
        T = 1.0
        g = np.linspace(0, 1, 201)
        A, B = np.meshgrid(g, g, indexing="ij")  # (a,b) = (x+Tv, x-Tv)
        X = (A + B) / 2
        V = (A - B) / (2 * T)
        pts = np.column_stack([X.ravel(), V.ravel()])
        for _ in range(20):
            p = np.array([rng.uniform(-0.5, 1.5), rng.uniform(-1, 1)])
            x, v = _project_phase([p[0]], [p[1]], T)
            got = np.array([x[0], v[0]])
            dists = np.sqrt(((pts - p) ** 2).sum(axis=1))
            best = pts[np.argmin(dists)]
            assert np.linalg.norm(got - p) <= np.linalg.norm(best - p) + 1e-3


class TestSolveAdcg:
    def test_zero_data_empty_solution(self):
        model = FourierModel(TIMES, 2)
        sol = solve_adcg(model, np.zeros(model.dim), alpha=0.005)
        assert sol.n_atoms == 0
        assert sol.objective == 0.0
        assert sol.termination == "gap"

    def test_single_particle_recovery(self):
        rng = np.random.default_rng(5)
        model = FourierModel(TIMES, 2)
        for _ in range(5):
            cfg = sample_feasible(rng, 1)
            data = np.concatenate(measure(cfg, TIMES, 2))
            sol = solve_adcg(model, data, alpha=0.005)
            assert sol.n_atoms == 1
            err = np.linalg.norm(sol.positions[0] - cfg.positions[0])
            assert err <= 0.01

    def test_objective_monotone(self):
        rng = np.random.default_rng(6)
        model = FourierModel(TIMES, 2)
        cfg = sample_feasible(rng, 3)
        data = np.concatenate(measure(cfg, TIMES, 2))
        sol = solve_adcg(model, data, alpha=0.005)
        assert np.all(np.diff(sol.objective_trace) <= 1e-12)

    def test_atoms_stay_feasible(self):
        rng = np.random.default_rng(7)
        model = FourierModel(TIMES, 2)
        cfg = sample_feasible(rng, 4)
        data = np.concatenate(measure(cfg, TIMES, 2))
        sol = solve_adcg(model, data, alpha=0.005)
        for x, v in zip(sol.positions, sol.velocities):
            fwd = x + 1.0 * v
            bwd = x - 1.0 * v
            assert np.all(fwd >= -1e-9) and np.all(fwd <= 1 + 1e-9)
            assert np.all(bwd >= -1e-9) and np.all(bwd <= 1 + 1e-9)

    def test_two_particle_recovery(self):
        model = FourierModel(TIMES, 2)
        cfg = ParticleConfig(
            [[0.3, 0.3], [0.7, 0.6]],
            [[0.1, 0.0], [-0.1, 0.1]],
            [1.0, 1.0],
        )
        data = np.concatenate(measure(cfg, TIMES, 2))
        sol = solve_adcg(model, data, alpha=0.005)
        # apply the detection threshold: tiny residual atoms are expected
        keep = sol.masses >= 0.1
        assert keep.sum() == 2
        got = sol.positions[keep]
        got = got[np.argsort(got[:, 0])]
        np.testing.assert_allclose(got, cfg.positions, atol=0.01)

    def test_rejects_wrong_data_shape(self):
        model = FourierModel(TIMES, 2)
        with pytest.raises(ValueError):
            solve_adcg(model, np.zeros(model.dim + 1))
