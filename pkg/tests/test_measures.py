import math

import numpy as np
import pytest

from radontrack.measures import (
    DiscreteMeasure,
    ParticleConfig,
    dynamic_separation,
    fourier,
    joint_radon,
    move,
    move1d,
    radon_project,
)

SQ2 = math.sqrt(2.0)


def random_config(rng, n=None, d=2):
    n = n or int(rng.integers(2, 8))
    return ParticleConfig(
        rng.uniform(0, 1, size=(n, d)),
        rng.uniform(-0.5, 0.5, size=(n, d)),
        rng.uniform(0.5, 1.5, size=n),
    )


class TestDiscreteMeasure:
    def test_rejects_negative_weights(self):
        with pytest.raises(ValueError):
            DiscreteMeasure([[0.0]], [-1.0])

    def test_merge_sums_weights(self):
        nu = DiscreteMeasure([[0.1, 0.2], [0.1, 0.2], [0.3, 0.3]], [1.0, 2.0, 3.0])
        m = nu.merged()
        assert m.n_atoms == 2
        assert m.total_mass == pytest.approx(6.0)

    def test_merge_tolerance(self):
        nu = DiscreteMeasure([[0.0], [1e-13]], [1.0, 1.0])
        assert nu.merged().n_atoms == 1
        nu2 = DiscreteMeasure([[0.0], [1e-6]], [1.0, 1.0])
        assert nu2.merged().n_atoms == 2


class TestParticleConfig:
    def test_rejects_nonpositive_mass(self):
        with pytest.raises(ValueError):
            ParticleConfig([[0.5, 0.5]], [[0.0, 0.0]], [0.0])

    def test_rejects_duplicate_phase_points(self):
        with pytest.raises(ValueError):
            ParticleConfig(
                [[0.5, 0.5], [0.5, 0.5]], [[0.1, 0.0], [0.1, 0.0]], [1.0, 1.0]
            )

    def test_json_roundtrip(self):
        rng = np.random.default_rng(0)
        cfg = random_config(rng)
        back = ParticleConfig.from_json(cfg.to_json())
        np.testing.assert_array_equal(back.positions, cfg.positions)
        np.testing.assert_array_equal(back.velocities, cfg.velocities)
        np.testing.assert_array_equal(back.masses, cfg.masses)


class TestRadonProject:
    def test_coordinate_projection(self):
        nu = DiscreteMeasure([[0.3, 0.7]], [1.0])
        out = radon_project(nu, (1.0, 0.0))
        np.testing.assert_allclose(out.points, [[0.3]])
        np.testing.assert_allclose(out.weights, [1.0])

    def test_dot_product(self):
        nu = DiscreteMeasure([[0.5, 0.5]], [2.0])
        out = radon_project(nu, (1 / SQ2, 1 / SQ2))
        assert out.points[0, 0] == pytest.approx(0.70710678, abs=1e-8)
        assert out.weights[0] == 2.0

    def test_collision_merges(self):
        nu = DiscreteMeasure([[0.0, 0.0], [1.0, -1.0]], [1.0, 1.0])
        out = radon_project(nu, (1 / SQ2, 1 / SQ2))
        assert out.n_atoms == 1
        assert out.points[0, 0] == pytest.approx(0.0, abs=1e-12)
        assert out.weights[0] == pytest.approx(2.0)


class TestJointRadon:
    def test_axis_projections(self):
        cfg = ParticleConfig([[0.2, 0.4]], [[0.1, -0.1]], [1.0])
        out = joint_radon(cfg, (1.0, 0.0))
        np.testing.assert_allclose(out.points, [[0.2, 0.1]])
        out = joint_radon(cfg, (0.0, 1.0))
        np.testing.assert_allclose(out.points, [[0.4, -0.1]])

    def test_equal_projections_merge(self):
        cfg = ParticleConfig(
            [[0.2, 0.1], [0.2, 0.9]], [[0.1, 0.3], [0.1, -0.2]], [1.0, 2.0]
        )
        out = joint_radon(cfg, (1.0, 0.0))
        assert out.n_atoms == 1
        assert out.weights[0] == pytest.approx(3.0)


class TestMove:
    def test_snapshot(self):
        cfg = ParticleConfig([[0.2, 0.0]], [[0.1, 0.0]], [2.0])
        out = move(cfg, 1.0)
        np.testing.assert_allclose(out.points, [[0.3, 0.0]])
        assert out.weights[0] == 2.0

    def test_move1d(self):
        gamma = DiscreteMeasure([[0.2, 0.1]], [2.0])
        out = move1d(gamma, 2.0)
        assert out.points[0, 0] == pytest.approx(0.4)
        assert out.weights[0] == 2.0

    def test_move_zero_is_position_marginal(self):
        rng = np.random.default_rng(1)
        cfg = random_config(rng)
        out = move(cfg, 0.0)
        expect = DiscreteMeasure(cfg.positions, cfg.masses).merged()
        assert out.allclose(expect)


class TestFourier:
    def test_atom_at_origin(self):
        nu = DiscreteMeasure([[0.0]], [1.0])
        assert fourier(nu, np.array([3.7])) == pytest.approx(1.0 + 0.0j)

    def test_zero_frequency_gives_mass(self):
        rng = np.random.default_rng(2)
        nu = DiscreteMeasure(rng.uniform(size=(5, 2)), rng.uniform(0.1, 1, 5))
        assert fourier(nu, np.zeros(2)) == pytest.approx(nu.total_mass)

    def test_slice_identity(self):
        # projection then 1-D transform equals the 2-D transform on the ray
        rng = np.random.default_rng(3)
        for _ in range(1000):
            n = int(rng.integers(1, 6))
            nu = DiscreteMeasure(rng.uniform(-1, 1, (n, 2)), rng.uniform(0.1, 1, n))
            th = rng.normal(size=2)
            th /= np.linalg.norm(th)
            sigma = rng.uniform(-20, 20)
            lhs = fourier(radon_project(nu, th), np.array([sigma]))
            rhs = fourier(nu, sigma * th)
            assert abs(lhs - rhs) <= 1e-12


class TestMassPreservation:
    def test_all_pushforwards(self):
        rng = np.random.default_rng(4)
        for _ in range(1000):
            cfg = random_config(rng)
            th = rng.normal(size=2)
            th /= np.linalg.norm(th)
            t = rng.uniform(-2, 2)
            total = cfg.total_mass
            assert joint_radon(cfg, th).total_mass == pytest.approx(total, abs=1e-12)
            assert move(cfg, t).total_mass == pytest.approx(total, abs=1e-12)
            nu = move(cfg, t)
            assert radon_project(nu, th).total_mass == pytest.approx(total, abs=1e-12)


class TestCommutation:
    def test_project_then_move_equals_move_then_project(self):
        rng = np.random.default_rng(5)
        for _ in range(1000):
            cfg = random_config(rng)
            th = rng.normal(size=2)
            th /= np.linalg.norm(th)
            t = rng.uniform(-2, 2)
            lhs = radon_project(move(cfg, t), th)
            rhs = move1d(joint_radon(cfg, th), t)
            assert lhs.allclose(rhs, tol=1e-12)


class TestMoveAsRescaledProjection:
    def test_identity(self):
        # 1-D motion equals projection along (1,t)/sqrt(1+t^2) followed by
        # scaling with sqrt(1+t^2)
        rng = np.random.default_rng(6)
        for _ in range(500):
            n = int(rng.integers(1, 6))
            gamma = DiscreteMeasure(
                rng.uniform(-1, 1, (n, 2)), rng.uniform(0.1, 1, n)
            )
            t = rng.uniform(-2, 2)
            scale = math.sqrt(1 + t * t)
            theta_t = np.array([1.0, t]) / scale
            direct = move1d(gamma, t)
            via_proj = radon_project(gamma, theta_t)
            rescaled = DiscreteMeasure(scale * via_proj.points, via_proj.weights)
            assert direct.allclose(rescaled, tol=1e-12)


class TestDynamicSeparation:
    def test_stationary_pair(self):
        cfg = ParticleConfig(
            [[0.4, 0.5], [0.5, 0.5]], [[0.0, 0.0], [0.0, 0.0]], [1.0, 1.0]
        )
        assert dynamic_separation(cfg, [-1, 0, 1]) == pytest.approx(0.1)

    def test_crossing_pair(self):
        # 1-D particles crossing at t=1: distances 0.4, 0.2, 0.0
        cfg = ParticleConfig(
            [[0.0], [0.2]], [[0.1], [-0.1]], [1.0, 1.0]
        )
        assert dynamic_separation(cfg, [-1, 0, 1]) == pytest.approx(0.0, abs=1e-15)

    def test_permutation_invariant(self):
        rng = np.random.default_rng(7)
        cfg = random_config(rng, n=5)
        perm = rng.permutation(5)
        cfg2 = ParticleConfig(
            cfg.positions[perm], cfg.velocities[perm], cfg.masses[perm]
        )
        times = [-1, -0.5, 0, 0.5, 1]
        assert dynamic_separation(cfg, times) == pytest.approx(
            dynamic_separation(cfg2, times)
        )

    def test_single_particle_infinite(self):
        cfg = ParticleConfig([[0.5, 0.5]], [[0.0, 0.0]], [1.0])
        assert dynamic_separation(cfg, [0.0]) == math.inf
