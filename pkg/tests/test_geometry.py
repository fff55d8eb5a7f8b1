import math

import numpy as np
import pytest

from radontrack.geometry import (
    Box,
    Parallelogram,
    TimeGrid,
    bin_interval,
    make_grid,
    phase_domain_contains,
    projected_phase_domain,
    shoelace_area,
    snapshot_domain,
    unit_direction,
)

SQ2 = math.sqrt(2.0)


class TestTimeGrid:
    def test_from_k(self):
        tg = TimeGrid.from_k(2)
        assert tg.measurement_times == (-1.0, -0.5, 0.0, 0.5, 1.0)
        assert tg.half_width == 1.0

    def test_rejects_uncentred(self):
        with pytest.raises(ValueError):
            TimeGrid((0.0, 0.5, 1.0))

    def test_rejects_extra_overlap(self):
        with pytest.raises(ValueError):
            TimeGrid((-1.0, 0.0, 1.0), extra_times=(0.0,))

    def test_all_times_sorted(self):
        tg = TimeGrid((-1.0, 0.0, 1.0), extra_times=(2.0, -0.3))
        assert tg.all_times == (-1.0, -0.3, 0.0, 1.0, 2.0)


class TestPhaseDomain:
    def test_stationary_interior(self):
        assert phase_domain_contains((0.5, 0.5), (0.0, 0.0), T=1.0) is True

    def test_exits_right(self):
        assert phase_domain_contains((0.5, 0.5), (0.6, 0.0), T=1.0) is False

    def test_backward_exit(self):
        # reaches (1,1) at t=1 but (-1,-1) at t=-1, hence outside
        assert phase_domain_contains((0.0, 0.0), (1.0, 1.0), T=1.0) is False

    def test_boundary_is_inside(self):
        assert phase_domain_contains((0.5, 0.5), (0.5, 0.5), T=1.0) is True

    def test_vectorized(self):
        p = np.array([[0.5, 0.5], [0.0, 0.0]])
        v = np.array([[0.0, 0.0], [1.0, 1.0]])
        np.testing.assert_array_equal(
            phase_domain_contains(p, v, 1.0), [True, False]
        )


class TestProjectedPhaseDomain:
    def test_axis_direction(self):
        para = projected_phase_domain((1.0, 0.0), T=1.0)
        expect = np.array([[0, 0], [1, 0], [0.5, 0.5], [0.5, -0.5]], dtype=float)
        np.testing.assert_allclose(para.vertices, expect, atol=1e-15)

    def test_negative_axis(self):
        para = projected_phase_domain((0.0, -1.0), T=1.0)
        expect = np.array([[-1, 0], [0, 0], [-0.5, 0.5], [-0.5, -0.5]], dtype=float)
        np.testing.assert_allclose(para.vertices, expect, atol=1e-15)

    def test_diagonal(self):
        para = projected_phase_domain((1 / SQ2, 1 / SQ2), T=2.0)
        expect = np.array(
            [[0, 0], [SQ2, 0], [SQ2 / 2, SQ2 / 4], [SQ2 / 2, -SQ2 / 4]]
        )
        np.testing.assert_allclose(para.vertices, expect, atol=1e-15)

    def test_midpoint_identity_random(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            th = rng.normal(size=2)
            th /= np.linalg.norm(th)
            T = rng.uniform(0.2, 3.0)
            v = projected_phase_domain(th, T).vertices
            np.testing.assert_array_equal((v[0] + v[1]) / 2, (v[2] + v[3]) / 2)

    def test_projection_lands_inside(self):
        # random feasible (x, v) project into the parallelogram
        rng = np.random.default_rng(1)
        T = 1.0
        n = 0
        while n < 10_000:
            x = rng.uniform(0, 1, size=(20_000, 2))
            v = rng.uniform(-0.5, 0.5, size=(20_000, 2))
            keep = phase_domain_contains(x, v, T)
            x, v = x[keep], v[keep]
            n += len(x)
            th = rng.normal(size=2)
            th /= np.linalg.norm(th)
            para = projected_phase_domain(th, T)
            pts = np.column_stack([x @ th, v @ th])
            assert para.contains(pts, tol=1e-9).all()


class TestSnapshotDomain:
    def test_inside_window(self):
        box = snapshot_domain(0.5, T=1.0, d=2)
        np.testing.assert_array_equal(box.lo, [0, 0])
        np.testing.assert_array_equal(box.hi, [1, 1])

    def test_outside_window(self):
        box = snapshot_domain(2.0, T=1.0, d=2)
        np.testing.assert_allclose(box.lo, [-0.5, -0.5])
        np.testing.assert_allclose(box.hi, [1.5, 1.5])

    def test_boundary_case(self):
        box = snapshot_domain(-1.0, T=1.0, d=2)
        np.testing.assert_array_equal(box.lo, [0, 0])
        np.testing.assert_array_equal(box.hi, [1, 1])

    def test_moved_points_stay_inside(self):
        rng = np.random.default_rng(2)
        T = 1.0
        x = rng.uniform(0, 1, size=(50_000, 2))
        v = rng.uniform(-0.5, 0.5, size=(50_000, 2))
        keep = phase_domain_contains(x, v, T)
        x, v = x[keep], v[keep]
        for t in (-1.0, -0.3, 0.0, 0.7, 1.0, 1.8, -2.5):
            box = snapshot_domain(t, T)
            moved = x + t * v
            assert (moved >= box.lo - 1e-12).all()
            assert (moved <= box.hi + 1e-12).all()


class TestBinInterval:
    # vertex-image oracle: the image of a parallelogram under a linear
    # functional is the interval spanned by the vertex images
    def _oracle(self, theta, t, T):
        v = projected_phase_domain(theta, T).vertices
        vals = v[:, 0] + t * v[:, 1]
        return vals.min(), vals.max()

    @pytest.mark.parametrize(
        "t,expect",
        [(0.0, (0.0, 1.0)), (1.0, (0.0, 1.0)), (2.0, (-0.5, 1.5))],
    )
    def test_axis_examples(self, t, expect):
        lo, hi = bin_interval((1.0, 0.0), t, T=1.0)
        assert (lo, hi) == pytest.approx(expect, abs=1e-15)

    def test_matches_oracle_random(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            th = rng.normal(size=2)
            th /= np.linalg.norm(th)
            t = rng.uniform(-3, 3)
            T = rng.uniform(0.3, 2.0)
            assert bin_interval(th, t, T) == pytest.approx(self._oracle(th, t, T))

    def test_projected_motion_stays_inside(self):
        rng = np.random.default_rng(4)
        T = 1.0
        x = rng.uniform(0, 1, size=(50_000, 2))
        v = rng.uniform(-0.5, 0.5, size=(50_000, 2))
        keep = phase_domain_contains(x, v, T)
        x, v = x[keep], v[keep]
        for _ in range(20):
            th = rng.normal(size=2)
            th /= np.linalg.norm(th)
            t = rng.uniform(-2.5, 2.5)
            lo, hi = bin_interval(th, t, T)
            s = x @ th + t * (v @ th)
            assert s.min() >= lo - 1e-12 and s.max() <= hi + 1e-12


class TestMakeGrid:
    def test_unit_box_centers(self):
        grid = make_grid(Box([0, 0], [1, 1]), 2)
        expect = np.array(
            [[0.25, 0.25], [0.75, 0.25], [0.25, 0.75], [0.75, 0.75]]
        )
        np.testing.assert_allclose(grid.centers(), expect)

    def test_interval_breakpoints(self):
        grid = make_grid((0.0, 1.0), 4)
        np.testing.assert_allclose(grid.breakpoints(), [0, 0.25, 0.5, 0.75, 1])

    def test_parallelogram_single_cell_area(self):
        para = projected_phase_domain((1.0, 0.0), T=1.0)
        grid = make_grid(para, 1)
        # shoelace oracle over the cyclic vertex order
        assert grid.cell_volume == pytest.approx(
            shoelace_area(para.cyclic_vertices), rel=1e-12
        )
        assert grid.cell_volume == pytest.approx(0.5, rel=1e-12)

    def test_cell_volumes_tile_domain(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            th = rng.normal(size=2)
            th /= np.linalg.norm(th)
            T = rng.uniform(0.3, 2.0)
            para = projected_phase_domain(th, T)
            M = int(rng.integers(1, 30))
            grid = make_grid(para, M)
            assert grid.n_cells * grid.cell_volume == pytest.approx(
                para.area, rel=1e-10
            )

    def test_grid_image_matches_domain(self):
        para = projected_phase_domain((0.6, 0.8), T=1.5)
        grid = make_grid(para, 7)
        img = grid.domain_vertices()
        # image corners are exactly the parallelogram, cyclically ordered
        np.testing.assert_allclose(
            np.sort(img, axis=0), np.sort(para.cyclic_vertices, axis=0), atol=1e-12
        )

    def test_degenerate_domain_rejected(self):
        with pytest.raises(ValueError):
            make_grid((0.3, 0.3), 5)
        with pytest.raises(ValueError):
            make_grid(Box([0, 0], [1, 0]), 3)

    def test_locate_row_major_and_ties(self):
        grid = make_grid(Box([0, 0], [1, 1]), 2)
        idx = grid.locate([[0.25, 0.25], [0.75, 0.25], [0.25, 0.75], [0.75, 0.75]])
        np.testing.assert_array_equal(idx, [0, 1, 2, 3])
        # boundary point goes to the lower cell index
        assert grid.locate([[0.5, 0.25]])[0] == 0
        assert grid.locate([[0.25, 0.5]])[0] == 0
        with pytest.raises(ValueError):
            grid.locate([[1.2, 0.5]])


class TestDirectionValidation:
    def test_rejects_non_unit(self):
        with pytest.raises(ValueError):
            unit_direction((1.0, 1.0))

    def test_accepts_unit(self):
        th = unit_direction((1 / SQ2, 1 / SQ2))
        assert np.linalg.norm(th) == pytest.approx(1.0, abs=1e-12)
