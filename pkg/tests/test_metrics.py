import numpy as np
import pytest

from copsl.errors import InputError
from copsl.metrics import (
    hv_2d,
    hv_3d,
    hv_monte_carlo,
    log_hv_diff,
    nondominated_filter,
    read_front_csv,
    write_front_csv,
)
from copsl.problems import get_problem, true_front_hv
from copsl.sampling import RngStream

from conftest import brute_force_nondominated


def random_front(rng, m, count):
    """Points near the unit simplex surface so fronts are nontrivial."""
    pts = rng.random((count, m)) * 0.9 + 0.05
    return pts / np.linalg.norm(pts, axis=1, keepdims=True) * (0.6 + 0.4 * rng.random((count, 1)))


class TestNondominatedFilter:
    def test_small_example(self):
        kept = nondominated_filter(np.array([[1.0, 2.0], [2.0, 1.0], [2.0, 2.0]]))
        assert sorted(map(tuple, kept)) == [(1.0, 2.0), (2.0, 1.0)]

    def test_singleton(self):
        kept = nondominated_filter(np.array([[3.0, 4.0]]))
        assert np.array_equal(kept, [[3.0, 4.0]])

    def test_duplicates_collapse(self):
        kept = nondominated_filter(np.array([[1.0, 2.0], [1.0, 2.0], [2.0, 1.0]]))
        assert kept.shape[0] == 2

    def test_weak_dominance_removes_equal_but_worse(self):
        kept = nondominated_filter(np.array([[1.0, 2.0], [1.0, 3.0]]))
        assert np.array_equal(kept, [[1.0, 2.0]])

    def test_matches_brute_force_on_random_sets(self):
        rng = RngStream(31)
        for _ in range(20):
            pts = rng.random((200, 3))
            fast = nondominated_filter(pts)
            slow = brute_force_nondominated(pts)
            assert sorted(map(tuple, fast)) == sorted(map(tuple, slow))

    def test_rejects_empty(self):
        with pytest.raises(InputError):
            nondominated_filter(np.empty((0, 2)))


class TestHv2d:
    def test_single_box(self):
        assert hv_2d([[0.0, 0.0]], (1.1, 1.1)) == pytest.approx(1.21)

    def test_two_point_union(self):
        # Union of two overlapping boxes: 0.11 + 0.11 - 0.01 overlap.
        expected = 0.11 + 0.11 - 0.01
        assert hv_2d([[0.0, 1.0], [1.0, 0.0]], (1.1, 1.1)) == pytest.approx(expected)
        est, se = hv_monte_carlo(
            np.array([[0.0, 1.0], [1.0, 0.0]]), np.array([1.1, 1.1]), 400_000, RngStream(32)
        )
        assert abs(est - expected) <= 3.0 * se

    def test_points_outside_reference_clipped(self):
        assert hv_2d([[2.0, 2.0]], (1.1, 1.1)) == 0.0
        assert hv_2d([[0.0, 0.0], [2.0, -1.0]], (1.0, 1.0)) == pytest.approx(1.0)

    def test_dense_front_samples_converge_to_true_hypervolume(self):
        mop = get_problem("zdt1")
        target = true_front_hv(mop, (1.1, 1.1))
        previous_gap = None
        for count in (10, 100, 1000, 10_000):
            hv = hv_2d(mop.front_points(count), (1.1, 1.1))
            gap = target - hv
            assert gap > 0.0
            if previous_gap is not None:
                assert gap < previous_gap
            previous_gap = gap
        assert previous_gap < 1e-3

    def test_monotone_under_insertion(self):
        rng = RngStream(33)
        pts = rng.random((30, 2))
        ref = np.array([1.05, 1.05])
        base = hv_2d(pts, ref)
        extended = hv_2d(np.vstack([pts, [[0.01, 0.01]]]), ref)
        assert extended >= base

    def test_filter_commutes(self):
        rng = RngStream(34)
        pts = rng.random((50, 2))
        ref = np.array([1.1, 1.1])
        assert hv_2d(pts, ref) == pytest.approx(hv_2d(nondominated_filter(pts), ref))


class TestHv3d:
    def test_single_box(self):
        assert hv_3d([[0.0, 0.0, 0.0]], (1.0, 1.0, 1.0)) == pytest.approx(1.0)

    def test_two_boxes_inclusion_exclusion(self):
        a = np.array([0.1, 0.5, 0.3])
        b = np.array([0.6, 0.2, 0.2])
        ref = np.array([1.0, 1.0, 1.0])
        vol = lambda p: np.prod(ref - p)
        overlap = np.prod(ref - np.maximum(a, b))
        expected = vol(a) + vol(b) - overlap
        assert hv_3d([a, b], ref) == pytest.approx(expected)

    def test_equal_third_coordinate_reduces_to_prism(self):
        pts = np.array([[0.2, 0.7, 0.4], [0.5, 0.3, 0.4], [0.8, 0.1, 0.4]])
        ref = np.array([1.0, 1.0, 1.0])
        from copsl.metrics import hv_2d as area

        expected = area(pts[:, :2], ref[:2]) * (1.0 - 0.4)
        assert hv_3d(pts, ref) == pytest.approx(expected)

    def test_matches_monte_carlo_on_random_fronts(self):
        rng = RngStream(35)
        mc_rng = RngStream(36)
        for _ in range(10):
            pts = random_front(rng, 3, 12)
            ref = np.array([1.1, 1.1, 1.1])
            exact = hv_3d(pts, ref)
            est, se = hv_monte_carlo(pts, ref, 200_000, mc_rng)
            assert abs(exact - est) <= 3.0 * se

    def test_monotone_under_insertion(self):
        rng = RngStream(37)
        pts = rng.random((20, 3))
        ref = np.array([1.05, 1.05, 1.05])
        assert hv_3d(np.vstack([pts, [[0.0, 0.0, 0.0]]]), ref) >= hv_3d(pts, ref)


class TestMonteCarlo:
    def test_single_point_at_box_corner(self):
        est, se = hv_monte_carlo(np.array([[0.25, 0.25]]), np.array([1.0, 1.0]), 10_000, RngStream(38))
        # Every sample in the box is dominated, so the estimate is exact.
        assert est == pytest.approx(0.75 * 0.75)
        assert se == 0.0

    def test_standard_error_scales_with_inverse_sqrt_samples(self):
        pts = np.array([[0.3, 0.6], [0.6, 0.3]])
        ref = np.array([1.0, 1.0])
        sizes = (1_000, 10_000, 100_000)
        errors = [
            hv_monte_carlo(pts, ref, n, RngStream(39))[1] for n in sizes
        ]
        slopes = np.diff(np.log10(errors)) / np.diff(np.log10(sizes))
        assert np.abs(slopes + 0.5).max() < 0.05

    def test_agrees_with_exact_2d(self):
        rng = RngStream(40)
        mc_rng = RngStream(41)
        for _ in range(10):
            pts = random_front(rng, 2, 8)
            ref = np.array([1.1, 1.1])
            exact = hv_2d(pts, ref)
            est, se = hv_monte_carlo(pts, ref, 200_000, mc_rng)
            assert abs(exact - est) <= 3.0 * se


class TestLogHvDiff:
    def test_tenth_gap(self):
        assert log_hv_diff(1.0, 0.9) == pytest.approx(-1.0)

    def test_floor_when_gap_vanishes(self):
        assert log_hv_diff(1.0, 1.0) == pytest.approx(-12.0)
        assert log_hv_diff(1.0, 1.5) == pytest.approx(-12.0)

    def test_always_finite(self):
        rng = RngStream(42)
        for _ in range(100):
            ht = float(rng.random()) + 0.5
            hl = float(rng.random()) * 2.0
            assert np.isfinite(log_hv_diff(ht, hl))

    def test_rejects_negative_true_hv(self):
        with pytest.raises(InputError):
            log_hv_diff(-0.5, 0.0)


class TestFrontCsv:
    def test_round_trip(self, tmp_path):
        pts = np.array([[0.125, 0.875], [0.5, 0.25]])
        ref = np.array([1.1, 1.1])
        path = str(tmp_path / "front.csv")
        write_front_csv(path, pts, ref)
        loaded, loaded_ref = read_front_csv(path)
        assert np.array_equal(loaded, pts)
        assert np.array_equal(loaded_ref, ref)

    def test_full_precision_round_trip(self, tmp_path):
        pts = np.array([[1.0 / 3.0, 2.0 / 7.0]])
        path = str(tmp_path / "front.csv")
        write_front_csv(path, pts, np.array([1.1, 1.1]))
        loaded, _ = read_front_csv(path)
        assert np.array_equal(loaded, pts)

    def test_rejects_garbage(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("f1,f2\n0,1\n")
        with pytest.raises(InputError):
            read_front_csv(str(path))
