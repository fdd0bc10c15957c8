import numpy as np
import pytest

from conftest import random_traj
from oracles import is_warping_path, path_cost
from trajsim.distance import (
    FastDtwConfig,
    approximate_distance,
    coarsen,
    dtw,
    fast_dtw,
    frechet_discrete,
    greedy_frechet,
    hausdorff,
    hausdorff_early_break,
)
from trajsim.exceptions import ArgumentError
from trajsim.trajectory import generate_synthetic


class TestCoarsen:
    def test_even(self):
        pts = np.array([[0, 0], [2, 2], [4, 0], [6, 2]], dtype=float)
        np.testing.assert_array_equal(coarsen(pts), [[1, 1], [5, 1]])

    def test_odd_tail_kept(self):
        pts = np.array([[0, 0], [2, 2], [9, 9]], dtype=float)
        np.testing.assert_array_equal(coarsen(pts), [[1, 1], [9, 9]])

    def test_single_point(self):
        np.testing.assert_array_equal(coarsen(np.array([[3.0, 4.0]])), [[3, 4]])


class TestFastDtw:
    def test_full_radius_is_exact(self, rng):
        for _ in range(40):
            a, b = random_traj(rng, 40), random_traj(rng, 40)
            assert fast_dtw(a, b, max(len(a), len(b))) == dtw(a, b)

    def test_self_distance_zero(self, rng):
        t = rng.normal(size=(57, 2))
        assert fast_dtw(t, t, 1) == 0.0

    def test_upper_bound_for_every_radius(self, rng):
        for _ in range(40):
            a, b = random_traj(rng, 80), random_traj(rng, 80)
            exact = dtw(a, b)
            for r in range(0, 6):
                assert fast_dtw(a, b, r) >= exact

    def test_returned_path_is_a_warping_path_with_that_cost(self, rng):
        for _ in range(20):
            a, b = random_traj(rng, 60, 2), random_traj(rng, 60, 2)
            cost, path = fast_dtw(a, b, FastDtwConfig(1), return_path=True)
            assert is_warping_path(path, len(a), len(b))
            assert path_cost(a, b, path) == pytest.approx(cost, rel=1e-12)

    def test_accuracy_at_radius_one(self):
        pts = generate_synthetic(400, 10, 200, seed=11).points_list()
        rel = []
        for k in range(200):
            a, b = pts[2 * k], pts[2 * k + 1]
            e = dtw(a, b)
            rel.append((fast_dtw(a, b, 1) - e) / e)
        assert np.mean(np.array(rel) <= 0.2) >= 0.95

    def test_config_validation(self):
        with pytest.raises(ArgumentError):
            FastDtwConfig(-1)
        with pytest.raises(ArgumentError):
            fast_dtw(np.empty((0, 2)), [(0, 0)])


class TestGreedyFrechet:
    def test_hand_example(self):
        assert greedy_frechet([(0, 0), (1, 0)], [(0, 1), (1, 1)]) == 1.0

    def test_identity(self, rng):
        t = rng.normal(size=(30, 2))
        assert greedy_frechet(t, t) == 0.0

    def test_upper_bound_and_single_point_equality(self, rng):
        for _ in range(200):
            a, b = random_traj(rng, 40), random_traj(rng, 40)
            assert greedy_frechet(a, b) >= frechet_discrete(a, b)
            one = a[:1]
            assert greedy_frechet(one, b) == frechet_discrete(one, b)
            assert greedy_frechet(b, one) == frechet_discrete(b, one)


class TestEarlyBreakHausdorff:
    def test_equals_naive_exactly(self, rng):
        for seed in range(100):
            a, b = random_traj(rng, 120), random_traj(rng, 120)
            assert hausdorff_early_break(a, b, seed) == hausdorff(a, b)

    def test_single_points(self):
        assert hausdorff_early_break([(0, 0)], [(3, 4)], seed=5) == 5.0

    def test_fewer_comparisons_on_clustered_input(self, rng):
        a = rng.normal(0, 0.05, size=(200, 2))
        b = rng.normal(0, 0.05, size=(200, 2)) + 0.01
        value, count = hausdorff_early_break(a, b, seed=1, return_count=True)
        assert value == hausdorff(a, b)
        assert count < 2 * 200 * 200


def test_dispatch(rng):
    a, b = rng.normal(size=(20, 2)), rng.normal(size=(15, 2))
    assert approximate_distance(a, b, "dtw", radius=2) == fast_dtw(a, b, 2)
    assert approximate_distance(a, b, "frechet") == greedy_frechet(a, b)
    assert approximate_distance(a, b, "hausdorff", seed=3) == hausdorff(a, b)
    with pytest.raises(ArgumentError):
        approximate_distance(a, b, "lcss")
