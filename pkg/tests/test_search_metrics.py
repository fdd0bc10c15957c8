import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trajsim import generate_synthetic, init_model, SimformerConfig
from trajsim.distance import GroundTruthMatrix
from trajsim.exceptions import ArgumentError
from trajsim.metrics import (
    MetricsReport,
    approximation_mse,
    concentration_stats,
    hr_at_k,
    hyperball_area,
    hypercube_area,
    inversions_at_k,
    log10_surface_ratio,
    recall_t_at_k,
    similarity_histogram,
    surface_ratio,
)
from trajsim.search import QueryResult, benchmark_query, top_k_indices, topk_ground_truth, topk_repr
from trajsim.training import mse_loss

from oracles import inversions_bruteforce

PERMS = st.permutations(list(range(30)))


class TestRankingMetrics:
    def test_hr_examples(self):
        assert hr_at_k(["a", "b", "c"], ["a", "x", "c"], 3) == pytest.approx(2 / 3)
        assert hr_at_k([1, 2], [3, 4], 2) == 0.0
        with pytest.raises(ArgumentError):
            hr_at_k([1, 2], [1, 2], 3)

    def test_recall_examples(self):
        truth = list(range(10))
        approx = [99, 98] + truth + list(range(100, 138))
        assert recall_t_at_k(approx, truth, 10, 50) == 1.0
        assert recall_t_at_k(["b", "c", "d"], ["a", "b"], 2, 3) == 0.5
        with pytest.raises(ArgumentError):
            recall_t_at_k(truth, truth, 5, 3)

    def test_inversion_examples(self):
        assert inversions_at_k(["a", "b", "c"], {"a": 0.5, "b": 0.9, "c": 0.1}, 3) == 1
        assert inversions_at_k(list(range(10)), np.arange(10)[::-1].astype(float), 10) == 0
        assert inversions_at_k(list(range(10)), np.arange(10).astype(float), 10) == 45
        with pytest.raises(ArgumentError):
            inversions_at_k(["a", "b"], {"a": 1.0}, 2)

    @settings(max_examples=10_000, deadline=None)
    @given(PERMS, st.integers(1, 30))
    def test_identical_lists(self, perm, k):
        assert hr_at_k(perm, perm, k) == 1.0
        assert recall_t_at_k(perm, perm, k, k) == 1.0
        assert recall_t_at_k(perm, perm, max(1, k // 2), k) == 1.0

    @settings(max_examples=10_000, deadline=None)
    @given(PERMS, st.integers(1, 15))
    def test_disjoint_lists(self, perm, k):
        a, b = perm[:15], perm[15:]
        assert hr_at_k(a, b, k) == 0.0
        assert recall_t_at_k(a, b, k, 15) == 0.0

    @settings(max_examples=10_000, deadline=None)
    @given(st.permutations(list(range(10))))
    def test_inversions_of_reversal_and_bounds(self, perm):
        ascending = {i: float(r) for r, i in enumerate(perm)}
        assert inversions_at_k(perm, ascending, 10) == 45
        descending = {i: -v for i, v in ascending.items()}
        assert inversions_at_k(perm, descending, 10) == 0

    @settings(max_examples=2_000, deadline=None)
    @given(st.lists(st.floats(-5, 5), min_size=12, max_size=12), st.integers(1, 12))
    def test_inversions_match_bruteforce(self, scores, k):
        truth = list(range(12))
        n = inversions_at_k(truth, np.array(scores), k)
        assert n == inversions_bruteforce(scores[:k])
        assert 0 <= n <= k * (k - 1) // 2


class TestTopK:
    def test_partial_matches_full_sort(self, rng):
        for trial in range(50):
            scores = np.round(rng.normal(size=500), 1)  # plenty of ties
            ids = rng.permutation(500)
            k = int(rng.integers(1, 501))
            ref = sorted(range(500), key=lambda i: (-scores[i], ids[i]))[:k]
            np.testing.assert_array_equal(top_k_indices(scores, k, ids), ref)

    def test_ground_truth_examples(self):
        D = np.array([[0, 0.5, 0.1], [0.5, 0, 0.3], [0.1, 0.3, 0]])
        gt = GroundTruthMatrix("dtw", 16.0, D)
        r = topk_ground_truth(gt, 0, 1)
        assert r.neighbor_ids == (2,) and r.scores[0] == pytest.approx(math.exp(-1.6))
        assert topk_ground_truth(gt, 0, 2).neighbor_ids == (2, 1)
        with pytest.raises(ArgumentError):
            topk_ground_truth(gt, 0, 3)

    def test_ground_truth_tie_goes_to_lower_id(self):
        D = np.array([[0, 1, 1, 1], [1, 0, 1, 1], [1, 1, 0, 1], [1, 1, 1, 0.0]])
        gt = GroundTruthMatrix("hausdorff", 8.0, D)
        assert topk_ground_truth(gt, 2, 3).neighbor_ids == (0, 1, 3)

    def test_repr_copy_ranks_first(self, rng):
        reps = np.abs(rng.normal(size=(40, 8)))
        q = reps[17].copy()
        r = topk_repr(reps, q, "cosine", 5)
        assert r.neighbor_ids[0] == 17 and r.scores[0] == pytest.approx(1.0, abs=1e-7)
        r = topk_repr(reps[:2], q, "euclidean", 1)
        assert r.neighbor_ids == (int(np.argmin(((reps[:2] - q) ** 2).sum(1))),)

    def test_repr_exclusion(self, rng):
        reps = rng.normal(size=(10, 4))
        r = topk_repr(reps, reps[3], "euclidean", 9, exclude_id=3)
        assert 3 not in r.neighbor_ids and len(r) == 9

    def test_euclidean_monotone_transform(self, rng):
        reps = rng.normal(size=(300, 5))
        q = rng.normal(size=5)
        r = topk_repr(reps, q, "euclidean", 20)
        d = np.sqrt(((reps - q) ** 2).sum(1))
        np.testing.assert_array_equal(r.neighbor_ids, np.argsort(d, kind="stable")[:20])

    def test_query_result_validation(self):
        with pytest.raises(ArgumentError):
            QueryResult(0, (1, 2), (0.5,))
        with pytest.raises(ArgumentError):
            QueryResult(0, (1,), (0.5,)).top(2)


class TestStatistics:
    def test_mse(self):
        assert approximation_mse([0.2, 0.4], [0.2, 0.4]) == 0.0
        assert approximation_mse(np.zeros(7), np.ones(7)) == 1.0
        with pytest.raises(ArgumentError):
            approximation_mse([], [])

    def test_mse_shared_with_training(self, rng):
        p, t = rng.random(50), rng.random(50)
        assert approximation_mse(p, t) == mse_loss(p, t)

    def test_concentration(self):
        s = concentration_stats(np.tile([1.0, 2.0, 3.0], (5, 1)))
        assert (s.stds == 0).all() and s.avg_std == 0
        s = concentration_stats(np.array([np.zeros(4), np.full(4, 2.0)]))
        np.testing.assert_array_equal(s.stds, 1.0)
        with pytest.raises(ArgumentError):
            concentration_stats(np.ones((1, 3)))

    def test_histogram(self, rng):
        np.testing.assert_array_equal(similarity_histogram([0, 0.5, 1], 2), [1, 2])
        np.testing.assert_array_equal(similarity_histogram([], 4), [0, 0, 0, 0])
        v = rng.random(1000)
        assert similarity_histogram(v, 7).sum() == 1000
        with pytest.raises(ArgumentError):
            similarity_histogram([1.2], 3)
        with pytest.raises(ArgumentError):
            similarity_histogram([0.2], 0)

    def test_report_json(self):
        rep = MetricsReport("dtw", "cosine", {10: 0.5}, {(10, 50): 0.9}, {10: 3.0}, 0.01, 0.3, 7)
        d = rep.to_dict()
        assert d["hr"]["HR@10"] == 0.5 and d["recall"]["R10@50"] == 0.9
        assert d["inversions"]["INV@10"] == 3.0 and d["n_queries"] == 7
        assert rep.to_json() == rep.to_json()


class TestSurfaces:
    def test_closed_forms(self):
        assert hyperball_area(3) == pytest.approx(4 * math.pi, rel=1e-14)
        assert hypercube_area(3) == pytest.approx(24.0, rel=1e-14)
        assert surface_ratio(3) == pytest.approx(math.pi / 6, abs=1e-12)
        assert surface_ratio(2) == pytest.approx(math.pi / 4, abs=1e-12)
        assert hyperball_area(2, r=2.0) == pytest.approx(4 * math.pi, rel=1e-14)

    def test_decreasing_and_underflow(self):
        logs = [log10_surface_ratio(d) for d in range(2, 257)]
        assert all(b < a for a, b in zip(logs, logs[1:]))
        assert log10_surface_ratio(128) < -80

    @pytest.mark.parametrize("bad", [0, -2, 2.5])
    def test_invalid_dimension(self, bad):
        with pytest.raises(ArgumentError):
            surface_ratio(bad)
        with pytest.raises(ArgumentError):
            hyperball_area(bad)

    def test_invalid_radius(self):
        with pytest.raises(ArgumentError):
            hypercube_area(3, r=0.0)


@pytest.fixture(scope="module")
def data():
    return generate_synthetic(60, 10, 20, seed=1)


class TestBenchmark:
    def test_zero_queries(self, data):
        rep = benchmark_query(data, "brute_exact", 5, 0, seed=0)
        assert rep.times_ms == () and rep.mean_ms is None

    @pytest.mark.parametrize("method", ["brute_exact", "non_learning"])
    def test_methods_time_each_query(self, data, method):
        rep = benchmark_query(data, method, 5, 3, seed=0, measure="frechet")
        assert len(rep.times_ms) == 3 and all(t >= 0 for t in rep.times_ms)
        assert rep.csv_row().startswith(f"{method},60,5,")

    def test_learned_needs_model(self, data):
        with pytest.raises(ArgumentError):
            benchmark_query(data, "learned", 5, 2, seed=0)
        model = init_model(SimformerConfig(d=16, heads=2), 0)
        assert len(benchmark_query(data, "learned", 5, 2, seed=0, model=model).times_ms) == 2

    def test_same_seed_same_queries(self, data, monkeypatch):
        import trajsim.search as search

        seen = []
        real = search.approximate_distance

        def spy(a, b, *args):
            seen.append(a.tobytes())
            return real(a, b, *args)

        monkeypatch.setattr(search, "approximate_distance", spy)
        benchmark_query(data, "non_learning", 5, 3, seed=9)
        first, seen[:] = list(seen), []
        benchmark_query(data, "non_learning", 5, 3, seed=9)
        assert seen == first

    def test_unknown_method(self, data):
        with pytest.raises(ArgumentError):
            benchmark_query(data, "bogus", 5, 1, seed=0)
