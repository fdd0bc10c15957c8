"""Top-k similarity search by exact distance and by learned representation,
plus query-time benchmarking."""

import time
from dataclasses import dataclass

import numpy as np

from .distance import _kernels
from .distance.approx import approximate_distance
from .distance.exact import DistanceMeasure
from .encoder import encode, encode_batch
from .exceptions import ArgumentError
from .similarity import resolve_sim, similarity_to_many
from .validation import check_points, check_random_seed

__all__ = [
    "QueryResult",
    "top_k_indices",
    "topk_ground_truth",
    "topk_repr",
    "BenchmarkReport",
    "benchmark_query",
    "BENCH_METHODS",
]

BENCH_METHODS = ("brute_exact", "non_learning", "learned")


@dataclass(frozen=True)
class QueryResult:
    """Ranked neighbours of one query, best first."""

    query_id: int
    neighbor_ids: tuple
    scores: tuple

    def __post_init__(self):
        object.__setattr__(self, "neighbor_ids", tuple(int(i) for i in self.neighbor_ids))
        object.__setattr__(self, "scores", tuple(float(s) for s in self.scores))
        if len(self.neighbor_ids) != len(self.scores):
            raise ArgumentError("neighbor_ids and scores differ in length")

    def __len__(self):
        return len(self.neighbor_ids)

    def top(self, k):
        if k > len(self):
            raise ArgumentError(f"k={k} exceeds the {len(self)} results available")
        return self.neighbor_ids[:k]


def top_k_indices(scores, k, ids=None):
    """Positions of the ``k`` largest ``scores``; equal scores go to the lower id.

    ``ids`` defaults to the positions themselves. Selection is partial
    (``argpartition``) with an exact tie-aware finish, so the result equals a
    full stable sort.
    """
    scores = np.asarray(scores, dtype=np.float64)
    n = scores.shape[0]
    ids = np.arange(n) if ids is None else np.asarray(ids)
    if not 0 <= k <= n:
        raise ArgumentError(f"k={k} outside [0, {n}]")
    if k == 0:
        return np.empty(0, dtype=np.int64)
    if k < n:
        part = np.argpartition(-scores, k - 1)[:k]
        threshold = scores[part].min()
        cand = np.flatnonzero(scores >= threshold)
    else:
        cand = np.arange(n)
    order = np.lexsort((ids[cand], -scores[cand]))
    return cand[order[:k]]


def _candidate_ids(n, candidates, exclude_id):
    ids = np.arange(n, dtype=np.int64) if candidates is None else np.asarray(candidates, dtype=np.int64)
    if exclude_id is not None:
        ids = ids[ids != exclude_id]
    return ids


def topk_ground_truth(matrix, query_id, k, candidates=None):
    """The ``k`` trajectories closest to ``query_id`` under exact distance.

    ``candidates`` restricts the search (ids into ``matrix``); the query is
    always excluded. Scores are ground-truth similarities.
    """
    ids = _candidate_ids(matrix.n, candidates, query_id)
    if not 1 <= k <= ids.shape[0]:
        raise ArgumentError(f"k={k} must be in [1, {ids.shape[0]}] for this query")
    d = matrix.distances[query_id, ids]
    pick = top_k_indices(-d, k, ids)
    chosen = ids[pick]
    return QueryResult(query_id, chosen, matrix.similarities([query_id], chosen)[0])


def topk_repr(reps, query_rep, sim_fn, k, exclude_id=None, candidates=None, measure=None):
    """Top-``k`` rows of ``reps`` by learned similarity to ``query_rep``."""
    reps = np.asarray(reps, dtype=np.float64)
    ids = _candidate_ids(reps.shape[0], candidates, exclude_id)
    if k > ids.shape[0] or k < 1:
        raise ArgumentError(f"k={k} must be in [1, {ids.shape[0]}]")
    name = resolve_sim(sim_fn, measure)
    s = similarity_to_many(name, query_rep, reps[ids])
    pick = top_k_indices(s, k, ids)
    return QueryResult(-1 if exclude_id is None else int(exclude_id), ids[pick], s[pick])


# ------------------------------------------------------------- benchmarking


@dataclass(frozen=True)
class BenchmarkReport:
    method: str
    n: int
    k: int
    times_ms: tuple

    @property
    def mean_ms(self):
        return float(np.mean(self.times_ms)) if self.times_ms else None

    @property
    def std_ms(self):
        return float(np.std(self.times_ms)) if self.times_ms else None

    def csv_row(self):
        return f"{self.method},{self.n},{self.k},{self.mean_ms:.6f},{self.std_ms:.6f}"


def benchmark_query(dataset, method, k, query_count, seed, measure="dtw", model=None,
                    sim_fn="tailored", reps=None, radius=1):
    """Mean wall-clock time of a top-``k`` query against all of ``dataset``.

    Query ids are drawn with ``seed``. ``brute_exact`` computes every exact
    distance, ``non_learning`` uses the measure's fast approximation and
    ``learned`` encodes the query with ``model`` and scans the precomputed
    ``reps`` (encoded on demand if omitted; that cost is not timed).
    """
    if method not in BENCH_METHODS:
        raise ArgumentError(f"unknown method {method!r}; expected one of {BENCH_METHODS}")
    measure = DistanceMeasure.parse(measure)
    pts = [check_points(t) for t in getattr(dataset, "trajectories", dataset)]
    n = len(pts)
    if k >= n:
        raise ArgumentError(f"k={k} must be smaller than the dataset size {n}")
    rng = check_random_seed(seed)
    queries = rng.choice(n, size=query_count, replace=query_count > n) if query_count else []
    if method == "learned":
        if model is None:
            raise ArgumentError("the learned method needs a model")
        if reps is None:
            reps = encode_batch(model, pts, batch_size=64)
        name = resolve_sim(sim_fn, measure)
    elif method == "brute_exact":
        flat, offsets = _kernels.pack(pts)
        out = np.empty(n)
        targets = np.arange(n, dtype=np.int64)

    def run(q):
        if method == "brute_exact":
            _kernels.distances_to_many(pts[q], flat, offsets, targets, measure.code, out)
            out[q] = np.inf
            top_k_indices(-out, k)
        elif method == "non_learning":
            d = np.array([approximate_distance(pts[q], p, measure, radius, seed) for p in pts])
            d[q] = np.inf
            top_k_indices(-d, k)
        else:
            v = encode(model, pts[q])
            s = similarity_to_many(name, v, reps)
            s[q] = -np.inf
            top_k_indices(s, k)

    if len(queries):
        run(int(queries[0]))  # untimed: compiles kernels, warms caches
    times = []
    for q in queries:
        t0 = time.perf_counter()
        run(int(q))
        times.append((time.perf_counter() - t0) * 1000.0)
    return BenchmarkReport(method, n, k, tuple(times))
