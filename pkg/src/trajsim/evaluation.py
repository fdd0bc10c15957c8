"""Score learned representations against a ground-truth matrix."""

import numpy as np

from .exceptions import ArgumentError
from .metrics import (
    MetricsReport,
    concentration_stats,
    hr_at_k,
    inversions_at_k,
    mse,
    recall_t_at_k,
)
from .search import top_k_indices, topk_ground_truth
from .similarity import resolve_sim, similarity_to_many

__all__ = ["representation_similarities", "hr_at_10", "evaluate_representations"]


def representation_similarities(reps, sim_name):
    """Square matrix of learned similarities between the rows of ``reps``."""
    reps = np.asarray(reps, dtype=np.float64)
    return np.vstack([similarity_to_many(sim_name, r, reps) for r in reps]) if len(reps) else np.empty((0, 0))


def _query_lists(sims, matrix, ids, k):
    ids = np.asarray(ids, dtype=np.int64)
    for qi, q in enumerate(ids):
        others = np.delete(np.arange(ids.shape[0]), qi)
        pick = top_k_indices(sims[qi, others], k, ids[others])
        truth = topk_ground_truth(matrix, int(q), k, candidates=ids)
        yield qi, others, ids[others][pick], truth


def hr_at_10(reps, matrix, ids, sim_name, k=10):
    """Mean HR@k when every trajectory in ``ids`` queries the rest of ``ids``."""
    ids = np.asarray(ids, dtype=np.int64)
    k = min(k, ids.shape[0] - 1)
    if k < 1:
        raise ArgumentError("need at least two trajectories to evaluate")
    sims = representation_similarities(reps, sim_name)
    hits = [hr_at_k(found, truth, k) for _, _, found, truth in _query_lists(sims, matrix, ids, k)]
    return float(np.mean(hits))


def evaluate_representations(reps, matrix, ids, sim_fn, ks=(1, 10, 50), recall=((10, 50),),
                             inversion_ks=(10, 20, 50, 100), measure=None, queries=None):
    """Full metric report for representations ``reps`` of trajectories ``ids``.

    Every trajectory in ``queries`` (default: all of ``ids``) searches the
    other members of ``ids``. Cut-offs larger than the candidate pool raise
    :class:`ArgumentError`. ``approx_mse`` covers all ordered pairs of
    distinct members.
    """
    ids = np.asarray(ids, dtype=np.int64)
    reps = np.asarray(reps, dtype=np.float64)
    if reps.shape[0] != ids.shape[0]:
        raise ArgumentError(f"{reps.shape[0]} representations for {ids.shape[0]} ids")
    pool = ids.shape[0] - 1
    needed = max([*ks, *(k for _, k in recall), *inversion_ks], default=1)
    if needed > pool:
        raise ArgumentError(f"cut-off {needed} exceeds the {pool} candidates per query")
    name = resolve_sim(sim_fn, measure if measure is not None else matrix.measure)
    sims = representation_similarities(reps, name)
    qmask = np.ones(ids.shape[0], dtype=bool) if queries is None else np.isin(ids, queries)
    hr = {k: [] for k in ks}
    rec = {tk: [] for tk in recall}
    inv = {k: [] for k in inversion_ks}
    for qi, others, found, truth in _query_lists(sims, matrix, ids, needed):
        if not qmask[qi]:
            continue
        for k in ks:
            hr[k].append(hr_at_k(found, truth, k))
        for t, k in recall:
            rec[(t, k)].append(recall_t_at_k(found, truth, t, k))
        scores = dict(zip(ids[others].tolist(), sims[qi, others].tolist()))
        for k in inversion_ks:
            inv[k].append(inversions_at_k(truth, scores, k))
    off = ~np.eye(ids.shape[0], dtype=bool)
    gt = matrix.similarities(ids, ids)
    return MetricsReport(
        measure=matrix.measure.value,
        sim_fn=name,
        hr={k: float(np.mean(v)) for k, v in hr.items()},
        recall={tk: float(np.mean(v)) for tk, v in rec.items()},
        inversions={k: float(np.mean(v)) for k, v in inv.items()},
        approx_mse=mse(sims[off], gt[off]),
        avg_dim_std=concentration_stats(reps).avg_std,
        n_queries=int(qmask.sum()),
    )
