"""Retrieval metrics, representation statistics and the hyperball versus
hypercube surface-area comparison."""

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .exceptions import ArgumentError
from .validation import check_positive

__all__ = [
    "hr_at_k",
    "recall_t_at_k",
    "inversions_at_k",
    "mse",
    "approximation_mse",
    "ConcentrationStats",
    "concentration_stats",
    "similarity_histogram",
    "log_hyperball_area",
    "hyperball_area",
    "log_hypercube_area",
    "hypercube_area",
    "log10_surface_ratio",
    "surface_ratio",
    "MetricsReport",
]


def _ids(result):
    return getattr(result, "neighbor_ids", result)


def hr_at_k(approx, truth, k):
    """Share of the true top-``k`` that the approximate top-``k`` recovers."""
    a, t = _ids(approx), _ids(truth)
    if k < 1 or k > len(a) or k > len(t):
        raise ArgumentError(f"k={k} needs at least k results in both lists ({len(a)}, {len(t)})")
    return len(set(a[:k]) & set(t[:k])) / k


def recall_t_at_k(approx, truth, t, k):
    """Share of the true top-``t`` found in the approximate top-``k``."""
    if t > k:
        raise ArgumentError(f"t={t} must not exceed k={k}")
    a, tr = _ids(approx), _ids(truth)
    if t < 1 or k > len(a) or t > len(tr):
        raise ArgumentError(f"results too short for R{t}@{k} ({len(a)}, {len(tr)})")
    return len(set(tr[:t]) & set(a[:k])) / t


def inversions_at_k(truth, approx_scores, k):
    """Pairs of the true top-``k`` that the model scores in the wrong order.

    The true top-``k`` list is kept in ground-truth order and every pair
    ``i < j`` with ``score[id_i] < score[id_j]`` counts once. ``approx_scores``
    is a mapping or an array indexed by id.
    """
    ids = _ids(truth)
    if k < 1 or k > len(ids):
        raise ArgumentError(f"k={k} exceeds the {len(ids)} ground-truth results")
    s = np.empty(k)
    for pos, i in enumerate(ids[:k]):
        try:
            s[pos] = approx_scores[i]
        except (KeyError, IndexError):
            raise ArgumentError(f"no approximate score for id {i}") from None
    return int(np.sum(s[:, None] < s[None, :], where=np.triu(np.ones((k, k), dtype=bool), 1)))


def mse(preds, targets):
    p = np.asarray(preds, dtype=np.float64).ravel()
    t = np.asarray(targets, dtype=np.float64).ravel()
    if p.shape != t.shape:
        raise ArgumentError(f"length mismatch: {p.shape[0]} predictions, {t.shape[0]} targets")
    if p.size == 0:
        raise ArgumentError("cannot take the mean of an empty set")
    diff = p - t
    return float(np.mean(diff * diff))


approximation_mse = mse


@dataclass(frozen=True)
class ConcentrationStats:
    means: np.ndarray
    stds: np.ndarray
    avg_std: float


def concentration_stats(reps):
    """Per-dimension population mean and standard deviation of ``reps``."""
    reps = np.asarray(reps, dtype=np.float64)
    if reps.ndim != 2 or reps.shape[0] < 2:
        raise ArgumentError("need at least two representations")
    stds = reps.std(axis=0)
    return ConcentrationStats(reps.mean(axis=0), stds, float(stds.mean()))


def similarity_histogram(values, bins):
    """Counts over ``bins`` equal-width bins of ``[0, 1]``.

    Bins are left-closed; the last one also includes 1.0.
    """
    if isinstance(bins, bool) or int(bins) != bins or bins < 1:
        raise ArgumentError(f"bins must be a positive integer, got {bins!r}")
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size and (not np.isfinite(v).all() or v.min() < 0.0 or v.max() > 1.0):
        raise ArgumentError("similarity values must lie in [0, 1]")
    counts, _ = np.histogram(v, bins=int(bins), range=(0.0, 1.0))
    return counts.astype(np.int64)


# ------------------------------------------------------------ surface areas


def _check_dim(dim):
    if isinstance(dim, bool) or int(dim) != dim or dim < 1:
        raise ArgumentError(f"dimension must be a positive integer, got {dim!r}")
    return int(dim)


def log_hyperball_area(dim, r=1.0):
    """Natural log of the surface area of the radius-``r`` ball in ``dim`` dimensions."""
    d = _check_dim(dim)
    r = check_positive(r, "r")
    return math.log(2.0) + 0.5 * d * math.log(math.pi) - float(gammaln(0.5 * d)) + (d - 1) * math.log(r)


def hyperball_area(dim, r=1.0):
    return math.exp(log_hyperball_area(dim, r))


def log_hypercube_area(dim, r=1.0):
    """Natural log of the surface area of the cube of side ``2r``: ``d 2^d r^(d-1)``."""
    d = _check_dim(dim)
    r = check_positive(r, "r")
    return math.log(d) + d * math.log(2.0) + (d - 1) * math.log(r)


def hypercube_area(dim, r=1.0):
    return math.exp(log_hypercube_area(dim, r))


def log10_surface_ratio(dim):
    """``log10`` of hyperball over inscribing-hypercube surface area (independent of ``r``)."""
    return (log_hyperball_area(dim) - log_hypercube_area(dim)) / math.log(10.0)


def surface_ratio(dim):
    return 10.0 ** log10_surface_ratio(dim)


# ------------------------------------------------------------------ report


@dataclass
class MetricsReport:
    measure: str
    sim_fn: str
    hr: dict = field(default_factory=dict)
    recall: dict = field(default_factory=dict)
    inversions: dict = field(default_factory=dict)
    approx_mse: float = float("nan")
    avg_dim_std: float = float("nan")
    n_queries: int = 0

    def to_dict(self):
        return {
            "measure": self.measure,
            "sim_fn": self.sim_fn,
            "n_queries": self.n_queries,
            "hr": {f"HR@{k}": v for k, v in sorted(self.hr.items())},
            "recall": {f"R{t}@{k}": v for (t, k), v in sorted(self.recall.items())},
            "inversions": {f"INV@{k}": v for k, v in sorted(self.inversions.items())},
            "approx_mse": self.approx_mse,
            "avg_dim_std": self.avg_dim_std,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"
