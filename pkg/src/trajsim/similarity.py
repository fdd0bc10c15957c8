"""Representation similarity functions and the per-measure tailoring rule.

Each function maps two non-negative representation vectors to a score in
``[0, 1]``:

* ``euclidean``: ``exp(-||v1 - v2||_2)``
* ``chebyshev``: ``exp(-max_k |v1_k - v2_k|)``
* ``cosine``:    ``v1 . v2 / (||v1|| ||v2|| + 1e-8)``

The batched ``pair_*`` helpers work on row-aligned ``(P, d)`` arrays and come
with gradients for training.
"""

import numpy as np

from .exceptions import ArgumentError, ShapeError

COSINE_EPS = 1e-8
SIM_FUNCTIONS = ("euclidean", "cosine", "chebyshev")

__all__ = [
    "SIM_FUNCTIONS",
    "sim_euclidean",
    "sim_chebyshev",
    "sim_cosine",
    "tailored_sim",
    "resolve_sim",
    "get_sim",
    "pair_similarity",
    "pair_similarity_backward",
    "similarity_to_many",
]


def _pair(v1, v2):
    a = np.asarray(v1, dtype=np.float64).ravel()
    b = np.asarray(v2, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ShapeError(f"vector lengths differ: {a.shape[0]} vs {b.shape[0]}")
    return a, b


def sim_euclidean(v1, v2):
    a, b = _pair(v1, v2)
    return float(np.exp(-np.sqrt(np.sum((a - b) ** 2))))


def sim_chebyshev(v1, v2):
    a, b = _pair(v1, v2)
    if a.size == 0:
        return 1.0
    return float(np.exp(-np.max(np.abs(a - b))))


def sim_cosine(v1, v2):
    a, b = _pair(v1, v2)
    return float(a @ b / (np.sqrt(a @ a) * np.sqrt(b @ b) + COSINE_EPS))


_SINGLE = {"euclidean": sim_euclidean, "cosine": sim_cosine, "chebyshev": sim_chebyshev}


def tailored_sim(measure):
    """Similarity function suited to a distance measure.

    DTW sums costs along the whole warping path, so it gets cosine, which
    weighs every dimension; Hausdorff and Fréchet are decided by a single
    worst pair, so they get the max-coordinate (Chebyshev) form.
    """
    key = getattr(measure, "value", str(measure).lower())
    if key == "dtw":
        return "cosine"
    if key in ("hausdorff", "frechet"):
        return "chebyshev"
    raise ArgumentError(f"unknown distance measure {measure!r}")


def resolve_sim(name, measure=None):
    """Concrete function name for ``name``, expanding ``"tailored"``."""
    name = str(name).lower()
    if name == "tailored":
        if measure is None:
            raise ArgumentError("the tailored similarity needs a distance measure")
        return tailored_sim(measure)
    if name not in _SINGLE:
        raise ArgumentError(f"unknown similarity function {name!r}")
    return name


def get_sim(name, measure=None):
    return _SINGLE[resolve_sim(name, measure)]


def pair_similarity(name, V1, V2):
    """Row-wise similarity of two ``(P, d)`` arrays."""
    if V1.shape != V2.shape:
        raise ShapeError(f"shape mismatch {V1.shape} vs {V2.shape}")
    if name == "euclidean":
        diff = V1 - V2
        return np.exp(-np.sqrt((diff * diff).sum(axis=1)))
    if name == "chebyshev":
        return np.exp(-np.abs(V1 - V2).max(axis=1))
    if name == "cosine":
        n1 = np.sqrt((V1 * V1).sum(axis=1))
        n2 = np.sqrt((V2 * V2).sum(axis=1))
        return (V1 * V2).sum(axis=1) / (n1 * n2 + COSINE_EPS)
    raise ArgumentError(f"unknown similarity function {name!r}")


def pair_similarity_backward(name, V1, V2, s, ds):
    """Gradients of ``sum(ds * pair_similarity(name, V1, V2))`` w.r.t. V1 and V2."""
    ds = ds[:, None]
    if name == "euclidean":
        diff = V1 - V2
        r = np.sqrt((diff * diff).sum(axis=1))[:, None]
        # d exp(-r) / d v1 = -exp(-r) * diff / r; zero at r == 0 by convention.
        safe = np.where(r > 0, r, 1.0)
        g = np.where(r > 0, -s[:, None] * diff / safe, 0.0) * ds
        return g, -g
    if name == "chebyshev":
        diff = V1 - V2
        k = np.abs(diff).argmax(axis=1)
        rows = np.arange(V1.shape[0])
        g = np.zeros_like(V1)
        g[rows, k] = -s * np.sign(diff[rows, k])
        g *= ds
        return g, -g
    if name == "cosine":
        n1 = np.sqrt((V1 * V1).sum(axis=1))[:, None]
        n2 = np.sqrt((V2 * V2).sum(axis=1))[:, None]
        dot = (V1 * V2).sum(axis=1)[:, None]
        den = n1 * n2 + COSINE_EPS
        u1 = np.where(n1 > 0, V1 / np.where(n1 > 0, n1, 1.0), 0.0)
        u2 = np.where(n2 > 0, V2 / np.where(n2 > 0, n2, 1.0), 0.0)
        g1 = (V2 / den - dot * n2 * u1 / (den * den)) * ds
        g2 = (V1 / den - dot * n1 * u2 / (den * den)) * ds
        return g1, g2
    raise ArgumentError(f"unknown similarity function {name!r}")


def similarity_to_many(name, query, reps):
    """Similarity of one ``(d,)`` query against every row of ``reps``."""
    reps = np.asarray(reps, dtype=np.float64)
    q = np.asarray(query, dtype=np.float64).ravel()
    if reps.ndim != 2 or reps.shape[1] != q.shape[0]:
        raise ShapeError(f"query of length {q.shape[0]} against reps of shape {reps.shape}")
    if name == "euclidean":
        diff = reps - q
        return np.exp(-np.sqrt((diff * diff).sum(axis=1)))
    if name == "chebyshev":
        return np.exp(-np.abs(reps - q).max(axis=1))
    if name == "cosine":
        return (reps @ q) / (np.sqrt((reps * reps).sum(axis=1)) * np.sqrt(q @ q) + COSINE_EPS)
    raise ArgumentError(f"unknown similarity function {name!r}")
