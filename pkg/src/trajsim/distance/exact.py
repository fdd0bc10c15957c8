"""Exact quadratic-time trajectory distances."""

import enum
import math

import numpy as np

from ..exceptions import ArgumentError
from ..validation import check_points
from . import _kernels


class DistanceMeasure(enum.Enum):
    """Free-space trajectory distance.

    ``code`` is the on-disk byte used by the ground-truth matrix format and
    ``default_alpha`` the decay rate of the similarity transform.
    """

    DTW = "dtw"
    HAUSDORFF = "hausdorff"
    FRECHET = "frechet"

    @property
    def code(self):
        return _CODES[self]

    @property
    def default_alpha(self):
        return 16.0 if self is DistanceMeasure.DTW else 8.0

    @classmethod
    def from_code(cls, code):
        for m, c in _CODES.items():
            if c == code:
                return m
        raise ArgumentError(f"unknown measure code {code}")

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ArgumentError(
                f"unknown distance measure {value!r}; expected one of dtw, hausdorff, frechet"
            ) from None


_CODES = {
    DistanceMeasure.DTW: _kernels.MEASURE_DTW,
    DistanceMeasure.HAUSDORFF: _kernels.MEASURE_HAUSDORFF,
    DistanceMeasure.FRECHET: _kernels.MEASURE_FRECHET,
}


def dtw(a, b):
    """Dynamic time warping with Euclidean (not squared) point cost."""
    return float(_kernels.dtw_value(check_points(a, "a"), check_points(b, "b")))


def dtw_path(a, b):
    """DTW value plus one optimal warping path, from the retained full grid.

    Returns
    -------
    cost : float
    path : list of (i, j)
        Monotone index pairs from ``(0, 0)`` to ``(n-1, m-1)``.
    """
    a = check_points(a, "a")
    b = check_points(b, "b")
    D = _kernels.dtw_grid(a, b)
    i, j = D.shape[0] - 1, D.shape[1] - 1
    path = [(i, j)]
    while i > 0 or j > 0:
        cands = []
        if i > 0 and j > 0:
            cands.append((D[i - 1, j - 1], i - 1, j - 1))
        if i > 0:
            cands.append((D[i - 1, j], i - 1, j))
        if j > 0:
            cands.append((D[i, j - 1], i, j - 1))
        _, i, j = min(cands, key=lambda c: c[0])
        path.append((i, j))
    path.reverse()
    return float(D[-1, -1]), path


def hausdorff(a, b):
    """Symmetric Hausdorff distance by the naive double scan."""
    return float(_kernels.hausdorff_value(check_points(a, "a"), check_points(b, "b")))


def frechet_discrete(a, b):
    """Discrete Fréchet (coupling) distance."""
    return float(_kernels.frechet_value(check_points(a, "a"), check_points(b, "b")))


def distance(a, b, measure):
    measure = DistanceMeasure.parse(measure)
    return float(_kernels.pair_value(check_points(a, "a"), check_points(b, "b"), measure.code))


def ground_truth_similarity(dist, alpha):
    """``exp(-alpha * dist)``, the similarity target derived from a distance."""
    if not alpha > 0:
        raise ArgumentError(f"alpha must be positive, got {alpha}")
    if not dist >= 0:
        raise ArgumentError(f"distance must be non-negative, got {dist}")
    return math.exp(-alpha * dist)


def ground_truth_similarities(dists, alpha):
    """Vectorised :func:`ground_truth_similarity`."""
    d = np.asarray(dists, dtype=np.float64)
    if not alpha > 0:
        raise ArgumentError(f"alpha must be positive, got {alpha}")
    if (d < 0).any() or not np.isfinite(d).all():
        raise ArgumentError("distances must be finite and non-negative")
    return np.exp(-alpha * d)
