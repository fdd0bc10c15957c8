"""Non-learning fast baselines used for the scalability comparison.

* :func:`fast_dtw` - multi-resolution DTW approximation (coarsen, solve,
  project, refine inside a window).
* :func:`greedy_frechet` - linear-time greedy traversal, an upper bound on the
  discrete Fréchet distance.
* :func:`hausdorff_early_break` - exact Hausdorff with random scan order and
  early termination of the inner loop.
"""

from dataclasses import dataclass

import numpy as np

from ..exceptions import ArgumentError
from ..validation import check_non_negative_int, check_points, check_random_seed
from . import _kernels


@dataclass(frozen=True)
class FastDtwConfig:
    radius: int = 1

    def __post_init__(self):
        check_non_negative_int(self.radius, "radius")


def coarsen(points):
    """Halve a sequence by averaging adjacent pairs; an odd tail point is kept as is."""
    n = points.shape[0]
    half = n // 2
    out = 0.5 * (points[0:2 * half:2] + points[1:2 * half:2])
    if n % 2:
        out = np.vstack([out, points[-1:]])
    return np.ascontiguousarray(out)


def _expand_window(path, n, m, radius):
    """Per-row column bounds of the projected, radius-expanded coarse path."""
    cn = (n + 1) // 2
    cm = (m + 1) // 2
    clo = np.full(cn, cm, dtype=np.int64)
    chi = np.full(cn, -1, dtype=np.int64)
    for ci, cj in path:
        for di in range(-radius, radius + 1):
            r = ci + di
            if 0 <= r < cn:
                clo[r] = min(clo[r], max(0, cj - radius))
                chi[r] = max(chi[r], min(cm - 1, cj + radius))
    lo = np.empty(n, dtype=np.int64)
    hi = np.empty(n, dtype=np.int64)
    for i in range(n):
        r = i // 2
        lo[i] = 2 * clo[r]
        hi[i] = min(m - 1, 2 * chi[r] + 1)
    return lo, hi


def _fast_dtw(a, b, radius):
    n, m = a.shape[0], b.shape[0]
    min_size = radius + 2
    if n <= min_size or m <= min_size:
        lo = np.zeros(n, dtype=np.int64)
        hi = np.full(n, m - 1, dtype=np.int64)
        return _kernels.windowed_dtw(a, b, lo, hi)
    _, coarse_path = _fast_dtw(coarsen(a), coarsen(b), radius)
    lo, hi = _expand_window(coarse_path, n, m, radius)
    return _kernels.windowed_dtw(a, b, lo, hi)


def fast_dtw(a, b, cfg=None, return_path=False):
    """Approximate DTW by recursive coarsening.

    Sequences are halved until one of them is at most ``radius + 2`` long,
    solved exactly there, and the warping path is projected back up one level
    at a time, widened by ``radius`` cells and re-solved inside that window.
    The result is the cost of a valid warping path, hence never below the
    exact DTW value.
    """
    cfg = cfg if cfg is not None else FastDtwConfig()
    if isinstance(cfg, int):
        cfg = FastDtwConfig(cfg)
    a = check_points(a, "a")
    b = check_points(b, "b")
    cost, path = _fast_dtw(a, b, cfg.radius)
    if return_path:
        return float(cost), [tuple(p) for p in path.tolist()]
    return float(cost)


def greedy_frechet(a, b):
    """Greedy monotone walk from the first to the last pair, taking the cheapest
    next pair at every step; returns the largest pair distance on the walk.

    Ties prefer the diagonal move, then advancing the side with more points
    left.
    """
    return float(_kernels.greedy_frechet_value(check_points(a, "a"), check_points(b, "b")))


def hausdorff_early_break(a, b, seed=0, return_count=False):
    """Exact Hausdorff distance with early-break inner scans.

    Both point orders are shuffled with ``seed`` first; randomised order makes
    an early break likely after a few comparisons.
    """
    a = check_points(a, "a")
    b = check_points(b, "b")
    rng = check_random_seed(seed)
    order_a = rng.permutation(a.shape[0]).astype(np.int64)
    order_b = rng.permutation(b.shape[0]).astype(np.int64)
    value, count = _kernels.hausdorff_eb_value(a, b, order_a, order_b)
    if return_count:
        return float(value), int(count)
    return float(value)


APPROXIMATIONS = {
    "dtw": lambda a, b, radius=1, seed=0: fast_dtw(a, b, FastDtwConfig(radius)),
    "hausdorff": lambda a, b, radius=1, seed=0: hausdorff_early_break(a, b, seed),
    "frechet": lambda a, b, radius=1, seed=0: greedy_frechet(a, b),
}


def approximate_distance(a, b, measure, radius=1, seed=0):
    """Dispatch to the non-learning method for ``measure``."""
    key = getattr(measure, "value", measure)
    if key not in APPROXIMATIONS:
        raise ArgumentError(f"no approximation for measure {measure!r}")
    return APPROXIMATIONS[key](a, b, radius=radius, seed=seed)
