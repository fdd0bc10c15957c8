"""Exact and approximate free-space trajectory distances."""

from .approx import (
    FastDtwConfig,
    approximate_distance,
    coarsen,
    fast_dtw,
    greedy_frechet,
    hausdorff_early_break,
)
from .exact import (
    DistanceMeasure,
    distance,
    dtw,
    dtw_path,
    frechet_discrete,
    ground_truth_similarities,
    ground_truth_similarity,
    hausdorff,
)
from .matrix import (
    GroundTruthMatrix,
    compute_matrix,
    distances_to_all,
    load_matrix,
    resolve_scale,
    save_matrix,
)

__all__ = [
    "DistanceMeasure",
    "FastDtwConfig",
    "GroundTruthMatrix",
    "approximate_distance",
    "coarsen",
    "compute_matrix",
    "distance",
    "distances_to_all",
    "dtw",
    "dtw_path",
    "fast_dtw",
    "frechet_discrete",
    "greedy_frechet",
    "ground_truth_similarities",
    "ground_truth_similarity",
    "hausdorff",
    "hausdorff_early_break",
    "load_matrix",
    "resolve_scale",
    "save_matrix",
]
