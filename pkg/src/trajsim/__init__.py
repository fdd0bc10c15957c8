"""Trajectory similarity learning with a single-layer transformer encoder.

Exact and approximate trajectory distances live in :mod:`trajsim.distance`;
the encoder, its training loop and the retrieval metrics are re-exported
here.
"""

from .distance import (
    DistanceMeasure,
    GroundTruthMatrix,
    compute_matrix,
    dtw,
    fast_dtw,
    frechet_discrete,
    greedy_frechet,
    hausdorff,
    hausdorff_early_break,
    load_matrix,
    save_matrix,
)
from .encoder import (
    SimformerConfig,
    SimformerModel,
    encode,
    encode_batch,
    export_attention,
    init_model,
    load_checkpoint,
    save_checkpoint,
)
from .estimator import SimformerEncoder, TrajectoryScaler
from .evaluation import evaluate_representations
from .exceptions import (
    ArgumentError,
    ConfigError,
    FormatError,
    LengthError,
    NumericError,
    ParseError,
    TrajsimError,
)
from .metrics import (
    MetricsReport,
    concentration_stats,
    hr_at_k,
    inversions_at_k,
    recall_t_at_k,
    similarity_histogram,
    surface_ratio,
)
from .search import QueryResult, benchmark_query, topk_ground_truth, topk_repr
from .similarity import sim_chebyshev, sim_cosine, sim_euclidean, tailored_sim
from .training import PairSample, TrainConfig, sample_pairs, train
from .trajectory import (
    Dataset,
    Trajectory,
    generate_synthetic,
    normalize,
    parse_dataset,
    split,
    write_dataset,
)

__all__ = [
    "ArgumentError",
    "ConfigError",
    "Dataset",
    "DistanceMeasure",
    "FormatError",
    "GroundTruthMatrix",
    "LengthError",
    "MetricsReport",
    "NumericError",
    "PairSample",
    "ParseError",
    "QueryResult",
    "SimformerConfig",
    "SimformerEncoder",
    "SimformerModel",
    "TrainConfig",
    "Trajectory",
    "TrajectoryScaler",
    "TrajsimError",
    "benchmark_query",
    "compute_matrix",
    "concentration_stats",
    "dtw",
    "encode",
    "encode_batch",
    "evaluate_representations",
    "export_attention",
    "fast_dtw",
    "frechet_discrete",
    "generate_synthetic",
    "greedy_frechet",
    "hausdorff",
    "hausdorff_early_break",
    "hr_at_k",
    "init_model",
    "inversions_at_k",
    "load_checkpoint",
    "load_matrix",
    "normalize",
    "parse_dataset",
    "recall_t_at_k",
    "sample_pairs",
    "save_checkpoint",
    "save_matrix",
    "sim_chebyshev",
    "sim_cosine",
    "sim_euclidean",
    "similarity_histogram",
    "split",
    "surface_ratio",
    "tailored_sim",
    "topk_ground_truth",
    "topk_repr",
    "train",
    "write_dataset",
]
