"""scikit-learn compatible wrappers.

``X`` is always a sequence of trajectories: ``(n_i, 2)`` arrays,
:class:`~trajsim.trajectory.Trajectory` objects, or a
:class:`~trajsim.trajectory.Dataset`.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .distance import DistanceMeasure, GroundTruthMatrix, compute_matrix
from .distance.matrix import resolve_scale
from .encoder import SimformerConfig, encode_batch, init_model
from .evaluation import hr_at_10
from .exceptions import ArgumentError
from .similarity import similarity_to_many
from .training import TrainConfig, train
from .trajectory import Dataset, Trajectory
from .validation import check_points, check_random_seed

__all__ = ["SimformerEncoder", "TrajectoryScaler", "as_point_list"]


def as_point_list(X):
    """Validated list of ``(n_i, 2)`` float arrays from any accepted ``X``."""
    items = getattr(X, "trajectories", X)
    if isinstance(items, np.ndarray) and items.ndim == 2:
        raise ArgumentError("X must be a sequence of trajectories, not a single (n, 2) array")
    return [check_points(getattr(t, "points", t), f"X[{i}]") for i, t in enumerate(items)]


def _as_dataset(points):
    return Dataset("fit", tuple(Trajectory(i, p) for i, p in enumerate(points)))


class SimformerEncoder(TransformerMixin, BaseEstimator):
    """Learn fixed-length representations whose similarity tracks a trajectory distance.

    Parameters
    ----------
    measure : {"dtw", "hausdorff", "frechet"}
    sim_fn : {"tailored", "cosine", "chebyshev", "euclidean"}
    d, heads, layers, d_ff, max_len : encoder shape
    lr, batch_size, pairs_per_anchor, max_epochs, patience, max_steps :
        training schedule, see :class:`~trajsim.training.TrainConfig`
    alpha : float, optional
        Decay of the target similarity; measure default when omitted.
    scale : {"max", "mean", "none"} or float
        Distance unit of the target similarity when ``fit`` computes the
        distance matrix itself.
    validation_fraction : float
        Share of the fitted trajectories held out to select the best epoch
        by HR@10. With 0 the lowest training loss decides.
    random_state : int

    Attributes
    ----------
    model_ : SimformerModel
    history_ : list of EpochRecord
    ground_truth_ : GroundTruthMatrix
    n_features_out_ : int
    """

    def __init__(self, measure="dtw", sim_fn="tailored", d=128, heads=16, layers=1, d_ff=None,
                 max_len=200, lr=5e-4, batch_size=20, pairs_per_anchor=20, max_epochs=200,
                 patience=20, max_steps=None, alpha=None, scale="max", validation_fraction=0.0,
                 random_state=0):
        self.measure = measure
        self.sim_fn = sim_fn
        self.d = d
        self.heads = heads
        self.layers = layers
        self.d_ff = d_ff
        self.max_len = max_len
        self.lr = lr
        self.batch_size = batch_size
        self.pairs_per_anchor = pairs_per_anchor
        self.max_epochs = max_epochs
        self.patience = patience
        self.max_steps = max_steps
        self.alpha = alpha
        self.scale = scale
        self.validation_fraction = validation_fraction
        self.random_state = random_state

    def _target(self, points, y):
        measure = DistanceMeasure.parse(self.measure)
        if y is None:
            return compute_matrix(points, measure, alpha=self.alpha, scale=self.scale)
        if isinstance(y, GroundTruthMatrix):
            gt = y
        else:
            D = np.asarray(y, dtype=np.float64)
            alpha = measure.default_alpha if self.alpha is None else self.alpha
            gt = GroundTruthMatrix(measure, alpha, D)
            scale = self.scale
            if scale not in (None, "none"):
                gt = gt.with_scale(resolve_scale(scale, gt.distances))
        if gt.n != len(points):
            raise ArgumentError(f"y covers {gt.n} trajectories but X has {len(points)}")
        return gt

    def fit(self, X, y=None):
        """Train on ``X``.

        ``y`` is an ``(n, n)`` distance matrix, a ``GroundTruthMatrix``, or
        ``None`` to compute exact distances for ``measure``.
        """
        points = as_point_list(X)
        if len(points) < 2:
            raise ArgumentError("need at least two trajectories to fit")
        gt = self._target(points, y)
        cfg = SimformerConfig(
            d=self.d, heads=self.heads, layers=self.layers, d_ff=self.d_ff,
            max_len=self.max_len, sim_fn=self.sim_fn, measure=gt.measure.value,
        )
        n = len(points)
        perm = check_random_seed(self.random_state).permutation(n)
        n_val = int(round(self.validation_fraction * n))
        if n_val == 1 or n - n_val < 2:
            raise ArgumentError(f"validation_fraction={self.validation_fraction} leaves an unusable split of {n}")
        val_ids = np.sort(perm[:n_val])
        train_ids = np.sort(perm[n_val:])
        tcfg = TrainConfig(
            lr=self.lr, batch_size=self.batch_size,
            pairs_per_anchor=min(self.pairs_per_anchor, len(train_ids) - 1),
            max_epochs=self.max_epochs, patience=self.patience, seed=self.random_state,
            max_steps=self.max_steps,
        )
        model = init_model(cfg, self.random_state)
        self.model_, self.history_ = train(model, _as_dataset(points), gt, tcfg, train_ids, val_ids)
        self.ground_truth_ = gt
        self.n_features_out_ = cfg.d
        return self

    def transform(self, X):
        """Representations of ``X`` as an ``(n, d)`` array."""
        check_is_fitted(self, "model_")
        return encode_batch(self.model_, as_point_list(X), batch_size=32)

    def predict_similarity(self, X, Y=None):
        """Learned similarity between every trajectory of ``X`` and of ``Y`` (default ``X``)."""
        check_is_fitted(self, "model_")
        A = self.transform(X)
        B = A if Y is None else self.transform(Y)
        name = self.model_.config.resolved_sim
        return np.vstack([similarity_to_many(name, a, B) for a in A]) if len(A) else np.empty((0, len(B)))

    def score(self, X, y=None):
        """Mean HR@10 of learned search within ``X`` against exact distances ``y``."""
        check_is_fitted(self, "model_")
        points = as_point_list(X)
        gt = self._target(points, y)
        reps = self.transform(points)
        return hr_at_10(reps, gt, np.arange(len(points)), self.model_.config.resolved_sim)

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "model_")
        return np.array([f"simformer{i}" for i in range(self.n_features_out_)], dtype=object)


class TrajectoryScaler(TransformerMixin, BaseEstimator):
    """Z-score coordinates with the population mean and standard deviation of
    every point seen in ``fit``, pooled across trajectories."""

    def fit(self, X, y=None):
        pts = np.vstack(as_point_list(X))
        std = pts.std(axis=0)
        if np.any(std == 0):
            raise ArgumentError("a coordinate is constant across all points; cannot scale")
        self.mean_ = pts.mean(axis=0)
        self.scale_ = std
        return self

    def transform(self, X):
        check_is_fitted(self, "mean_")
        return [(p - self.mean_) / self.scale_ for p in as_point_list(X)]

    def inverse_transform(self, X):
        check_is_fitted(self, "mean_")
        return [p * self.scale_ + self.mean_ for p in as_point_list(X)]

