"""Siamese training of the encoder against ground-truth similarities."""

import csv
import io
from dataclasses import dataclass

import numpy as np

from .encoder import backward_batch, encode_batch, forward_batch
from .evaluation import hr_at_10
from .exceptions import ArgumentError, NumericError
from .metrics import mse
from .numeric import AdamState, adam_step
from .similarity import pair_similarity, pair_similarity_backward
from .validation import check_random_seed

__all__ = [
    "PairSample",
    "TrainConfig",
    "EpochRecord",
    "sample_pairs",
    "mse_loss",
    "pair_loss_and_grads",
    "train",
    "history_csv",
]


@dataclass(frozen=True)
class PairSample:
    anchor_id: int
    other_id: int
    gt_sim: float

    def __post_init__(self):
        if self.anchor_id == self.other_id:
            raise ArgumentError(f"a pair needs two different trajectories, got {self.anchor_id} twice")


@dataclass(frozen=True)
class TrainConfig:
    """Optimisation settings.

    ``max_steps`` caps optimiser updates across epochs (``None`` = no cap).
    ``bucket_size`` is how many distinct trajectories of a batch are padded
    together; batches are cut into length-sorted groups of that size, which
    only saves padding work and does not change any representation.
    """

    lr: float = 5e-4
    batch_size: int = 20
    pairs_per_anchor: int = 20
    max_epochs: int = 200
    patience: int = 20
    seed: int = 0
    max_steps: int = None
    bucket_size: int = 8

    def __post_init__(self):
        for name in ("batch_size", "pairs_per_anchor", "bucket_size"):
            if getattr(self, name) < 1:
                raise ArgumentError(f"{name} must be >= 1")
        if self.max_epochs < 0 or self.patience < 1:
            raise ArgumentError("max_epochs must be >= 0 and patience >= 1")
        if self.lr <= 0:
            raise ArgumentError("lr must be positive")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    val_hr10: float


def sample_pairs(train_ids, S, seed, matrix):
    """``S`` distinct random partners for every anchor in ``train_ids``.

    Partners come from ``train_ids`` minus the anchor, without replacement,
    and carry the ground-truth similarity from ``matrix``.
    """
    ids = np.asarray(train_ids, dtype=np.int64)
    if S < 1 or S >= ids.shape[0]:
        raise ArgumentError(f"S={S} must be in [1, {ids.shape[0] - 1}] for {ids.shape[0]} training ids")
    rng = check_random_seed(seed)
    pairs = []
    for pos, a in enumerate(ids):
        others = np.delete(ids, pos)
        chosen = others[rng.choice(others.shape[0], size=S, replace=False)]
        sims = matrix.similarities([a], chosen)[0]
        pairs.extend(PairSample(int(a), int(b), float(s)) for b, s in zip(chosen, sims))
    return pairs


def mse_loss(preds, targets):
    """Mean squared difference."""
    return mse(preds, targets)


def pair_loss_and_grads(model, points, anchors, others, targets, sim_name, bucket_size=None):
    """MSE between learned and target similarities of a batch of pairs.

    ``points`` maps trajectory id to a point array. Each distinct trajectory
    is encoded once; gradients from both sides of every pair flow into the
    shared parameters.

    Returns ``(loss, grads, preds)``.
    """
    anchors = np.asarray(anchors, dtype=np.int64)
    others = np.asarray(others, dtype=np.int64)
    targets = np.asarray(targets, dtype=np.float64)
    uniq = np.unique(np.concatenate([anchors, others]))
    uniq = uniq[np.argsort([points[i].shape[0] for i in uniq], kind="stable")]
    size = bucket_size or len(uniq)
    groups = [uniq[i:i + size] for i in range(0, len(uniq), size)]
    reps = np.empty((len(uniq), model.config.d))
    caches = []
    row = {}
    start = 0
    for g in groups:
        r, c = forward_batch(model, [points[i] for i in g], keep_cache=True)
        reps[start:start + len(g)] = r
        caches.append((start, len(g), c))
        row.update({int(i): start + j for j, i in enumerate(g)})
        start += len(g)
    ia = np.array([row[i] for i in anchors])
    ib = np.array([row[i] for i in others])
    V1, V2 = reps[ia], reps[ib]
    s = pair_similarity(sim_name, V1, V2)
    diff = s - targets
    loss = float(np.mean(diff * diff))
    ds = 2.0 * diff / diff.shape[0]
    g1, g2 = pair_similarity_backward(sim_name, V1, V2, s, ds)
    dreps = np.zeros_like(reps)
    np.add.at(dreps, ia, g1)
    np.add.at(dreps, ib, g2)
    grads = None
    for start, n, c in caches:
        g = backward_batch(model, c, dreps[start:start + n])
        grads = g if grads is None else {k: grads[k] + g[k] for k in grads}
    return loss, grads, s


def _points_by_id(dataset):
    return {t.id: t.points for t in getattr(dataset, "trajectories", dataset)}


def train(model, dataset, gt_matrix, cfg, train_ids, val_ids=(), pairs=None, log=None):
    """Fit ``model`` in place and return ``(best_model, history)``.

    Each epoch walks a shuffled order of the static pair set in batches of
    ``cfg.batch_size``. After every epoch the validation HR@10 is measured
    and the best epoch's parameters are kept; training stops after
    ``cfg.patience`` epochs without improvement, after ``cfg.max_epochs``
    epochs, or once ``cfg.max_steps`` updates have been made. Without
    validation ids the lowest training loss selects the kept epoch.

    Raises
    ------
    NumericError
        On a non-finite loss, reporting the global step number.
    """
    sim_name = model.config.resolved_sim
    points = _points_by_id(dataset)
    if pairs is None:
        pairs = sample_pairs(train_ids, cfg.pairs_per_anchor, cfg.seed, gt_matrix)
    anchors = np.array([p.anchor_id for p in pairs], dtype=np.int64)
    others = np.array([p.other_id for p in pairs], dtype=np.int64)
    targets = np.array([p.gt_sim for p in pairs])
    val_ids = np.asarray(val_ids, dtype=np.int64)
    use_val = val_ids.shape[0] >= 2
    rng = check_random_seed(cfg.seed + 1)
    opt = AdamState(model.params, lr=cfg.lr)
    history = []
    best = model.copy()
    best_score = -np.inf
    stale = 0
    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(len(pairs))
        losses = []
        for b in range(0, len(order), cfg.batch_size):
            if cfg.max_steps is not None and model.step >= cfg.max_steps:
                break
            idx = order[b:b + cfg.batch_size]
            model.step += 1
            try:
                loss, grads, _ = pair_loss_and_grads(
                    model, points, anchors[idx], others[idx], targets[idx], sim_name, cfg.bucket_size
                )
            except NumericError as exc:
                raise NumericError(exc.args[0], step=model.step) from None
            if not np.isfinite(loss) or not all(np.isfinite(g).all() for g in grads.values()):
                raise NumericError("non-finite training loss", step=model.step)
            adam_step(model.params, grads, opt)
            losses.append(loss)
        if not losses:
            break
        train_loss = float(np.mean(losses))
        val = float("nan")
        if use_val:
            try:
                reps = encode_batch(model, [points[i] for i in val_ids], batch_size=16)
            except NumericError as exc:
                raise NumericError(exc.args[0], step=model.step) from None
            val = hr_at_10(reps, gt_matrix, val_ids, sim_name)
        history.append(EpochRecord(epoch, train_loss, val))
        if log is not None:
            log(history[-1])
        score = val if use_val else -train_loss
        if score > best_score:
            best_score = score
            best = model.copy()
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break
    return best, history


def history_csv(history):
    """History as CSV text with header ``epoch,train_loss,val_hr10``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["epoch", "train_loss", "val_hr10"])
    for rec in history:
        w.writerow([rec.epoch, repr(rec.train_loss), repr(rec.val_hr10)])
    return buf.getvalue()
