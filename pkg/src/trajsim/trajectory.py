"""Trajectory data model, file I/O, preprocessing filters and synthetic data.

A trajectory is an ordered ``(n, 2)`` array of ``(lon, lat)`` points. All
containers here are immutable value objects: every operation returns a new
:class:`Dataset` and never touches its input.
"""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import (
    AlreadyNormalizedError,
    ArgumentError,
    DegenerateDataError,
    EmptyDatasetError,
    ParseError,
)
from .validation import check_random_seed

__all__ = [
    "Trajectory",
    "NormStats",
    "Dataset",
    "SplitSpec",
    "parse_dataset",
    "serialize_dataset",
    "write_dataset",
    "filter_by_length",
    "filter_by_bbox",
    "normalize",
    "split",
    "generate_synthetic",
    "augment_noise",
    "write_norm_stats",
    "read_norm_stats",
]

SYNTHETIC_STEP_SCALE = 0.02


def _frozen_points(points):
    arr = np.array(points, dtype=np.float64, copy=True).reshape(-1, 2)
    arr.setflags(write=False)
    return arr


class Trajectory:
    """An identified, ordered sequence of 2-D points.

    Parameters
    ----------
    id : int
        Non-negative identifier, unique within a dataset.
    points : array_like of shape (n, 2)
        ``(lon, lat)`` pairs; ``n >= 1`` and every coordinate finite.
    """

    __slots__ = ("id", "points")

    def __init__(self, id, points):
        arr = _frozen_points(points)
        if isinstance(id, bool) or int(id) != id or id < 0:
            raise ArgumentError(f"trajectory id must be a non-negative integer, got {id!r}")
        if arr.shape[0] == 0:
            raise ArgumentError("trajectory must contain at least one point")
        if not np.isfinite(arr).all():
            raise ArgumentError("trajectory coordinates must be finite")
        object.__setattr__(self, "id", int(id))
        object.__setattr__(self, "points", arr)

    def __setattr__(self, name, value):
        raise AttributeError("Trajectory is immutable")

    def __len__(self):
        return self.points.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented
        return self.id == other.id and np.array_equal(self.points, other.points)

    def __hash__(self):
        return hash((self.id, self.points.tobytes()))

    def __repr__(self):
        return f"Trajectory(id={self.id}, n={len(self)})"

    def with_id(self, new_id):
        return Trajectory(new_id, self.points)


@dataclass(frozen=True)
class NormStats:
    mean_lon: float
    mean_lat: float
    std_lon: float
    std_lat: float

    def to_dict(self):
        return {
            "mean_lon": self.mean_lon,
            "mean_lat": self.mean_lat,
            "std_lon": self.std_lon,
            "std_lat": self.std_lat,
        }

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(*(float(d[k]) for k in ("mean_lon", "mean_lat", "std_lon", "std_lat")))
        except (KeyError, TypeError, ValueError) as exc:
            raise ArgumentError(f"invalid normalization stats: {exc}") from None

    def apply(self, points):
        pts = np.asarray(points, dtype=np.float64)
        return (pts - [self.mean_lon, self.mean_lat]) / [self.std_lon, self.std_lat]


@dataclass(frozen=True, eq=False)
class Dataset:
    """A named collection of trajectories with contiguous ids ``0..n-1``."""

    name: str
    trajectories: tuple
    normalized: bool = False
    norm_stats: NormStats = None

    def __post_init__(self):
        object.__setattr__(self, "trajectories", tuple(self.trajectories))
        for i, t in enumerate(self.trajectories):
            if t.id != i:
                raise ArgumentError(f"trajectory ids must be contiguous from 0; position {i} has id {t.id}")
        if self.normalized and self.norm_stats is None:
            raise ArgumentError("a normalized dataset must carry its norm_stats")

    def __len__(self):
        return len(self.trajectories)

    def __iter__(self):
        return iter(self.trajectories)

    def __getitem__(self, idx):
        return self.trajectories[idx]

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.name == other.name
            and self.normalized == other.normalized
            and self.norm_stats == other.norm_stats
            and self.trajectories == other.trajectories
        )

    @property
    def lengths(self):
        return np.array([len(t) for t in self.trajectories], dtype=np.int64)

    def points_list(self):
        return [t.points for t in self.trajectories]

    def subset(self, ids, name=None):
        """Dataset of the given trajectory ids, re-numbered from 0 in the given order."""
        trajs = [self.trajectories[i].with_id(k) for k, i in enumerate(ids)]
        return Dataset(name or self.name, trajs, self.normalized, self.norm_stats)

    @classmethod
    def from_points(cls, name, point_arrays, normalized=False, norm_stats=None):
        return cls(name, [Trajectory(i, p) for i, p in enumerate(point_arrays)], normalized, norm_stats)


@dataclass(frozen=True)
class SplitSpec:
    train_ids: tuple
    val_ids: tuple
    test_ids: tuple
    seed: int = field(default=0)

    def to_dict(self):
        return {
            "train_ids": list(self.train_ids),
            "val_ids": list(self.val_ids),
            "test_ids": list(self.test_ids),
            "seed": self.seed,
        }


# --------------------------------------------------------------------- I/O


def _parse_csv_line(line, lineno, path):
    fields = line.split(";")
    try:
        int(fields[0])
    except ValueError:
        raise ParseError(f"invalid trajectory id {fields[0]!r}", lineno, path) from None
    if len(fields) < 2:
        raise ParseError("trajectory has no points", lineno, path)
    points = []
    for tok in fields[1:]:
        parts = tok.split(",")
        if len(parts) != 2:
            raise ParseError(f"expected 'lon,lat', got {tok!r}", lineno, path)
        try:
            lon, lat = float(parts[0]), float(parts[1])
        except ValueError:
            raise ParseError(f"invalid coordinate in {tok!r}", lineno, path) from None
        if not (math.isfinite(lon) and math.isfinite(lat)):
            raise ParseError(f"non-finite coordinate in {tok!r}", lineno, path)
        points.append((lon, lat))
    return points


def _parse_jsonl_line(line, lineno, path):
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", lineno, path) from None
    if not isinstance(obj, dict) or "id" not in obj or "points" not in obj:
        raise ParseError("expected an object with 'id' and 'points'", lineno, path)
    if not isinstance(obj["id"], int) or isinstance(obj["id"], bool):
        raise ParseError("'id' must be an integer", lineno, path)
    pts = obj["points"]
    if not isinstance(pts, list) or not pts:
        raise ParseError("'points' must be a non-empty array", lineno, path)
    points = []
    for p in pts:
        if (
            not isinstance(p, list)
            or len(p) != 2
            or not all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in p)
        ):
            raise ParseError(f"invalid point {p!r}", lineno, path)
        lon, lat = float(p[0]), float(p[1])
        if not (math.isfinite(lon) and math.isfinite(lat)):
            raise ParseError(f"non-finite coordinate in {p!r}", lineno, path)
        points.append((lon, lat))
    return points


def parse_dataset(path, format="csv", name=None):
    """Read a trajectory file.

    Ids are assigned by line order starting at 0; the id stored in each record
    is validated but not used.

    Raises
    ------
    ParseError
        On the first malformed line, naming its 1-based line number.
    EmptyDatasetError
        If the file holds no records.
    """
    if format not in ("csv", "jsonl"):
        raise ArgumentError(f"unknown trajectory format {format!r}")
    path = Path(path)
    parse_line = _parse_csv_line if format == "csv" else _parse_jsonl_line
    text = path.read_text(encoding="utf-8")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    trajs = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            raise ParseError("blank line", lineno, str(path))
        trajs.append(Trajectory(len(trajs), parse_line(line, lineno, str(path))))
    if not trajs:
        raise EmptyDatasetError(f"{path}: no trajectories")
    return Dataset(name or path.stem, trajs)


def serialize_dataset(dataset, format="csv"):
    """Text form of ``dataset``; floats use ``repr`` so parsing round-trips exactly."""
    out = []
    if format == "csv":
        for t in dataset:
            out.append(";".join([str(t.id)] + [f"{lon!r},{lat!r}" for lon, lat in t.points.tolist()]))
    elif format == "jsonl":
        for t in dataset:
            out.append(json.dumps({"id": t.id, "points": t.points.tolist()}))
    else:
        raise ArgumentError(f"unknown trajectory format {format!r}")
    return "".join(line + "\n" for line in out)


def write_dataset(dataset, path, format="csv"):
    path = Path(path)
    path.write_text(serialize_dataset(dataset, format), encoding="utf-8")
    if dataset.normalized:
        write_norm_stats(dataset.norm_stats, path)
    return path


def _norm_path(dataset_path):
    dataset_path = Path(dataset_path)
    return dataset_path.with_name(dataset_path.name + ".norm.json")


def write_norm_stats(stats, dataset_path):
    p = _norm_path(dataset_path)
    p.write_text(json.dumps(stats.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return p


def read_norm_stats(dataset_path):
    """Norm stats stored next to ``dataset_path``, or ``None`` if there is no sidecar."""
    p = _norm_path(dataset_path)
    if not p.exists():
        return None
    return NormStats.from_dict(json.loads(p.read_text(encoding="utf-8")))


# ---------------------------------------------------------- preprocessing


def _renumbered(dataset, keep):
    trajs = [t.with_id(i) for i, t in enumerate(keep)]
    return Dataset(dataset.name, trajs, dataset.normalized, dataset.norm_stats)


def filter_by_length(dataset, min_len=10, max_len=200):
    """Keep trajectories with ``min_len <= n <= max_len``; ids are re-assigned."""
    if min_len > max_len:
        raise ArgumentError(f"min_len ({min_len}) > max_len ({max_len})")
    return _renumbered(dataset, [t for t in dataset if min_len <= len(t) <= max_len])


def filter_by_bbox(dataset, lon_min, lon_max, lat_min, lat_max):
    """Keep trajectories whose every point lies inside the closed box."""
    if not (lon_min < lon_max and lat_min < lat_max):
        raise ArgumentError("bounding box must satisfy lon_min < lon_max and lat_min < lat_max")
    keep = []
    for t in dataset:
        lon, lat = t.points[:, 0], t.points[:, 1]
        if ((lon >= lon_min) & (lon <= lon_max) & (lat >= lat_min) & (lat <= lat_max)).all():
            keep.append(t)
    return _renumbered(dataset, keep)


def normalize(dataset):
    """Z-score both axes over all points of all trajectories."""
    if dataset.normalized:
        raise AlreadyNormalizedError("dataset is already normalized")
    if len(dataset) == 0:
        raise EmptyDatasetError("cannot normalize an empty dataset")
    allpts = np.concatenate(dataset.points_list(), axis=0)
    mean = allpts.mean(axis=0)
    std = allpts.std(axis=0)
    if not (std > 0).all():
        axis = "lon" if std[0] <= 0 else "lat"
        raise DegenerateDataError(f"zero variance along {axis}")
    stats = NormStats(float(mean[0]), float(mean[1]), float(std[0]), float(std[1]))
    trajs = [Trajectory(t.id, (t.points - mean) / std) for t in dataset]
    return Dataset(dataset.name, trajs, True, stats)


def split(dataset, seed):
    """Seeded 2:1:7 train/val/test partition of the dataset ids.

    Train and validation sizes are floored; the remainder goes to test.
    """
    n = len(dataset)
    if n < 10:
        raise ArgumentError(f"need at least 10 trajectories to split, got {n}")
    perm = check_random_seed(seed).permutation(n)
    n_train = (2 * n) // 10
    n_val = n // 10
    return SplitSpec(
        tuple(int(i) for i in perm[:n_train]),
        tuple(int(i) for i in perm[n_train:n_train + n_val]),
        tuple(int(i) for i in perm[n_train + n_val:]),
        int(seed),
    )


def generate_synthetic(count, len_min, len_max, seed, name="synthetic"):
    """Seeded 2-D Gaussian random walks starting uniformly in the unit square."""
    if count < 1:
        raise ArgumentError(f"count must be >= 1, got {count}")
    if not (1 <= len_min <= len_max):
        raise ArgumentError(f"need 1 <= len_min <= len_max, got {len_min}, {len_max}")
    rng = check_random_seed(seed)
    trajs = []
    for i in range(count):
        n = int(rng.integers(len_min, len_max + 1))
        start = rng.uniform(0.0, 1.0, size=2)
        steps = rng.normal(0.0, SYNTHETIC_STEP_SCALE, size=(n - 1, 2))
        pts = np.vstack([start, start + np.cumsum(steps, axis=0)])
        trajs.append(Trajectory(i, pts))
    return Dataset(name, trajs)


def augment_noise(dataset, sigma, seed):
    """Append a copy of every trajectory with i.i.d. Gaussian(0, sigma^2) coordinate noise."""
    if not sigma >= 0:
        raise ArgumentError(f"sigma must be >= 0, got {sigma}")
    rng = check_random_seed(seed)
    n = len(dataset)
    extra = []
    for t in dataset:
        noise = rng.normal(0.0, sigma, size=t.points.shape) if sigma > 0 else 0.0
        extra.append(Trajectory(n + t.id, t.points + noise))
    return Dataset(dataset.name, list(dataset.trajectories) + extra, dataset.normalized, dataset.norm_stats)
