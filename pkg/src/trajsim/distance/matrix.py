"""Pairwise ground-truth distance matrices and their binary file format.

File layout (little-endian)::

    offset  size  field
    0       4     magic b"GTM1"
    4       4     n (uint32)
    8       1     measure code (1 = DTW, 2 = Hausdorff, 3 = Fréchet)
    9       3     zero padding
    12      8     alpha (float64)
    20      8*n*n distances, row-major float64

A JSON sidecar ``<file>.meta.json`` carries the dataset name, whether the
input coordinates were normalized, and the distance scale.
"""

import json
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..exceptions import ArgumentError, FormatError
from ..validation import check_points, check_positive
from . import _kernels
from .exact import DistanceMeasure, ground_truth_similarities

MAGIC = b"GTM1"
_HEADER = struct.Struct("<4sIB3xd")
HEADER_SIZE = _HEADER.size


@dataclass(frozen=True, eq=False)
class GroundTruthMatrix:
    """Symmetric matrix of exact pairwise distances.

    Attributes
    ----------
    distances : ndarray of shape (n, n)
        Read-only, zero diagonal.
    alpha : float
        Decay rate of the similarity transform ``exp(-alpha * d / scale)``.
    scale : float
        Distance unit used by the similarity transform. ``1.0`` applies
        ``exp(-alpha * d)`` to raw distances.
    """

    measure: DistanceMeasure
    alpha: float
    distances: np.ndarray
    normalized_input: bool = False
    dataset_name: str = ""
    scale: float = 1.0

    def __post_init__(self):
        d = np.array(self.distances, dtype=np.float64, copy=True)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise ArgumentError(f"distance matrix must be square, got {d.shape}")
        d.setflags(write=False)
        object.__setattr__(self, "distances", d)
        object.__setattr__(self, "measure", DistanceMeasure.parse(self.measure))
        check_positive(self.alpha, "alpha")
        check_positive(self.scale, "scale")

    @property
    def n(self):
        return self.distances.shape[0]

    def similarity(self, i, j):
        return float(np.exp(-self.alpha * self.distances[i, j] / self.scale))

    def similarities(self, rows=None, cols=None):
        """Ground-truth similarity block; whole matrix by default."""
        d = self.distances
        if rows is not None:
            d = d[np.asarray(rows)]
        if cols is not None:
            d = d[:, np.asarray(cols)]
        return ground_truth_similarities(d / self.scale, self.alpha)

    def submatrix(self, ids):
        ids = np.asarray(ids, dtype=np.int64)
        return GroundTruthMatrix(
            self.measure, self.alpha, self.distances[np.ix_(ids, ids)],
            self.normalized_input, self.dataset_name, self.scale,
        )

    def with_scale(self, scale):
        return GroundTruthMatrix(
            self.measure, self.alpha, self.distances, self.normalized_input, self.dataset_name, scale
        )

    def __eq__(self, other):
        if not isinstance(other, GroundTruthMatrix):
            return NotImplemented
        return (
            self.measure == other.measure
            and self.alpha == other.alpha
            and self.scale == other.scale
            and self.normalized_input == other.normalized_input
            and self.dataset_name == other.dataset_name
            and np.array_equal(self.distances, other.distances)
        )


def resolve_scale(scale, distances):
    if scale in (None, "none"):
        return 1.0
    if scale in ("max", "mean"):
        n = distances.shape[0]
        if n < 2:
            return 1.0
        value = float(distances.max()) if scale == "max" else float(distances.sum()) / (n * (n - 1))
        return value if value > 0 else 1.0
    try:
        value = float(scale)
    except (TypeError, ValueError):
        raise ArgumentError(f"scale must be 'none', 'max', 'mean' or a positive number, got {scale!r}") from None
    return check_positive(value, "scale")


def _row_block(rows, flat, offsets, measure_code, n):
    out = {}
    for i in rows:
        targets = np.arange(i + 1, n, dtype=np.int64)
        vals = np.empty(targets.shape[0])
        q = flat[offsets[i]:offsets[i + 1]]
        _kernels.distances_to_many(q, flat, offsets, targets, measure_code, vals)
        out[i] = vals
    return out


def compute_matrix(dataset, measure, alpha=None, worker_count=1, ids=None, scale="max"):
    """Exact distances for every unordered pair of trajectories.

    Parameters
    ----------
    dataset : Dataset or sequence of trajectories
    measure : DistanceMeasure or str
    alpha : float, optional
        Defaults to the measure's ``default_alpha`` (16 for DTW, 8 otherwise).
    worker_count : int
        Threads used for the upper triangle. Each entry is computed by the same
        kernel whichever thread runs it, so the result does not depend on this.
    ids : sequence of int, optional
        Restrict the matrix to these trajectories, in this order.
    scale : {"max", "mean", "none"} or float
        Distance unit of the similarity transform, stored with the matrix.
        ``"max"`` divides by the largest pairwise distance so similarities
        keep a usable spread whatever the coordinate units; ``"none"``
        applies ``exp(-alpha * d)`` to raw distances.
    """
    measure = DistanceMeasure.parse(measure)
    alpha = measure.default_alpha if alpha is None else check_positive(alpha, "alpha")
    if worker_count < 1:
        raise ArgumentError(f"worker_count must be >= 1, got {worker_count}")
    trajs = list(getattr(dataset, "trajectories", dataset))
    if ids is not None:
        trajs = [trajs[i] for i in ids]
    pts = [check_points(t) for t in trajs]
    n = len(pts)
    flat, offsets = _kernels.pack(pts)
    D = np.zeros((n, n))
    all_rows = list(range(n))
    if worker_count == 1 or n < 3:
        blocks = [_row_block(all_rows, flat, offsets, measure.code, n)]
    else:
        # Interleave rows so the triangle's uneven work spreads evenly.
        chunks = [all_rows[w::worker_count] for w in range(worker_count)]
        with ThreadPoolExecutor(max_workers=worker_count) as ex:
            blocks = list(ex.map(lambda r: _row_block(r, flat, offsets, measure.code, n), chunks))
    for block in blocks:
        for i, vals in block.items():
            D[i, i + 1:] = vals
    D = D + D.T - np.diag(np.diag(D))
    if not np.isfinite(D).all():
        raise ArgumentError("non-finite distance encountered")
    normalized = bool(getattr(dataset, "normalized", False))
    name = getattr(dataset, "name", "")
    return GroundTruthMatrix(measure, alpha, D, normalized, name, resolve_scale(scale, D))


def distances_to_all(query, dataset_points, measure, targets=None, packed=None):
    """Exact distances from one query to many trajectories (brute-force search)."""
    measure = DistanceMeasure.parse(measure)
    q = check_points(query, "query")
    flat, offsets = packed if packed is not None else _kernels.pack([check_points(p) for p in dataset_points])
    count = offsets.shape[0] - 1
    targets = np.arange(count, dtype=np.int64) if targets is None else np.asarray(targets, dtype=np.int64)
    out = np.empty(targets.shape[0])
    _kernels.distances_to_many(q, flat, offsets, targets, measure.code, out)
    return out


# --------------------------------------------------------------------- I/O


def _meta_path(path):
    path = Path(path)
    return path.with_name(path.name + ".meta.json")


def save_matrix(matrix, path):
    path = Path(path)
    header = _HEADER.pack(MAGIC, matrix.n, matrix.measure.code, float(matrix.alpha))
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(matrix.distances, dtype="<f8").tobytes())
    meta = {
        "dataset_name": matrix.dataset_name,
        "normalized_input": matrix.normalized_input,
        "scale": matrix.scale,
    }
    _meta_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def load_matrix(path):
    path = Path(path)
    data = path.read_bytes()
    if len(data) < HEADER_SIZE:
        raise FormatError(f"{path}: truncated header")
    magic, n, code, alpha = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    expected = HEADER_SIZE + 8 * n * n
    if len(data) != expected:
        raise FormatError(f"{path}: expected {expected} bytes for n={n}, found {len(data)}")
    try:
        measure = DistanceMeasure.from_code(code)
    except ArgumentError as exc:
        raise FormatError(f"{path}: {exc}") from None
    D = np.frombuffer(data, dtype="<f8", offset=HEADER_SIZE, count=n * n).reshape(n, n).astype(np.float64)
    meta = {}
    mp = _meta_path(path)
    if mp.exists():
        meta = json.loads(mp.read_text(encoding="utf-8"))
    try:
        return GroundTruthMatrix(
            measure, alpha, D,
            bool(meta.get("normalized_input", False)),
            str(meta.get("dataset_name", "")),
            float(meta.get("scale", 1.0)),
        )
    except ArgumentError as exc:
        raise FormatError(f"{path}: {exc}") from None
