"""Input validation helpers shared by the distance, encoder and estimator code."""

import numbers

import numpy as np

from .exceptions import ArgumentError

__all__ = [
    "check_points",
    "check_trajectories",
    "check_positive",
    "check_non_negative_int",
    "check_random_seed",
]


def check_points(traj, name="trajectory"):
    """Return the points of ``traj`` as a C-contiguous ``(n, 2)`` float64 array.

    Accepts a :class:`~trajsim.trajectory.Trajectory`, a numpy array or any
    nested sequence of ``(lon, lat)`` pairs.

    Raises
    ------
    ArgumentError
        If the input is empty, not two-dimensional with two columns, or holds
        non-finite coordinates.
    """
    points = getattr(traj, "points", traj)
    arr = np.ascontiguousarray(points, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        if arr.size == 0:
            raise ArgumentError(f"{name} is empty")
        raise ArgumentError(f"{name} must have shape (n, 2), got {arr.shape}")
    if arr.shape[0] == 0:
        raise ArgumentError(f"{name} is empty")
    if not np.isfinite(arr).all():
        raise ArgumentError(f"{name} contains non-finite coordinates")
    return arr


def check_trajectories(trajs, name="trajectories"):
    """Validate a sequence of trajectories; returns a list of point arrays."""
    if hasattr(trajs, "trajectories"):
        trajs = trajs.trajectories
    return [check_points(t, name=f"{name}[{i}]") for i, t in enumerate(trajs)]


def check_positive(value, name):
    if not isinstance(value, numbers.Real) or not np.isfinite(value) or value <= 0:
        raise ArgumentError(f"{name} must be a positive finite number, got {value!r}")
    return float(value)


def check_non_negative_int(value, name):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral) or value < 0:
        raise ArgumentError(f"{name} must be a non-negative integer, got {value!r}")
    return int(value)


def check_random_seed(seed):
    """Normalize a seed into a ``numpy.random.Generator``.

    ``None`` is rejected on purpose: every random draw in the package is
    seeded explicitly.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None or isinstance(seed, bool) or not isinstance(seed, numbers.Integral):
        raise ArgumentError(f"seed must be an integer, got {seed!r}")
    return np.random.default_rng(int(seed) % 2**64)
