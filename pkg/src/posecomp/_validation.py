"""Input validation helpers, in the spirit of ``sklearn.utils.validation``."""

import math

import numpy as np

from .exceptions import InvalidAngle, InvalidDims, InvalidRotation


def check_angle(angle, name="angle"):
    try:
        value = float(angle)
    except (TypeError, ValueError) as exc:
        raise InvalidAngle(f"{name} is not a number: {angle!r}") from exc
    if not math.isfinite(value):
        raise InvalidAngle(f"{name} must be finite, got {value}")
    return value


def check_vector(v, size=3, name="vector"):
    arr = np.asarray(v, dtype=float)
    if arr.shape != (size,):
        raise ValueError(f"{name} must have shape ({size},), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


def check_dims(dims):
    """Return ``[h, w, l]`` as a float array, raising InvalidDims if any is <= 0."""
    arr = np.asarray(dims, dtype=float)
    if arr.shape != (3,) or not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise InvalidDims(f"dims must be three positive numbers, got {dims!r}")
    return arr


def check_rotation(m, atol=1e-9):
    """Validate a proper orthonormal 3x3 matrix and return it as an array."""
    arr = np.asarray(m, dtype=float)
    if arr.shape != (3, 3) or not np.all(np.isfinite(arr)):
        raise InvalidRotation(f"rotation must be a finite 3x3 matrix, got shape {arr.shape}")
    if np.max(np.abs(arr.T @ arr - np.eye(3))) > atol:
        raise InvalidRotation("rotation is not orthonormal")
    if abs(np.linalg.det(arr) - 1.0) > atol:
        raise InvalidRotation("rotation determinant is not +1")
    return arr


def check_corners(corners):
    arr = np.asarray(corners, dtype=float)
    if arr.shape != (8, 3) or not np.all(np.isfinite(arr)):
        raise ValueError(f"corners must be a finite (8, 3) array, got {arr.shape}")
    return arr


def check_box_array(X, width=7):
    """Validate an ``(n, width)`` float array of box parameters."""
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 1 and arr.size == width:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != width:
        raise ValueError(f"expected an array of shape (n, {width}), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("box array contains non-finite values")
    return arr
