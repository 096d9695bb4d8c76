"""Input validation helpers shared by the public API."""

import numpy as np


class DataError(ValueError):
    """Raised when input data violates a documented contract."""


def check_image(img, name="image"):
    """Return ``img`` as a float64 ``(H, W, 3)`` array with values in [0, 1].

    Raises
    ------
    DataError
        If the array has the wrong shape, is empty, has non-finite values
        or falls outside the unit interval.
    """
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise DataError(f"{name} must have shape (H, W, 3), got {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DataError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{name} contains non-finite values")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise DataError(f"{name} values must lie in [0, 1]")
    return arr


def check_plane(values, name="depth"):
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2 or arr.size == 0:
        raise DataError(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{name} contains non-finite values")
    return arr


def check_same_size(img, plane, names=("image", "depth")):
    if img.shape[:2] != plane.shape[:2]:
        raise DataError(
            f"{names[0]} is {img.shape[0]}x{img.shape[1]} but "
            f"{names[1]} is {plane.shape[0]}x{plane.shape[1]}"
        )


def check_triple(values, name, low=0.0, high=np.inf):
    arr = np.asarray(values, dtype=np.float64).reshape(-1)
    if arr.shape != (3,):
        raise DataError(f"{name} must have exactly 3 entries, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{name} must be finite")
    if np.any(arr < low) or np.any(arr > high):
        raise DataError(f"{name} entries must lie in [{low}, {high}], got {arr.tolist()}")
    return arr


def check_scale(scale):
    try:
        d_min, d_max = (float(v) for v in scale)
    except (TypeError, ValueError):
        raise DataError(f"depth scale must be a (d_min, d_max) pair, got {scale!r}") from None
    if not (np.isfinite(d_min) and np.isfinite(d_max)) or d_min < 0 or d_min >= d_max:
        raise DataError(f"depth scale requires 0 <= d_min < d_max, got ({d_min}, {d_max})")
    return d_min, d_max
