"""Input validation helpers.

Point clouds travel through the package as float64 numpy arrays of shape
(n, 3). The helpers here coerce and validate user input once at API
boundaries so the numeric kernels can assume well-formed arrays.
"""

from __future__ import annotations

import numpy as np

from .errors import DataError


def check_cloud(points, min_points: int = 1) -> np.ndarray:
    """Coerce ``points`` to a float64 (n, 3) array and validate it.

    Raises :class:`DataError` on wrong shape, too few points, or
    non-finite coordinates.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise DataError(f"point cloud must have shape (n, 3), got {pts.shape}")
    if pts.shape[0] < min_points:
        raise DataError(f"point cloud needs at least {min_points} points, got {pts.shape[0]}")
    if not np.isfinite(pts).all():
        raise DataError("point cloud contains non-finite coordinates")
    return pts


def check_clouds(clouds, min_points: int = 1) -> list[np.ndarray]:
    """Validate a sequence of point clouds; returns a list of arrays."""
    out = [check_cloud(c, min_points=min_points) for c in clouds]
    if not out:
        raise DataError("expected at least one point cloud")
    return out


def check_matrix(values, rows: int | None = None, cols: int | None = None, name: str = "matrix") -> np.ndarray:
    """Coerce to a float64 2-d array, optionally pinning its shape."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise DataError(f"{name} must be 2-d, got ndim={arr.ndim}")
    if rows is not None and arr.shape[0] != rows:
        raise DataError(f"{name} must have {rows} rows, got {arr.shape[0]}")
    if cols is not None and arr.shape[1] != cols:
        raise DataError(f"{name} must have {cols} columns, got {arr.shape[1]}")
    return arr


def check_tokens(tokens, length: int | None = None, vocab: int | None = None) -> np.ndarray:
    """Validate one scale's token list: integer array in [0, vocab)."""
    arr = np.asarray(tokens)
    if arr.ndim != 1:
        raise DataError(f"token list must be 1-d, got ndim={arr.ndim}")
    if not np.issubdtype(arr.dtype, np.integer):
        if not np.all(arr == np.floor(arr)):
            raise DataError("token list must be integer-valued")
        arr = arr.astype(np.int64)
    arr = arr.astype(np.int64)
    if length is not None and arr.shape[0] != length:
        raise DataError(f"token list must have length {length}, got {arr.shape[0]}")
    if vocab is not None and arr.size and (arr.min() < 0 or arr.max() >= vocab):
        raise DataError(f"token outside codebook range [0, {vocab})")
    return arr
