"""Input coercion and checks used by the estimator front-ends."""

from __future__ import annotations

import numpy as np

from .errors import ShapeError, ValidationError
from .slc import AcqMeta, CoherencyField, SlcImage


def check_slc(X, meta: AcqMeta | None = None) -> SlcImage:
    """Accept an ``SlcImage`` or a ``(3, rows, cols)`` complex array."""
    if isinstance(X, SlcImage):
        return X
    arr = np.asarray(X)
    if arr.ndim != 3 or arr.shape[0] != 3:
        raise ValidationError(f"expected an SlcImage or (3, rows, cols) array, got shape {arr.shape}")
    return SlcImage(arr, meta or AcqMeta())


def check_field(T) -> CoherencyField:
    if isinstance(T, CoherencyField):
        return T
    return CoherencyField.from_matrices(T)


def check_same_shape(*rasters) -> tuple:
    shapes = {tuple(np.shape(r)) if not hasattr(r, "shape") else tuple(r.shape) for r in rasters}
    if len(shapes) > 1:
        raise ShapeError(f"rasters have mismatched shapes: {sorted(shapes)}")
    return shapes.pop() if shapes else ()


def check_odd_window(window) -> int:
    if int(window) != window or window < 1 or int(window) % 2 == 0:
        raise ValueError(f"boxcar window must be a positive odd integer, got {window!r}")
    return int(window)
