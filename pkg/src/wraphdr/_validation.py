"""Input validation helpers shared by the library and the estimators."""

import numpy as np


def check_irradiance(img, name="img"):
    """Return ``img`` as a float64 array, rejecting negative or non-finite samples.

    The error message names the first offending pixel so that problems in
    large HDR files can be located.
    """
    arr = np.asarray(img, dtype=np.float64)
    if arr.size == 0:
        raise ValueError(f"{name} is empty")
    bad = ~np.isfinite(arr)
    if bad.any():
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        raise ValueError(f"{name} has a non-finite sample {arr[idx]!r} at pixel {idx}")
    neg = arr < 0
    if neg.any():
        idx = tuple(int(i) for i in np.argwhere(neg)[0])
        raise ValueError(f"{name} has a negative sample {arr[idx]!r} at pixel {idx}")
    return arr


def as_hwc(arr):
    """View a 1D, 2D or 3D array as (height, width, channels).

    1D sequences become a single row.  Returns the view and a function that
    restores the caller's original shape.
    """
    arr = np.asarray(arr)
    shape = arr.shape
    if arr.ndim == 1:
        out = arr.reshape(1, -1, 1)
    elif arr.ndim == 2:
        out = arr[:, :, None]
    elif arr.ndim == 3:
        if arr.shape[2] not in (1, 3):
            raise ValueError(f"expected 1 or 3 channels, got {arr.shape[2]}")
        out = arr
    else:
        raise ValueError(f"expected a 1D, 2D or 3D array, got shape {shape}")

    def restore(x):
        return np.asarray(x).reshape(shape)

    return out, restore


def check_same_shape(a, b, names=("a", "b")):
    if np.shape(a) != np.shape(b):
        raise ValueError(
            f"dimension mismatch: {names[0]} has shape {np.shape(a)}, "
            f"{names[1]} has shape {np.shape(b)}"
        )
