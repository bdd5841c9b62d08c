"""Input validation helpers used by the estimators and functional API.

Kept in one place, sklearn-utils style, so every entry point enforces the
same invariants: uint8 pixel data, (H, W) or (H, W, 3) layout, masks that
match their image dimensions.
"""

from __future__ import annotations

import numpy as np


def check_pixels(pixels) -> np.ndarray:
    """Validate and canonicalize a pixel array.

    Accepts (H, W) grayscale or (H, W, 3) RGB. Integer input must already
    be within [0, 255]; the returned array is always C-contiguous uint8.
    """
    arr = np.asarray(pixels)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    if arr.ndim not in (2, 3):
        raise ValueError(f"pixel array must be 2-D or 3-D, got shape {arr.shape}")
    if arr.ndim == 3 and arr.shape[2] != 3:
        raise ValueError(f"3-D pixel array must have 3 channels, got {arr.shape[2]}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"image dimensions must be >= 1, got {arr.shape[:2]}")
    if arr.dtype != np.uint8:
        if np.issubdtype(arr.dtype, np.floating):
            arr = np.rint(arr)
        if arr.min() < 0 or arr.max() > 255:
            raise ValueError("pixel intensities must lie in [0, 255]")
        arr = arr.astype(np.uint8)
    return np.ascontiguousarray(arr)


def check_bits(bits) -> np.ndarray:
    """Validate a binary mask array and return it as a (H, W) bool array."""
    arr = np.asarray(bits)
    if arr.ndim != 2:
        raise ValueError(f"mask must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"mask dimensions must be >= 1, got {arr.shape}")
    return np.ascontiguousarray(arr.astype(bool))


def check_same_shape(img, mask) -> None:
    """Require matching (height, width) between a scan and a mask."""
    if (img.height, img.width) != (mask.height, mask.width):
        raise ValueError(
            "image and mask dimensions differ: "
            f"{img.width}x{img.height} vs {mask.width}x{mask.height}"
        )


def as_luminance(pixels: np.ndarray) -> np.ndarray:
    """Collapse (H, W, 3) to a single luminance channel by channel mean.

    CT slices are effectively grayscale, so a plain mean is sufficient.
    Grayscale input is returned unchanged.
    """
    if pixels.ndim == 2:
        return pixels
    return np.rint(pixels.astype(np.float64).mean(axis=2)).astype(np.uint8)
