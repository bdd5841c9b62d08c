from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from oracles import png_bytes_oracle  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(20240317)


@pytest.fixture
def gray_png():
    """64x48 grayscale PNG with a deterministic gradient."""
    pixels = [[(3 * x + 5 * y) % 256 for x in range(64)] for y in range(48)]
    return png_bytes_oracle(pixels)


@pytest.fixture
def rgb_png():
    pixels = [[((x * 4) % 256, (y * 5) % 256, (x + y) % 256)
               for x in range(32)] for y in range(24)]
    return png_bytes_oracle(pixels)


def make_chest_png(size: int = 256, blob_boxes=(), *, lung_level: int = 30,
                   blob_level: int = 80, body_level: int = 200) -> bytes:
    """Small synthetic chest slice: bright body disc, two dark lung
    ellipses, optional rectangular bright patches inside the lungs.
    blob_boxes are (x0, y0, x1, y1) in pixel coordinates."""
    yy, xx = np.mgrid[0:size, 0:size]
    c = (size - 1) / 2.0
    img = np.zeros((size, size), dtype=np.uint8)
    body = ((xx - c) ** 2 + (yy - c) ** 2) <= (0.46 * size) ** 2
    img[body] = body_level
    for lx in (0.34 * size, 0.66 * size):
        lung = (((xx - lx) / (0.13 * size)) ** 2
                + ((yy - c) / (0.24 * size)) ** 2) <= 1.0
        img[lung] = lung_level
    for x0, y0, x1, y1 in blob_boxes:
        img[y0:y1, x0:x1] = blob_level
    return png_bytes_oracle(img.tolist())


@pytest.fixture
def chest_png():
    return make_chest_png()


@pytest.fixture
def chest_with_blobs_png():
    # both patches sit inside the left/right lung ellipses of a 256 image
    return make_chest_png(256, [(75, 110, 95, 135), (160, 115, 178, 130)])
