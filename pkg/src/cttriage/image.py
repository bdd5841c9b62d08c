"""Decode, resize, and augment CT scan images.

All raster data is 8-bit: (H, W) uint8 for grayscale, (H, W, 3) uint8 for
RGB. Geometry ops use bilinear interpolation; warps (rotation, translation)
fill out-of-frame regions with 0, which is appropriate for near-black CT
backgrounds. Everything here is a pure function of its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
import io

import numpy as np
from PIL import Image, UnidentifiedImageError
from scipy.ndimage import convolve1d

from .errors import CorruptImage, UnsupportedFormat
from .validation import check_pixels

_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"
_JPEG_MAGIC = b"\xff\xd8\xff"


@dataclass
class ScanImage:
    """A decoded CT slice: uint8 pixels plus an opaque source identifier."""

    pixels: np.ndarray
    source_id: str = ""

    def __post_init__(self):
        self.pixels = check_pixels(self.pixels)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def channels(self) -> int:
        return 1 if self.pixels.ndim == 2 else self.pixels.shape[2]


@dataclass
class AugmentSpec:
    """Augmentation parameters, applied in the fixed order
    flip -> rotate -> translate -> blur."""

    rotation_degrees: float = 0.0
    horizontal_flip: bool = False
    translate_x: float = 0.0
    translate_y: float = 0.0
    gaussian_blur_sigma: float = 0.0

    def __post_init__(self):
        if self.gaussian_blur_sigma < 0:
            raise ValueError("gaussian_blur_sigma must be >= 0")
        if abs(self.rotation_degrees) > 360:
            raise ValueError("rotation_degrees must satisfy |deg| <= 360")


def load_scan(data: bytes, source_id: str = "") -> ScanImage:
    """Decode an 8-bit PNG or JPEG byte stream into a ScanImage.

    Single-channel inputs stay single-channel; RGB stays 3-channel. Other
    modes (palette, alpha) are converted to RGB.

    Raises
    ------
    UnsupportedFormat
        Magic bytes are neither PNG nor JPEG.
    CorruptImage
        The stream is recognized but cannot be decoded.
    """
    if not (data.startswith(_PNG_MAGIC) or data.startswith(_JPEG_MAGIC)):
        raise UnsupportedFormat("not a PNG or JPEG byte stream")
    try:
        with Image.open(io.BytesIO(data)) as im:
            im.load()
            if im.mode not in ("L", "RGB"):
                im = im.convert("RGB")
            arr = np.asarray(im, dtype=np.uint8)
    except UnidentifiedImageError as exc:
        raise CorruptImage(f"undecodable image: {exc}") from exc
    except OSError as exc:
        raise CorruptImage(f"truncated or corrupt image: {exc}") from exc
    return ScanImage(arr, source_id=source_id)


def encode_png(img: ScanImage) -> bytes:
    """Encode a ScanImage as PNG bytes (deterministic for identical pixels)."""
    buf = io.BytesIO()
    Image.fromarray(img.pixels).save(buf, format="PNG")
    return buf.getvalue()


def resize(img: ScanImage, target_w: int, target_h: int,
           expand_to_rgb: bool = False) -> ScanImage:
    """Bilinear resize to (target_w, target_h).

    Uses the half-pixel-center convention: source coordinate
    ``(dst + 0.5) * src/dst - 0.5``, clamped to the source extent. Resizing
    to the source's own dimensions is pixel-exact. ``expand_to_rgb``
    replicates a grayscale result into 3 identical channels.
    """
    if target_w < 1 or target_h < 1:
        raise ValueError("target dimensions must be >= 1")
    src = img.pixels
    if (target_w, target_h) == (img.width, img.height):
        out = src.copy()
    else:
        xs = (np.arange(target_w) + 0.5) * (img.width / target_w) - 0.5
        ys = (np.arange(target_h) + 0.5) * (img.height / target_h) - 0.5
        xs = np.clip(xs, 0.0, img.width - 1.0)
        ys = np.clip(ys, 0.0, img.height - 1.0)
        x0 = np.floor(xs).astype(np.intp)
        y0 = np.floor(ys).astype(np.intp)
        x1 = np.minimum(x0 + 1, img.width - 1)
        y1 = np.minimum(y0 + 1, img.height - 1)
        fx = (xs - x0)[np.newaxis, :]
        fy = (ys - y0)[:, np.newaxis]
        planes = src[:, :, np.newaxis] if src.ndim == 2 else src
        acc = np.empty((target_h, target_w, planes.shape[2]), dtype=np.float64)
        for c in range(planes.shape[2]):
            ch = planes[:, :, c].astype(np.float64)
            top = ch[y0[:, None], x0[None, :]] * (1 - fx) + ch[y0[:, None], x1[None, :]] * fx
            bot = ch[y1[:, None], x0[None, :]] * (1 - fx) + ch[y1[:, None], x1[None, :]] * fx
            acc[:, :, c] = top * (1 - fy) + bot * fy
        out = np.clip(np.rint(acc), 0, 255).astype(np.uint8)
        if src.ndim == 2:
            out = out[:, :, 0]
    if expand_to_rgb and out.ndim == 2:
        out = np.repeat(out[:, :, np.newaxis], 3, axis=2)
    return ScanImage(out, source_id=img.source_id)


def flip_horizontal(img: ScanImage) -> ScanImage:
    """Mirror left-right. Involution: applying twice restores the input."""
    return ScanImage(np.flip(img.pixels, axis=1).copy(), source_id=img.source_id)


def rotate(img: ScanImage, degrees: float) -> ScanImage:
    """Rotate about the image center ((w-1)/2, (h-1)/2) with bilinear
    sampling and zero fill. Positive angles follow the forward map
    ``p_out = [[cos, -sin], [sin, cos]] @ (p_in - c) + c`` in pixel coords.
    """
    if degrees % 360 == 0:
        return ScanImage(img.pixels.copy(), source_id=img.source_id)
    theta = np.deg2rad(degrees)
    cx = (img.width - 1) / 2.0
    cy = (img.height - 1) / 2.0
    gx, gy = np.meshgrid(np.arange(img.width), np.arange(img.height))
    # inverse map: rotate output coords by -theta to find source positions
    dx = gx - cx
    dy = gy - cy
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    src_x = cos_t * dx + sin_t * dy + cx
    src_y = -sin_t * dx + cos_t * dy + cy
    return ScanImage(_sample_zero_fill(img.pixels, src_x, src_y),
                     source_id=img.source_id)


def translate(img: ScanImage, dx: float, dy: float) -> ScanImage:
    """Shift content by (dx, dy) pixels; vacated regions become 0."""
    if dx == 0 and dy == 0:
        return ScanImage(img.pixels.copy(), source_id=img.source_id)
    gx, gy = np.meshgrid(np.arange(img.width), np.arange(img.height))
    return ScanImage(_sample_zero_fill(img.pixels, gx - dx, gy - dy),
                     source_id=img.source_id)


def gaussian_blur(img: ScanImage, sigma: float) -> ScanImage:
    """Separable discrete Gaussian truncated at 3*sigma, zero boundary."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0:
        return ScanImage(img.pixels.copy(), source_id=img.source_id)
    radius = int(np.ceil(3 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-(x * x) / (2 * sigma * sigma))
    kernel /= kernel.sum()
    planes = img.pixels[:, :, np.newaxis] if img.pixels.ndim == 2 else img.pixels
    out = np.empty_like(planes, dtype=np.float64)
    for c in range(planes.shape[2]):
        tmp = convolve1d(planes[:, :, c].astype(np.float64), kernel,
                         axis=0, mode="constant", cval=0.0)
        out[:, :, c] = convolve1d(tmp, kernel, axis=1, mode="constant", cval=0.0)
    res = np.clip(np.rint(out), 0, 255).astype(np.uint8)
    if img.pixels.ndim == 2:
        res = res[:, :, 0]
    return ScanImage(res, source_id=img.source_id)


def augment(img: ScanImage, spec: AugmentSpec, seed: int = 0) -> ScanImage:
    """Apply an AugmentSpec in the fixed order flip -> rotate -> translate
    -> blur. Deterministic; ``seed`` is accepted for interface stability
    (reserved for randomized parameter sampling) and does not currently
    influence the output. An all-identity spec is a pixel-exact no-op.
    """
    out = img
    if spec.horizontal_flip:
        out = flip_horizontal(out)
    if spec.rotation_degrees % 360 != 0:
        out = rotate(out, spec.rotation_degrees)
    if spec.translate_x != 0 or spec.translate_y != 0:
        out = translate(out, spec.translate_x, spec.translate_y)
    if spec.gaussian_blur_sigma > 0:
        out = gaussian_blur(out, spec.gaussian_blur_sigma)
    if out is img:
        out = ScanImage(img.pixels.copy(), source_id=img.source_id)
    return out


def _sample_zero_fill(pixels: np.ndarray, src_x: np.ndarray,
                      src_y: np.ndarray) -> np.ndarray:
    """Bilinear gather at float coordinates, zero outside the frame."""
    h, w = pixels.shape[:2]
    x0 = np.floor(src_x).astype(np.intp)
    y0 = np.floor(src_y).astype(np.intp)
    fx = src_x - x0
    fy = src_y - y0

    def fetch(chan, yy, xx):
        inside = (xx >= 0) & (xx < w) & (yy >= 0) & (yy < h)
        vals = np.zeros(xx.shape, dtype=np.float64)
        vals[inside] = chan[yy[inside], xx[inside]]
        return vals

    planes = pixels[:, :, np.newaxis] if pixels.ndim == 2 else pixels
    out = np.empty((src_x.shape[0], src_x.shape[1], planes.shape[2]),
                   dtype=np.float64)
    for c in range(planes.shape[2]):
        ch = planes[:, :, c].astype(np.float64)
        out[:, :, c] = (
            fetch(ch, y0, x0) * (1 - fx) * (1 - fy)
            + fetch(ch, y0, x0 + 1) * fx * (1 - fy)
            + fetch(ch, y0 + 1, x0) * (1 - fx) * fy
            + fetch(ch, y0 + 1, x0 + 1) * fx * fy
        )
    res = np.clip(np.rint(out), 0, 255).astype(np.uint8)
    if pixels.ndim == 2:
        res = res[:, :, 0]
    return res
