"""Lung segmentation: binary mask plus area, the intensity denominator.

Classical, fully deterministic pipeline. Lungs on a CT slice are dark
air-filled regions inside the bright body, so a global Otsu threshold
followed by component cleanup is enough for a few-percent-accurate area.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from skimage.filters import threshold_otsu
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import NoLungFound
from .image import ScanImage
from .validation import as_luminance, check_bits


@dataclass
class LungMask:
    """Binary per-pixel lung mask with its population count cached."""

    bits: np.ndarray
    area: int = field(default=-1)

    def __post_init__(self):
        self.bits = check_bits(self.bits)
        computed = int(np.count_nonzero(self.bits))
        if self.area < 0:
            self.area = computed
        elif self.area != computed:
            raise ValueError(f"cached area {self.area} != popcount {computed}")

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]


def lung_area(mask: LungMask) -> int:
    """Lung area in pixels (the cached popcount of the mask bits)."""
    return mask.area


class LungSegmenter(BaseEstimator, TransformerMixin):
    """Stateless transformer: ScanImage -> LungMask.

    Steps: luminance collapse, global Otsu threshold, invert (lungs are
    dark), drop components touching the image border (ambient air),
    morphological closing, keep the two largest components (one when the
    second is below ``secondary_ratio`` of the first).

    Parameters
    ----------
    closing_size : int
        Side of the square closing structuring element.
    closing_iterations : int
        Dilation/erosion repetitions for the closing step.
    secondary_ratio : float
        Keep the second-largest component only if its area is at least
        this fraction of the largest (handles single-lung fields of view).
    min_lung_fraction : float
        Smallest credible lung area as a fraction of the image; below it
        segmentation fails with NoLungFound.
    """

    def __init__(self, closing_size=3, closing_iterations=2,
                 secondary_ratio=0.2, min_lung_fraction=0.01):
        self.closing_size = closing_size
        self.closing_iterations = closing_iterations
        self.secondary_ratio = secondary_ratio
        self.min_lung_fraction = min_lung_fraction

    def fit(self, X=None, y=None):
        return self

    def transform(self, img: ScanImage) -> LungMask:
        lum = as_luminance(img.pixels)
        if lum.min() == lum.max():
            raise NoLungFound("flat image has no dark interior component")
        # <= matches the library's foreground-is-strictly-above convention
        dark = lum <= threshold_otsu(lum)

        interior = _remove_border_components(dark)
        if self.closing_iterations > 0:
            interior = ndimage.binary_closing(
                interior,
                structure=np.ones((self.closing_size, self.closing_size), bool),
                iterations=self.closing_iterations,
            )
            # closing may dilate back onto the frame edge; re-assert the
            # border-free invariant
            interior[0, :] = interior[-1, :] = False
            interior[:, 0] = interior[:, -1] = False

        labels, count = ndimage.label(interior, structure=np.ones((3, 3), bool))
        if count == 0:
            raise NoLungFound("no interior dark component")
        sizes = ndimage.sum_labels(interior, labels, index=np.arange(1, count + 1))
        order = np.argsort(-sizes, kind="stable")
        largest = sizes[order[0]]
        if largest < self.min_lung_fraction * lum.size:
            raise NoLungFound(
                f"largest interior component covers {largest / lum.size:.4%} "
                f"of the image, below {self.min_lung_fraction:.0%}"
            )
        keep_labels = [order[0] + 1]
        if count > 1 and sizes[order[1]] >= self.secondary_ratio * largest:
            keep_labels.append(order[1] + 1)
        mask = np.isin(labels, keep_labels)
        return LungMask(mask)


def segment_lungs(img: ScanImage, **params) -> LungMask:
    """Functional form of :class:`LungSegmenter` with default parameters."""
    return LungSegmenter(**params).fit().transform(img)


def _remove_border_components(mask: np.ndarray) -> np.ndarray:
    """Clear every connected component that touches the image border."""
    labels, count = ndimage.label(mask, structure=np.ones((3, 3), bool))
    if count == 0:
        return mask.copy()
    border = np.unique(np.concatenate([
        labels[0, :], labels[-1, :], labels[:, 0], labels[:, -1]]))
    border = border[border != 0]
    return mask & ~np.isin(labels, border)


def mask_to_image(mask: LungMask) -> ScanImage:
    """Render a mask as a black/white image (255 = lung)."""
    return ScanImage((mask.bits * np.uint8(255)).astype(np.uint8))
