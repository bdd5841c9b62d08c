"""Synthetic CT-like phantoms with analytically known geometry.

A phantom is a bright body disk on a dark background, containing two dark
elliptical lungs, optionally containing brighter rectangular lesions. All
geometry is recorded at construction, so phantoms serve as ground truth
for segmentation, detection, and triage behavior.

Lesion level sits between the lung level and the body level but closer to
the lungs, so global thresholding groups lesion pixels with the lungs:
lesions stay inside the mask instead of punching holes in it. Detection
on phantoms therefore needs an intensity threshold between lung_level and
blob_level (see detector_config), not the CT default.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .boxes import BoundingBox, intersection_area, union_area
from .detect import DetectorConfig
from .image import ScanImage


@dataclass(frozen=True)
class Ellipse:
    """Axis-aligned ellipse in pixel-center coordinates."""

    cx: float
    cy: float
    rx: float
    ry: float

    def __post_init__(self):
        if self.rx <= 0 or self.ry <= 0:
            raise ValueError("ellipse radii must be positive")

    def area(self) -> float:
        return math.pi * self.rx * self.ry

    def rasterize(self, size: int) -> np.ndarray:
        ys = np.arange(size, dtype=np.float64)[:, None]
        xs = np.arange(size, dtype=np.float64)[None, :]
        return (((xs - self.cx) / self.rx) ** 2
                + ((ys - self.cy) / self.ry) ** 2) <= 1.0

    def covers_point(self, x: float, y: float, slack: float = 1.0) -> bool:
        return (((x - self.cx) / self.rx) ** 2
                + ((y - self.cy) / self.ry) ** 2) <= slack * slack


@dataclass
class PhantomSpec:
    """Geometry and gray levels of one phantom."""

    size: int = 1024
    body_radius: float = 470.0
    lungs: tuple[Ellipse, Ellipse] = (
        Ellipse(cx=350.0, cy=511.5, rx=130.0, ry=230.0),
        Ellipse(cx=673.0, cy=511.5, rx=130.0, ry=230.0),
    )
    blobs: tuple[BoundingBox, ...] = ()
    background_level: int = 0
    body_level: int = 200
    lung_level: int = 30
    blob_level: int = 80

    def __post_init__(self):
        levels = (self.background_level, self.body_level,
                  self.lung_level, self.blob_level)
        if any(not 0 <= v <= 255 for v in levels):
            raise ValueError("gray levels must lie in [0, 255]")
        if not (self.background_level < self.lung_level
                < self.blob_level < self.body_level):
            raise ValueError(
                "levels must satisfy background < lung < blob < body")


@dataclass
class Phantom:
    """Rendered phantom plus its construction-time ground truth."""

    spec: PhantomSpec
    image: ScanImage
    lung_bits: np.ndarray = field(repr=False)
    lung_pixels: int = 0
    blob_union: int = 0
    intensity: float = 0.0
    expected_class: str = "NonCOVID"
    expected_severity: str = "None"

    def analytic_lung_area(self) -> float:
        return sum(e.area() for e in self.spec.lungs)


def render(spec: PhantomSpec, threshold: float = 0.15,
           source_id: str = "phantom") -> Phantom:
    """Draw the phantom and derive its expected verdict.

    Every blob must lie entirely within the lung ellipses. The expected
    severity applies the alarming-on-equal rule to
    blob_union / rasterized lung area.
    """
    size = spec.size
    px = np.full((size, size), spec.background_level, dtype=np.uint8)
    ys = np.arange(size, dtype=np.float64)[:, None]
    xs = np.arange(size, dtype=np.float64)[None, :]
    c = (size - 1) / 2.0
    body = ((xs - c) ** 2 + (ys - c) ** 2) <= spec.body_radius ** 2
    px[body] = spec.body_level
    lung_bits = np.zeros((size, size), dtype=bool)
    for e in spec.lungs:
        lung_bits |= e.rasterize(size)
    px[lung_bits] = spec.lung_level
    for b in spec.blobs:
        if not lung_bits[b.y_min:b.y_max, b.x_min:b.x_max].all():
            raise ValueError(f"blob {b.as_tuple()} leaves the lung region")
        px[b.y_min:b.y_max, b.x_min:b.x_max] = spec.blob_level
    lung_pixels = int(lung_bits.sum())
    blob_union = union_area(list(spec.blobs)) if spec.blobs else 0
    intensity = blob_union / lung_pixels if lung_pixels else 0.0
    if spec.blobs:
        expected_class = "COVID"
        expected_severity = "Alarming" if intensity >= threshold else "Mild"
    else:
        expected_class, expected_severity = "NonCOVID", "None"
    return Phantom(spec=spec, image=ScanImage(pixels=px, source_id=source_id),
                   lung_bits=lung_bits, lung_pixels=lung_pixels,
                   blob_union=blob_union, intensity=intensity,
                   expected_class=expected_class,
                   expected_severity=expected_severity)


def detector_config(spec: PhantomSpec, **overrides) -> DetectorConfig:
    """Detector settings that resolve this phantom's lesions: intensity
    threshold midway between lung and blob levels, score floor at half
    the blob score."""
    params = dict(kind="reference_blob",
                  blob_intensity_threshold=(spec.lung_level
                                            + spec.blob_level) // 2,
                  score_floor=spec.blob_level / 255.0 / 2.0)
    params.update(overrides)
    return DetectorConfig(**params)


def symmetric_spec(size: int = 1024, blobs: tuple[BoundingBox, ...] = ()
                   ) -> PhantomSpec:
    """Spec whose geometry is mirror-symmetric about the vertical axis
    through pixel centers (x and size-1-x swap roles)."""
    c = (size - 1) / 2.0
    s = size / 1024.0
    off, rx, ry = 162.0 * s, 120.0 * s, 220.0 * s
    return PhantomSpec(
        size=size, body_radius=460.0 * s,
        lungs=(Ellipse(cx=c - off, cy=c, rx=rx, ry=ry),
               Ellipse(cx=c + off, cy=c, rx=rx, ry=ry)),
        blobs=blobs)


def sample_corpus(count: int, seed: int = 0, threshold: float = 0.15,
                  size: int = 1024) -> list[Phantom]:
    """Deterministic corpus cycling blank / mild / alarming cases.

    Mild cases target lesion coverage in [0.05, 0.10] of lung area and
    alarming cases [0.20, 0.28], keeping every case far from the 0.15
    boundary so small rasterization effects cannot flip a verdict.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        kind = ("blank", "mild", "alarming")[i % 3]
        out.append(_sample_one(rng, kind, threshold, size, f"phantom-{i:04d}"))
    return out


def _sample_one(rng, kind: str, threshold: float, size: int,
                source_id: str) -> Phantom:
    s = size / 1024.0
    for _ in range(50):
        cy = rng.uniform(480, 540) * s
        left = Ellipse(cx=rng.uniform(335, 355) * s, cy=cy,
                       rx=rng.uniform(115, 140) * s,
                       ry=rng.uniform(200, 250) * s)
        right = Ellipse(cx=rng.uniform(660, 685) * s, cy=cy,
                        rx=rng.uniform(115, 140) * s,
                        ry=rng.uniform(200, 250) * s)
        spec = PhantomSpec(size=size, body_radius=470.0 * s,
                           lungs=(left, right))
        if kind == "blank":
            return render(spec, threshold, source_id)
        lung_pixels = int(left.rasterize(size).sum()
                          + right.rasterize(size).sum())
        if kind == "mild":
            target = rng.uniform(0.05, 0.10)
            n_blobs = int(rng.integers(1, 4))
        else:
            target = rng.uniform(0.20, 0.28)
            n_blobs = int(rng.integers(3, 7))
        blobs = _place_blobs(rng, spec, target * lung_pixels, n_blobs, s)
        if blobs is None:
            continue
        achieved = sum((b.x_max - b.x_min) * (b.y_max - b.y_min)
                       for b in blobs) / lung_pixels
        if kind == "mild" and not achieved < threshold - 0.03:
            continue
        if kind == "alarming" and not achieved > threshold + 0.03:
            continue
        return render(PhantomSpec(size=size, body_radius=spec.body_radius,
                                  lungs=spec.lungs, blobs=tuple(blobs)),
                      threshold, source_id)
    raise RuntimeError(f"could not construct a {kind} phantom")


def _place_blobs(rng, spec: PhantomSpec, target_px: float, n_blobs: int,
                 scale: float):
    """Place non-overlapping lesion rectangles totalling about target_px.

    Rectangles keep a clearance gap so morphology cannot merge them, and
    every corner stays strictly inside its lung ellipse.
    """
    min_side = max(5, round(16 * scale))
    gap = max(2, round(6 * scale))
    weights = rng.uniform(0.7, 1.3, n_blobs)
    areas = target_px * weights / weights.sum()
    placed: list[BoundingBox] = []
    for j, area in enumerate(areas):
        lung = spec.lungs[j % 2]
        box = None
        for _ in range(300):
            aspect = rng.uniform(0.6, 1.6)
            w = max(min_side, round(math.sqrt(area * aspect)))
            h = max(min_side, round(area / w))
            theta = rng.uniform(0, 2 * math.pi)
            rad = math.sqrt(rng.uniform(0, 1)) * 0.55
            bx = lung.cx + math.cos(theta) * rad * lung.rx
            by = lung.cy + math.sin(theta) * rad * lung.ry
            x0, y0 = round(bx - w / 2), round(by - h / 2)
            cand = BoundingBox(x0, y0, x0 + w, y0 + h)
            corners = [(cand.x_min, cand.y_min), (cand.x_min, cand.y_max),
                       (cand.x_max, cand.y_min), (cand.x_max, cand.y_max)]
            if not all(lung.covers_point(x, y, slack=0.93) for x, y in corners):
                continue
            padded = BoundingBox(max(0, cand.x_min - gap),
                                 max(0, cand.y_min - gap),
                                 cand.x_max + gap, cand.y_max + gap)
            if any(intersection_area(padded, p) > 0 for p in placed):
                continue
            box = cand
            break
        if box is None:
            return None
        placed.append(box)
    return placed
