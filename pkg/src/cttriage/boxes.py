"""Axis-aligned bounding-box algebra.

Boxes use half-open integer pixel coordinates: column ``x_max`` and row
``y_max`` are excluded, so ``area = (x_max - x_min) * (y_max - y_min)``.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class BoundingBox:
    x_min: int
    y_min: int
    x_max: int
    y_max: int

    def __post_init__(self):
        if self.x_min < 0 or self.y_min < 0:
            raise ValueError(f"box coordinates must be >= 0: {self}")
        if self.x_min >= self.x_max or self.y_min >= self.y_max:
            raise ValueError(f"box must have strictly positive extent: {self}")

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.x_min, self.y_min, self.x_max, self.y_max)


@dataclass(frozen=True)
class Detection:
    box: BoundingBox
    score: float
    label: str = "lesion"

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must lie in [0, 1], got {self.score}")


def area(box: BoundingBox) -> int:
    return (box.x_max - box.x_min) * (box.y_max - box.y_min)


def intersection_area(a: BoundingBox, b: BoundingBox) -> int:
    """Overlap area of two boxes; 0 when disjoint."""
    w = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    h = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if w <= 0 or h <= 0:
        return 0
    return w * h


def contains(outer: BoundingBox, inner: BoundingBox) -> bool:
    """True when ``inner`` lies entirely within ``outer`` (identical counts)."""
    return (outer.x_min <= inner.x_min and outer.y_min <= inner.y_min
            and outer.x_max >= inner.x_max and outer.y_max >= inner.y_max)


def containment_suppress(dets: list[Detection]) -> list[Detection]:
    """Drop every detection fully contained in another detection's box.

    A box is suppressed when some other box contains it entirely, i.e. the
    pairwise intersection equals the smaller box's area. Containment is
    transitive, so a single pass over maximal elements reaches the fixpoint.
    Identical boxes keep the higher score, then the earlier input position.
    Relative input order of survivors is preserved.
    """
    n = len(dets)
    keep = [True] * n
    for i in range(n):
        bi = dets[i].box
        for j in range(n):
            if i == j:
                continue
            bj = dets[j].box
            if not contains(bj, bi):
                continue
            if bi == bj:
                # mutual containment: prefer score, then input order
                if (dets[j].score, -j) > (dets[i].score, -i):
                    keep[i] = False
                    break
            else:
                keep[i] = False
                break
    return [d for d, k in zip(dets, keep) if k]


def union_area(boxes: list[BoundingBox]) -> int:
    """Area of the set-union of boxes, exact for integer coordinates.

    Coordinate-compression sweep: the unique x/y edges induce a grid whose
    cells are each either fully covered or fully uncovered.
    """
    if not boxes:
        return 0
    xs = sorted({b.x_min for b in boxes} | {b.x_max for b in boxes})
    ys = sorted({b.y_min for b in boxes} | {b.y_max for b in boxes})
    x_index = {v: i for i, v in enumerate(xs)}
    y_index = {v: i for i, v in enumerate(ys)}
    covered = [[False] * (len(xs) - 1) for _ in range(len(ys) - 1)]
    for b in boxes:
        for yi in range(y_index[b.y_min], y_index[b.y_max]):
            row = covered[yi]
            for xi in range(x_index[b.x_min], x_index[b.x_max]):
                row[xi] = True
    total = 0
    for yi in range(len(ys) - 1):
        dy = ys[yi + 1] - ys[yi]
        row = covered[yi]
        for xi in range(len(xs) - 1):
            if row[xi]:
                total += (xs[xi + 1] - xs[xi]) * dy
    return total


def top_k_by_score(dets: list[Detection], k: int) -> list[Detection]:
    """The k highest-score detections, descending, ties by input order."""
    if k < 0:
        raise ValueError("k must be >= 0")
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))
    return [dets[i] for i in order[:k]]
