"""Triage: detection set + lung mask -> intensity ratio -> verdict.

The intensity is the fraction of lung area covered by retained lesion
boxes. Retention is score-floor filtering followed by containment
suppression. A scan with no retained box is NonCOVID; otherwise the
intensity against the threshold (default 0.15) separates Mild from
Alarming.
"""

from __future__ import annotations

from dataclasses import dataclass
import json

import numpy as np
from sklearn.base import BaseEstimator

from .boxes import Detection, containment_suppress, union_area
from .detect import DetectionSet
from .errors import EmptyLungMask
from .lungs import LungMask

NUMERATOR_MODES = ("clipped_union", "box_union")

DEFAULT_THRESHOLD = 0.15
DEFAULT_SCORE_FLOOR = 0.5


@dataclass
class TriageVerdict:
    covid_class: str          # "COVID" | "NonCOVID"
    severity: str             # "None" | "Mild" | "Alarming"
    intensity: float
    retained_boxes: list[Detection]
    threshold_used: float

    def to_json_dict(self) -> dict:
        return {
            "covid_class": self.covid_class,
            "severity": self.severity,
            "intensity": self.intensity,
            "threshold": self.threshold_used,
            "boxes": [
                {"box": list(d.box.as_tuple()), "score": d.score}
                for d in self.retained_boxes
            ],
        }

    def to_json(self) -> bytes:
        return json.dumps(self.to_json_dict(), sort_keys=True).encode()


def _as_detections(dets) -> list[Detection]:
    if isinstance(dets, DetectionSet):
        return dets.detections
    return list(dets)


def retain_detections(dets,
                      score_floor: float = DEFAULT_SCORE_FLOOR) -> list[Detection]:
    """Score-floor filter then containment suppression, in that order.

    Accepts a DetectionSet or any iterable of Detection.
    """
    kept = [d for d in _as_detections(dets) if d.score >= score_floor]
    return containment_suppress(kept)


def intensity(dets: DetectionSet, mask: LungMask,
              score_floor: float = DEFAULT_SCORE_FLOOR,
              numerator_mode: str = "clipped_union") -> float:
    """Covered fraction of the lung: union of retained boxes over lung area.

    ``clipped_union`` (default) counts only pixels that are both inside a
    retained box and inside the mask; ``box_union`` uses the raw box union
    area. Both are capped at 1.
    """
    retained = retain_detections(dets, score_floor)
    return _intensity_of(retained, mask, numerator_mode)


def classify(dets: DetectionSet, mask: LungMask,
             threshold: float = DEFAULT_THRESHOLD,
             score_floor: float = DEFAULT_SCORE_FLOOR,
             numerator_mode: str = "clipped_union",
             alarming_on_equal: bool = True) -> TriageVerdict:
    """Apply the triage decision table.

    No retained box -> (NonCOVID, None, 0). At least one retained box is
    a COVID call; the intensity against ``threshold`` picks Mild vs
    Alarming, with equality counting as Alarming by default.
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie strictly between 0 and 1")
    if mask.area == 0:
        raise EmptyLungMask("lung mask has zero area")
    retained = retain_detections(dets, score_floor)
    if not retained:
        return TriageVerdict("NonCOVID", "None", 0.0, [], threshold)
    value = _intensity_of(retained, mask, numerator_mode)
    above = value >= threshold if alarming_on_equal else value > threshold
    severity = "Alarming" if above else "Mild"
    canonical = sorted(retained, key=lambda d: (-d.score, d.box.as_tuple()))
    return TriageVerdict("COVID", severity, value, canonical, threshold)


class TriageClassifier(BaseEstimator):
    """Stateless predictor: (DetectionSet, LungMask) -> TriageVerdict."""

    def __init__(self, threshold=DEFAULT_THRESHOLD,
                 score_floor=DEFAULT_SCORE_FLOOR,
                 numerator_mode="clipped_union", alarming_on_equal=True):
        self.threshold = threshold
        self.score_floor = score_floor
        self.numerator_mode = numerator_mode
        self.alarming_on_equal = alarming_on_equal

    def fit(self, X=None, y=None):
        return self

    def predict(self, dets: DetectionSet, mask: LungMask) -> TriageVerdict:
        return classify(dets, mask, threshold=self.threshold,
                        score_floor=self.score_floor,
                        numerator_mode=self.numerator_mode,
                        alarming_on_equal=self.alarming_on_equal)


def _intensity_of(retained: list[Detection], mask: LungMask,
                  numerator_mode: str) -> float:
    if numerator_mode not in NUMERATOR_MODES:
        raise ValueError(f"unknown numerator mode {numerator_mode!r}")
    if mask.area == 0:
        raise EmptyLungMask("lung mask has zero area")
    if not retained:
        return 0.0
    if numerator_mode == "box_union":
        return min(1.0, union_area([d.box for d in retained]) / mask.area)
    canvas = np.zeros_like(mask.bits)
    for d in retained:
        b = d.box
        canvas[max(0, b.y_min):b.y_max, max(0, b.x_min):b.x_max] = True
    covered = int(np.count_nonzero(canvas & mask.bits))
    return min(1.0, covered / mask.area)
