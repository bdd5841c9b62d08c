"""Lesion detectors: the pluggable interface, a deterministic classical
reference implementation, and a sidecar adapter for externally produced
detections.

The reference detector stands in for a trained network: lesions appear as
bright in-lung regions, so thresholding inside the lung mask followed by
connected-component extraction yields scored boxes. Scores are mean
component intensity / 255 and are not comparable to learned-model scores.
"""

from __future__ import annotations

from dataclasses import dataclass
import json
import time
from pathlib import Path

import numpy as np
from scipy import ndimage
from sklearn.base import BaseEstimator

from .boxes import BoundingBox, Detection, top_k_by_score
from .errors import DetectorUnavailable, SchemaViolation
from .image import ScanImage
from .lungs import LungMask
from .validation import as_luminance, check_same_shape

DETECTOR_KINDS = ("reference_blob", "external_sidecar")


@dataclass
class DetectorConfig:
    kind: str = "reference_blob"
    max_proposals: int = 1000
    score_floor: float = 0.5
    blob_intensity_threshold: int = 160
    min_blob_area: int = 25
    connectivity: int = 4

    def __post_init__(self):
        if self.kind not in DETECTOR_KINDS:
            raise ValueError(f"unknown detector kind {self.kind!r}")
        if not 0.0 <= self.score_floor <= 1.0:
            raise ValueError("score_floor must lie in [0, 1]")
        if self.max_proposals < 1:
            raise ValueError("max_proposals must be >= 1")
        if self.connectivity not in (4, 8):
            raise ValueError("connectivity must be 4 or 8")


@dataclass
class DetectionSet:
    scan_id: str
    detections: list[Detection]
    detector_id: str
    elapsed: float = 0.0  # milliseconds

    def __post_init__(self):
        if self.elapsed < 0:
            raise ValueError("elapsed must be >= 0")


class ReferenceBlobDetector(BaseEstimator):
    """Deterministic classical detector over (image, lung mask).

    Pixels at or above ``blob_intensity_threshold`` inside the mask are
    grouped into connected components (4-connected by default); components
    smaller than ``min_blob_area`` are dropped; each surviving component
    becomes one detection whose box is the component's bounding box and
    whose score is its mean intensity / 255.
    """

    detector_id = "reference_blob_v1"

    def __init__(self, blob_intensity_threshold=160, min_blob_area=25,
                 score_floor=0.5, max_proposals=1000, connectivity=4):
        self.blob_intensity_threshold = blob_intensity_threshold
        self.min_blob_area = min_blob_area
        self.score_floor = score_floor
        self.max_proposals = max_proposals
        self.connectivity = connectivity

    def fit(self, X=None, y=None):
        return self

    def predict(self, img: ScanImage, mask: LungMask) -> DetectionSet:
        check_same_shape(img, mask)
        start = time.perf_counter()
        lum = as_luminance(img.pixels)
        hot = (lum >= self.blob_intensity_threshold) & mask.bits
        structure = (ndimage.generate_binary_structure(2, 1)
                     if self.connectivity == 4
                     else ndimage.generate_binary_structure(2, 2))
        labels, count = ndimage.label(hot, structure=structure)
        dets: list[Detection] = []
        for idx in range(1, count + 1):
            component = labels == idx
            size = int(np.count_nonzero(component))
            if size < self.min_blob_area:
                continue
            score = float(lum[component].mean() / 255.0)
            if score < self.score_floor:
                continue
            ys, xs = np.nonzero(component)
            box = BoundingBox(int(xs.min()), int(ys.min()),
                              int(xs.max()) + 1, int(ys.max()) + 1)
            dets.append(Detection(box=box, score=score))
        dets = top_k_by_score(dets, self.max_proposals)
        elapsed_ms = (time.perf_counter() - start) * 1000.0
        return DetectionSet(scan_id=img.source_id, detections=dets,
                            detector_id=self.detector_id, elapsed=elapsed_ms)


class SidecarDetector(BaseEstimator):
    """Adapter that serves detections produced elsewhere.

    ``source`` may be a directory (``{scan_id}.json`` per scan), a single
    sidecar file, or a mapping of scan_id to already-parsed DetectionSet.
    Detections are post-filtered to the detect() contract: score at or
    above ``score_floor``, boxes clipped to image bounds, boxes that miss
    the lung mask dropped, at most ``max_proposals`` kept.
    """

    def __init__(self, source=None, score_floor=0.5, max_proposals=1000):
        self.source = source
        self.score_floor = score_floor
        self.max_proposals = max_proposals

    def fit(self, X=None, y=None):
        return self

    def predict(self, img: ScanImage, mask: LungMask) -> DetectionSet:
        check_same_shape(img, mask)
        start = time.perf_counter()
        raw = self._lookup(img.source_id)
        dets = []
        for d in raw.detections:
            if d.score < self.score_floor:
                continue
            clipped = _clip_box(d.box, img.width, img.height)
            if clipped is None:
                continue
            if not mask.bits[clipped.y_min:clipped.y_max,
                             clipped.x_min:clipped.x_max].any():
                continue
            dets.append(Detection(box=clipped, score=d.score, label=d.label))
        dets = top_k_by_score(dets, self.max_proposals)
        elapsed_ms = (time.perf_counter() - start) * 1000.0
        return DetectionSet(scan_id=img.source_id, detections=dets,
                            detector_id=raw.detector_id, elapsed=elapsed_ms)

    def _lookup(self, scan_id: str) -> DetectionSet:
        src = self.source
        if src is None:
            raise DetectorUnavailable("no sidecar source configured")
        if isinstance(src, dict):
            if scan_id not in src:
                raise DetectorUnavailable(f"no sidecar entry for {scan_id!r}")
            entry = src[scan_id]
            if isinstance(entry, DetectionSet):
                return entry
            return load_sidecar(json.dumps(entry).encode(), scan_id)
        path = Path(src)
        if path.is_dir():
            path = path / f"{scan_id}.json"
        if not path.is_file():
            raise DetectorUnavailable(f"sidecar file not found: {path}")
        return load_sidecar(path, scan_id)


def load_sidecar(path_or_bytes, scan_id: str = "") -> DetectionSet:
    """Parse and validate a detection sidecar payload.

    Raises SchemaViolation for missing fields, non-integer or degenerate
    box coordinates, scores outside [0, 1], or a scan_id mismatch.
    """
    if isinstance(path_or_bytes, (str, Path)):
        data = Path(path_or_bytes).read_bytes()
    else:
        data = path_or_bytes
    try:
        payload = json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise SchemaViolation(f"sidecar is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise SchemaViolation("sidecar payload must be a JSON object")
    for key in ("scan_id", "detector_id", "detections"):
        if key not in payload:
            raise SchemaViolation(f"sidecar missing field {key!r}")
    if not isinstance(payload["scan_id"], str) or not isinstance(payload["detector_id"], str):
        raise SchemaViolation("scan_id and detector_id must be strings")
    if scan_id and payload["scan_id"] != scan_id:
        raise SchemaViolation(
            f"sidecar scan_id {payload['scan_id']!r} does not match {scan_id!r}")
    if not isinstance(payload["detections"], list):
        raise SchemaViolation("detections must be a list")
    dets = []
    for i, entry in enumerate(payload["detections"]):
        dets.append(_parse_detection(entry, i))
    return DetectionSet(scan_id=payload["scan_id"], detections=dets,
                        detector_id=payload["detector_id"])


def dump_sidecar(ds: DetectionSet) -> bytes:
    """Serialize a DetectionSet to the sidecar JSON schema (UTF-8)."""
    payload = {
        "scan_id": ds.scan_id,
        "detector_id": ds.detector_id,
        "detections": [
            {"box": list(d.box.as_tuple()), "score": d.score}
            for d in ds.detections
        ],
    }
    return json.dumps(payload, separators=(",", ":"), sort_keys=True).encode()


def build_detector(cfg: DetectorConfig, sidecar_source=None):
    """Instantiate the detector an inference run should use."""
    if cfg.kind == "reference_blob":
        return ReferenceBlobDetector(
            blob_intensity_threshold=cfg.blob_intensity_threshold,
            min_blob_area=cfg.min_blob_area,
            score_floor=cfg.score_floor,
            max_proposals=cfg.max_proposals,
            connectivity=cfg.connectivity,
        )
    return SidecarDetector(source=sidecar_source,
                           score_floor=cfg.score_floor,
                           max_proposals=cfg.max_proposals)


def detect(img: ScanImage, mask: LungMask, cfg: DetectorConfig,
           sidecar_source=None) -> DetectionSet:
    """Run the configured detector over one scan."""
    return build_detector(cfg, sidecar_source).predict(img, mask)


def _parse_detection(entry, index: int) -> Detection:
    if not isinstance(entry, dict) or "box" not in entry or "score" not in entry:
        raise SchemaViolation(f"detection #{index} must have 'box' and 'score'")
    box = entry["box"]
    if (not isinstance(box, list) or len(box) != 4
            or any(isinstance(v, bool) or not isinstance(v, int) for v in box)):
        raise SchemaViolation(
            f"detection #{index} box must be [x_min, y_min, x_max, y_max] integers")
    score = entry["score"]
    if isinstance(score, bool) or not isinstance(score, (int, float)):
        raise SchemaViolation(f"detection #{index} score must be a number")
    if not 0.0 <= score <= 1.0:
        raise SchemaViolation(f"detection #{index} score {score} outside [0, 1]")
    x_min, y_min, x_max, y_max = box
    if x_min < 0 or y_min < 0 or x_min >= x_max or y_min >= y_max:
        raise SchemaViolation(f"detection #{index} box {box} is degenerate")
    return Detection(box=BoundingBox(x_min, y_min, x_max, y_max),
                     score=float(score))


def _clip_box(box: BoundingBox, width: int, height: int):
    x0 = max(0, min(box.x_min, width))
    y0 = max(0, min(box.y_min, height))
    x1 = max(0, min(box.x_max, width))
    y1 = max(0, min(box.y_max, height))
    if x0 >= x1 or y0 >= y1:
        return None
    return BoundingBox(x0, y0, x1, y1)
