"""End-to-end inference: decode, resize, segment, detect, triage, render.

Each run produces an InferenceRecord with per-stage monotonic timings and
a rendered overlay image. A failure at any stage yields a failure record
naming the stage and the error kind; verdict fields stay unset, so a
failure is never mistakable for a negative finding.
"""

from __future__ import annotations

import math
import time
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np
from PIL import Image, ImageDraw
from sklearn.base import BaseEstimator

from .boxes import top_k_by_score
from .detect import DetectorConfig, build_detector
from .errors import (CorruptImage, DetectorUnavailable, EmptyInput,
                     EmptyLungMask, NoLungFound, UnsupportedFormat)
from .image import ScanImage, encode_png, load_scan, resize
from .lungs import LungSegmenter
from .triage import DEFAULT_THRESHOLD, TriageVerdict, classify

WORKING_SIZE = 1024

STAGES = ("decode", "resize", "segment", "detect", "triage", "render")

FAILURE_KINDS = {
    UnsupportedFormat: "unsupported_format",
    CorruptImage: "corrupt_image",
    NoLungFound: "no_lung_found",
    EmptyLungMask: "empty_lung_mask",
    DetectorUnavailable: "detector_unavailable",
}

SEVERITY_COLORS = {
    "Alarming": (220, 40, 40),
    "Mild": (235, 150, 0),
    "None": (60, 170, 90),
}
PROPOSAL_COLOR = (70, 110, 230)
CAPTION_HEIGHT = 28


@dataclass
class InferenceRecord:
    """One pipeline run: verdict or failure, plus timing evidence."""

    record_id: str
    scan_id: str
    patient_id: str
    status: str                      # "succeeded" | "failed"
    detector_id: str
    created_at: str                  # ISO-8601 UTC
    elapsed_total: float             # milliseconds
    stage_timings: dict[str, float]  # stage -> milliseconds
    verdict: TriageVerdict | None = None
    failure_stage: str | None = None
    failure_kind: str | None = None
    failure_message: str | None = None
    overlay_ref: str | None = None
    overlay_png: bytes | None = field(default=None, repr=False)

    def to_json_dict(self) -> dict:
        return {
            "record_id": self.record_id,
            "scan_id": self.scan_id,
            "patient_id": self.patient_id,
            "status": self.status,
            "detector_id": self.detector_id,
            "created_at": self.created_at,
            "elapsed_total": self.elapsed_total,
            "stage_timings": dict(self.stage_timings),
            "verdict": self.verdict.to_json_dict() if self.verdict else None,
            "failure_stage": self.failure_stage,
            "failure_kind": self.failure_kind,
            "failure_message": self.failure_message,
            "overlay_ref": self.overlay_ref,
        }


def run_inference(scan_bytes: bytes, patient_id: str,
                  cfg: DetectorConfig | None = None,
                  threshold: float = DEFAULT_THRESHOLD,
                  *, scan_id: str | None = None, sidecar_source=None,
                  store=None, segmenter__params: dict | None = None
                  ) -> InferenceRecord:
    """Run the full pipeline on one encoded scan.

    ``store``, when given, must expose ``put(key, data)``; the overlay PNG
    is written under the record's overlay_ref key. Without a store the
    bytes ride along on the record. The triage score floor follows
    cfg.score_floor, so detector and triage agree on what counts.
    """
    cfg = cfg or DetectorConfig()
    record_id = uuid.uuid4().hex
    scan_id = scan_id or f"scan-{record_id[:12]}"
    created_at = datetime.now(timezone.utc).isoformat()
    timings: dict[str, float] = {}
    t_start = time.perf_counter()

    def fail(stage: str, exc: Exception) -> InferenceRecord:
        kind = FAILURE_KINDS.get(type(exc), "error")
        return InferenceRecord(
            record_id=record_id, scan_id=scan_id, patient_id=patient_id,
            status="failed", detector_id=cfg.kind, created_at=created_at,
            elapsed_total=(time.perf_counter() - t_start) * 1000.0,
            stage_timings=timings, failure_stage=stage, failure_kind=kind,
            failure_message=str(exc))

    stage = "decode"
    try:
        t0 = time.perf_counter()
        img = load_scan(scan_bytes, source_id=scan_id)
        timings[stage] = (time.perf_counter() - t0) * 1000.0

        stage = "resize"
        t0 = time.perf_counter()
        img = resize(img, WORKING_SIZE, WORKING_SIZE)
        timings[stage] = (time.perf_counter() - t0) * 1000.0

        stage = "segment"
        t0 = time.perf_counter()
        segmenter = LungSegmenter(**(segmenter__params or {}))
        mask = segmenter.fit().transform(img)
        timings[stage] = (time.perf_counter() - t0) * 1000.0

        stage = "detect"
        t0 = time.perf_counter()
        detector = build_detector(cfg, sidecar_source)
        dets = detector.predict(img, mask)
        timings[stage] = (time.perf_counter() - t0) * 1000.0

        stage = "triage"
        t0 = time.perf_counter()
        verdict = classify(dets, mask, threshold=threshold,
                           score_floor=cfg.score_floor)
        timings[stage] = (time.perf_counter() - t0) * 1000.0

        stage = "render"
        t0 = time.perf_counter()
        overlay = render_overlay(img, verdict)
        timings[stage] = (time.perf_counter() - t0) * 1000.0
    except tuple(FAILURE_KINDS) as exc:
        return fail(stage, exc)

    overlay_ref = f"overlays/{record_id}.png"
    if store is not None:
        store.put(overlay_ref, overlay)
        overlay_bytes = None
    else:
        overlay_bytes = overlay
    return InferenceRecord(
        record_id=record_id, scan_id=scan_id, patient_id=patient_id,
        status="succeeded", detector_id=dets.detector_id,
        created_at=created_at,
        elapsed_total=(time.perf_counter() - t_start) * 1000.0,
        stage_timings=timings, verdict=verdict, overlay_ref=overlay_ref,
        overlay_png=overlay_bytes)


class InferencePipeline(BaseEstimator):
    """Configured pipeline as a predictor over encoded scan bytes."""

    def __init__(self, detector_kind="reference_blob",
                 threshold=DEFAULT_THRESHOLD, score_floor=0.5,
                 blob_intensity_threshold=160, min_blob_area=25,
                 max_proposals=1000, sidecar_source=None):
        self.detector_kind = detector_kind
        self.threshold = threshold
        self.score_floor = score_floor
        self.blob_intensity_threshold = blob_intensity_threshold
        self.min_blob_area = min_blob_area
        self.max_proposals = max_proposals
        self.sidecar_source = sidecar_source

    def fit(self, X=None, y=None):
        return self

    def predict(self, scan_bytes: bytes, patient_id: str = "",
                scan_id: str | None = None, store=None) -> InferenceRecord:
        cfg = DetectorConfig(
            kind=self.detector_kind, score_floor=self.score_floor,
            blob_intensity_threshold=self.blob_intensity_threshold,
            min_blob_area=self.min_blob_area,
            max_proposals=self.max_proposals)
        return run_inference(scan_bytes, patient_id, cfg, self.threshold,
                             scan_id=scan_id,
                             sidecar_source=self.sidecar_source, store=store)


def render_overlay(img: ScanImage, verdict: TriageVerdict) -> bytes:
    """PNG of the scan with retained boxes, scores, and a verdict caption.

    Deterministic: same image and verdict give identical bytes. The
    caption strip is appended below the scan, so the scan pixels above it
    are untouched wherever no box is drawn.
    """
    canvas = _to_rgb_canvas(img)
    draw = ImageDraw.Draw(canvas)
    color = SEVERITY_COLORS[verdict.severity]
    for det in verdict.retained_boxes:
        _draw_box(draw, det.box.as_tuple(), color, f"{det.score:.2f}")
    caption = (f"{verdict.covid_class} / {verdict.severity}  "
               f"intensity={verdict.intensity:.3f}  "
               f"threshold={verdict.threshold_used:.2f}")
    return _with_caption(canvas, caption, color)


def render_proposals(img: ScanImage, detections, cap: int = 50) -> bytes:
    """Raw-ROI view: the highest-scoring proposals, display-capped."""
    shown = top_k_by_score(list(detections), cap)
    canvas = _to_rgb_canvas(img)
    draw = ImageDraw.Draw(canvas)
    for det in shown:
        _draw_box(draw, det.box.as_tuple(), PROPOSAL_COLOR, f"{det.score:.2f}")
    caption = f"{len(shown)} proposals shown (cap {cap})"
    return _with_caption(canvas, caption, PROPOSAL_COLOR)


def latency_summary(records) -> dict:
    """mean/min/max/p95 of elapsed_total in milliseconds.

    Accepts InferenceRecords or bare durations. p95 is nearest-rank:
    the smallest value with at least 95% of observations at or below it.
    """
    values = [r.elapsed_total if isinstance(r, InferenceRecord) else float(r)
              for r in records]
    if not values:
        raise EmptyInput("latency summary needs at least one record")
    ordered = sorted(values)
    rank = math.ceil(0.95 * len(ordered))
    return {"mean": sum(ordered) / len(ordered), "min": ordered[0],
            "max": ordered[-1], "p95": ordered[rank - 1]}


def _to_rgb_canvas(img: ScanImage) -> Image.Image:
    px = img.pixels
    pil = Image.fromarray(px, mode="L" if px.ndim == 2 else "RGB")
    return pil.convert("RGB")


def _draw_box(draw: ImageDraw.ImageDraw, box: tuple, color: tuple,
              label: str) -> None:
    x0, y0, x1, y1 = box
    # half-open box -> inclusive pixel corners
    draw.rectangle([x0, y0, x1 - 1, y1 - 1], outline=color, width=2)
    ty = y0 - 12 if y0 >= 12 else y0 + 2
    draw.text((x0 + 2, ty), label, fill=color)


def _with_caption(canvas: Image.Image, text: str, color: tuple) -> bytes:
    w, h = canvas.size
    framed = Image.new("RGB", (w, h + CAPTION_HEIGHT), (20, 20, 20))
    framed.paste(canvas, (0, 0))
    draw = ImageDraw.Draw(framed)
    draw.text((8, h + 8), text, fill=color)
    out = ScanImage(pixels=_pil_to_array(framed), source_id="overlay")
    return encode_png(out)


def _pil_to_array(pil: Image.Image) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(pil, dtype=np.uint8))
