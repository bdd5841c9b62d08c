"""CT-scan triage: lung segmentation, lesion detection, intensity-based
severity, evaluation metrics, and an authenticated HTTP service."""

from .boxes import (BoundingBox, Detection, area, containment_suppress,
                    contains, intersection_area, top_k_by_score, union_area)
from .detect import (DetectionSet, DetectorConfig, ReferenceBlobDetector,
                     SidecarDetector, detect, dump_sidecar, load_sidecar)
from .image import (AugmentSpec, ScanImage, augment, encode_png,
                    flip_horizontal, gaussian_blur, load_scan, resize,
                    rotate, translate)
from .lungs import LungMask, LungSegmenter, lung_area, segment_lungs
from .metrics import (ClassMetrics, ConfidenceInterval, ConfusionMatrix,
                      LabeledItem, SplitPlan, bootstrap_intervals, confusion,
                      emit_report, evaluate_predictions, parse_report,
                      precision_recall_f1, split, wilson_interval)
from .pipeline import (InferencePipeline, InferenceRecord, latency_summary,
                       render_overlay, render_proposals, run_inference)
from .triage import (TriageClassifier, TriageVerdict, classify, intensity,
                     retain_detections)

__version__ = "1.0.0"

__all__ = [
    "AugmentSpec", "BoundingBox", "ClassMetrics", "ConfidenceInterval",
    "ConfusionMatrix", "Detection", "DetectionSet", "DetectorConfig",
    "InferencePipeline", "InferenceRecord", "LabeledItem", "LungMask",
    "LungSegmenter", "ReferenceBlobDetector", "ScanImage", "SidecarDetector",
    "SplitPlan", "TriageClassifier", "TriageVerdict", "area", "augment",
    "bootstrap_intervals", "classify", "confusion", "containment_suppress",
    "contains", "detect", "dump_sidecar", "emit_report",
    "evaluate_predictions", "encode_png", "flip_horizontal", "gaussian_blur",
    "intensity", "intersection_area", "latency_summary", "load_scan",
    "load_sidecar", "lung_area", "parse_report", "precision_recall_f1",
    "render_overlay", "render_proposals", "resize", "retain_detections",
    "rotate", "run_inference", "segment_lungs", "split", "top_k_by_score",
    "translate", "union_area", "wilson_interval",
]
