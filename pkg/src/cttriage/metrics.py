"""Evaluation toolkit: dataset splitting, confusion matrices, per-class
precision/recall/F1, Wilson score intervals, bootstrap intervals, and
report emission.

Metrics with a zero denominator are returned as None, never coerced to 0:
desk-scale confusion matrices hit empty denominators routinely and a
silent 0 would be indistinguishable from a genuine zero score.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal, ROUND_HALF_EVEN
import csv
import io
import json
import math

import numpy as np

from .errors import (EmptyDataset, InvalidProportion, MissingPrediction,
                     QuotaMismatch, ZeroSampleSize)

CLASSES = ("COVID", "NonCOVID")
PARTITIONS = ("train", "val", "test")


@dataclass
class LabeledItem:
    scan_id: str
    true_class: str
    predicted_class: str | None = None

    def __post_init__(self):
        if not self.scan_id:
            raise ValueError("scan_id must be nonempty")
        if self.true_class not in CLASSES:
            raise ValueError(f"true_class must be one of {CLASSES}")
        if self.predicted_class is not None and self.predicted_class not in CLASSES:
            raise ValueError(f"predicted_class must be one of {CLASSES} or None")


@dataclass
class SplitPlan:
    """Partitioning plan: 'ratio' for stratified fractions, 'quota' for
    exact per-class per-partition counts."""

    mode: str = "ratio"
    ratios: tuple[float, float, float] = (0.7, 0.15, 0.15)
    quotas: dict[str, dict[str, int]] | None = None
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("ratio", "quota"):
            raise ValueError("mode must be 'ratio' or 'quota'")
        if self.mode == "ratio":
            r = self.ratios
            if len(r) != 3 or any(x < 0 or x > 1 for x in r):
                raise ValueError("ratios must be three fractions in [0, 1]")
            if abs(sum(r) - 1.0) > 1e-9:
                raise ValueError("ratios must sum to 1 within 1e-9")
        else:
            if not self.quotas:
                raise ValueError("quota mode requires quotas")


@dataclass
class ConfusionMatrix:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be >= 0")


@dataclass
class ConfidenceInterval:
    center: float
    half_width: float
    low: float
    high: float
    z: float
    n: int


@dataclass
class ClassMetrics:
    """Per-class evaluation row, the unit of report emission."""

    label: str
    precision: float | None
    recall: float | None
    f1: float | None
    precision_ci: ConfidenceInterval | None = None
    recall_ci: ConfidenceInterval | None = None


def split(items: list[LabeledItem], plan: SplitPlan):
    """Partition items into (train, val, test) per the plan.

    Partitions are disjoint, cover every item, and are deterministic for a
    given seed. Ratio mode is per-class stratified with largest-remainder
    rounding; quota mode draws exact per-class counts.
    """
    if not items:
        raise EmptyDataset("cannot split zero items")
    ids = [it.scan_id for it in items]
    if len(set(ids)) != len(ids):
        raise ValueError("scan_ids must be unique within a dataset")
    rng = np.random.default_rng(plan.seed)
    parts: dict[str, list[LabeledItem]] = {p: [] for p in PARTITIONS}
    for cls in CLASSES:
        members = [it for it in items if it.true_class == cls]
        if not members:
            if plan.mode == "quota" and any(
                    plan.quotas.get(cls, {}).get(p, 0) for p in PARTITIONS):
                raise QuotaMismatch(f"quota given for absent class {cls}")
            continue
        order = rng.permutation(len(members))
        shuffled = [members[i] for i in order]
        if plan.mode == "ratio":
            counts = largest_remainder_counts(len(members), plan.ratios)
        else:
            if cls not in plan.quotas:
                raise QuotaMismatch(f"no quota for class {cls}")
            counts = [int(plan.quotas[cls].get(p, 0)) for p in PARTITIONS]
            if sum(counts) != len(members):
                raise QuotaMismatch(
                    f"quotas for {cls} sum to {sum(counts)}, "
                    f"class has {len(members)} items")
        offset = 0
        for part, cnt in zip(PARTITIONS, counts):
            parts[part].extend(shuffled[offset:offset + cnt])
            offset += cnt
    return parts["train"], parts["val"], parts["test"]


def largest_remainder_counts(total: int, fractions) -> list[int]:
    """Integer apportionment of ``total`` by largest remainder; ties go to
    the earlier position."""
    exact = [total * f for f in fractions]
    base = [math.floor(e) for e in exact]
    leftover = total - sum(base)
    remainders = sorted(range(len(fractions)),
                        key=lambda i: (-(exact[i] - base[i]), i))
    for i in remainders[:leftover]:
        base[i] += 1
    return base


def confusion(items: list[LabeledItem]) -> ConfusionMatrix:
    """Count a confusion matrix with COVID as the positive class."""
    cm = ConfusionMatrix()
    for it in items:
        if it.predicted_class is None:
            raise MissingPrediction(f"item {it.scan_id} has no prediction")
        pos_true = it.true_class == "COVID"
        pos_pred = it.predicted_class == "COVID"
        if pos_true and pos_pred:
            cm.tp += 1
        elif pos_true:
            cm.fn += 1
        elif pos_pred:
            cm.fp += 1
        else:
            cm.tn += 1
    return cm


def precision_recall_f1(cm: ConfusionMatrix, positive: str = "COVID"):
    """Per-class precision, recall, F1; None where a denominator is zero."""
    if positive == "COVID":
        tp, fp, fn = cm.tp, cm.fp, cm.fn
    elif positive == "NonCOVID":
        tp, fp, fn = cm.tn, cm.fn, cm.fp
    else:
        raise ValueError(f"positive must be one of {CLASSES}")
    precision = tp / (tp + fp) if tp + fp > 0 else None
    recall = tp / (tp + fn) if tp + fn > 0 else None
    if precision is None or recall is None or precision + recall == 0:
        f1 = None
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return precision, recall, f1


def wilson_interval(p_hat: float, n: int, z: float = 1.96) -> ConfidenceInterval:
    """Wilson score interval for a binomial proportion.

    center    = (p + z^2/2n) / (1 + z^2/n)
    half      = z/(1 + z^2/n) * sqrt(p(1-p)/n + z^2/4n^2)
    low/high are clamped to [0, 1].
    """
    if not 0.0 <= p_hat <= 1.0:
        raise InvalidProportion(f"p_hat {p_hat} outside [0, 1]")
    if n < 1:
        raise ZeroSampleSize(f"n must be >= 1, got {n}")
    if z < 0:
        raise ValueError("z must be >= 0")
    z2n = z * z / n
    center = (p_hat + z * z / (2 * n)) / (1 + z2n)
    half = (z / (1 + z2n)) * math.sqrt(p_hat * (1 - p_hat) / n
                                       + z * z / (4 * n * n))
    return ConfidenceInterval(center=center, half_width=half,
                              low=max(0.0, center - half),
                              high=min(1.0, center + half), z=z, n=n)


def bootstrap_intervals(items: list[LabeledItem], resamples: int = 1000,
                        seed: int = 0) -> dict:
    """Percentile (2.5/97.5) intervals for per-class precision and recall
    over resampled-with-replacement prediction sets.

    Deterministic for a given seed regardless of any internal parallelism:
    resample i draws from a generator seeded by (seed, i). Metrics
    undefined in a resample are dropped; a metric undefined in every
    resample maps to None. The interval's z field is 0 (not a z-method).
    """
    if resamples < 100:
        raise ValueError("resamples must be >= 100")
    if not items:
        raise EmptyDataset("cannot bootstrap zero items")
    n = len(items)
    values: dict[tuple[str, str], list[float]] = {
        (cls, m): [] for cls in CLASSES for m in ("precision", "recall")}
    for i in range(resamples):
        rng = np.random.default_rng([seed, i])
        draw = [items[j] for j in rng.integers(0, n, n)]
        cm = confusion(draw)
        for cls in CLASSES:
            p, r, _ = precision_recall_f1(cm, positive=cls)
            if p is not None:
                values[(cls, "precision")].append(p)
            if r is not None:
                values[(cls, "recall")].append(r)
    out: dict[str, dict[str, ConfidenceInterval | None]] = {}
    for cls in CLASSES:
        out[cls] = {}
        for metric in ("precision", "recall"):
            vals = values[(cls, metric)]
            if not vals:
                out[cls][metric] = None
                continue
            low, high = np.percentile(vals, [2.5, 97.5])
            out[cls][metric] = ConfidenceInterval(
                center=(low + high) / 2, half_width=(high - low) / 2,
                low=float(low), high=float(high), z=0.0, n=n)
    return out


def evaluate_predictions(items: list[LabeledItem], ci: str | None = "wilson",
                         z: float = 1.96, resamples: int = 1000,
                         seed: int = 0) -> list[ClassMetrics]:
    """Full evaluation: confusion, per-class metrics, optional intervals."""
    cm = confusion(items)
    boot = bootstrap_intervals(items, resamples, seed) if ci == "bootstrap" else None
    rows = []
    for cls in CLASSES:
        p, r, f1 = precision_recall_f1(cm, positive=cls)
        p_ci = r_ci = None
        if ci == "wilson":
            if cls == "COVID":
                pred_pos, support = cm.tp + cm.fp, cm.tp + cm.fn
            else:
                pred_pos, support = cm.tn + cm.fn, cm.tn + cm.fp
            if p is not None and pred_pos > 0:
                p_ci = wilson_interval(p, pred_pos, z)
            if r is not None and support > 0:
                r_ci = wilson_interval(r, support, z)
        elif ci == "bootstrap":
            p_ci = boot[cls]["precision"]
            r_ci = boot[cls]["recall"]
        rows.append(ClassMetrics(label=cls, precision=p, recall=r, f1=f1,
                                 precision_ci=p_ci, recall_ci=r_ci))
    return rows


def round_display(x: float | None, places: int = 2) -> float | None:
    """Round-half-even display rounding; None passes through."""
    if x is None:
        return None
    q = Decimal(1).scaleb(-places)
    return float(Decimal(repr(float(x))).quantize(q, rounding=ROUND_HALF_EVEN))


def emit_report(rows: list[ClassMetrics], format: str = "json") -> bytes:
    """Serialize metric rows deterministically.

    JSON retains raw full-precision values; CSV is the display format,
    rounded half-even to 2 decimal places with undefined cells as 'NA'.
    """
    if format == "json":
        payload = {"classes": [_row_to_dict(r) for r in rows]}
        return json.dumps(payload, sort_keys=True, indent=2).encode()
    if format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["class", "precision", "recall", "f1",
                         "precision_ci_low", "precision_ci_high",
                         "recall_ci_low", "recall_ci_high"])
        for r in rows:
            writer.writerow([
                r.label,
                _cell(r.precision), _cell(r.recall), _cell(r.f1),
                _cell(r.precision_ci.low if r.precision_ci else None),
                _cell(r.precision_ci.high if r.precision_ci else None),
                _cell(r.recall_ci.low if r.recall_ci else None),
                _cell(r.recall_ci.high if r.recall_ci else None),
            ])
        return buf.getvalue().encode()
    raise ValueError(f"unknown report format {format!r}")


def parse_report(data: bytes) -> list[ClassMetrics]:
    """Parse a JSON report back into metric rows (raw-value round trip)."""
    payload = json.loads(data)
    rows = []
    for entry in payload["classes"]:
        rows.append(ClassMetrics(
            label=entry["class"],
            precision=entry["precision"],
            recall=entry["recall"],
            f1=entry["f1"],
            precision_ci=_ci_from_dict(entry.get("precision_ci")),
            recall_ci=_ci_from_dict(entry.get("recall_ci")),
        ))
    return rows


def _row_to_dict(r: ClassMetrics) -> dict:
    return {
        "class": r.label,
        "precision": r.precision,
        "recall": r.recall,
        "f1": r.f1,
        "precision_ci": _ci_to_dict(r.precision_ci),
        "recall_ci": _ci_to_dict(r.recall_ci),
    }


def _ci_to_dict(ci: ConfidenceInterval | None):
    if ci is None:
        return None
    return {"center": ci.center, "half_width": ci.half_width,
            "low": ci.low, "high": ci.high, "z": ci.z, "n": ci.n}


def _ci_from_dict(d):
    if d is None:
        return None
    return ConfidenceInterval(**d)


def _cell(x: float | None) -> str:
    rounded = round_display(x)
    return "NA" if rounded is None else f"{rounded:.2f}"
