"""Command-line entry point.

Subcommands: infer, evaluate, augment, lungmask, split, serve. Exit codes:
0 success, 1 domain error (undecodable scan, quota mismatch, failed
inference), 2 usage error. Machine-readable JSON goes to stdout and is
byte-identical for identical argv + inputs + seed; diagnostics go to
stderr. An optional --config JSON file supplies defaults that explicit
flags override.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .detect import DetectorConfig
from .errors import MissingPrediction, SchemaViolation, TriageError
from .image import AugmentSpec, augment, encode_png, load_scan
from .lungs import mask_to_image, segment_lungs
from .metrics import (LabeledItem, SplitPlan, emit_report,
                      evaluate_predictions, split)
from .pipeline import run_inference


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args = _layer_config(parser, args, argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (TriageError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cttriage",
        description="CT triage: inference, evaluation, and service tools.")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("infer", help="run the inference pipeline on one scan")
    p.add_argument("--scan", required=True, help="input PNG/JPEG path")
    p.add_argument("--patient", default="", help="patient identifier")
    p.add_argument("--detector", default="reference_blob",
                   choices=["reference_blob", "external_sidecar"])
    p.add_argument("--threshold", type=float, default=0.15)
    p.add_argument("--score-floor", type=float, default=0.5)
    p.add_argument("--blob-threshold", type=int, default=160)
    p.add_argument("--min-blob-area", type=int, default=25)
    p.add_argument("--max-proposals", type=int, default=1000)
    p.add_argument("--sidecar", default=None,
                   help="sidecar file or directory for external_sidecar")
    p.add_argument("--out", default=None,
                   help="write the full record JSON (with timings) here")
    p.add_argument("--overlay", default=None,
                   help="write the overlay PNG here")
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("evaluate", help="score predictions against labels")
    p.add_argument("--predictions", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--ci", default="wilson",
                   choices=["wilson", "bootstrap", "none"])
    p.add_argument("--z", type=float, default=1.96)
    p.add_argument("--resamples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", default="json", choices=["json", "csv"],
                   help="stdout format")
    p.add_argument("--out", default=None,
                   help="also write a report file (.csv or .json)")
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("augment", help="apply deterministic augmentations")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--rotate", type=float, default=0.0,
                   help="degrees counterclockwise about the image center")
    p.add_argument("--flip", action="store_true", help="horizontal flip")
    p.add_argument("--translate-x", type=float, default=0.0)
    p.add_argument("--translate-y", type=float, default=0.0)
    p.add_argument("--blur-sigma", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("lungmask", help="write the lung mask as a PNG")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_lungmask)

    p = sub.add_parser("split", help="partition a labeled dataset")
    p.add_argument("--labels", required=True)
    p.add_argument("--mode", default="ratio", choices=["ratio", "quota"])
    p.add_argument("--train", type=float, default=0.70)
    p.add_argument("--val", type=float, default=0.15)
    p.add_argument("--test", type=float, default=0.15)
    p.add_argument("--quotas", default=None,
                   help="JSON file: class -> partition -> count")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=None,
                   help="write train.json/val.json/test.json here")
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--storage-root", default=None)
    p.add_argument("--backend", default=None, choices=["file", "sqlite"])
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_serve)

    return parser


def _layer_config(parser, args, argv):
    """Fill in config-file values for flags not given explicitly.

    Keys use flag spelling ("score-floor") or dest spelling
    ("score_floor"); keys that don't match a flag of the active
    subcommand are ignored so one config can serve several subcommands.
    Subparsers re-apply their own defaults over anything set on the root
    parser, so this works on the parsed namespace instead.
    """
    config_path = getattr(args, "config", None)
    if not config_path:
        return args
    try:
        with open(config_path) as fh:
            overrides = json.load(fh)
    except OSError as exc:
        parser.error(f"cannot read config file: {exc}")
    except json.JSONDecodeError as exc:
        parser.error(f"config file is not valid JSON: {exc}")
    if not isinstance(overrides, dict):
        parser.error("config file must hold a JSON object")
    explicit = set()
    for token in (argv if argv is not None else sys.argv[1:]):
        if token.startswith("--"):
            explicit.add(token.split("=", 1)[0][2:].replace("-", "_"))
    for key, value in overrides.items():
        dest = key.replace("-", "_")
        if dest not in explicit and hasattr(args, dest):
            setattr(args, dest, value)
    return args


def _emit(payload: dict) -> None:
    print(json.dumps(payload, sort_keys=True, indent=2))


def cmd_infer(args) -> int:
    scan_bytes = Path(args.scan).read_bytes()
    cfg = DetectorConfig(kind=args.detector, score_floor=args.score_floor,
                         blob_intensity_threshold=args.blob_threshold,
                         min_blob_area=args.min_blob_area,
                         max_proposals=args.max_proposals)
    record = run_inference(scan_bytes, args.patient, cfg, args.threshold,
                           scan_id=Path(args.scan).stem,
                           sidecar_source=args.sidecar)
    if args.out:
        Path(args.out).write_bytes(json.dumps(
            record.to_json_dict(), sort_keys=True, indent=2).encode())
    if args.overlay and record.overlay_png:
        Path(args.overlay).write_bytes(record.overlay_png)
    if record.status != "succeeded":
        _emit(record.to_json_dict())
        print(f"error: {record.failure_kind} at stage "
              f"{record.failure_stage}: {record.failure_message}",
              file=sys.stderr)
        return 1
    _emit(record.verdict.to_json_dict())
    return 0


def _read_entries(path: str, what: str) -> list[dict]:
    """Read a JSON array of objects, each with a string "scan_id"."""
    try:
        entries = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaViolation(f"{what} file is not valid JSON: {exc}") from exc
    if not isinstance(entries, list):
        raise SchemaViolation(f"{what} file must be a JSON array")
    for index, entry in enumerate(entries):
        if not isinstance(entry, dict):
            raise SchemaViolation(f"{what} entry #{index} must be an object")
        if not isinstance(entry.get("scan_id"), str):
            raise SchemaViolation(
                f"{what} entry #{index} missing string field 'scan_id'")
    return entries


def _read_labels(path: str) -> list[dict]:
    entries = _read_entries(path, "labels")
    for index, entry in enumerate(entries):
        if not isinstance(entry.get("true_class"), str):
            raise SchemaViolation(
                f"labels entry #{index} missing string field 'true_class'")
    return entries


def _load_items(labels_path: str, predictions_path: str) -> list[LabeledItem]:
    labels = _read_labels(labels_path)
    preds = _read_entries(predictions_path, "predictions")
    by_id = {p["scan_id"]: p.get("predicted_class") for p in preds}
    items = []
    for entry in labels:
        sid = entry["scan_id"]
        predicted = entry.get("predicted_class") or by_id.get(sid)
        if predicted is None:
            raise MissingPrediction(f"no prediction for {sid!r}")
        items.append(LabeledItem(scan_id=sid, true_class=entry["true_class"],
                                 predicted_class=predicted))
    return items


def cmd_evaluate(args) -> int:
    items = _load_items(args.labels, args.predictions)
    ci = None if args.ci == "none" else args.ci
    rows = evaluate_predictions(items, ci=ci, z=args.z,
                                resamples=args.resamples, seed=args.seed)
    sys.stdout.write(emit_report(rows, format=args.format).decode())
    if args.format == "json":
        sys.stdout.write("\n")
    if args.out:
        out_format = ("csv" if args.out.endswith(".csv")
                      else "json" if args.out.endswith(".json")
                      else args.format)
        Path(args.out).write_bytes(emit_report(rows, format=out_format))
    return 0


def cmd_augment(args) -> int:
    img = load_scan(Path(args.input).read_bytes(),
                    source_id=Path(args.input).stem)
    spec = AugmentSpec(rotation_degrees=args.rotate,
                       horizontal_flip=args.flip,
                       translate_x=args.translate_x,
                       translate_y=args.translate_y,
                       gaussian_blur_sigma=args.blur_sigma)
    out = augment(img, spec, seed=args.seed)
    Path(args.output).write_bytes(encode_png(out))
    _emit({"input": args.input, "output": args.output,
           "width": out.width, "height": out.height,
           "ops": {"rotate": args.rotate, "flip": args.flip,
                   "translate_x": args.translate_x,
                   "translate_y": args.translate_y,
                   "blur_sigma": args.blur_sigma}})
    return 0


def cmd_lungmask(args) -> int:
    img = load_scan(Path(args.input).read_bytes(),
                    source_id=Path(args.input).stem)
    mask = segment_lungs(img)
    Path(args.output).write_bytes(encode_png(mask_to_image(mask)))
    _emit({"input": args.input, "output": args.output,
           "width": int(mask.bits.shape[1]),
           "height": int(mask.bits.shape[0]),
           "area": mask.area})
    return 0


def cmd_split(args) -> int:
    entries = _read_labels(args.labels)
    items = [LabeledItem(scan_id=e["scan_id"], true_class=e["true_class"],
                         predicted_class=e.get("predicted_class"))
             for e in entries]
    if args.mode == "quota":
        if not args.quotas:
            print("error: --quotas required in quota mode", file=sys.stderr)
            return 2
        try:
            quotas = json.loads(Path(args.quotas).read_text())
        except json.JSONDecodeError as exc:
            raise SchemaViolation(
                f"quotas file is not valid JSON: {exc}") from exc
        if not isinstance(quotas, dict):
            raise SchemaViolation("quotas file must hold a JSON object")
        plan = SplitPlan(mode="quota", quotas=quotas, seed=args.seed)
    else:
        plan = SplitPlan(mode="ratio",
                         ratios=(args.train, args.val, args.test),
                         seed=args.seed)
    train, val, test = split(items, plan)
    parts = {"train": train, "val": val, "test": test}
    if args.out_dir:
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        for name, part in parts.items():
            payload = [{"scan_id": it.scan_id, "true_class": it.true_class}
                       for it in part]
            (out_dir / f"{name}.json").write_text(
                json.dumps(payload, indent=2, sort_keys=True))
    summary = {name: {"total": len(part),
                      "COVID": sum(it.true_class == "COVID" for it in part),
                      "NonCOVID": sum(it.true_class == "NonCOVID"
                                      for it in part)}
               for name, part in parts.items()}
    _emit(summary)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import ServiceConfig, create_app

    overrides = {}
    if args.port is not None:
        overrides["listen_port"] = args.port
    if args.storage_root is not None:
        overrides["storage_root"] = args.storage_root
    if args.backend is not None:
        overrides["storage_backend"] = args.backend
    config = ServiceConfig.from_env(**overrides)
    app = create_app(config)
    uvicorn.run(app, host=args.host, port=config.listen_port,
                log_level="info")
    return 0


if __name__ == "__main__":
    sys.exit(main())
