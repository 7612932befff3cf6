"""Command-line front end.

Subcommands:
  detect     score one image; exit 0 = fault-free, 2 = faulty, 1 = error
  batch      score every manifest entry, writing predictions CSV + metrics JSON
  calibrate  derive decision threshold and EWMA limits from fault-free images
  monitor    run the EWMA chart over a score stream against saved limits
  synth      generate a labeled synthetic dataset
  evaluate   compute metrics from a predictions CSV, directly or via the chart
  overlay    draw retained mask boxes onto the source image

Batch fans images across a thread pool but always emits rows in manifest
order, so reruns with any worker count produce byte-identical predictions.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import json
import math
import os
import sys

from PIL import Image, ImageDraw

from .analysis import FAULTY, analyze_image
from .config import (
    LimitsDoc,
    PipelineConfig,
    load_config,
    load_limits,
    save_limits,
)
from .errors import (
    CalibrationContaminated,
    ConfigError,
    DegenerateLabels,
    WinspectError,
)
from .evaluation import (
    ScoredLabel,
    compute_auroc,
    compute_metrics,
    confusion_from_predictions,
)
from .imgio import load_image
from .monitor import (
    ControlLimits,
    calibrate_ucl,
    calibrate_z0,
    ewma_series,
    monitor_stream,
    write_trace_csv,
)
from .segmenter import Segmenter
from .synth import SynthSpec, TEXTURES, generate_dataset, read_manifest

PREDICTIONS_HEADER = ["image_id", "score", "predicted", "label"]


def _load_cfg(args) -> PipelineConfig:
    if args.config:
        return load_config(args.config)
    return PipelineConfig()


def _resolve_threshold(cfg: PipelineConfig, args) -> float:
    """Flag wins over limits file wins over the config document."""
    if getattr(args, "decision_threshold", None) is not None:
        if args.decision_threshold < 0:
            raise ConfigError("--decision-threshold must be >= 0")
        return args.decision_threshold
    if getattr(args, "limits", None):
        doc = load_limits(args.limits)
        if doc.decision_threshold is None:
            raise ConfigError(f"{args.limits} carries no decision_threshold")
        return doc.decision_threshold
    return cfg.require_concrete_threshold()


def _analyze_path(path, image_id, cfg, threshold, args, segmenter=None):
    image = load_image(path)
    return analyze_image(
        image,
        cfg.window,
        cfg.segmenter,
        cfg.thresholds,
        cfg.cluster,
        threshold,
        image_id=image_id,
        normalize_brightness=args.normalize_brightness,
        edge_complete=args.edge_complete,
        segmenter=segmenter,
    )


def _score_manifest(entries, root, cfg, threshold, args):
    """Score entries concurrently, returning per-entry outcomes in order.

    Each outcome is ("ok", AnalysisResult) or ("error", message); a failing
    image never aborts the rest of the batch.
    """
    workers = max(1, args.workers)
    seg = Segmenter(cfg.segmenter)

    def one(rel):
        path = rel if os.path.isabs(rel) else os.path.join(root, rel)
        return _analyze_path(path, rel, cfg, threshold, args, segmenter=seg)

    outcomes = [None] * len(entries)
    try:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {
                pool.submit(one, rel): i for i, (rel, _) in enumerate(entries)
            }
            for fut in concurrent.futures.as_completed(futures):
                i = futures[fut]
                try:
                    outcomes[i] = ("ok", fut.result())
                except (WinspectError, OSError, ValueError) as exc:
                    outcomes[i] = ("error", str(exc))
    finally:
        seg.close()
    return outcomes


def cmd_detect(args) -> int:
    cfg = _load_cfg(args)
    threshold = _resolve_threshold(cfg, args)
    result = _analyze_path(args.image, args.image, cfg, threshold, args)
    text = json.dumps(result.to_report(), indent=2)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return 2 if result.verdict == FAULTY else 0


def cmd_batch(args) -> int:
    cfg = _load_cfg(args)
    threshold = _resolve_threshold(cfg, args)
    entries = read_manifest(args.manifest)
    if not entries:
        raise ConfigError(f"{args.manifest} lists no images")
    root = os.path.dirname(os.path.abspath(args.manifest))
    outcomes = _score_manifest(entries, root, cfg, threshold, args)

    predictions_path = args.out or "predictions.csv"
    metrics_path = args.metrics or os.path.join(
        os.path.dirname(predictions_path) or ".", "metrics.json"
    )

    failures = []
    scored = []
    with open(predictions_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(PREDICTIONS_HEADER)
        for (rel, label), (status, payload) in zip(entries, outcomes):
            if status == "error":
                failures.append({"image_id": rel, "error": payload})
                continue
            predicted = 1 if payload.verdict == FAULTY else 0
            writer.writerow([rel, repr(payload.score), predicted, label])
            scored.append((payload.score, predicted, label))

    if not scored:
        raise ConfigError("every image in the batch failed; no metrics to compute")
    cm = confusion_from_predictions([p for _, p, _ in scored], [a for _, _, a in scored])
    report = compute_metrics(cm)
    try:
        report.auroc = compute_auroc([ScoredLabel(s, a) for s, _, a in scored])
    except DegenerateLabels:
        report.auroc = None
    doc = report.to_dict(cm)
    doc["count"] = len(scored)
    doc["failures"] = failures
    with open(metrics_path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    print(
        f"scored {len(scored)}/{len(entries)} images: "
        f"predictions {predictions_path}, metrics {metrics_path}"
    )
    for failure in failures:
        print(f"failed {failure['image_id']}: {failure['error']}", file=sys.stderr)
    return 1 if failures else 0


def cmd_calibrate(args) -> int:
    cfg = _load_cfg(args)
    entries = read_manifest(args.manifest)
    if not entries:
        raise ConfigError(f"{args.manifest} lists no images")
    tainted = [rel for rel, label in entries if label != 0]
    if tainted:
        raise CalibrationContaminated(
            f"{len(tainted)} manifest entries are labeled faulty, e.g. {tainted[0]!r}"
        )
    root = os.path.dirname(os.path.abspath(args.manifest))
    # decision threshold is what calibration computes, so score with 0 here
    outcomes = _score_manifest(entries, root, cfg, 0.0, args)
    errors = [(rel, p) for (rel, _), (s, p) in zip(entries, outcomes) if s == "error"]
    if errors:
        raise ConfigError(
            f"{len(errors)} calibration images failed, e.g. {errors[0][0]}: {errors[0][1]}"
        )
    scores = [payload.score for _, payload in outcomes]

    quantile = args.quantile if args.quantile is not None else cfg.ewma_quantile
    decision_threshold = calibrate_ucl(scores, quantile).ucl
    z0 = calibrate_z0(scores)
    zs = ewma_series(scores, cfg.ewma_lambda, z0)
    ucl = calibrate_ucl(zs, quantile).ucl
    doc = LimitsDoc(
        ucl=ucl,
        quantile=quantile,
        z0=z0,
        lam=cfg.ewma_lambda,
        calibration_size=len(scores),
        decision_threshold=decision_threshold,
    )
    out = args.out or "limits.json"
    save_limits(doc, out)
    print(
        f"calibrated on {len(scores)} images: decision_threshold "
        f"{decision_threshold}, z0 {z0}, ucl {ucl} -> {out}"
    )
    return 0


def _read_score_column(path) -> list[float]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or "score" not in header:
            raise ConfigError(f"{path} needs a header row with a 'score' column")
        col = header.index("score")
        xs = []
        for row in reader:
            if not row:
                continue
            if col >= len(row):
                raise ConfigError(f"{path}: short row {row!r}")
            try:
                x = float(row[col])
            except ValueError as exc:
                raise ConfigError(f"{path}: bad score {row[col]!r}") from exc
            if not math.isfinite(x):
                raise ConfigError(f"{path}: non-finite score {row[col]!r}")
            xs.append(x)
    return xs


def cmd_monitor(args) -> int:
    xs = _read_score_column(args.scores)
    doc = load_limits(args.limits)
    limits = ControlLimits(
        ucl=doc.ucl, quantile=doc.quantile, calibration_size=doc.calibration_size
    )
    trace = monitor_stream(xs, doc.lam, doc.z0, limits)
    first = trace.first_alarm()
    summary = (
        f"no alarms in {len(xs)} observations"
        if first is None
        else f"first alarm at t={first} ({len(trace.alarms())} alarms total)"
    )
    if args.out:
        with open(args.out, "w", newline="") as fh:
            write_trace_csv(trace, fh)
        print(summary)
    else:
        write_trace_csv(trace, sys.stdout)
        print(summary, file=sys.stderr)
    return 0


def cmd_synth(args) -> int:
    cfg = _load_cfg(args)
    spec = SynthSpec(
        image_size=args.image_size,
        count_per_class=args.count,
        texture=args.texture,
        blob_min=args.blob_min,
        blob_max=args.blob_max,
        intensity_delta=args.delta,
        seed=args.seed,
    )
    if not args.out:
        raise ConfigError("synth needs --out DIRECTORY")
    manifest = generate_dataset(spec, cfg.window, cfg.thresholds, args.out)
    print(manifest)
    return 0


def _read_predictions(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != PREDICTIONS_HEADER:
            raise ConfigError(
                f"{path} header must be {','.join(PREDICTIONS_HEADER)}, got {header!r}"
            )
        rows = []
        for row in reader:
            if not row:
                continue
            if len(row) != 4:
                raise ConfigError(f"{path}: row must have 4 fields, got {row!r}")
            image_id, score_s, pred_s, label_s = row
            try:
                score = float(score_s)
            except ValueError as exc:
                raise ConfigError(f"{path}: bad score {score_s!r}") from exc
            if not math.isfinite(score):
                raise ConfigError(f"{path}: non-finite score {score_s!r}")
            if pred_s not in ("0", "1") or label_s not in ("0", "1"):
                raise ConfigError(f"{path}: predicted/label must be 0 or 1 in {row!r}")
            rows.append((image_id, score, int(pred_s), int(label_s)))
    return rows


def cmd_evaluate(args) -> int:
    rows = _read_predictions(args.predictions)
    if not rows:
        raise ConfigError(f"{args.predictions} lists no predictions")
    labels = [label for _, _, _, label in rows]
    if args.ewma:
        if not args.limits:
            raise ConfigError("evaluate --ewma needs --limits")
        doc = load_limits(args.limits)
        zs = ewma_series([score for _, score, _, _ in rows], doc.lam, doc.z0)
        predicted = [1 if z > doc.ucl else 0 for z in zs]
        auroc_items = [ScoredLabel(z, label) for z, label in zip(zs, labels)]
        mode = "ewma"
    else:
        predicted = [p for _, _, p, _ in rows]
        auroc_items = [ScoredLabel(score, label) for _, score, _, label in rows]
        mode = "direct"
    cm = confusion_from_predictions(predicted, labels)
    report = compute_metrics(cm)
    try:
        report.auroc = compute_auroc(auroc_items)
    except DegenerateLabels:
        report.auroc = None
    doc_out = report.to_dict(cm)
    doc_out["count"] = len(rows)
    doc_out["mode"] = mode
    text = json.dumps(doc_out, indent=2)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return 0


def cmd_overlay(args) -> int:
    with open(args.report) as fh:
        report = json.load(fh)
    if not isinstance(report, dict) or "retained_samples" not in report:
        raise ConfigError(f"{args.report} is not an analysis report")
    rid = report.get("image_id", "")
    if rid and os.path.basename(rid) != os.path.basename(args.image):
        raise ConfigError(
            f"report is for {rid!r}, not {os.path.basename(args.image)!r}"
        )
    if not args.out:
        raise ConfigError("overlay needs --out PATH")

    with Image.open(args.image) as im:
        im.load()
        source = im

        retained = report["retained_samples"]
        if not retained:
            source.save(args.out)
            return 0

        masks_by_window = {
            tuple(w["window"]): w["masks"] for w in report.get("windows", [])
        }
        canvas = source.convert("RGB")
        draw = ImageDraw.Draw(canvas)
        for sample in retained:
            key = tuple(sample["window"])
            masks = masks_by_window.get(key)
            if masks is None or sample["mask_index"] >= len(masks):
                raise ConfigError("report retained sample points at no mask")
            bx, by, bw, bh = masks[sample["mask_index"]]["bbox"]
            row, col = key
            x0, y0 = col + bx, row + by
            if x0 + bw > canvas.width or y0 + bh > canvas.height:
                raise ConfigError("report boxes fall outside this image")
            draw.rectangle([x0, y0, x0 + bw - 1, y0 + bh - 1], outline=(255, 0, 0))
        canvas.save(args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="pipeline config JSON")
    common.add_argument("--out", help="output path (file or directory, per subcommand)")
    common.add_argument("--workers", type=int, default=1, help="thread pool size")
    common.add_argument("--seed", type=int, default=0, help="RNG seed where applicable")

    detect_like = argparse.ArgumentParser(add_help=False)
    detect_like.add_argument(
        "--decision-threshold", type=float, dest="decision_threshold",
        help="override the faulty/fault-free score threshold",
    )
    detect_like.add_argument("--limits", help="limits JSON from calibrate")
    detect_like.add_argument(
        "--normalize-brightness", action="store_true",
        help="linearly rescale intensities to span 0..255 before windowing",
    )
    detect_like.add_argument(
        "--edge-complete", action="store_true",
        help="add flush-to-border windows so every pixel is covered",
    )

    parser = argparse.ArgumentParser(
        prog="winspect",
        description="window-based surface fault detection and monitoring",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", parents=[common, detect_like],
                       help="score one image")
    p.add_argument("image")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("batch", parents=[common, detect_like],
                       help="score a whole manifest")
    p.add_argument("manifest")
    p.add_argument("--metrics", help="metrics JSON path (default: next to predictions)")
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("calibrate", parents=[common],
                       help="fit decision threshold and EWMA limits on fault-free images")
    p.add_argument("manifest")
    p.add_argument("--quantile", type=float, help="override ewma.quantile from config")
    p.add_argument("--normalize-brightness", action="store_true")
    p.add_argument("--edge-complete", action="store_true")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("monitor", parents=[common],
                       help="run the EWMA chart over a score stream")
    p.add_argument("scores", help="CSV with a 'score' column (predictions CSV works)")
    p.add_argument("--limits", required=True, help="limits JSON from calibrate")
    p.set_defaults(func=cmd_monitor)

    p = sub.add_parser("synth", parents=[common],
                       help="generate a synthetic labeled dataset")
    p.add_argument("--count", type=int, default=50, help="images per class")
    p.add_argument("--image-size", type=int, default=128)
    p.add_argument("--texture", choices=TEXTURES, default="value_noise")
    p.add_argument("--blob-min", type=int, default=11)
    p.add_argument("--blob-max", type=int, default=16)
    p.add_argument("--delta", type=int, default=120,
                   help="intensity drop inside the defect blob")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("evaluate", parents=[common],
                       help="metrics from a predictions CSV")
    p.add_argument("predictions")
    p.add_argument("--ewma", action="store_true",
                   help="re-derive verdicts by running the EWMA chart over scores")
    p.add_argument("--limits", help="limits JSON (required with --ewma)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("overlay", parents=[common],
                       help="draw retained mask boxes onto the image")
    p.add_argument("image")
    p.add_argument("report", help="analysis report JSON from detect")
    p.set_defaults(func=cmd_overlay)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (WinspectError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
