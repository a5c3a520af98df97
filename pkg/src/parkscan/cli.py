"""Batch CLI: simulate, detect-slots, classify, evaluate, run-pipeline.

Exit codes: 0 success, 2 usage/config/parse error, 3 data-content error.
stdout carries machine-readable results; logs go to stderr.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import apply_overrides, config_echo, load_run_config
from .detections import (
    DetectionLogParseError,
    filter_detections,
    parse_detections,
    serialize_detections,
)
from .errors import ConfigError, ValidationError
from .metrics import (
    MetricsReport,
    UndefinedAucError,
    accuracy,
    classification_counts,
    default_match_tolerance,
    format_percent,
    match_slots,
    precision_recall,
    roc_auc,
    roc_points,
)
from .occupancy import (
    DuplicateRecordError,
    FileScoreClassifier,
    GeometricOracleClassifier,
    MissingGroundTruthError,
    MissingScoreError,
    OccupancyStatus,
    aggregate_report,
    classify_frame,
    read_records,
    write_records,
)
from .simulator import (
    generate_scenario,
    read_ground_truth_occupancy,
    scenario_from_document,
    write_ground_truth_occupancy,
    write_ground_truth_slots,
)
from .slots import (
    EmptyInputError,
    read_slot_registry,
    run_slot_detection,
    slot_registry_document,
)

log = logging.getLogger("parkscan")


def _read_text(path) -> str:
    return Path(path).read_text(encoding="utf-8")


def _write_text(path, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8")


def _json_dumps(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def cmd_simulate(args) -> int:
    try:
        doc = json.loads(_read_text(args.scenario))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"scenario {args.scenario}: invalid JSON ({exc.msg})") from exc
    scenario = scenario_from_document(doc)
    if args.seed is not None:
        scenario = scenario_from_document({**doc, "seed": args.seed})
    frames, truth = generate_scenario(scenario)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_text(out_dir / "detections.jsonl", serialize_detections(frames))
    with open(out_dir / "slots_truth.json", "w", encoding="utf-8") as fh:
        write_ground_truth_slots(fh, truth)
    with open(out_dir / "occupancy_truth.jsonl", "w", encoding="utf-8") as fh:
        write_ground_truth_occupancy(fh, truth)
    log.info(
        "simulated %d frames, %d slots -> %s", scenario.frame_count, scenario.slot_count, out_dir
    )
    return 0


def cmd_detect_slots(args) -> int:
    cfg = load_run_config(args.config)
    cfg = apply_overrides(
        cfg,
        n_bottom=args.n_bottom,
        eps=args.eps,
        min_points=args.min_points,
        iqr_one_sided=True if args.iqr_one_sided else None,
        classes=args.classes.split(",") if args.classes else None,
        min_confidence=args.min_confidence,
    )
    with open(args.detections, encoding="utf-8") as fh:
        frames = parse_detections(fh)
    frames = filter_detections(frames, cfg.det_filter)
    outcome = run_slot_detection(frames, cfg.slot_detection_config())

    echo = config_echo(cfg, eps=outcome.eps, min_points=outcome.min_points)
    _write_text(args.out, _json_dumps(slot_registry_document(outcome.slots, echo)))

    diagnostics = {
        "clusters": outcome.cluster_count,
        "noise_points": outcome.noise_points,
        "iqr_discarded": outcome.iqr_discarded,
        "shortfall": outcome.shortfall,
        "slots": len(outcome.slots),
    }
    print(json.dumps(diagnostics, sort_keys=True))
    log.info("detected %d slots from %d clusters", len(outcome.slots), outcome.cluster_count)

    if args.emit_plot_data:
        _emit_cluster_plot_data(args.out, outcome)
    return 0


def _emit_cluster_plot_data(out_path, outcome) -> None:
    base = Path(out_path)
    selected = {s.source_candidate.cluster_id for s in outcome.slots}
    with open(base.with_suffix(base.suffix + ".clusters.tsv"), "w", encoding="utf-8") as fh:
        fh.write("x\ty\tcluster\n")
        for (x, y), label in zip(outcome.normalized_points, outcome.labels):
            fh.write(f"{x}\t{y}\t{int(label)}\n")
    with open(base.with_suffix(base.suffix + ".spreads.tsv"), "w", encoding="utf-8") as fh:
        fh.write("cluster_id\tspread\tmembers\tkept_by_iqr\tselected\n")
        for i, cand in enumerate(outcome.candidates):
            fh.write(
                f"{cand.cluster_id}\t{cand.spread}\t{cand.member_count}\t"
                f"{int(i in outcome.kept_by_iqr)}\t{int(cand.cluster_id in selected)}\n"
            )


def cmd_classify(args) -> int:
    cfg = load_run_config(args.config)
    cfg = apply_overrides(cfg, threshold=args.threshold, iou_threshold=args.iou_threshold)

    with open(args.slots, encoding="utf-8") as fh:
        slots = read_slot_registry(fh)
    if not slots:
        raise EmptyInputError("slot registry is empty; nothing to classify")

    if args.mode == "oracle":
        with open(args.input, encoding="utf-8") as fh_occ:
            truth = read_ground_truth_occupancy(fh_occ)
        if not truth.frame_ids:
            raise MissingGroundTruthError(f"no ground-truth frames in {args.input}")
        classifier = GeometricOracleClassifier(
            truth.vehicles_by_frame(), iou_threshold=cfg.iou_threshold
        )
        threshold = classifier.decision_threshold
        frame_ids = list(truth.frame_ids)
    else:
        with open(args.input, encoding="utf-8") as fh_scores:
            classifier = FileScoreClassifier.from_stream(fh_scores)
        threshold = cfg.threshold
        frame_ids = classifier.frames()
        if not frame_ids:
            raise MissingScoreError(f"score table {args.input} is empty")

    records = []
    for frame_id in frame_ids:
        records.extend(classify_frame(slots, frame_id, classifier, threshold=threshold))

    with open(args.out_records, "w", encoding="utf-8") as fh:
        write_records(fh, records)
    report = aggregate_report(records)
    doc = {
        fid: {
            "occupied": rep.occupied,
            "vacant": rep.vacant,
            "vacant_slots": list(rep.vacant_slots),
            "error_slots": list(rep.error_slots),
        }
        for fid, rep in report.items()
    }
    _write_text(args.out_report, _json_dumps(doc))
    errors = sum(len(rep.error_slots) for rep in report.values())
    print(json.dumps({"frames": len(report), "records": len(records), "errors": errors}, sort_keys=True))
    return 0


def cmd_evaluate(args) -> int:
    with open(args.pred_slots, encoding="utf-8") as fh:
        pred = read_slot_registry(fh)
    with open(args.truth_slots, encoding="utf-8") as fh:
        truth = read_slot_registry(fh)
    cfg = load_run_config(args.config)
    cfg = apply_overrides(cfg, tolerance=args.tolerance)

    truth_centers = [t.center for t in truth]
    pred_centers = [p.center for p in pred]
    if cfg.tolerance is not None:
        tolerance = cfg.tolerance
    elif len(truth_centers) >= 2:
        tolerance = default_match_tolerance(truth_centers)
    elif truth:
        # Single truth slot: fall back to half its smaller side.
        tolerance = min(truth[0].area.w, truth[0].area.h) / 2.0
    else:
        raise ValidationError("truth_slots", "truth slot registry is empty")

    match = match_slots(pred_centers, truth_centers, tolerance)
    precision, recall = precision_recall(match.tp, match.fp, match.fn)

    acc = None
    auc = None
    counts = None
    if args.records and args.truth_occupancy:
        with open(args.records, encoding="utf-8") as fh:
            records = read_records(fh)
        with open(args.truth_occupancy, encoding="utf-8") as fh:
            gt = read_ground_truth_occupancy(fh)
        pred_to_truth = {pred[i].slot_id: truth[j].slot_id for i, j, _ in match.pairs}
        occupancy = gt.occupancy_by_frame()
        preds, labels, scores = [], [], []
        for rec in records:
            if rec.status is OccupancyStatus.ERROR:
                continue
            if rec.frame_id not in occupancy or rec.slot_id not in pred_to_truth:
                continue
            bit = occupancy[rec.frame_id][pred_to_truth[rec.slot_id]]
            preds.append(rec.status is OccupancyStatus.OCCUPIED)
            labels.append(bit)
            scores.append(rec.score)
        if labels:
            counts = classification_counts(preds, labels)
            acc = accuracy(counts)
            try:
                auc = roc_auc(scores, labels)
            except UndefinedAucError:
                log.warning("occupancy labels are single-class; AUC undefined")
            if args.emit_plot_data and auc is not None:
                base = Path(args.out)
                with open(base.with_suffix(base.suffix + ".roc.tsv"), "w", encoding="utf-8") as fh:
                    fh.write("threshold\tfpr\ttpr\n")
                    for thr, fpr, tpr in roc_points(scores, labels):
                        fh.write(f"{thr}\t{fpr}\t{tpr}\n")

    report = MetricsReport(
        precision=None if precision is None else float(precision),
        recall=None if recall is None else float(recall),
        accuracy=None if acc is None else float(acc),
        auc=auc,
    )
    print(f"precision: {format_percent(precision)}")
    print(f"recall: {format_percent(recall)}")
    if counts is not None:
        print(f"accuracy: {format_percent(acc)}")
        print(f"auc: {'undefined' if auc is None else f'{auc:.4f}'}")

    detection_doc = {
        "tp": match.tp,
        "fp": match.fp,
        "fn": match.fn,
        "precision": report.precision,
        "recall": report.recall,
        "tolerance": tolerance,
    }
    classification_doc = {"accuracy": report.accuracy, "auc": report.auc}
    if counts is not None:
        classification_doc["counts"] = {
            "tp": counts.tp, "tn": counts.tn, "fp": counts.fp, "fn": counts.fn,
        }
    _write_text(
        args.out,
        _json_dumps({"detection": detection_doc, "classification": classification_doc}),
    )
    return 0


def cmd_run_pipeline(args) -> int:
    """detect-slots, classify, evaluate in sequence with fixed file names."""
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    detect_ns = argparse.Namespace(
        detections=args.detections,
        config=args.config,
        out=str(out_dir / "slots.json"),
        n_bottom=args.n_bottom,
        eps=None,
        min_points=None,
        iqr_one_sided=False,
        classes=None,
        min_confidence=None,
        emit_plot_data=args.emit_plot_data,
    )
    rc = cmd_detect_slots(detect_ns)
    if rc != 0:
        return rc

    classify_ns = argparse.Namespace(
        slots=str(out_dir / "slots.json"),
        input=args.scores if args.mode == "scores" else args.truth_occupancy,
        mode=args.mode,
        config=args.config,
        threshold=None,
        iou_threshold=None,
        out_records=str(out_dir / "occupancy.jsonl"),
        out_report=str(out_dir / "report.json"),
    )
    rc = cmd_classify(classify_ns)
    if rc != 0:
        return rc

    evaluate_ns = argparse.Namespace(
        pred_slots=str(out_dir / "slots.json"),
        truth_slots=args.truth_slots,
        records=str(out_dir / "occupancy.jsonl"),
        truth_occupancy=args.truth_occupancy,
        config=args.config,
        tolerance=args.tolerance,
        out=str(out_dir / "metrics.json"),
        emit_plot_data=args.emit_plot_data,
    )
    return cmd_evaluate(evaluate_ns)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="parkscan",
        description="Parking-slot discovery from detection logs plus occupancy classification.",
    )
    parser.add_argument("--log-level", default="WARNING", help="stderr log level")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic scenario")
    p.add_argument("--scenario", required=True, help="scenario config JSON")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("detect-slots", help="discover slot locations from a detection log")
    p.add_argument("--detections", required=True)
    p.add_argument("--config", default=None, help="run config JSON")
    p.add_argument("--out", required=True, help="slot registry output path")
    p.add_argument("--n-bottom", type=int, default=None)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--min-points", type=int, default=None)
    p.add_argument("--min-confidence", type=float, default=None)
    p.add_argument("--classes", default=None, help="comma-separated class allow-list")
    p.add_argument("--iqr-one-sided", action="store_true")
    p.add_argument("--emit-plot-data", action="store_true")
    p.set_defaults(func=cmd_detect_slots)

    p = sub.add_parser("classify", help="classify per-slot occupancy")
    p.add_argument("--slots", required=True, help="slot registry path")
    p.add_argument("--mode", required=True, choices=["oracle", "scores"])
    p.add_argument("--input", required=True, help="ground-truth occupancy file (oracle) or score table (scores)")
    p.add_argument("--config", default=None)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--iou-threshold", type=float, default=None)
    p.add_argument("--out-records", required=True)
    p.add_argument("--out-report", required=True)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("evaluate", help="score predictions against ground truth")
    p.add_argument("--pred-slots", required=True)
    p.add_argument("--truth-slots", required=True)
    p.add_argument("--records", default=None, help="occupancy records to score")
    p.add_argument("--truth-occupancy", default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--tolerance", type=float, default=None)
    p.add_argument("--out", required=True, help="metrics report output path")
    p.add_argument("--emit-plot-data", action="store_true")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("run-pipeline", help="detect-slots + classify + evaluate")
    p.add_argument("--detections", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--truth-slots", required=True)
    p.add_argument("--truth-occupancy", required=True)
    p.add_argument("--mode", default="oracle", choices=["oracle", "scores"])
    p.add_argument("--scores", default=None)
    p.add_argument("--n-bottom", type=int, default=None)
    p.add_argument("--tolerance", type=float, default=None)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--emit-plot-data", action="store_true")
    p.set_defaults(func=cmd_run_pipeline)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=getattr(logging, args.log_level.upper(), logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (ConfigError, DetectionLogParseError, ValidationError) as exc:
        log.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except json.JSONDecodeError as exc:
        print(f"error: invalid JSON input ({exc.msg}, line {exc.lineno})", file=sys.stderr)
        return 2
    except (
        EmptyInputError,
        MissingGroundTruthError,
        MissingScoreError,
        DuplicateRecordError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
