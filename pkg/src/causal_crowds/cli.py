"""Operator entry point.

Subcommands: ``generate`` (build an annotated split), ``evaluate``
(score a predictions file against a split), ``train-toy`` (fit the toy
predictor), and ``predict-toy`` (emit a predictions file from a trained
model or a builtin predictor).

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from pathlib import Path

import numpy as np

from .counterfactual import CausalThresholds
from .dataset_io import (
    make_manifest,
    read_predictions,
    read_split,
    write_predictions,
    write_split,
)
from .errors import CausalCrowdsError
from .features import feature_dim
from .losses import LossConfig
from .metrics import (
    JointCurvePoint,
    constant_velocity_predictions,
    evaluate_split,
    oracle_predictions,
)
from .model import ToyModel
from .scenarios import Split, SplitSpec, generate_split
from .training import TrainMode, predict_toy, train_toy, write_log

THREADS_ENV = "CAUSAL_CROWDS_THREADS"
BUILTIN_PREDICTORS = ("cv", "oracle")
REPORT_FIELDS = ("ade", "fde", "ace", "ace_nc", "ace_dc", "ace_ic",
                 "delta", "delta_abs")


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if value <= 0:
        raise argparse.ArgumentTypeError(f"must be positive: {value}")
    return value


def _non_negative_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0: {value}")
    return value


def _default_threads() -> int:
    raw = os.environ.get(THREADS_ENV, "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _add_threads_flag(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--threads", type=_positive_int, default=_default_threads(),
        help=f"worker threads (default: ${THREADS_ENV} or 1); "
             "output is independent of the thread count")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="causal-crowds",
        description="Counterfactual crowd-simulation datasets, metrics, "
                    "and toy causal-regularization training.")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    gen = sub.add_parser(
        "generate", help="generate an annotated scene split")
    gen.add_argument("--split", required=True,
                     choices=[s.value for s in Split])
    gen.add_argument("--scenes", required=True, type=_positive_int,
                     help="number of scenes (positive)")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--agents", type=_positive_int, default=None,
                     help="override the split's default agent count")
    gen.add_argument("--out", required=True, help="output directory")
    _add_threads_flag(gen)

    ev = sub.add_parser(
        "evaluate", help="score a predictions file against a split")
    ev.add_argument("--data", required=True, help="split directory")
    ev.add_argument("--predictions", required=True,
                    help="predictions ndjson file")
    ev.add_argument("--out", default=None,
                    help="directory for report.txt/report.csv "
                         "(default: print only)")
    ev.add_argument("--fig", choices=["joint"], default=None,
                    help="emit the joint-removal curve as SVG + CSV "
                         "(requires --out)")
    ev.add_argument("--max-k", type=_positive_int, default=3,
                    help="largest k for the joint-removal curve")
    _add_threads_flag(ev)

    tr = sub.add_parser("train-toy", help="train the toy predictor")
    tr.add_argument("--mode", required=True,
                    choices=[m.value for m in TrainMode])
    tr.add_argument("--data", required=True, help="training split directory")
    tr.add_argument("--epochs", type=_non_negative_int, default=20)
    tr.add_argument("--seed", type=int, default=0)
    tr.add_argument("--lr", type=float, default=1e-2)
    tr.add_argument("--tau", type=float, default=LossConfig().tau)
    tr.add_argument("--margin", type=float, default=LossConfig().margin)
    tr.add_argument("--alpha", type=float, default=LossConfig().alpha)
    tr.add_argument("--out", required=True, help="model file (.npz)")
    tr.add_argument("--log", default=None,
                    help="per-epoch CSV log (default: <out>.log.csv)")
    tr.add_argument("--eval-ood", default=None,
                    help="OOD split directory to score after training")

    pr = sub.add_parser(
        "predict-toy", help="write a predictions file for a split")
    pr.add_argument("--model", required=True,
                    help="model file, or builtin 'cv' / 'oracle'")
    pr.add_argument("--data", required=True, help="split directory")
    pr.add_argument("--out", required=True, help="predictions ndjson file")
    pr.add_argument("--include-noncausal", action="store_true",
                    help="emit the all-non-causal-removed entry "
                         "(enables the delta metric)")
    return parser


def cmd_generate(args) -> int:
    spec = SplitSpec(Split(args.split), args.scenes, rng_seed=args.seed,
                     target_agents=args.agents)
    records, summary = generate_split(spec, threads=args.threads)
    manifest = make_manifest(records, summary, spec.split, spec.rng_seed,
                             records[0].config)
    paths = write_split(records, manifest, args.out)
    print(f"wrote {paths[0]} and {paths[1]}")
    for key, value in summary.as_dict().items():
        if isinstance(value, float):
            print(f"{key:22s} {value:.4f}")
        else:
            print(f"{key:22s} {value}")
    return 0


def _joint_curve_svg(points: list[JointCurvePoint]) -> str:
    """A dependency-free line chart: mean joint removal effect vs k."""
    width, height, pad = 640, 400, 60
    ks = [p.k for p in points]
    ys = [p.mean_effect for p in points]
    x_max = max(ks) if ks else 1
    y_max = max(ys + [1e-9])

    def sx(k):
        return pad + (width - 2 * pad) * (k / x_max)

    def sy(y):
        return height - pad - (height - 2 * pad) * (y / y_max)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" '
        f'y2="{height - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" '
        'stroke="black"/>',
        f'<text x="{width // 2}" y="{height - 15}" text-anchor="middle" '
        'font-size="14">k (non-causal agents removed)</text>',
        f'<text x="18" y="{height // 2}" text-anchor="middle" '
        f'font-size="14" transform="rotate(-90 18 {height // 2})">'
        'mean joint removal effect (m)</text>',
    ]
    for k in ks:
        parts.append(
            f'<text x="{sx(k):.1f}" y="{height - pad + 20}" '
            f'text-anchor="middle" font-size="12">{k}</text>')
    for frac in (0.0, 0.5, 1.0):
        y = y_max * frac
        parts.append(
            f'<text x="{pad - 8}" y="{sy(y):.1f}" text-anchor="end" '
            f'font-size="12">{y:.3f}</text>')
    coords = " ".join(f"{sx(p.k):.1f},{sy(p.mean_effect):.1f}"
                      for p in points)
    parts.append(f'<polyline points="{coords}" fill="none" '
                 'stroke="#1f6fb2" stroke-width="2"/>')
    for p in points:
        parts.append(f'<circle cx="{sx(p.k):.1f}" cy="{sy(p.mean_effect):.1f}"'
                     ' r="4" fill="#1f6fb2"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _report_text(report) -> str:
    lines = [f"{k:10s} {v:.6f}" for k, v in report.as_dict().items()]
    for p in report.joint_curve:
        lines.append(
            f"joint k={p.k}: mean_effect={p.mean_effect:.6f} "
            f"frac>eta={p.fraction_exceeding:.4f} scenes={p.num_scenes} "
            f"skipped={p.num_skipped}")
    return "\n".join(lines) + "\n"


def cmd_evaluate(args) -> int:
    records, _ = read_split(args.data)
    predictions = read_predictions(args.predictions, records)
    predicted_ids = {p.scene_id for p in predictions}
    for rec in records:
        if rec.scene_id not in predicted_ids:
            raise CausalCrowdsError(
                f"predictions missing scene {rec.scene_id}")
    ks = list(range(1, args.max_k + 1)) if args.fig else None
    report = evaluate_split(records, predictions, ks=ks,
                            threads=args.threads)
    text = _report_text(report)
    sys.stdout.write(text)
    if args.out is not None:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.txt").write_text(text, encoding="utf-8",
                                        newline="\n")
        with (out / "report.csv").open("w", newline="\n") as fh:
            writer = csv.DictWriter(fh, fieldnames=REPORT_FIELDS)
            writer.writeheader()
            writer.writerow({k: repr(v)
                             for k, v in report.as_dict().items()})
        if args.fig == "joint":
            (out / "joint_curve.svg").write_text(
                _joint_curve_svg(report.joint_curve), encoding="utf-8",
                newline="\n")
            with (out / "joint_curve.csv").open("w", newline="\n") as fh:
                writer = csv.writer(fh)
                writer.writerow(["k", "mean_effect", "fraction_exceeding",
                                 "num_scenes", "num_skipped"])
                for p in report.joint_curve:
                    writer.writerow([p.k, repr(p.mean_effect),
                                     repr(p.fraction_exceeding),
                                     p.num_scenes, p.num_skipped])
    elif args.fig is not None:
        raise CausalCrowdsError("--fig requires --out")
    return 0


def cmd_train_toy(args) -> int:
    records, _ = read_split(args.data)
    loss_config = LossConfig(tau=args.tau, margin=args.margin,
                             alpha=args.alpha)
    model, log = train_toy(records, TrainMode(args.mode),
                           epochs=args.epochs, step_size=args.lr,
                           seed=args.seed, loss_config=loss_config)
    model.save(args.out)
    log_path = args.log if args.log is not None else f"{args.out}.log.csv"
    write_log(log, log_path)
    print(f"wrote {args.out} and {log_path}")
    if log:
        last = log[-1]
        print(f"final epoch: task_loss={last['task_loss']:.6f} "
              f"causal_loss={last['causal_loss']:.6f} "
              f"ade={last['ade']:.6f} ace={last['ace']:.6f}")
    if args.eval_ood is not None:
        ood_records, _ = read_split(args.eval_ood)
        report = evaluate_split(ood_records,
                                predict_toy(model, ood_records))
        print(f"ood: ade={report.ade:.6f} fde={report.fde:.6f} "
              f"ace={report.ace:.6f}")
    return 0


def cmd_predict_toy(args) -> int:
    records, _ = read_split(args.data)
    if args.model == "cv":
        predictions = constant_velocity_predictions(
            records, include_noncausal=args.include_noncausal)
    elif args.model == "oracle":
        predictions = oracle_predictions(
            records, include_noncausal=args.include_noncausal)
    else:
        try:
            model = ToyModel.load(args.model)
        except OSError as exc:
            raise CausalCrowdsError(f"cannot load model: {exc}") from exc
        expected = feature_dim(records[0].config.history_steps)
        actual = model.params["W1"].shape[1]
        if actual != expected:
            raise CausalCrowdsError(
                f"model input dimension {actual} does not match the "
                f"split's feature dimension {expected}")
        predictions = predict_toy(
            model, records, include_noncausal=args.include_noncausal)
    path = write_predictions(predictions, args.out)
    entries = sum(len(p.entries) for p in predictions)
    print(f"wrote {path} ({len(predictions)} scenes, {entries} entries)")
    return 0


_COMMANDS = {
    "generate": cmd_generate,
    "evaluate": cmd_evaluate,
    "train-toy": cmd_train_toy,
    "predict-toy": cmd_predict_toy,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.subcommand](args)
    except (CausalCrowdsError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
