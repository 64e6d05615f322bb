"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
Every run writes a JSON run manifest for provenance.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .core import BinConfig, build_report
from .diagrams import dataset_histogram, emit_csv, emit_svg, reliability_diagram
from .errors import ConfigError, SegcalibError, ShapeError
from .gradcheck import LOSSES, check_chained_gradient, check_loss_gradient
from .harness import (
    evaluate,
    fit_validation_temperature,
    generate_dataset,
    load_train_config,
    train,
    write_history_csv,
)
from .metrics import summarize
from .tensorio import read_manifest, read_tensor, write_manifest, write_tensor
from .temperature import fit_temperature


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _load_probs_labels(probs_path, labels_path, check_sum=False):
    probs = read_tensor(probs_path).astype(np.float64)
    if probs.ndim < 2:
        raise ShapeError(f"{probs_path}: probability map needs a class axis")
    raw = read_tensor(labels_path)
    if np.issubdtype(raw.dtype, np.integer):
        labels = raw.astype(np.int64)
    elif raw.shape == probs.shape:
        labels = raw.argmax(axis=0).astype(np.int64)  # one-hot label map
    else:
        raise ShapeError(
            f"{labels_path}: labels must be an integer class map or a one-hot "
            f"map matching {probs.shape}; got {raw.dtype} {raw.shape}"
        )
    return probs, labels


def _metrics_payload(probs, labels, bins_list, empty_bins, include_background,
                     check_sum):
    results = []
    for m in bins_list:
        report = build_report(probs, labels, BinConfig(m), check_sum=check_sum)
        s = summarize(report, empty_bins=empty_bins,
                      include_background=include_background)
        results.append({
            "num_bins": m,
            "ace": s.mean_ace,
            "ece": s.mean_ece,
            "mce": s.mean_mce,
            "per_class_ace": list(s.per_class_ace),
            "per_class_ece": list(s.per_class_ece),
            "per_class_mce": list(s.per_class_mce),
            "nonempty_bins_per_class": [int(v) for v in s.nonempty_bins_per_class],
        })
    return results


def _cmd_metrics(args) -> int:
    if args.from_manifest:
        prev = read_manifest(args.from_manifest)
        cfg = prev["config"]
        probs_path, labels_path = cfg["probs"], cfg["labels"]
        bins_list = [r["num_bins"] for r in prev["results"]]
        empty_bins = cfg["empty_bins"]
        include_background = cfg["include_background"]
        check_sum = cfg["check_sum"]
    else:
        if not (args.probs and args.labels):
            raise _UsageError("--probs and --labels are required")
        probs_path, labels_path = args.probs, args.labels
        bins_list = [int(b) for b in str(args.bins).split(",")]
        empty_bins = "strict" if args.strict_empty_bins else "exclude"
        include_background = not args.exclude_background
        check_sum = args.check_sum
    probs, labels = _load_probs_labels(probs_path, labels_path)
    results = _metrics_payload(probs, labels, bins_list, empty_bins,
                               include_background, check_sum)
    manifest = {
        "tool_version": __version__,
        "command": "metrics",
        "config": {
            "probs": str(probs_path),
            "labels": str(labels_path),
            "bins": bins_list,
            "empty_bins": empty_bins,
            "include_background": include_background,
            "check_sum": check_sum,
        },
        "results": results,
        "ace": results[0]["ace"],
        "ece": results[0]["ece"],
        "mce": results[0]["mce"],
    }
    write_manifest(manifest, args.out)
    print(f"ace={results[0]['ace']:.6g} ece={results[0]['ece']:.6g} "
          f"mce={results[0]['mce']:.6g} -> {args.out}")
    return 0


def _cmd_diagram(args) -> int:
    probs, labels = _load_probs_labels(args.probs, args.labels)
    report = build_report(probs, labels, BinConfig(args.bins))
    diagram = reliability_diagram(report, args.class_id)
    outputs = {}
    if args.csv:
        emit_csv(diagram, args.csv)
        outputs["csv"] = str(args.csv)
    if args.svg:
        emit_svg(diagram, args.svg)
        outputs["svg"] = str(args.svg)
    manifest = {
        "tool_version": __version__,
        "command": "diagram",
        "config": {"probs": str(args.probs), "labels": str(args.labels),
                   "bins": args.bins, "class_id": args.class_id},
        "outputs": outputs,
    }
    write_manifest(manifest, args.manifest)
    print(f"diagram class={args.class_id} bins={args.bins} -> {args.manifest}")
    return 0


def _read_listfile(path):
    pairs = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 2:
            raise ConfigError(
                f"{path}:{lineno}: expected 'probs_path,labels_path'"
            )
        pairs.append(tuple(parts))
    if not pairs:
        raise ConfigError(f"{path}: no case pairs found")
    return pairs


def _cmd_histogram(args) -> int:
    pairs = _read_listfile(args.cases)
    cfg = BinConfig(args.bins)

    def case_report(pair):
        probs, labels = _load_probs_labels(*pair)
        return build_report(probs, labels, cfg)

    if args.threads > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            reports = list(pool.map(case_report, pairs))
    else:
        reports = [case_report(p) for p in pairs]
    hist = dataset_histogram(reports, args.class_id, freq_bins=args.freq_bins)
    outputs = {}
    if args.csv:
        emit_csv(hist, args.csv)
        outputs["csv"] = str(args.csv)
    if args.svg:
        emit_svg(hist, args.svg)
        outputs["svg"] = str(args.svg)
    manifest = {
        "tool_version": __version__,
        "command": "histogram",
        "config": {"cases": str(args.cases), "bins": args.bins,
                   "freq_bins": args.freq_bins, "class_id": args.class_id,
                   "threads": args.threads},
        "num_cases": hist.num_cases,
        "outputs": outputs,
    }
    write_manifest(manifest, args.manifest)
    print(f"histogram over {hist.num_cases} cases -> {args.manifest}")
    return 0


def _cmd_temp_fit(args) -> int:
    logits = read_tensor(args.logits).astype(np.float64)
    labels = read_tensor(args.labels).astype(np.int64)
    fit = fit_temperature(logits, labels, seed=args.seed)
    manifest = {
        "tool_version": __version__,
        "command": "temp-fit",
        "config": {"logits": str(args.logits), "labels": str(args.labels),
                   "seed": args.seed},
        "temperature": fit.temperature,
        "final_nll": fit.final_nll,
        "iterations": fit.iterations,
        "degenerate_labels": fit.degenerate_labels,
    }
    write_manifest(manifest, args.out)
    print(f"temperature={fit.temperature:.6g} nll={fit.final_nll:.6g} "
          f"-> {args.out}")
    return 0


def _cmd_train_demo(args) -> int:
    config = load_train_config(args.config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    train_cases, val_cases, test_cases = generate_dataset(config)
    model, history = train(config, train_cases, val_cases)
    fit = fit_validation_temperature(model, val_cases, seed=config.seed)
    test = evaluate(model, test_cases, config.bin_config)
    test_ts = evaluate(model, test_cases, config.bin_config,
                       temperature=fit.temperature)
    write_history_csv(history, out_dir / "history.csv")
    for name in ("w1", "b1", "w2", "b2"):
        write_tensor(out_dir / f"weights_{name}.npy", getattr(model, name))
    manifest = {
        "tool_version": __version__,
        "command": "train-demo",
        "config": {
            "loss": config.loss, "epochs": config.epochs,
            "learning_rate": config.learning_rate,
            "momentum": config.momentum, "num_bins": config.num_bins,
            "seed": config.seed, "hidden": config.hidden,
            "num_train": config.num_train, "num_val": config.num_val,
            "num_test": config.num_test, "size": list(config.size),
        },
        "temperature": fit.temperature,
        "test": {"dice": test.mean_dice, "dice_std": test.std_dice,
                 "ace": test.mean_ace, "ace_std": test.std_ace,
                 "ece": test.mean_ece, "mce": test.mean_mce},
        "test_temperature_scaled": {
            "dice": test_ts.mean_dice, "ace": test_ts.mean_ace,
            "ece": test_ts.mean_ece, "mce": test_ts.mean_mce,
        },
    }
    write_manifest(manifest, out_dir / "manifest.json")
    print(f"loss={config.loss} test dice={test.mean_dice:.4f} "
          f"ace={test.mean_ace:.4f} -> {out_dir / 'manifest.json'}")
    return 0


def _cmd_grad_check(args) -> int:
    rng = np.random.default_rng(args.seed)
    errors = [check_loss_gradient(args.loss, rng) for _ in range(args.trials)]
    chain_errors = [check_chained_gradient(args.loss, rng)
                    for _ in range(args.trials)]
    worst, worst_chain = max(errors), max(chain_errors)
    ok = worst < 1e-5 and worst_chain < 1e-4
    manifest = {
        "tool_version": __version__,
        "command": "grad-check",
        "config": {"loss": args.loss, "trials": args.trials, "seed": args.seed},
        "max_relative_error": worst,
        "max_chained_relative_error": worst_chain,
        "passed": ok,
    }
    write_manifest(manifest, args.manifest)
    print(f"loss={args.loss} max relative error {worst:.3g} "
          f"(chained {worst_chain:.3g}) over {args.trials} trials: "
          f"{'ok' if ok else 'FAIL'}")
    return 0 if ok else 2


def build_parser() -> _Parser:
    parser = _Parser(prog="segcalib",
                     description="Hard-binned calibration metrics, losses, "
                                 "and diagrams for segmentation maps.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("metrics", help="compute mL1 ECE/ACE/MCE for one case")
    p.add_argument("--probs")
    p.add_argument("--labels")
    p.add_argument("--bins", default="20",
                   help="bin count, or comma list for a sweep (e.g. 5,10,20)")
    p.add_argument("--out", required=True, help="manifest JSON path")
    p.add_argument("--strict-empty-bins", action="store_true")
    p.add_argument("--exclude-background", action="store_true")
    p.add_argument("--check-sum", action="store_true")
    p.add_argument("--from-manifest", help="re-run the config of a prior manifest")
    p.set_defaults(func=_cmd_metrics)

    p = sub.add_parser("diagram", help="per-image reliability diagram")
    p.add_argument("--probs", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--class", dest="class_id", type=int, required=True)
    p.add_argument("--bins", type=int, default=20)
    p.add_argument("--svg")
    p.add_argument("--csv")
    p.add_argument("--manifest", default="diagram_manifest.json")
    p.set_defaults(func=_cmd_diagram)

    p = sub.add_parser("histogram", help="dataset reliability histogram")
    p.add_argument("--cases", required=True,
                   help="listfile of 'probs_path,labels_path' lines")
    p.add_argument("--class", dest="class_id", type=int, required=True)
    p.add_argument("--bins", type=int, default=20)
    p.add_argument("--freq-bins", type=int, default=None)
    p.add_argument("--svg")
    p.add_argument("--csv")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--manifest", default="histogram_manifest.json")
    p.set_defaults(func=_cmd_histogram)

    p = sub.add_parser("temp-fit", help="fit a post-hoc temperature")
    p.add_argument("--logits", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_temp_fit)

    p = sub.add_parser("train-demo", help="train the toy segmenter")
    p.add_argument("--config", required=True, help="TOML or JSON TrainConfig")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_train_demo)

    p = sub.add_parser("grad-check",
                       help="verify analytic gradients against finite differences")
    p.add_argument("--loss", choices=sorted(LOSSES), default="ace")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--manifest", default="gradcheck_manifest.json")
    p.set_defaults(func=_cmd_grad_check)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "command", None):
            parser.print_usage(sys.stderr)
            print("error: a subcommand is required", file=sys.stderr)
            return 1
        return args.func(args)
    except _UsageError as exc:
        print(f"error: usage: {exc}", file=sys.stderr)
        return 1
    except (SegcalibError, FileNotFoundError, OSError) as exc:
        print(f"error: data: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover
        print(f"error: internal: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
