"""trilemma-eval command line interface."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .classifier import load_classifier
from .data import SplitRatios, load_image_dataset, save_image_dataset, split_indices
from .deepfool import AttackConfig, run_attack
from .features import read_embeddings
from .fid import fid_from_features
from .genbench import GeneratorAdapter, benchmark_generator
from .manifold import precision, recall
from .pipeline import ExperimentPlan, load_records, run_experiment
from .report import emit_tables, normalize_for_radar
from .ssim import PrivacyConfig, SsimParams, privacy_report


def _emit(payload) -> None:
    json.dump(payload, sys.stdout, indent=2)
    sys.stdout.write("\n")


def _parse_split(text: str) -> SplitRatios:
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("split must be three comma-separated fractions")
    return SplitRatios(train=parts[0], val=parts[1], test=parts[2])


def _parse_resize(text: str) -> tuple[int, int]:
    h, _, w = text.partition("x")
    return int(h), int(w)


def cmd_ingest(args) -> None:
    ds = load_image_dataset(args.root, resize=args.resize)
    tr, va, te = split_indices(ds.labels, args.split, args.seed)
    out = Path(args.out)
    save_image_dataset(ds.subset(tr, role="real-train"), out / "data" / "train")
    save_image_dataset(ds.subset(va, role="real-val"), out / "data" / "val")
    save_image_dataset(ds.subset(te, role="real-test"), out / "data" / "test")
    payload = {
        "classes": ds.class_names,
        "total": len(ds),
        "train": len(tr),
        "val": len(va),
        "test": len(te),
        "out": str(out),
    }
    (out / "splits.json").write_text(
        json.dumps(
            {
                "class_names": ds.class_names,
                "train_indices": tr.tolist(),
                "val_indices": va.tolist(),
                "test_indices": te.tolist(),
            },
            indent=2,
        )
        + "\n"
    )
    _emit(payload)


def cmd_manifold(args) -> None:
    real = read_embeddings(args.real)
    synth = read_embeddings(args.synth)
    _emit(
        {
            "precision": precision(real, synth, args.k),
            "recall": recall(real, synth, args.k),
            "k": args.k,
        }
    )


def cmd_fid(args) -> None:
    _emit(fid_from_features(read_embeddings(args.real), read_embeddings(args.synth)))


def cmd_privacy(args) -> None:
    real = load_image_dataset(args.real, role="real-train")
    synth = load_image_dataset(args.synth, role="synthetic")
    result = privacy_report(
        synth,
        real,
        PrivacyConfig(q=args.q, l=args.l, seed=args.seed),
        SsimParams(window=args.window),
    )
    _emit(
        {
            "privacy": result.score,
            "repeat_means": result.repeat_means,
            "top_matches": [
                {"synth_index": e.synth_index, "real_index": e.real_index, "ssim": e.ssim}
                for e in result.top_matches(args.top)
            ],
        }
    )


def cmd_attack(args) -> None:
    model = load_classifier(args.model)
    test = load_image_dataset(args.test, role="real-test")
    cfg = AttackConfig(
        max_iterations=args.iters,
        overshoot=args.overshoot,
        clamp_to_valid_range=not args.no_clamp,
    )
    summary = run_attack(model, test, cfg, args.top_k)
    counts, edges = np.histogram(summary.perturbation_norms, bins=args.bins)
    _emit(
        {
            "clean_accuracy": summary.clean.accuracy,
            "adversarial_accuracy": summary.adversarial.accuracy,
            "clean_top_k_accuracy": summary.clean.top_k_accuracy,
            "adversarial_top_k_accuracy": summary.adversarial.top_k_accuracy,
            "flip_rate": summary.flip_rate,
            "correct_subset_adversarial_accuracy": summary.correct_subset_adversarial_accuracy,
            "perturbation_histogram": {
                "counts": counts.tolist(),
                "bin_edges": edges.tolist(),
            },
        }
    )


def cmd_bench(args) -> None:
    if args.adapter == "stub":
        adapter = GeneratorAdapter(
            kind="stub",
            per_sample_delay=args.delay,
            image_hw=args.hw,
            seed=args.seed,
        )
    else:
        adapter = GeneratorAdapter(kind="external-command", command_template=args.template)
    result = benchmark_generator(adapter, args.count, args.warmup, args.work_dir)
    _emit(
        {
            "count": result.count,
            "elapsed_seconds": result.elapsed_seconds,
            "samples_per_second": result.samples_per_second,
            "samples_dir": str(result.samples_dir),
        }
    )


def cmd_run(args) -> None:
    plan = ExperimentPlan.from_json(args.config)
    run_dir = args.out or plan.out_dir
    if not run_dir:
        raise SystemExit("no output directory: pass --out or set out_dir in the config")
    summary = run_experiment(plan, run_dir, workers=args.workers, dump_augmented=args.dump_augmented)
    _emit(
        {
            "run_dir": str(summary.run_dir),
            "cells": [r.label for r in summary.records],
            "trained": summary.trained,
            "skipped": summary.skipped,
            "failed": summary.failed,
        }
    )


def cmd_report(args) -> None:
    from .charts import emit_bar_svg, emit_radar_svg

    run_dir = Path(args.run)
    records = load_records(run_dir)
    ok_records = [r for r in records if r.status == "ok"]
    if not ok_records:
        raise SystemExit(f"no completed records under {run_dir}")
    written: list[str] = []
    if args.format in ("csv", "json"):
        written += [str(p) for p in emit_tables(ok_records, run_dir / "tables")]
    if args.format == "svg":
        plots = run_dir / "plots"
        plots.mkdir(parents=True, exist_ok=True)
        radar_records = [r for r in ok_records if r.family == args.radar_family]
        if len(radar_records) >= 2:
            rows = normalize_for_radar(radar_records, normalize_over=args.normalize_over)
            path = plots / "radar.svg"
            path.write_text(emit_radar_svg(rows))
            written.append(str(path))
        for metric in ("utility", "robustness"):
            path = plots / f"bars_{metric}.svg"
            path.write_text(emit_bar_svg(ok_records, metric))
            written.append(str(path))
    _emit({"written": written})


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trilemma-eval",
        description="Evaluate synthetic image datasets on fidelity, diversity, "
        "sampling speed, utility, robustness, and privacy.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="split a PNG corpus into train/val/test")
    p.add_argument("--root", required=True)
    p.add_argument("--split", type=_parse_split, default=SplitRatios())
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--resize", type=_parse_resize, default=None, metavar="HxW")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("manifold", help="precision/recall between embedding files")
    p.add_argument("--real", required=True)
    p.add_argument("--synth", required=True)
    p.add_argument("--k", type=int, default=3)
    p.set_defaults(func=cmd_manifold)

    p = sub.add_parser("fid", help="Frechet distance between embedding files")
    p.add_argument("--real", required=True)
    p.add_argument("--synth", required=True)
    p.set_defaults(func=cmd_fid)

    p = sub.add_parser("privacy", help="max-SSIM memorization score")
    p.add_argument("--real", required=True)
    p.add_argument("--synth", required=True)
    p.add_argument("--q", type=int, default=100)
    p.add_argument("--l", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--window", type=int, default=11)
    p.add_argument("--top", type=int, default=10)
    p.set_defaults(func=cmd_privacy)

    p = sub.add_parser("attack", help="DeepFool clean vs adversarial accuracy")
    p.add_argument("--model", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--iters", type=int, default=5)
    p.add_argument("--overshoot", type=float, default=0.02)
    p.add_argument("--no-clamp", action="store_true")
    p.add_argument("--top-k", type=int, default=3)
    p.add_argument("--bins", type=int, default=20)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("bench", help="sampling-speed benchmark")
    p.add_argument("--adapter", choices=("stub", "cmd"), default="stub")
    p.add_argument("--template", help="external command with {count} and {outdir}")
    p.add_argument("--count", type=int, default=128)
    p.add_argument("--warmup", type=int, default=16)
    p.add_argument("--delay", type=float, default=0.0, help="stub per-sample delay (s)")
    p.add_argument("--hw", type=_parse_resize, default=(8, 8), metavar="HxW")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--work-dir", default=None)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("run", help="run an experiment plan from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default=None)
    p.add_argument("--dump-augmented", default=None)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="tables and plots for a finished run")
    p.add_argument("--run", required=True)
    p.add_argument("--format", choices=("csv", "json", "svg"), default="csv")
    p.add_argument("--radar-family", default="data-anonymization")
    p.add_argument("--normalize-over", choices=("cells", "means"), default="cells")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> None:
    args = build_parser().parse_args(argv)
    args.func(args)


if __name__ == "__main__":
    main()
