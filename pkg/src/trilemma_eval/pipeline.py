"""Experiment orchestration over the five training-set families.

A run is driven by one JSON config (see `ExperimentPlan`), expands into one
cell per (family, multiplier, generator), trains the downstream classifier
per cell, and persists one MetricsRecord JSON per cell plus shared
per-generator metrics (precision/recall/FID from embeddings, privacy from
pixels, sampling speed from the generator benchmark).

Run directory layout:

    run.json            resolved config + fingerprint
    splits.json         split index arrays (leakage-checkable)
    data/{train,val,test}/   materialized splits as PNG corpora
    synth/<generator>/  materialized stub pools
    embeddings/*.gevb   feature files
    shared/<generator>.json  per-generator trilemma + privacy metrics
    records/*.json      one MetricsRecord per cell
    checkpoints/*.gevm  trained classifiers

Re-running with an identical config is a no-op: completed cells are
recognized by the config fingerprint stored in each record.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .augment import geometric_augment
from .classifier import TrainHyper, build_classifier, evaluate, save_classifier, train
from .data import (
    DatasetError,
    LabeledImageDataset,
    SplitRatios,
    concat_datasets,
    load_image_dataset,
    save_image_dataset,
    split_indices,
)
from .deepfool import AttackConfig, run_attack
from .features import fallback_features, read_embeddings, write_embeddings
from .fid import fid_from_features
from .genbench import GeneratorAdapter, benchmark_generator, generate
from .manifold import precision, recall
from .ssim import PrivacyConfig, SsimParams, privacy_report

BASELINE_FAMILIES = ("baseline-real", "geometric-da")
SYNTHETIC_FAMILIES = ("data-anonymization", "synthetic-da", "combined-da")
FAMILY_ORDER = BASELINE_FAMILIES + SYNTHETIC_FAMILIES


def derive_seed(*parts) -> int:
    """Stable child seed from a run seed and string/int context tags."""
    ints = []
    for p in parts:
        if isinstance(p, (int, np.integer)):
            ints.append(int(p) & 0xFFFFFFFF)
        else:
            digest = hashlib.sha256(str(p).encode()).digest()
            ints.append(int.from_bytes(digest[:4], "little"))
    return int(np.random.SeedSequence(ints).generate_state(1)[0])


@dataclass
class ExperimentVariant:
    family: str
    multiplier: int | None = None
    generator_id: str | None = None

    def __post_init__(self):
        if self.family not in FAMILY_ORDER:
            raise ValueError(f"unknown experiment family {self.family!r}")
        synthetic = self.family in SYNTHETIC_FAMILIES
        if synthetic and (self.multiplier is None or self.generator_id is None):
            raise ValueError(f"{self.family} needs a multiplier and a generator_id")
        if not synthetic and (self.multiplier is not None or self.generator_id is not None):
            raise ValueError(f"{self.family} carries no multiplier or generator_id")
        if self.multiplier is not None and self.multiplier < 1:
            raise ValueError("multiplier must be >= 1")

    @property
    def label(self) -> str:
        parts = [self.family]
        if self.multiplier is not None:
            parts.append(f"x{self.multiplier}")
        if self.generator_id is not None:
            parts.append(self.generator_id)
        return "-".join(parts)


@dataclass
class GeneratorSpec:
    generator_id: str
    kind: str  # "stub" | "pool"
    pool_dir: str | None = None
    per_sample_delay: float = 0.0
    seed: int = 0
    bench_count: int = 16
    bench_warmup: int = 2
    sampling_speed: float | None = None  # externally measured, pool kind only
    real_embeddings: str | None = None  # optional GEVB paths from an embedder
    synth_embeddings: str | None = None

    def __post_init__(self):
        if self.kind not in ("stub", "pool"):
            raise ValueError(f"unknown generator kind {self.kind!r}")
        if self.kind == "pool" and not self.pool_dir:
            raise ValueError("pool generators need pool_dir")


@dataclass
class ClassifierConfig:
    variant: str = "four-block"
    hidden: int = 128
    epochs: int = 30
    batch_size: int = 32
    learning_rate: float = 1e-3
    seed: int = 0

    def hyper(self, seed: int) -> TrainHyper:
        return TrainHyper(
            epochs=self.epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            seed=seed,
        )


@dataclass
class MetricsConfig:
    knn_k: int = 3
    embedding_dim: int = 16
    embedding_seed: int = 0
    privacy_q: int = 100
    privacy_l: int = 10
    ssim_window: int = 11
    eval_top_k: int = 3


@dataclass
class ExperimentPlan:
    dataset_id: str
    data_root: str
    out_dir: str | None = None
    resize: tuple[int, int] | None = None
    split: SplitRatios = field(default_factory=SplitRatios)
    split_seed: int = 0
    seed: int = 0
    families: list[str] = field(default_factory=lambda: list(FAMILY_ORDER))
    multipliers: list[int] = field(default_factory=lambda: [1, 2, 3])
    generators: list[GeneratorSpec] = field(default_factory=list)
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    metrics: MetricsConfig = field(default_factory=MetricsConfig)
    attack: AttackConfig = field(default_factory=AttackConfig)
    host_description: str = ""

    def __post_init__(self):
        for fam in self.families:
            if fam not in FAMILY_ORDER:
                raise ValueError(f"unknown experiment family {fam!r}")
        if any(m < 1 for m in self.multipliers):
            raise ValueError("multipliers must be >= 1")
        if any(fam in SYNTHETIC_FAMILIES for fam in self.families) and not self.generators:
            raise ValueError("synthetic families require at least one generator")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["split"] = {"train": self.split.train, "val": self.split.val, "test": self.split.test}
        d["resize"] = list(self.resize) if self.resize else None
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentPlan":
        d = dict(d)
        if "split" in d and isinstance(d["split"], dict):
            d["split"] = SplitRatios(**d["split"])
        if d.get("resize"):
            d["resize"] = tuple(d["resize"])
        if "generators" in d:
            d["generators"] = [
                g if isinstance(g, GeneratorSpec) else GeneratorSpec(**g) for g in d["generators"]
            ]
        if "classifier" in d and isinstance(d["classifier"], dict):
            d["classifier"] = ClassifierConfig(**d["classifier"])
        if "metrics" in d and isinstance(d["metrics"], dict):
            d["metrics"] = MetricsConfig(**d["metrics"])
        if "attack" in d and isinstance(d["attack"], dict):
            d["attack"] = AttackConfig(**d["attack"])
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "ExperimentPlan":
        return cls.from_dict(json.loads(Path(path).read_text()))


def config_fingerprint(plan: ExperimentPlan) -> str:
    canonical = json.dumps(plan.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def expand_cells(plan: ExperimentPlan) -> list[ExperimentVariant]:
    """All cells of the plan; baseline families collapse to one cell each."""
    cells: list[ExperimentVariant] = []
    for family in FAMILY_ORDER:
        if family not in plan.families:
            continue
        if family in BASELINE_FAMILIES:
            cells.append(ExperimentVariant(family=family))
        else:
            for spec in plan.generators:
                for mult in sorted(plan.multipliers):
                    cells.append(
                        ExperimentVariant(
                            family=family, multiplier=mult, generator_id=spec.generator_id
                        )
                    )
    return cells


def _draw_stratified(
    pool: LabeledImageDataset, per_class_counts: np.ndarray, seed: int
) -> LabeledImageDataset:
    """Class-stratified draw without replacement, nested across sizes.

    The per-class order depends only on (seed, class), so a larger draw
    always contains every smaller draw of the same seed.
    """
    chosen: list[np.ndarray] = []
    for c, needed in enumerate(per_class_counts):
        members = np.flatnonzero(pool.labels == c)
        if len(members) < needed:
            raise DatasetError(
                f"generator pool has {len(members)} images of class "
                f"{pool.class_names[c]!r} but the variant needs {needed}"
            )
        rng = np.random.default_rng(np.random.SeedSequence([seed & 0xFFFFFFFF, c]))
        chosen.append(members[rng.permutation(len(members))][:needed])
    return pool.subset(np.concatenate(chosen), role="synthetic")


def build_training_set(
    variant: ExperimentVariant,
    real_train: LabeledImageDataset,
    synth_pool: LabeledImageDataset | None = None,
    seed: int = 0,
) -> LabeledImageDataset:
    """Materialize the training corpus for one experiment cell.

    baseline-real         real training split unchanged
    geometric-da          4x geometric augmentation of the real split
    data-anonymization    multiplier x |real| synthetic images, class-stratified
    synthetic-da          real split plus that synthetic draw
    combined-da           augmented real split plus the augmented draw

    Synthetic draws are nested across multipliers (the 1x draw is a subset
    of the 2x draw, and so on) for variance control.
    """
    if variant.family == "baseline-real":
        return real_train
    if variant.family == "geometric-da":
        return geometric_augment(real_train, derive_seed(seed, "augment-real"))

    if synth_pool is None:
        raise DatasetError(f"{variant.family} requires a synthetic pool")
    per_class = real_train.class_counts() * variant.multiplier
    draw = _draw_stratified(synth_pool, per_class, derive_seed(seed, "draw", variant.generator_id))
    if variant.family == "data-anonymization":
        return draw
    if variant.family == "synthetic-da":
        return concat_datasets([real_train, draw], role="real-train")
    if variant.family == "combined-da":
        return concat_datasets(
            [
                geometric_augment(real_train, derive_seed(seed, "augment-real")),
                geometric_augment(draw, derive_seed(seed, "augment-synth", variant.generator_id)),
            ],
            role="real-train",
        )
    raise ValueError(f"unknown family {variant.family!r}")


@dataclass
class MetricsRecord:
    dataset_id: str
    family: str
    multiplier: int | None
    generator_id: str | None
    fidelity: float | None
    diversity: float | None
    fid: float | None
    sampling_speed: float | None
    privacy: float | None
    utility: dict | None
    robustness: dict | None
    attack_stats: dict | None
    seeds: dict
    config_fingerprint: str
    training: dict | None
    status: str = "ok"
    error: str | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsRecord":
        return cls(**d)

    @property
    def label(self) -> str:
        parts = [self.family]
        if self.multiplier is not None:
            parts.append(f"x{self.multiplier}")
        if self.generator_id is not None:
            parts.append(self.generator_id)
        return "-".join(parts)


@dataclass
class RunSummary:
    run_dir: Path
    records: list[MetricsRecord]
    trained: int
    skipped: int
    failed: list[str]


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


_dataset_cache: dict[str, LabeledImageDataset] = {}


def _load_cached(path: Path, role: str) -> LabeledImageDataset:
    key = f"{path}::{role}"
    if key not in _dataset_cache:
        _dataset_cache[key] = load_image_dataset(path, role=role)
    return _dataset_cache[key]


def _ingest(plan: ExperimentPlan, run_dir: Path, fingerprint: str) -> dict:
    """Split the corpus, materialize the splits, and verify no test leakage."""
    splits_path = run_dir / "splits.json"
    if splits_path.exists():
        existing = json.loads(splits_path.read_text())
        if existing.get("config_fingerprint") == fingerprint:
            return existing
        raise ValueError(f"{run_dir} holds a run with a different configuration")

    ds = load_image_dataset(plan.data_root, role="real-train", resize=plan.resize)
    tr, va, te = split_indices(ds.labels, plan.split, plan.split_seed)
    for a, b in ((tr, va), (tr, te), (va, te)):
        if np.intersect1d(a, b).size:
            raise RuntimeError("split leakage: index sets overlap")
    save_image_dataset(ds.subset(tr, role="real-train"), run_dir / "data" / "train")
    save_image_dataset(ds.subset(va, role="real-val"), run_dir / "data" / "val")
    save_image_dataset(ds.subset(te, role="real-test"), run_dir / "data" / "test")
    payload = {
        "config_fingerprint": fingerprint,
        "class_names": ds.class_names,
        "train_indices": tr.tolist(),
        "val_indices": va.tolist(),
        "test_indices": te.tolist(),
    }
    _write_json(splits_path, payload)
    return payload


def _materialize_pool(
    plan: ExperimentPlan, spec: GeneratorSpec, run_dir: Path, real_train: LabeledImageDataset
) -> Path:
    if spec.kind == "pool":
        return Path(spec.pool_dir)
    pool_dir = run_dir / "synth" / spec.generator_id
    marker = pool_dir / ".complete"
    if not marker.exists():
        need = real_train.class_counts() * max(plan.multipliers, default=1)
        h, w, c = real_train.image_shape
        adapter = GeneratorAdapter(
            kind="stub",
            per_sample_delay=spec.per_sample_delay,
            image_hw=(h, w),
            channels=c,
            seed=spec.seed,
        )
        for class_index, class_name in enumerate(real_train.class_names):
            generate(adapter, int(need[class_index]), pool_dir / class_name, class_index)
        marker.write_text("ok\n")
    return pool_dir


def _shared_metrics(
    plan: ExperimentPlan,
    spec: GeneratorSpec,
    run_dir: Path,
    real_train: LabeledImageDataset,
    pool: LabeledImageDataset,
    fingerprint: str,
) -> dict:
    """Trilemma + privacy metrics computed once per generator."""
    out_path = run_dir / "shared" / f"{spec.generator_id}.json"
    if out_path.exists():
        existing = json.loads(out_path.read_text())
        if existing.get("config_fingerprint") == fingerprint:
            return existing

    mc = plan.metrics
    emb_dir = run_dir / "embeddings"
    emb_dir.mkdir(parents=True, exist_ok=True)
    if spec.real_embeddings:
        real_fs = read_embeddings(spec.real_embeddings)
    else:
        real_path = emb_dir / "real.gevb"
        if real_path.exists():
            real_fs = read_embeddings(real_path)
        else:
            real_fs = fallback_features(real_train, mc.embedding_dim, mc.embedding_seed)
            write_embeddings(real_fs, real_path)
    if spec.synth_embeddings:
        synth_fs = read_embeddings(spec.synth_embeddings)
    else:
        synth_path = emb_dir / f"{spec.generator_id}.gevb"
        if synth_path.exists():
            synth_fs = read_embeddings(synth_path)
        else:
            synth_fs = fallback_features(pool, mc.embedding_dim, mc.embedding_seed)
            write_embeddings(synth_fs, synth_path)

    privacy = privacy_report(
        pool,
        real_train,
        PrivacyConfig(
            q=min(mc.privacy_q, len(pool)),
            l=mc.privacy_l,
            seed=derive_seed(plan.seed, "privacy", spec.generator_id),
        ),
        SsimParams(window=mc.ssim_window),
    )

    if spec.kind == "stub":
        adapter = GeneratorAdapter(
            kind="stub",
            per_sample_delay=spec.per_sample_delay,
            image_hw=real_train.image_shape[:2],
            channels=real_train.image_shape[2],
            seed=spec.seed,
        )
        bench = benchmark_generator(
            adapter, spec.bench_count, spec.bench_warmup, run_dir / "bench" / spec.generator_id
        )
        speed = bench.samples_per_second
    else:
        speed = spec.sampling_speed

    payload = {
        "config_fingerprint": fingerprint,
        "generator_id": spec.generator_id,
        "fidelity": precision(real_fs, synth_fs, mc.knn_k),
        "diversity": recall(real_fs, synth_fs, mc.knn_k),
        "fid": fid_from_features(real_fs, synth_fs),
        "privacy": privacy.score,
        "sampling_speed": speed,
        "feature_source": {"real": real_fs.source, "synth": synth_fs.source},
        "privacy_top_matches": [
            {"synth_index": e.synth_index, "real_index": e.real_index, "ssim": e.ssim}
            for e in privacy.top_matches(10)
        ],
    }
    _write_json(out_path, payload)
    return payload


def _run_cell(
    plan_dict: dict, run_dir_str: str, variant_dict: dict, shared: dict | None, fingerprint: str
) -> dict:
    """Train and evaluate one cell; self-contained for worker processes."""
    plan = ExperimentPlan.from_dict(plan_dict)
    run_dir = Path(run_dir_str)
    variant = ExperimentVariant(**variant_dict)
    mc = plan.metrics

    real_train = _load_cached(run_dir / "data" / "train", "real-train")
    val = _load_cached(run_dir / "data" / "val", "real-val")
    test = _load_cached(run_dir / "data" / "test", "real-test")
    pool = None
    if variant.generator_id is not None:
        spec = next(g for g in plan.generators if g.generator_id == variant.generator_id)
        pool_dir = (
            Path(spec.pool_dir) if spec.kind == "pool" else run_dir / "synth" / spec.generator_id
        )
        pool = _load_cached(pool_dir, "synthetic")

    train_set = build_training_set(variant, real_train, pool, plan.seed)
    train_seed = derive_seed(plan.classifier.seed, "train", variant.label)
    model = build_classifier(
        real_train.image_shape[:2],
        real_train.image_shape[2],
        real_train.num_classes,
        variant=plan.classifier.variant,
        hidden=plan.classifier.hidden,
        seed=derive_seed(plan.classifier.seed, "init", variant.label),
    )
    result = train(model, train_set, val, plan.classifier.hyper(train_seed))
    save_classifier(result.model, run_dir / "checkpoints" / f"{variant.label}.gevm")

    utility = evaluate(result.model, test, mc.eval_top_k)
    attack = run_attack(result.model, test, plan.attack, mc.eval_top_k)

    record = MetricsRecord(
        dataset_id=plan.dataset_id,
        family=variant.family,
        multiplier=variant.multiplier,
        generator_id=variant.generator_id,
        fidelity=shared["fidelity"] if shared else None,
        diversity=shared["diversity"] if shared else None,
        fid=shared["fid"] if shared else None,
        sampling_speed=shared["sampling_speed"] if shared else None,
        privacy=shared["privacy"] if shared else None,
        utility=utility.to_dict(),
        robustness=attack.adversarial.to_dict(),
        attack_stats={
            "flip_rate": attack.flip_rate,
            "mean_perturbation_l2": float(attack.perturbation_norms.mean()),
            "correct_subset_adversarial_accuracy": attack.correct_subset_adversarial_accuracy,
            "clean_accuracy": attack.clean.accuracy,
        },
        seeds={
            "run": plan.seed,
            "split": plan.split_seed,
            "train": train_seed,
            "training_set_size": len(train_set),
        },
        config_fingerprint=fingerprint,
        training={
            "best_epoch": result.best_epoch,
            "best_val_loss": result.best_val_loss,
            "history": result.history,
        },
    )
    _write_json(run_dir / "records" / f"{variant.label}.json", record.to_dict())
    return record.to_dict()


def run_experiment(
    plan: ExperimentPlan, run_dir, workers: int = 1, dump_augmented=None
) -> RunSummary:
    """Execute every cell of the plan, skipping cells already completed.

    Cell failures are recorded without aborting sibling cells. With
    workers > 1, cells run in separate processes; each cell is
    deterministic in isolation, so results match the sequential schedule.
    """
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    fingerprint = config_fingerprint(plan)

    run_json = run_dir / "run.json"
    if run_json.exists():
        existing = json.loads(run_json.read_text())
        if existing.get("fingerprint") != fingerprint:
            raise ValueError(f"{run_dir} holds a run with a different configuration")
    else:
        _write_json(run_json, {"fingerprint": fingerprint, "config": plan.to_dict()})

    _ingest(plan, run_dir, fingerprint)
    real_train = _load_cached(run_dir / "data" / "train", "real-train")

    shared_by_generator: dict[str, dict] = {}
    needs_synthetic = any(f in SYNTHETIC_FAMILIES for f in plan.families)
    if needs_synthetic:
        for spec in plan.generators:
            pool_dir = _materialize_pool(plan, spec, run_dir, real_train)
            pool = _load_cached(pool_dir, "synthetic")
            if pool.class_names != real_train.class_names:
                raise DatasetError(
                    f"pool classes {pool.class_names} do not match dataset classes "
                    f"{real_train.class_names}"
                )
            shared_by_generator[spec.generator_id] = _shared_metrics(
                plan, spec, run_dir, real_train, pool, fingerprint
            )

    if dump_augmented is not None:
        save_image_dataset(
            geometric_augment(real_train, derive_seed(plan.seed, "augment-real")), dump_augmented
        )

    cells = expand_cells(plan)
    pending: list[ExperimentVariant] = []
    records: dict[str, MetricsRecord] = {}
    skipped = 0
    for variant in cells:
        record_path = run_dir / "records" / f"{variant.label}.json"
        if record_path.exists():
            existing = json.loads(record_path.read_text())
            if existing.get("config_fingerprint") == fingerprint and existing.get("status") == "ok":
                records[variant.label] = MetricsRecord.from_dict(existing)
                skipped += 1
                continue
        pending.append(variant)

    failed: list[str] = []

    def handle(variant: ExperimentVariant, outcome: dict | Exception) -> None:
        if isinstance(outcome, Exception):
            record = MetricsRecord(
                dataset_id=plan.dataset_id,
                family=variant.family,
                multiplier=variant.multiplier,
                generator_id=variant.generator_id,
                fidelity=None,
                diversity=None,
                fid=None,
                sampling_speed=None,
                privacy=None,
                utility=None,
                robustness=None,
                attack_stats=None,
                seeds={"run": plan.seed},
                config_fingerprint=fingerprint,
                training=None,
                status="failed",
                error=f"{type(outcome).__name__}: {outcome}",
            )
            _write_json(run_dir / "records" / f"{variant.label}.json", record.to_dict())
            failed.append(variant.label)
            records[variant.label] = record
        else:
            records[variant.label] = MetricsRecord.from_dict(outcome)

    plan_dict = plan.to_dict()
    job_args = [
        (
            plan_dict,
            str(run_dir),
            asdict(v),
            shared_by_generator.get(v.generator_id),
            fingerprint,
        )
        for v in pending
    ]
    if workers > 1 and len(pending) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool_exec:
            futures = [pool_exec.submit(_run_cell, *args) for args in job_args]
            for variant, future in zip(pending, futures):
                try:
                    handle(variant, future.result())
                except Exception as exc:  # noqa: BLE001 - per-cell isolation
                    handle(variant, exc)
    else:
        for variant, args in zip(pending, job_args):
            try:
                handle(variant, _run_cell(*args))
            except Exception as exc:  # noqa: BLE001 - per-cell isolation
                handle(variant, exc)

    ordered = [records[v.label] for v in cells]
    summary = RunSummary(
        run_dir=run_dir,
        records=ordered,
        trained=len(pending) - len(failed),
        skipped=skipped,
        failed=failed,
    )
    _write_json(
        run_dir / "summary.json",
        {
            "fingerprint": fingerprint,
            "cells": [r.label for r in ordered],
            "trained": summary.trained,
            "skipped": summary.skipped,
            "failed": failed,
        },
    )
    return summary


def load_records(run_dir) -> list[MetricsRecord]:
    run_dir = Path(run_dir)
    records = []
    for path in sorted((run_dir / "records").glob("*.json")):
        records.append(MetricsRecord.from_dict(json.loads(path.read_text())))
    return records
