"""Sampling-speed measurement through generator adapters.

Speed is samples per second over a timed end-to-end generation of `count`
images (process spawn included for external commands). A warmup batch runs
untimed first. The stub adapter writes seeded noise PNGs with a
configurable per-sample delay so pipelines and tests run without any
trained generator.
"""

from __future__ import annotations

import shlex
import subprocess
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .data import save_image_png


@dataclass
class GeneratorAdapter:
    kind: str  # "stub" or "external-command"
    command_template: str | None = None  # {count}, {outdir}, optional {class}
    per_sample_delay: float = 0.0
    image_hw: tuple[int, int] = (8, 8)
    channels: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.kind == "external-command":
            if not self.command_template:
                raise ValueError("external-command adapter needs a command template")
            for placeholder in ("{count}", "{outdir}"):
                if placeholder not in self.command_template:
                    raise ValueError(f"command template must contain {placeholder}")
        elif self.kind == "stub":
            if self.per_sample_delay < 0:
                raise ValueError("per-sample delay must be nonnegative")
        else:
            raise ValueError(f"unknown adapter kind {self.kind!r}")


@dataclass
class BenchmarkResult:
    elapsed_seconds: float
    samples_dir: Path
    count: int

    @property
    def samples_per_second(self) -> float:
        return sampling_speed(self.count, self.elapsed_seconds)


def generate(
    adapter: GeneratorAdapter, count: int, outdir, class_index: int | None = None
) -> None:
    """Produce exactly `count` PNGs in outdir via the adapter."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    if adapter.kind == "stub":
        h, w = adapter.image_hw
        rng = np.random.default_rng(
            np.random.SeedSequence([adapter.seed, 0 if class_index is None else class_index + 1])
        )
        for i in range(count):
            if adapter.per_sample_delay > 0:
                time.sleep(adapter.per_sample_delay)
            img = rng.uniform(0.0, 1.0, size=(h, w, adapter.channels))
            save_image_png(img, out / f"{i:06d}.png")
        return

    cmd = adapter.command_template.format(
        count=count, outdir=str(out), **({"class": class_index} if "{class}" in adapter.command_template else {})
    )
    proc = subprocess.run(shlex.split(cmd), capture_output=True, text=True)
    if proc.returncode != 0:
        raise RuntimeError(
            f"generator command failed (exit {proc.returncode}): {cmd}\n"
            f"stdout: {proc.stdout}\nstderr: {proc.stderr}"
        )


def _verify_outputs(outdir: Path, count: int) -> None:
    files = sorted(outdir.glob("*.png"))
    if len(files) != count:
        raise RuntimeError(f"expected {count} generated PNGs, found {len(files)} in {outdir}")
    for f in files:
        try:
            with PILImage.open(f) as im:
                im.verify()
        except Exception as exc:
            raise RuntimeError(f"generated file {f} is not a decodable PNG: {exc}") from exc


def benchmark_generator(
    adapter: GeneratorAdapter, count: int, warmup: int = 1, work_dir=None
) -> BenchmarkResult:
    """Time the wall-clock generation of `count` samples.

    Warmup generations run first into a scratch directory and are not
    timed, reducing cold-start bias. The timed samples are verified to be
    exactly `count` decodable PNGs.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    base = Path(work_dir) if work_dir is not None else Path(".") / "bench-samples"
    base.mkdir(parents=True, exist_ok=True)
    if warmup > 0:
        generate(adapter, warmup, base / "warmup")
    samples_dir = base / "timed"
    t0 = time.perf_counter()
    generate(adapter, count, samples_dir)
    elapsed = time.perf_counter() - t0
    _verify_outputs(samples_dir, count)
    return BenchmarkResult(elapsed_seconds=elapsed, samples_dir=samples_dir, count=count)


def sampling_speed(count: int, elapsed: float) -> float:
    """Samples generated per second: count / elapsed."""
    if elapsed <= 0:
        raise ValueError("elapsed time must be positive")
    return count / elapsed
