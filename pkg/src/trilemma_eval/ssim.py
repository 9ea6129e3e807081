"""Structural similarity and the max-SSIM memorization/privacy score.

SSIM uses the standard Gaussian-weighted 11x11 sliding window (sigma 1.5,
k1=0.01, k2=0.03) over valid window positions, with dynamic range 1.0 to
match [0, 1] pixel normalization. Multichannel images average per-channel
maps. The privacy score samples q synthetic images per repeat, records each
one's highest SSIM against the whole real set, and averages over l repeats;
lower means less memorization.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .data import LabeledImageDataset


@dataclass
class SsimParams:
    window: int = 11
    gaussian_sigma: float = 1.5
    k1: float = 0.01
    k2: float = 0.03
    dynamic_range: float = 1.0

    def __post_init__(self):
        if self.window < 3 or self.window % 2 == 0:
            raise ValueError("window must be odd and >= 3")
        if min(self.gaussian_sigma, self.k1, self.k2, self.dynamic_range) <= 0:
            raise ValueError("SSIM constants must be positive")

    @property
    def c1(self) -> float:
        return (self.k1 * self.dynamic_range) ** 2

    @property
    def c2(self) -> float:
        return (self.k2 * self.dynamic_range) ** 2


@dataclass
class PrivacyConfig:
    q: int = 100
    l: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.q < 1 or self.l < 1:
            raise ValueError("q and l must be >= 1")


def gaussian_window(size: int, sigma: float) -> np.ndarray:
    half = (size - 1) / 2.0
    coords = np.arange(size) - half
    g = np.exp(-(coords[:, None] ** 2 + coords[None, :] ** 2) / (2.0 * sigma**2))
    return g / g.sum()


def _check_pair(a: np.ndarray, b: np.ndarray, p: SsimParams) -> None:
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    if a.shape[0] < p.window or a.shape[1] < p.window:
        raise ValueError(f"image {a.shape[:2]} smaller than SSIM window {p.window}")


def _window_mean(img: np.ndarray, w: np.ndarray) -> np.ndarray:
    # (H, W, C) -> weighted mean over every valid window: (H', W', C)
    windows = sliding_window_view(img, (w.shape[0], w.shape[1]), axis=(0, 1))
    return np.tensordot(windows, w, axes=([3, 4], [0, 1]))


def _moments(img: np.ndarray, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-window mean and mean-of-squares of one image."""
    return _window_mean(img, w), _window_mean(img * img, w)


def _ssim_from_moments(mu1, sq1, mu2, sq2, cross, p: SsimParams) -> float:
    var1 = sq1 - mu1 * mu1
    var2 = sq2 - mu2 * mu2
    cov = cross - mu1 * mu2
    num = (2.0 * mu1 * mu2 + p.c1) * (2.0 * cov + p.c2)
    den = (mu1 * mu1 + mu2 * mu2 + p.c1) * (var1 + var2 + p.c2)
    return float(np.mean(num / den))


def ssim(a: np.ndarray, b: np.ndarray, p: SsimParams | None = None) -> float:
    """Mean local SSIM between two same-shaped images, in [-1, 1]."""
    p = p or SsimParams()
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_pair(a, b, p)
    w = gaussian_window(p.window, p.gaussian_sigma)
    mu1, sq1 = _moments(a, w)
    mu2, sq2 = _moments(b, w)
    cross = _window_mean(a * b, w)
    return _ssim_from_moments(mu1, sq1, mu2, sq2, cross, p)


def max_ssim(
    s: np.ndarray, real: LabeledImageDataset, p: SsimParams | None = None
) -> tuple[float, int]:
    """Highest SSIM of one synthetic image against every real image.

    Returns (value, index of the closest real image) for audit reports.
    """
    p = p or SsimParams()
    if len(real) == 0:
        raise ValueError("real dataset is empty")
    s = np.asarray(s, dtype=np.float64)
    _check_pair(s, real.images[0], p)
    w = gaussian_window(p.window, p.gaussian_sigma)
    mu_s, sq_s = _moments(s, w)
    best_value, best_index = -np.inf, -1
    for i in range(len(real)):
        r = real.images[i]
        mu_r, sq_r = _moments(r, w)
        value = _ssim_from_moments(mu_s, sq_s, mu_r, sq_r, _window_mean(s * r, w), p)
        if value > best_value:
            best_value, best_index = value, i
    return best_value, best_index


@dataclass
class PrivacyAuditEntry:
    repeat: int
    synth_index: int
    real_index: int
    ssim: float


@dataclass
class PrivacyResult:
    score: float
    repeat_means: list[float]
    audit: list[PrivacyAuditEntry] = field(repr=False)

    def top_matches(self, n: int = 10) -> list[PrivacyAuditEntry]:
        return sorted(self.audit, key=lambda e: (-e.ssim, e.repeat, e.synth_index))[:n]


def privacy_report(
    synth: LabeledImageDataset,
    real: LabeledImageDataset,
    cfg: PrivacyConfig | None = None,
    p: SsimParams | None = None,
) -> PrivacyResult:
    """Full privacy evaluation with per-sample audit entries.

    Each repeat draws cfg.q synthetic images without replacement (all
    repeats driven by one seeded generator), averages their max-SSIM values
    against the whole real set, and the score averages the repeats.
    """
    cfg = cfg or PrivacyConfig()
    p = p or SsimParams()
    if len(synth) < cfg.q:
        raise ValueError(
            f"synthetic set has {len(synth)} images but q={cfg.q}; use a smaller q"
        )
    if len(real) == 0:
        raise ValueError("real dataset is empty")
    _check_pair(synth.images[0], real.images[0], p)

    w = gaussian_window(p.window, p.gaussian_sigma)
    real_moments = [_moments(real.images[i], w) for i in range(len(real))]

    rng = np.random.default_rng(cfg.seed)
    repeat_means: list[float] = []
    audit: list[PrivacyAuditEntry] = []
    for repeat in range(cfg.l):
        picks = rng.choice(len(synth), size=cfg.q, replace=False)
        values = np.empty(cfg.q)
        for slot, j in enumerate(picks):
            s = synth.images[j]
            mu_s, sq_s = _moments(s, w)
            best_value, best_index = -np.inf, -1
            for i, (mu_r, sq_r) in enumerate(real_moments):
                value = _ssim_from_moments(
                    mu_s, sq_s, mu_r, sq_r, _window_mean(s * real.images[i], w), p
                )
                if value > best_value:
                    best_value, best_index = value, i
            values[slot] = best_value
            audit.append(PrivacyAuditEntry(repeat, int(j), best_index, best_value))
        repeat_means.append(float(values.mean()))
    return PrivacyResult(
        score=float(np.mean(repeat_means)), repeat_means=repeat_means, audit=audit
    )


def privacy_score(
    synth: LabeledImageDataset,
    real: LabeledImageDataset,
    cfg: PrivacyConfig | None = None,
    p: SsimParams | None = None,
) -> float:
    return privacy_report(synth, real, cfg, p).score
