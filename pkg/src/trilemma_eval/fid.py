"""Frechet distance between Gaussian fits of two feature distributions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .features import FeatureSet


@dataclass
class GaussianStats:
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.covariance = np.asarray(self.covariance, dtype=np.float64)
        d = self.mean.shape[0]
        if self.covariance.shape != (d, d):
            raise ValueError("covariance shape inconsistent with mean dimension")
        asym = np.max(np.abs(self.covariance - self.covariance.T)) if d else 0.0
        if asym > 1e-8:
            raise ValueError(f"covariance not symmetric (max asymmetry {asym:g})")


def gaussian_stats(fs: FeatureSet) -> GaussianStats:
    """Sample mean and unbiased (N-1) covariance of a feature set."""
    x = fs.vectors.astype(np.float64)
    n = len(x)
    if n < 2:
        raise ValueError("covariance undefined: need at least 2 feature rows")
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / (n - 1)
    return GaussianStats(mean=mean, covariance=(cov + cov.T) / 2.0)


def matrix_sqrt_psd(a: np.ndarray) -> np.ndarray:
    """Principal square root of a symmetric PSD matrix.

    Uses the symmetric eigendecomposition; eigenvalues below
    1e-10 * max(eigenvalue) are clamped to zero, since sample covariances of
    small N are rank-deficient by construction.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    scale = np.max(np.abs(a)) if a.size else 0.0
    if np.max(np.abs(a - a.T)) > 1e-8 * max(scale, 1.0):
        raise ValueError("matrix not symmetric within tolerance")
    sym = (a + a.T) / 2.0
    eigvals, eigvecs = np.linalg.eigh(sym)
    clamp = 1e-10 * max(float(eigvals[-1]), 0.0)
    roots = np.sqrt(np.where(eigvals > clamp, eigvals, 0.0))
    return (eigvecs * roots) @ eigvecs.T


def fid(real: GaussianStats, synth: GaussianStats) -> float:
    """||mu_r - mu_s||^2 + Tr(S_r + S_s - 2 (S_r S_s)^(1/2)).

    The cross term is evaluated through the symmetric sandwich
    (S_s^(1/2) S_r S_s^(1/2))^(1/2), which has the same trace but keeps the
    eigenproblem real and PSD. Tiny negative results from rounding are
    clamped to zero.
    """
    if real.mean.shape != synth.mean.shape:
        raise ValueError("dimension mismatch between Gaussian stats")
    mean_term = float(np.sum((real.mean - synth.mean) ** 2))
    root_s = matrix_sqrt_psd(synth.covariance)
    sandwich = root_s @ real.covariance @ root_s
    cross_trace = float(np.trace(matrix_sqrt_psd((sandwich + sandwich.T) / 2.0)))
    value = mean_term + float(np.trace(real.covariance) + np.trace(synth.covariance)) - 2.0 * cross_trace
    return max(value, 0.0)


def fid_from_features(real: FeatureSet, synth: FeatureSet) -> float:
    return fid(gaussian_stats(real), gaussian_stats(synth))
