"""Precision (fidelity) and recall (diversity) via k-NN hypersphere manifolds.

A manifold is the union of hyperspheres centered on support features, each
with radius equal to the distance to its k-th nearest other support point.
Precision is the fraction of synthetic features inside the real manifold;
recall swaps the roles. Distances are exact brute-force Euclidean: sets are
desk-scale, and exactness lets tests compare against an independent oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .features import FeatureSet

DEFAULT_K = 3


@dataclass
class ManifoldModel:
    support: FeatureSet
    radii: np.ndarray
    k: int

    def __post_init__(self):
        if len(self.radii) != self.support.count:
            raise ValueError("radii length must match support row count")
        if np.any(self.radii < 0):
            raise ValueError("radii must be nonnegative")
        if not 1 <= self.k < self.support.count:
            raise ValueError("k must satisfy 1 <= k < support row count")


def _pairwise_sq_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # Direct differences, not the dot-product expansion: bitwise-stable and
    # matches naive per-pair evaluation at desk scale.
    diff = a[:, None, :] - b[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def build_manifold(fs: FeatureSet, k: int = DEFAULT_K) -> ManifoldModel:
    """Estimate per-point hypersphere radii from the k-th nearest neighbor."""
    x = fs.vectors.astype(np.float64)
    n = len(x)
    if n < k + 1:
        raise ValueError(f"need at least k+1={k + 1} support points, got {n}")
    d2 = _pairwise_sq_distances(x, x)
    np.fill_diagonal(d2, np.inf)  # a point is not its own neighbor
    # k-th order statistic of the distance multiset; ties admit all equidistant
    # neighbors automatically.
    kth = np.sort(d2, axis=1)[:, k - 1]
    return ManifoldModel(support=fs, radii=np.sqrt(kth), k=k)


def membership(v: np.ndarray, m: ManifoldModel) -> int:
    """1 iff v lies inside (or on the boundary of) any support hypersphere."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (m.support.dim,):
        raise ValueError(f"vector dim {v.shape} does not match support dim {m.support.dim}")
    d = np.sqrt(_pairwise_sq_distances(v[None, :], m.support.vectors.astype(np.float64)))[0]
    return int(np.any(d <= m.radii))


def _fraction_in_manifold(candidates: FeatureSet, manifold_base: FeatureSet, k: int) -> float:
    m = build_manifold(manifold_base, k)
    if candidates.dim != manifold_base.dim:
        raise ValueError("feature dimensions differ between sets")
    d = np.sqrt(
        _pairwise_sq_distances(
            candidates.vectors.astype(np.float64), manifold_base.vectors.astype(np.float64)
        )
    )
    inside = (d <= m.radii[None, :]).any(axis=1)
    return float(inside.mean())


def precision(real: FeatureSet, synth: FeatureSet, k: int = DEFAULT_K) -> float:
    """Fraction of synthetic features inside the real-feature manifold."""
    return _fraction_in_manifold(synth, real, k)


def recall(real: FeatureSet, synth: FeatureSet, k: int = DEFAULT_K) -> float:
    """Fraction of real features inside the synthetic-feature manifold."""
    return precision(synth, real, k)
