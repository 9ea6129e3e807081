"""Feature-vector persistence (GEVB binary format) and the fallback extractor.

The GEVB file is the interchange contract with external embedding tools:

    magic   4 bytes  b"GEVB"
    version u32 LE   1
    count   u32 LE   number of rows N
    dim     u32 LE   feature dimension d
    source  u8       0=vgg16, 1=inception, 2=fallback
    pad     3 bytes  zero
    data    N*d float32 LE, row-major
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import LabeledImageDataset

GEVB_MAGIC = b"GEVB"
GEVB_VERSION = 1
SOURCE_TAGS = {"vgg16": 0, "inception": 1, "fallback": 2}
TAG_SOURCES = {v: k for k, v in SOURCE_TAGS.items()}
_HEADER = struct.Struct("<4sIIIB3x")


class EmbeddingFormatError(ValueError):
    """Raised for malformed or truncated embedding files."""


@dataclass
class FeatureSet:
    """N x d matrix of float32 feature vectors, one row per image."""

    vectors: np.ndarray
    source: str = "fallback"

    def __post_init__(self):
        self.vectors = np.ascontiguousarray(self.vectors, dtype=np.float32)
        if self.vectors.ndim != 2 or self.vectors.shape[0] < 1:
            raise ValueError(f"expected nonempty (N, d) matrix, got shape {self.vectors.shape}")
        if not np.all(np.isfinite(self.vectors)):
            raise ValueError("feature vectors must be finite")
        if self.source not in SOURCE_TAGS:
            raise ValueError(f"unknown feature source {self.source!r}")

    @property
    def count(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


def write_embeddings(fs: FeatureSet, path) -> None:
    header = _HEADER.pack(GEVB_MAGIC, GEVB_VERSION, fs.count, fs.dim, SOURCE_TAGS[fs.source])
    payload = fs.vectors.astype("<f4", copy=False).tobytes(order="C")
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_bytes(header + payload)


def read_embeddings(path) -> FeatureSet:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size or raw[:4] != GEVB_MAGIC:
        raise EmbeddingFormatError(f"unrecognized embedding file: {path}")
    magic, version, count, dim, tag = _HEADER.unpack_from(raw)
    if version != GEVB_VERSION:
        raise EmbeddingFormatError(f"unsupported embedding format version {version}")
    if tag not in TAG_SOURCES:
        raise EmbeddingFormatError(f"unknown source tag {tag}")
    expected = _HEADER.size + 4 * count * dim
    if len(raw) != expected:
        raise EmbeddingFormatError(
            f"truncated embedding file {path}: expected {expected} bytes, found {len(raw)}"
        )
    vectors = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).reshape(count, dim)
    return FeatureSet(vectors=vectors.copy(), source=TAG_SOURCES[tag])


def fallback_features(ds: LabeledImageDataset, dim: int, seed: int) -> FeatureSet:
    """Seeded random-projection features used when no pretrained embedder ran.

    Each image is flattened and mapped through a fixed Gaussian projection
    scaled by 1/sqrt(pixel count), then tanh. The scaling approximately
    preserves pairwise distances, keeping the manifold metrics meaningful.
    """
    if dim < 2:
        raise ValueError("feature dimension must be >= 2")
    n_pixels = int(np.prod(ds.image_shape))
    rng = np.random.default_rng(seed)
    projection = rng.standard_normal((n_pixels, dim)) / np.sqrt(n_pixels)
    flat = ds.images.reshape(len(ds), n_pixels)
    return FeatureSet(vectors=np.tanh(flat @ projection).astype(np.float32), source="fallback")
