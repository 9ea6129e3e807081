"""Synthetic toy corpora for experiments, demos, and tests.

Blob images place a class-specific Gaussian bump on a noisy background,
giving a linearly separable problem at any image size.
"""

from __future__ import annotations

import numpy as np

from .data import LabeledImageDataset

_BLOB_CENTERS = [(0.3, 0.3), (0.7, 0.7), (0.3, 0.7), (0.7, 0.3), (0.5, 0.2), (0.2, 0.5)]


def make_blob_dataset(
    n_per_class: int,
    num_classes: int = 2,
    image_hw: tuple[int, int] = (8, 8),
    channels: int = 1,
    seed: int = 0,
    amplitude: float = 0.45,
    noise: float = 0.04,
    background: float = 0.12,
    role: str = "real-train",
) -> LabeledImageDataset:
    if num_classes > len(_BLOB_CENTERS):
        raise ValueError(f"at most {len(_BLOB_CENTERS)} blob classes supported")
    h, w = image_hw
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:h, 0:w]
    sigma = 0.15 * min(h, w)

    images = np.empty((n_per_class * num_classes, h, w, channels))
    labels = np.empty(n_per_class * num_classes, dtype=np.int64)
    for c in range(num_classes):
        cy, cx = _BLOB_CENTERS[c][0] * (h - 1), _BLOB_CENTERS[c][1] * (w - 1)
        bump = amplitude * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * sigma**2))
        for i in range(n_per_class):
            base = rng.normal(background, noise, size=(h, w, channels))
            jitter = rng.uniform(0.85, 1.15)
            images[c * n_per_class + i] = base + jitter * bump[:, :, None]
            labels[c * n_per_class + i] = c
    images = np.clip(images, 0.0, 1.0)
    return LabeledImageDataset(
        images=images,
        labels=labels,
        class_names=[f"class{c}" for c in range(num_classes)],
        role=role,
    )
