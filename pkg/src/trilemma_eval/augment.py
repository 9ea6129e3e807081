"""Geometric data augmentation: lossless right-angle rotations and flips."""

from __future__ import annotations

import numpy as np

from .data import DatasetError, LabeledImageDataset

TRANSFORM_KINDS = ("rot90", "rot180", "rot270", "hflip", "vflip")
_ROTATIONS = ("rot90", "rot180", "rot270")


def apply_transform(img: np.ndarray, kind: str) -> np.ndarray:
    """Apply one lossless pixel rearrangement; rot90/rot270 swap the dims."""
    if kind == "rot90":
        return np.ascontiguousarray(np.rot90(img, 1, axes=(0, 1)))
    if kind == "rot180":
        return np.ascontiguousarray(np.rot90(img, 2, axes=(0, 1)))
    if kind == "rot270":
        return np.ascontiguousarray(np.rot90(img, 3, axes=(0, 1)))
    if kind == "hflip":
        return np.ascontiguousarray(img[:, ::-1, :])
    if kind == "vflip":
        return np.ascontiguousarray(img[::-1, :, :])
    raise ValueError(f"unknown transform kind {kind!r}")


def geometric_augment(ds: LabeledImageDataset, seed: int) -> LabeledImageDataset:
    """Materialize the 4x augmented set: originals + one random right-angle
    rotation + hflip + vflip per original, labels copied.

    Requires square images so rotated copies keep the dataset's shared
    dimensions.
    """
    if len(ds) == 0:
        raise DatasetError("cannot augment an empty dataset")
    h, w, _ = ds.image_shape
    if h != w:
        raise DatasetError(f"geometric augmentation needs square images, got {h}x{w}")
    rng = np.random.default_rng(seed)
    choices = rng.integers(0, len(_ROTATIONS), size=len(ds))
    rotated = np.stack(
        [apply_transform(ds.images[i], _ROTATIONS[choices[i]]) for i in range(len(ds))]
    )
    images = np.concatenate([ds.images, rotated, ds.images[:, :, ::-1, :], ds.images[:, ::-1, :, :]])
    labels = np.tile(ds.labels, 4)
    return LabeledImageDataset(
        images=images, labels=labels, class_names=list(ds.class_names), role=ds.role
    )
