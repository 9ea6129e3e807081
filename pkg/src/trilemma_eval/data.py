"""Dataset ingestion, pixel preprocessing, and stratified splitting.

Images are numpy arrays of shape (H, W, C) with float64 pixels in [0, 1],
C in {1, 3}. A labeled dataset stacks same-sized images into one
(N, H, W, C) array with integer class labels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

VALID_ROLES = ("real-train", "real-val", "real-test", "synthetic")


class DatasetError(ValueError):
    """Raised for malformed corpora or invalid dataset operations."""


def validate_image(img: np.ndarray) -> None:
    if img.ndim != 3 or img.shape[2] not in (1, 3):
        raise DatasetError(f"expected (H, W, C) image with C in {{1, 3}}, got shape {img.shape}")
    if img.size and (img.min() < 0.0 or img.max() > 1.0):
        raise DatasetError("pixel values outside [0, 1]")


@dataclass
class SplitRatios:
    """Hold-out fractions for train/val/test; must sum to 1."""

    train: float = 0.8
    val: float = 0.1
    test: float = 0.1

    def __post_init__(self):
        for name, frac in (("train", self.train), ("val", self.val), ("test", self.test)):
            if not 0.0 < frac < 1.0:
                raise DatasetError(f"split fraction '{name}' must be in (0, 1), got {frac}")
        if abs(self.train + self.val + self.test - 1.0) > 1e-9:
            raise DatasetError("split fractions must sum to 1")


@dataclass
class LabeledImageDataset:
    """Image corpus with class labels.

    images: (N, H, W, C) float64 array, pixels in [0, 1]
    labels: (N,) integer class indices into class_names
    """

    images: np.ndarray
    labels: np.ndarray
    class_names: list[str]
    role: str = "real-train"

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.images.ndim != 4 or self.images.shape[3] not in (1, 3):
            raise DatasetError(f"expected (N, H, W, C) images with C in {{1, 3}}, got {self.images.shape}")
        if len(self.images) != len(self.labels):
            raise DatasetError("images and labels length mismatch")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= len(self.class_names)):
            raise DatasetError("label out of range for class_names")
        if self.role not in VALID_ROLES:
            raise DatasetError(f"unknown dataset role {self.role!r}")

    def __len__(self) -> int:
        return len(self.images)

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    @property
    def image_shape(self) -> tuple[int, int, int]:
        return self.images.shape[1:]

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.num_classes)

    def subset(self, indices, role: str | None = None) -> "LabeledImageDataset":
        idx = np.asarray(indices, dtype=np.int64)
        return LabeledImageDataset(
            images=self.images[idx],
            labels=self.labels[idx],
            class_names=list(self.class_names),
            role=role or self.role,
        )


def _decode_png(path: Path) -> np.ndarray:
    """Decode one PNG to a float64 (H, W, C) array in [0, 1]. Alpha is stripped."""
    try:
        with PILImage.open(path) as im:
            if im.mode in ("L",):
                arr = np.asarray(im, dtype=np.float64)[:, :, None]
            elif im.mode == "LA":
                arr = np.asarray(im.convert("L"), dtype=np.float64)[:, :, None]
            elif im.mode in ("RGB", "RGBA", "P"):
                arr = np.asarray(im.convert("RGB"), dtype=np.float64)
            else:
                raise DatasetError(f"unsupported PNG mode {im.mode!r} in {path}")
    except DatasetError:
        raise
    except Exception as exc:
        raise DatasetError(f"cannot decode image file {path}: {exc}") from exc
    return arr / 255.0


def load_image_dataset(
    root_dir, role: str = "real-train", resize: tuple[int, int] | None = None
) -> LabeledImageDataset:
    """Load a class-per-subdirectory PNG corpus.

    Class indices follow lexicographic subdirectory order; files are read in
    lexicographic order within each class. Pixels are normalized to [0, 1].
    `resize` (h, w) applies bilinear resizing to every image; without it,
    mixed image dimensions are an error.
    """
    root = Path(root_dir)
    if not root.is_dir():
        raise DatasetError(f"dataset root {root} is not a directory")
    class_dirs = sorted(p for p in root.iterdir() if p.is_dir())
    if not class_dirs:
        raise DatasetError(f"no classes: {root} contains no class subdirectories")

    images: list[np.ndarray] = []
    labels: list[int] = []
    for class_index, class_dir in enumerate(class_dirs):
        files = sorted(class_dir.glob("*.png"))
        if not files:
            raise DatasetError(f"class directory {class_dir} contains no PNG files")
        for f in files:
            img = _decode_png(f)
            if resize is not None:
                img = resize_bilinear(img, resize[0], resize[1])
            images.append(img)
            labels.append(class_index)

    shapes = {img.shape for img in images}
    if len(shapes) > 1:
        raise DatasetError(
            f"mixed image dimensions {sorted(shapes)} in {root}; pass a resize directive"
        )
    return LabeledImageDataset(
        images=np.stack(images),
        labels=np.asarray(labels),
        class_names=[d.name for d in class_dirs],
        role=role,
    )


def save_image_dataset(ds: LabeledImageDataset, out_dir) -> None:
    """Write a dataset back out as a class-per-subdirectory PNG corpus.

    Pixels are quantized to 8 bit; for data previously loaded from 8-bit
    PNGs this round-trips exactly.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    counters = [0] * ds.num_classes
    for img, label in zip(ds.images, ds.labels):
        class_dir = out / ds.class_names[label]
        class_dir.mkdir(exist_ok=True)
        save_image_png(img, class_dir / f"{counters[label]:06d}.png")
        counters[label] += 1


def save_image_png(img: np.ndarray, path) -> None:
    validate_image(img)
    quantized = np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)
    if quantized.shape[2] == 1:
        pil = PILImage.fromarray(quantized[:, :, 0], mode="L")
    else:
        pil = PILImage.fromarray(quantized, mode="RGB")
    pil.save(path, format="PNG")


def split_indices(
    labels: np.ndarray, ratios: SplitRatios, seed: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stratified index split with floor rounding, remainders to train.

    Every class must have at least 3 samples. The same seed always yields
    the same assignment.
    """
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    train_idx: list[np.ndarray] = []
    val_idx: list[np.ndarray] = []
    test_idx: list[np.ndarray] = []
    for c in np.unique(labels):
        members = np.flatnonzero(labels == c)
        if len(members) < 3:
            raise DatasetError(f"class {c} has {len(members)} samples; need at least 3 to split")
        members = members[rng.permutation(len(members))]
        n = len(members)
        n_train = math.floor(n * ratios.train)
        n_val = math.floor(n * ratios.val)
        n_test = math.floor(n * ratios.test)
        n_train += n - (n_train + n_val + n_test)  # remainder goes to train
        train_idx.append(members[:n_train])
        val_idx.append(members[n_train : n_train + n_val])
        test_idx.append(members[n_train + n_val :])
    return (
        np.sort(np.concatenate(train_idx)),
        np.sort(np.concatenate(val_idx)),
        np.sort(np.concatenate(test_idx)),
    )


def stratified_split(
    ds: LabeledImageDataset, ratios: SplitRatios, seed: int
) -> tuple[LabeledImageDataset, LabeledImageDataset, LabeledImageDataset]:
    """Split a dataset into stratified train/val/test subsets."""
    tr, va, te = split_indices(ds.labels, ratios, seed)
    return (
        ds.subset(tr, role="real-train"),
        ds.subset(va, role="real-val"),
        ds.subset(te, role="real-test"),
    )


def concat_datasets(parts: list[LabeledImageDataset], role: str | None = None) -> LabeledImageDataset:
    """Concatenate datasets sharing class names and image dimensions."""
    if not parts:
        raise DatasetError("nothing to concatenate")
    names = parts[0].class_names
    shape = parts[0].image_shape
    for p in parts[1:]:
        if p.class_names != names:
            raise DatasetError(f"class names differ: {names} vs {p.class_names}")
        if p.image_shape != shape:
            raise DatasetError(f"image dimensions differ: {shape} vs {p.image_shape}")
    return LabeledImageDataset(
        images=np.concatenate([p.images for p in parts]),
        labels=np.concatenate([p.labels for p in parts]),
        class_names=list(names),
        role=role or parts[0].role,
    )


def resize_bilinear(img: np.ndarray, h: int, w: int) -> np.ndarray:
    """Bilinear resize with half-pixel centers (identity when dims match)."""
    validate_image(img)
    if h < 1 or w < 1:
        raise DatasetError("target dimensions must be >= 1")
    in_h, in_w, _ = img.shape
    if (in_h, in_w) == (h, w):
        return img.copy()

    src_y = (np.arange(h) + 0.5) * (in_h / h) - 0.5
    src_x = (np.arange(w) + 0.5) * (in_w / w) - 0.5
    y0 = np.clip(np.floor(src_y).astype(np.int64), 0, in_h - 1)
    x0 = np.clip(np.floor(src_x).astype(np.int64), 0, in_w - 1)
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    wy = np.clip(src_y - y0, 0.0, 1.0)[:, None, None]
    wx = np.clip(src_x - x0, 0.0, 1.0)[None, :, None]

    top = img[y0][:, x0] * (1 - wx) + img[y0][:, x1] * wx
    bottom = img[y1][:, x0] * (1 - wx) + img[y1][:, x1] * wx
    out = top * (1 - wy) + bottom * wy
    return np.clip(out, 0.0, 1.0)
