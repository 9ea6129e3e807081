"""Small fixed-architecture CNN with a hand-derived backward pass.

The downstream classifier is a sequence of conv blocks (3x3 kernels, stride
1, padding 1, ReLU, 2x2 max pooling) followed by two fully connected
layers. Two variants exist:

    four-block:  8 -> 16 -> 32 -> 64 feature maps
    three-block: 16 -> 32 -> 64 feature maps

Input spatial dims must be divisible by 2^blocks. Everything runs in
float64 numpy; backprop is derived per layer (im2col convolution, pooling
argmax mask, ReLU mask, affine, softmax cross-entropy) rather than through
a general autodiff engine, which keeps gradients exactly checkable against
finite differences.

Parameter count: sum over blocks of (9 * c_in * c_out + c_out), plus
flat * hidden + hidden for the first FC layer and hidden * classes +
classes for the second, where flat = (h / 2^B) * (w / 2^B) * c_last.
"""

from __future__ import annotations

import copy
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .data import LabeledImageDataset

VARIANT_CHANNELS = {
    "four-block": (8, 16, 32, 64),
    "three-block": (16, 32, 64),
}

_GEVM_MAGIC = b"GEVM"
_GEVM_VERSION = 1


@dataclass
class Classifier:
    variant: str
    input_hw: tuple[int, int]
    in_channels: int
    num_classes: int
    hidden: int
    conv_weights: list[np.ndarray]  # each (3, 3, c_in, c_out)
    conv_biases: list[np.ndarray]  # each (c_out,)
    fc1_w: np.ndarray  # (flat, hidden)
    fc1_b: np.ndarray
    fc2_w: np.ndarray  # (hidden, num_classes)
    fc2_b: np.ndarray

    @property
    def channels(self) -> tuple[int, ...]:
        return VARIANT_CHANNELS[self.variant]

    def parameters(self) -> list[np.ndarray]:
        """All trainable arrays in fixed traversal order."""
        out: list[np.ndarray] = []
        for w, b in zip(self.conv_weights, self.conv_biases):
            out.extend([w, b])
        out.extend([self.fc1_w, self.fc1_b, self.fc2_w, self.fc2_b])
        return out

    def clone(self) -> "Classifier":
        return copy.deepcopy(self)

    # attack-target protocol (shared with any model deepfool can run against)
    def logits(self, img: np.ndarray) -> np.ndarray:
        return forward(self, img)

    def input_gradient(self, img: np.ndarray, class_index: int) -> np.ndarray:
        return gradient_wrt_input(self, img, class_index)


@dataclass
class TrainHyper:
    epochs: int = 30
    batch_size: int = 32
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if self.learning_rate < 0:
            raise ValueError("learning rate must be nonnegative")


@dataclass
class EvalResult:
    accuracy: float
    top_k_accuracy: float
    k: int
    per_class_accuracy: np.ndarray

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "top_k_accuracy": self.top_k_accuracy,
            "k": self.k,
            "per_class_accuracy": [
                None if np.isnan(v) else float(v) for v in self.per_class_accuracy
            ],
        }


@dataclass
class TrainResult:
    model: Classifier
    history: list[dict]
    best_epoch: int
    best_val_loss: float


def build_classifier(
    input_hw: tuple[int, int],
    in_channels: int,
    num_classes: int,
    variant: str = "four-block",
    hidden: int = 128,
    seed: int = 0,
) -> Classifier:
    """Seeded He-normal weights, zero biases."""
    if variant not in VARIANT_CHANNELS:
        raise ValueError(f"unknown variant {variant!r}")
    channels = VARIANT_CHANNELS[variant]
    h, w = input_hw
    div = 2 ** len(channels)
    if h % div or w % div:
        raise ValueError(
            f"input dims {h}x{w} must be divisible by {div} for the {variant} variant"
        )
    rng = np.random.default_rng(seed)
    conv_weights, conv_biases = [], []
    c_in = in_channels
    for c_out in channels:
        fan_in = 9 * c_in
        conv_weights.append(rng.standard_normal((3, 3, c_in, c_out)) * np.sqrt(2.0 / fan_in))
        conv_biases.append(np.zeros(c_out))
        c_in = c_out
    flat = (h // div) * (w // div) * channels[-1]
    fc1_w = rng.standard_normal((flat, hidden)) * np.sqrt(2.0 / flat)
    fc2_w = rng.standard_normal((hidden, num_classes)) * np.sqrt(2.0 / hidden)
    return Classifier(
        variant=variant,
        input_hw=(h, w),
        in_channels=in_channels,
        num_classes=num_classes,
        hidden=hidden,
        conv_weights=conv_weights,
        conv_biases=conv_biases,
        fc1_w=fc1_w,
        fc1_b=np.zeros(hidden),
        fc2_w=fc2_w,
        fc2_b=np.zeros(num_classes),
    )


def num_parameters(m: Classifier) -> int:
    return sum(p.size for p in m.parameters())


# --- forward / backward ---------------------------------------------------


def _conv_cols(x: np.ndarray) -> np.ndarray:
    """im2col for a 3x3 kernel, stride 1, padding 1: (N,H,W,C) -> (N*H*W, 9C)."""
    n, h, w, c = x.shape
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1), (0, 0)))
    windows = sliding_window_view(xp, (3, 3), axis=(1, 2))  # (N,H,W,C,3,3)
    return windows.transpose(0, 1, 2, 4, 5, 3).reshape(n * h * w, 9 * c)


def _forward(m: Classifier, x: np.ndarray, want_caches: bool):
    n = x.shape[0]
    caches = [] if want_caches else None
    for w, b in zip(m.conv_weights, m.conv_biases):
        _, h, wd, c = x.shape
        c_out = w.shape[3]
        cols = _conv_cols(x)
        pre = (cols @ w.reshape(9 * c, c_out) + b).reshape(n, h, wd, c_out)
        act = np.maximum(pre, 0.0)
        hp, wp = h // 2, wd // 2
        regions = act.reshape(n, hp, 2, wp, 2, c_out).transpose(0, 1, 3, 5, 2, 4)
        regions = regions.reshape(n, hp, wp, c_out, 4)
        argmax = regions.argmax(axis=4)
        pooled = np.take_along_axis(regions, argmax[..., None], axis=4)[..., 0]
        if want_caches:
            caches.append(
                {"cols": cols, "relu_mask": pre > 0.0, "argmax": argmax, "in_shape": x.shape}
            )
        x = pooled
    flat_shape = x.shape
    flat = x.reshape(n, -1)
    hidden_pre = flat @ m.fc1_w + m.fc1_b
    hidden_act = np.maximum(hidden_pre, 0.0)
    logits = hidden_act @ m.fc2_w + m.fc2_b
    if want_caches:
        return logits, {
            "conv": caches,
            "flat_shape": flat_shape,
            "flat": flat,
            "hidden_mask": hidden_pre > 0.0,
            "hidden_act": hidden_act,
        }
    return logits, None


def forward(m: Classifier, img: np.ndarray) -> np.ndarray:
    """Logits for one (H, W, C) image or a batch (N, H, W, C)."""
    img = np.asarray(img, dtype=np.float64)
    single = img.ndim == 3
    batch = img[None] if single else img
    if batch.shape[1:] != (*m.input_hw, m.in_channels):
        raise ValueError(
            f"input shape {batch.shape[1:]} does not match model input "
            f"{(*m.input_hw, m.in_channels)}"
        )
    logits, _ = _forward(m, batch, want_caches=False)
    return logits[0] if single else logits


def _backward(m: Classifier, caches: dict, dlogits: np.ndarray):
    """Gradients for every parameter (traversal order) and for the input."""
    n = dlogits.shape[0]
    grads: dict[int, np.ndarray] = {}
    d_hidden_act = dlogits @ m.fc2_w.T
    g_fc2_w = caches["hidden_act"].T @ dlogits
    g_fc2_b = dlogits.sum(axis=0)
    d_hidden_pre = d_hidden_act * caches["hidden_mask"]
    g_fc1_w = caches["flat"].T @ d_hidden_pre
    g_fc1_b = d_hidden_pre.sum(axis=0)
    dx = (d_hidden_pre @ m.fc1_w.T).reshape(caches["flat_shape"])

    conv_grads: list[tuple[np.ndarray, np.ndarray]] = []
    for w, cache in zip(reversed(m.conv_weights), reversed(caches["conv"])):
        nb, h, wd, c_in = cache["in_shape"]
        c_out = w.shape[3]
        hp, wp = h // 2, wd // 2
        # unpool: route gradient to each region's argmax position
        regions = np.zeros((nb, hp, wp, c_out, 4))
        np.put_along_axis(regions, cache["argmax"][..., None], dx[..., None], axis=4)
        d_act = regions.reshape(nb, hp, wp, c_out, 2, 2).transpose(0, 1, 4, 2, 5, 3)
        d_pre = d_act.reshape(nb, h, wd, c_out) * cache["relu_mask"]

        d_flat = d_pre.reshape(nb * h * wd, c_out)
        g_w = (cache["cols"].T @ d_flat).reshape(9, c_in, c_out).reshape(3, 3, c_in, c_out)
        g_b = d_flat.sum(axis=0)
        conv_grads.append((g_w, g_b))

        d_cols = (d_flat @ w.reshape(9 * c_in, c_out).T).reshape(nb, h, wd, 3, 3, c_in)
        dxp = np.zeros((nb, h + 2, wd + 2, c_in))
        for i in range(3):
            for j in range(3):
                dxp[:, i : i + h, j : j + wd, :] += d_cols[:, :, :, i, j, :]
        dx = dxp[:, 1 : 1 + h, 1 : 1 + wd, :]

    grad_list: list[np.ndarray] = []
    for g_w, g_b in reversed(conv_grads):
        grad_list.extend([g_w, g_b])
    grad_list.extend([g_fc1_w, g_fc1_b, g_fc2_w, g_fc2_b])
    return grad_list, dx


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray):
    """Mean cross-entropy loss and its gradient with respect to the logits."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    probs = exp / exp.sum(axis=1, keepdims=True)
    n = len(labels)
    loss = float(-np.mean(np.log(probs[np.arange(n), labels] + 1e-300)))
    dlogits = probs.copy()
    dlogits[np.arange(n), labels] -= 1.0
    return loss, dlogits / n


def loss_and_param_grads(m: Classifier, images: np.ndarray, labels: np.ndarray):
    logits, caches = _forward(m, images, want_caches=True)
    loss, dlogits = softmax_cross_entropy(logits, labels)
    grads, _ = _backward(m, caches, dlogits)
    return loss, grads


def gradient_wrt_input(m: Classifier, img: np.ndarray, class_index: int) -> np.ndarray:
    """d logit[class_index] / d pixels, same shape as the input image."""
    if not 0 <= class_index < m.num_classes:
        raise ValueError(f"class index {class_index} out of range for {m.num_classes} classes")
    img = np.asarray(img, dtype=np.float64)
    _, caches = _forward(m, img[None], want_caches=True)
    dlogits = np.zeros((1, m.num_classes))
    dlogits[0, class_index] = 1.0
    _, dx = _backward(m, caches, dlogits)
    return dx[0]


# --- training -------------------------------------------------------------


class _Adam:
    def __init__(self, params: list[np.ndarray], hyper: TrainHyper):
        self.h = hyper
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        self.t += 1
        h = self.h
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= h.beta1
            m += (1 - h.beta1) * g
            v *= h.beta2
            v += (1 - h.beta2) * g * g
            m_hat = m / (1 - h.beta1**self.t)
            v_hat = v / (1 - h.beta2**self.t)
            p -= h.learning_rate * m_hat / (np.sqrt(v_hat) + h.epsilon)


def _dataset_loss(m: Classifier, ds: LabeledImageDataset, chunk: int = 256) -> tuple[float, float]:
    total, correct = 0.0, 0
    for start in range(0, len(ds), chunk):
        images = ds.images[start : start + chunk]
        labels = ds.labels[start : start + chunk]
        logits, _ = _forward(m, images, want_caches=False)
        loss, _ = softmax_cross_entropy(logits, labels)
        total += loss * len(labels)
        correct += int((logits.argmax(axis=1) == labels).sum())
    return total / len(ds), correct / len(ds)


def train(
    m: Classifier, train_ds: LabeledImageDataset, val_ds: LabeledImageDataset, h: TrainHyper
) -> TrainResult:
    """Seeded-shuffle minibatch Adam on cross-entropy.

    Validation loss is recorded after every epoch; the returned model is the
    snapshot with minimal validation loss (earliest epoch on ties).
    """
    if len(train_ds) == 0 or len(val_ds) == 0:
        raise ValueError("train and validation sets must be nonempty")
    for ds in (train_ds, val_ds):
        if ds.labels.max(initial=0) >= m.num_classes:
            raise ValueError("dataset labels exceed the model's class count")

    model = m.clone()
    params = model.parameters()
    optimizer = _Adam(params, h)
    rng = np.random.default_rng(h.seed)

    history: list[dict] = []
    best = {"val_loss": np.inf, "epoch": -1, "model": model.clone()}
    n = len(train_ds)
    for epoch in range(1, h.epochs + 1):
        order = rng.permutation(n)
        epoch_loss, batches = 0.0, 0
        for start in range(0, n, h.batch_size):
            idx = order[start : start + h.batch_size]
            loss, grads = loss_and_param_grads(model, train_ds.images[idx], train_ds.labels[idx])
            if not np.isfinite(loss):
                raise RuntimeError(f"training diverged at epoch {epoch} (non-finite loss)")
            optimizer.step(params, grads)
            epoch_loss += loss
            batches += 1
        val_loss, val_acc = _dataset_loss(model, val_ds)
        if not np.isfinite(val_loss):
            raise RuntimeError(f"training diverged at epoch {epoch} (non-finite validation loss)")
        history.append(
            {
                "epoch": epoch,
                "train_loss": epoch_loss / batches,
                "val_loss": val_loss,
                "val_accuracy": val_acc,
            }
        )
        if val_loss < best["val_loss"]:
            best = {"val_loss": val_loss, "epoch": epoch, "model": model.clone()}
    return TrainResult(
        model=best["model"],
        history=history,
        best_epoch=best["epoch"],
        best_val_loss=float(best["val_loss"]),
    )


def evaluate(m: Classifier, test_ds: LabeledImageDataset, k: int = 3) -> EvalResult:
    """Top-1 and top-k accuracy plus a per-class breakdown.

    Argmax ties resolve to the lowest class index; per-class accuracy is NaN
    for classes absent from the test set.
    """
    if len(test_ds) == 0:
        raise ValueError("test set is empty")
    k_eff = min(k, m.num_classes)
    logits_all = []
    for start in range(0, len(test_ds), 256):
        logits, _ = _forward(m, test_ds.images[start : start + 256], want_caches=False)
        logits_all.append(logits)
    logits = np.concatenate(logits_all)
    labels = test_ds.labels

    preds = logits.argmax(axis=1)
    accuracy = float((preds == labels).mean())
    # stable sort on negated logits: equal logits rank by lower class index
    order = np.argsort(-logits, axis=1, kind="stable")
    top_k_hit = (order[:, :k_eff] == labels[:, None]).any(axis=1)
    top_k_accuracy = float(top_k_hit.mean())

    per_class = np.full(m.num_classes, np.nan)
    for c in range(m.num_classes):
        mask = labels == c
        if mask.any():
            per_class[c] = float((preds[mask] == c).mean())
    return EvalResult(
        accuracy=accuracy, top_k_accuracy=top_k_accuracy, k=k_eff, per_class_accuracy=per_class
    )


# --- checkpoint format (GEVM) ----------------------------------------------


def save_classifier(m: Classifier, path) -> None:
    """GEVM checkpoint: magic, version, architecture descriptor, float32 blob.

    Descriptor layout (little-endian u32 unless noted): block count, the
    per-block channel list, input h, input w, input channels, class count,
    hidden width. Parameters follow in traversal order as float32.
    """
    channels = m.channels
    header = _GEVM_MAGIC + struct.pack("<I", _GEVM_VERSION)
    header += struct.pack("<I", len(channels))
    header += struct.pack(f"<{len(channels)}I", *channels)
    header += struct.pack(
        "<5I", m.input_hw[0], m.input_hw[1], m.in_channels, m.num_classes, m.hidden
    )
    blob = b"".join(p.astype("<f4").tobytes(order="C") for p in m.parameters())
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_bytes(header + blob)


def load_classifier(path) -> Classifier:
    raw = Path(path).read_bytes()
    if raw[:4] != _GEVM_MAGIC:
        raise ValueError(f"unrecognized checkpoint file: {path}")
    (version,) = struct.unpack_from("<I", raw, 4)
    if version != _GEVM_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    (block_count,) = struct.unpack_from("<I", raw, 8)
    channels = struct.unpack_from(f"<{block_count}I", raw, 12)
    offset = 12 + 4 * block_count
    h, w, in_channels, num_classes, hidden = struct.unpack_from("<5I", raw, offset)
    offset += 20
    variant = next(
        (name for name, chans in VARIANT_CHANNELS.items() if chans == channels), None
    )
    if variant is None:
        raise ValueError(f"checkpoint channel list {channels} matches no known variant")

    m = build_classifier((h, w), in_channels, num_classes, variant=variant, hidden=hidden, seed=0)
    for p in m.parameters():
        data = np.frombuffer(raw, dtype="<f4", count=p.size, offset=offset)
        p[...] = data.reshape(p.shape).astype(np.float64)
        offset += 4 * p.size
    if offset != len(raw):
        raise ValueError(
            f"checkpoint size mismatch: expected {offset} bytes, found {len(raw)}"
        )
    return m
