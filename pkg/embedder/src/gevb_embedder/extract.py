"""Batch feature extraction from pretrained (or seeded random) backbones.

VGG-16 features come from the second fully connected layer's
pre-activation (4096-dim, the precision/recall convention); Inception v3
features from the final pooling layer (2048-dim, the FID convention).
Images are processed in lexicographic order (class subdirectories first,
files within), matching the evaluation suite's dataset ordering, and the
order is recorded in a sidecar JSON next to the output file.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image
from torchvision import models, transforms

from .gevb import write_gevb

_IMAGENET_MEAN = [0.485, 0.456, 0.406]
_IMAGENET_STD = [0.229, 0.224, 0.225]

BACKBONES = {
    "vgg16": {
        "layer": "classifier.3",
        "layer_note": "second fully connected layer, pre-activation (4096-dim)",
        "resize": 256,
        "crop": 224,
    },
    "inception": {
        "layer": "avgpool",
        "layer_note": "final pooling layer (2048-dim)",
        "resize": 342,
        "crop": 299,
    },
}


@dataclass
class EmbedJob:
    image_dir: str
    backbone: str
    output_path: str
    batch_size: int = 32
    device: str = "cpu"
    weights: str = "pretrained"  # or "random" (seeded, for offline/testing use)
    seed: int = 0
    on_error: str = "abort"  # or "skip"
    layer: str | None = None  # defaults to the backbone's convention

    def __post_init__(self):
        if self.backbone not in BACKBONES:
            raise ValueError(f"backbone must be one of {sorted(BACKBONES)}")
        if self.weights not in ("pretrained", "random"):
            raise ValueError("weights must be 'pretrained' or 'random'")
        if self.on_error not in ("abort", "skip"):
            raise ValueError("on_error must be 'abort' or 'skip'")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.layer is None:
            self.layer = BACKBONES[self.backbone]["layer"]


def list_images(image_dir) -> list[Path]:
    """PNG files in the evaluation suite's ordering.

    Class-per-subdirectory trees enumerate sorted subdirectories then
    sorted files within each; flat directories enumerate sorted files.
    """
    root = Path(image_dir)
    if not root.is_dir():
        raise ValueError(f"{root} is not a directory")
    subdirs = sorted(p for p in root.iterdir() if p.is_dir())
    if subdirs:
        files = [f for d in subdirs for f in sorted(d.glob("*.png"))]
    else:
        files = sorted(root.glob("*.png"))
    if not files:
        raise ValueError(f"no PNG files under {root}")
    return files


def build_backbone(job: EmbedJob) -> torch.nn.Module:
    if job.weights == "pretrained":
        try:
            if job.backbone == "vgg16":
                model = models.vgg16(weights=models.VGG16_Weights.IMAGENET1K_V1)
            else:
                model = models.inception_v3(
                    weights=models.Inception_V3_Weights.IMAGENET1K_V1
                )
        except Exception as exc:
            raise RuntimeError(
                f"could not obtain pretrained {job.backbone} weights: {exc}. "
                f"Pre-populate the torch hub cache (TORCH_HOME) on a connected "
                f"machine, or pass weights='random' for an architecture-only run."
            ) from exc
    else:
        torch.manual_seed(job.seed)
        if job.backbone == "vgg16":
            model = models.vgg16(weights=None)
        else:
            model = models.inception_v3(weights=None, aux_logits=True, init_weights=True)
    model.eval()
    return model.to(job.device)


def eval_transform(backbone: str) -> transforms.Compose:
    spec = BACKBONES[backbone]
    return transforms.Compose(
        [
            transforms.Resize(spec["resize"]),
            transforms.CenterCrop(spec["crop"]),
            transforms.ToTensor(),
            transforms.Normalize(mean=_IMAGENET_MEAN, std=_IMAGENET_STD),
        ]
    )


def _weights_checksum(model: torch.nn.Module) -> str:
    digest = hashlib.sha256()
    for name, tensor in sorted(model.state_dict().items()):
        digest.update(name.encode())
        digest.update(tensor.detach().cpu().numpy().tobytes())
    return digest.hexdigest()


def extract_features(job: EmbedJob) -> Path:
    """Extract one feature row per image and write the GEVB file.

    A sidecar `<output>.meta.json` records backbone, layer, preprocessing,
    weight checksum, and the row-order file list (plus any skipped files).
    """
    files = list_images(job.image_dir)
    model = build_backbone(job)
    transform = eval_transform(job.backbone)

    captured: list[torch.Tensor] = []
    hook = model.get_submodule(job.layer).register_forward_hook(
        lambda module, inputs, output: captured.append(output.detach())
    )

    rows: list[np.ndarray] = []
    kept: list[str] = []
    skipped: list[str] = []
    root = Path(job.image_dir)
    batch: list[torch.Tensor] = []

    def flush():
        if not batch:
            return
        captured.clear()
        with torch.no_grad():
            model(torch.stack(batch).to(job.device))
        features = captured[-1]
        rows.append(features.flatten(start_dim=1).cpu().numpy().astype(np.float32))
        batch.clear()

    for path in files:
        try:
            with Image.open(path) as im:
                tensor = transform(im.convert("RGB"))
        except Exception as exc:
            if job.on_error == "abort":
                raise RuntimeError(f"cannot decode {path}: {exc}") from exc
            skipped.append(str(path.relative_to(root)))
            continue
        batch.append(tensor)
        kept.append(str(path.relative_to(root)))
        if len(batch) == job.batch_size:
            flush()
    flush()
    hook.remove()
    if not rows:
        raise RuntimeError(f"no decodable images under {root}")

    vectors = np.concatenate(rows)
    write_gevb(vectors, job.backbone, job.output_path)

    spec = BACKBONES[job.backbone]
    sidecar = {
        "backbone": job.backbone,
        "layer": job.layer,
        "layer_note": spec["layer_note"],
        "weights": job.weights,
        "seed": job.seed if job.weights == "random" else None,
        "weights_sha256": _weights_checksum(model),
        "preprocessing": {
            "resize_shorter_side": spec["resize"],
            "center_crop": spec["crop"],
            "normalize_mean": _IMAGENET_MEAN,
            "normalize_std": _IMAGENET_STD,
            "color": "RGB",
        },
        "count": int(vectors.shape[0]),
        "dim": int(vectors.shape[1]),
        "files": kept,
        "skipped": skipped,
    }
    meta_path = Path(str(job.output_path) + ".meta.json")
    meta_path.write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    return Path(job.output_path)
