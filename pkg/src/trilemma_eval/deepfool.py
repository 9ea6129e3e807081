"""DeepFool attack and adversarial-accuracy (robustness) evaluation.

The attack linearizes the classifier around the current point, steps across
the nearest class boundary, and repeats for a fixed iteration budget. The
accumulated perturbation is scaled by (1 + overshoot) so the final point
actually crosses the boundary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .classifier import Classifier, EvalResult, evaluate
from .data import LabeledImageDataset

# keeps boundary and on-boundary starts crossing; far below any reported tolerance
_STEP_EPS = 1e-10


@dataclass
class AttackConfig:
    max_iterations: int = 5
    overshoot: float = 0.02
    clamp_to_valid_range: bool = True

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.overshoot < 0:
            raise ValueError("overshoot must be nonnegative")


@dataclass
class DeepFoolResult:
    perturbed: np.ndarray
    perturbation_l2: float
    flipped: bool
    iterations: int
    degenerate_gradient: bool


def deepfool(m, img: np.ndarray, cfg: AttackConfig | None = None) -> DeepFoolResult:
    """Minimal multiclass boundary-crossing perturbation for one image.

    The target model only needs `num_classes`, `logits(img)`, and
    `input_gradient(img, class_index)`; both the trained CNN and simple
    linear test models satisfy this. All competing classes are considered
    at every iteration. If every gradient difference vanishes (constant
    model), the input is returned unperturbed with the degenerate flag set.
    """
    cfg = cfg or AttackConfig()
    img = np.asarray(img, dtype=np.float64)
    orig_class = int(np.argmax(m.logits(img)))
    r_total = np.zeros_like(img)
    eta = cfg.overshoot

    def current_image():
        x = img + (1.0 + eta) * r_total
        return np.clip(x, 0.0, 1.0) if cfg.clamp_to_valid_range else x

    flipped = False
    degenerate = False
    iterations = 0
    for _ in range(cfg.max_iterations):
        x = current_image()
        logits = m.logits(x)
        grads = np.stack([m.input_gradient(x, c) for c in range(m.num_classes)])

        best_dist, best_dir = np.inf, None
        for j in range(m.num_classes):
            if j == orig_class:
                continue
            w = grads[j] - grads[orig_class]
            w_norm = float(np.sqrt(np.sum(w * w)))
            if w_norm == 0.0:
                continue
            dist = abs(float(logits[j] - logits[orig_class])) / w_norm
            if dist < best_dist:
                best_dist, best_dir = dist, w / w_norm
        if best_dir is None:
            degenerate = True
            break

        iterations += 1
        r_total += (best_dist + _STEP_EPS) * best_dir
        if int(np.argmax(m.logits(current_image()))) != orig_class:
            flipped = True
            break

    perturbed = current_image()
    return DeepFoolResult(
        perturbed=perturbed,
        perturbation_l2=float(np.sqrt(np.sum((perturbed - img) ** 2))),
        flipped=flipped,
        iterations=iterations,
        degenerate_gradient=degenerate,
    )


@dataclass
class AttackSummary:
    clean: EvalResult
    adversarial: EvalResult
    perturbation_norms: np.ndarray
    flip_rate: float
    correct_subset_adversarial_accuracy: float


def attack_dataset(
    m, ds: LabeledImageDataset, cfg: AttackConfig | None = None
) -> tuple[LabeledImageDataset, list[DeepFoolResult]]:
    """Attack every image independently and return the perturbed dataset."""
    cfg = cfg or AttackConfig()
    results = [deepfool(m, ds.images[i], cfg) for i in range(len(ds))]
    perturbed = LabeledImageDataset(
        images=np.stack([r.perturbed for r in results]),
        labels=ds.labels.copy(),
        class_names=list(ds.class_names),
        role=ds.role,
    )
    return perturbed, results


def run_attack(
    m: Classifier, test_ds: LabeledImageDataset, cfg: AttackConfig | None = None, k: int = 3
) -> AttackSummary:
    """Clean vs adversarial evaluation, all test points attacked."""
    cfg = cfg or AttackConfig()
    clean = evaluate(m, test_ds, k)
    perturbed, results = attack_dataset(m, test_ds, cfg)
    adversarial = evaluate(m, perturbed, k)

    clean_logits = np.stack([m.logits(test_ds.images[i]) for i in range(len(test_ds))])
    adv_logits = np.stack([m.logits(perturbed.images[i]) for i in range(len(test_ds))])
    clean_correct = clean_logits.argmax(axis=1) == test_ds.labels
    adv_correct = adv_logits.argmax(axis=1) == test_ds.labels
    subset = float(adv_correct[clean_correct].mean()) if clean_correct.any() else float("nan")

    return AttackSummary(
        clean=clean,
        adversarial=adversarial,
        perturbation_norms=np.array([r.perturbation_l2 for r in results]),
        flip_rate=float(np.mean([r.flipped for r in results])),
        correct_subset_adversarial_accuracy=subset,
    )


def adversarial_accuracy(
    m: Classifier, test_ds: LabeledImageDataset, cfg: AttackConfig | None = None, k: int = 3
) -> EvalResult:
    """Accuracy of the model on the DeepFool-perturbed test set."""
    perturbed, _ = attack_dataset(m, test_ds, cfg)
    return evaluate(m, perturbed, k)
