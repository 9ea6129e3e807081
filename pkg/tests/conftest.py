import numpy as np
import pytest

from trilemma_eval.data import LabeledImageDataset


@pytest.fixture
def rng():
    return np.random.default_rng(0xC0FFEE)


def random_images(rng, n, h=12, w=12, c=1):
    return rng.uniform(0.0, 1.0, size=(n, h, w, c))


def make_dataset(rng, n_per_class=4, num_classes=2, h=12, w=12, c=1, role="real-train"):
    images = random_images(rng, n_per_class * num_classes, h, w, c)
    labels = np.repeat(np.arange(num_classes), n_per_class)
    return LabeledImageDataset(
        images=images,
        labels=labels,
        class_names=[f"c{k}" for k in range(num_classes)],
        role=role,
    )
