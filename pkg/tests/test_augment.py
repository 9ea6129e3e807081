import numpy as np
import pytest

from trilemma_eval.augment import TRANSFORM_KINDS, apply_transform, geometric_augment
from trilemma_eval.data import DatasetError

from conftest import make_dataset


class TestApplyTransform:
    def test_hflip_involution(self, rng):
        img = rng.uniform(size=(6, 6, 3))
        np.testing.assert_array_equal(apply_transform(apply_transform(img, "hflip"), "hflip"), img)

    def test_vflip_involution(self, rng):
        img = rng.uniform(size=(6, 6, 1))
        np.testing.assert_array_equal(apply_transform(apply_transform(img, "vflip"), "vflip"), img)

    def test_rot90_cycle(self, rng):
        img = rng.uniform(size=(6, 6, 1))
        out = img
        for _ in range(4):
            out = apply_transform(out, "rot90")
        np.testing.assert_array_equal(out, img)

    def test_hflip_indices(self):
        img = np.array([[[1.0], [2.0]], [[3.0], [4.0]]])  # [[a,b],[c,d]]
        flipped = apply_transform(img, "hflip")
        np.testing.assert_array_equal(flipped[:, :, 0], [[2.0, 1.0], [4.0, 3.0]])

    def test_rotation_swaps_dims(self, rng):
        img = rng.uniform(size=(4, 6, 1))
        assert apply_transform(img, "rot90").shape == (6, 4, 1)
        assert apply_transform(img, "rot180").shape == (4, 6, 1)

    def test_unknown_kind(self, rng):
        with pytest.raises(ValueError):
            apply_transform(rng.uniform(size=(4, 4, 1)), "transpose")

    def test_lossless_multiset(self, rng):
        img = rng.uniform(size=(5, 5, 1))
        for kind in TRANSFORM_KINDS:
            out = apply_transform(img, kind)
            np.testing.assert_array_equal(np.sort(out.ravel()), np.sort(img.ravel()))


class TestGeometricAugment:
    def test_cardinality_and_counts(self, rng):
        ds = make_dataset(rng, n_per_class=5, num_classes=2, h=8, w=8)
        out = geometric_augment(ds, seed=3)
        assert len(out) == 4 * len(ds)
        np.testing.assert_array_equal(out.class_counts(), 4 * ds.class_counts())

    def test_labels_follow_sources(self, rng):
        ds = make_dataset(rng, n_per_class=3, num_classes=3, h=8, w=8)
        out = geometric_augment(ds, seed=1)
        np.testing.assert_array_equal(out.labels, np.tile(ds.labels, 4))

    def test_deterministic(self, rng):
        ds = make_dataset(rng, n_per_class=4, h=8, w=8)
        a = geometric_augment(ds, seed=9)
        b = geometric_augment(ds, seed=9)
        np.testing.assert_array_equal(a.images, b.images)

    def test_pixels_stay_in_range(self, rng):
        ds = make_dataset(rng, n_per_class=4, h=8, w=8)
        out = geometric_augment(ds, seed=2)
        assert out.images.min() >= 0.0 and out.images.max() <= 1.0

    def test_empty_rejected(self, rng):
        ds = make_dataset(rng).subset(np.array([], dtype=int))
        with pytest.raises(DatasetError):
            geometric_augment(ds, seed=0)

    def test_non_square_rejected(self, rng):
        ds = make_dataset(rng, h=8, w=10)
        with pytest.raises(DatasetError, match="square"):
            geometric_augment(ds, seed=0)

    def test_originals_retained(self, rng):
        ds = make_dataset(rng, n_per_class=3, h=8, w=8)
        out = geometric_augment(ds, seed=7)
        np.testing.assert_array_equal(out.images[: len(ds)], ds.images)
