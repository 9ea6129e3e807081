import numpy as np
import pytest

from trilemma_eval.features import FeatureSet
from trilemma_eval.fid import GaussianStats, fid, gaussian_stats, matrix_sqrt_psd


def random_psd(rng, d, scale=1.0):
    a = rng.standard_normal((d, d))
    return scale * (a @ a.T) / d + 0.1 * np.eye(d)


class TestGaussianStats:
    def test_hand_case(self):
        stats = gaussian_stats(FeatureSet(np.array([[0, 0], [2, 0]], dtype=np.float32)))
        np.testing.assert_allclose(stats.mean, [1.0, 0.0])
        np.testing.assert_allclose(stats.covariance, [[2.0, 0.0], [0.0, 0.0]])

    def test_identical_rows_zero_cov(self, rng):
        row = rng.standard_normal(4).astype(np.float32)
        stats = gaussian_stats(FeatureSet(np.tile(row, (5, 1))))
        np.testing.assert_allclose(stats.covariance, 0.0, atol=1e-12)

    def test_single_row_rejected(self):
        with pytest.raises(ValueError, match="covariance undefined"):
            gaussian_stats(FeatureSet(np.ones((1, 3), dtype=np.float32)))

    def test_asymmetric_cov_rejected(self):
        with pytest.raises(ValueError, match="symmetric"):
            GaussianStats(np.zeros(2), np.array([[1.0, 0.5], [0.0, 1.0]]))


class TestMatrixSqrt:
    def test_identity_fixed_point(self):
        np.testing.assert_allclose(matrix_sqrt_psd(np.eye(3)), np.eye(3), atol=1e-12)

    def test_diagonal_roots(self):
        np.testing.assert_allclose(
            matrix_sqrt_psd(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]), atol=1e-12
        )

    def test_reconstruction(self):
        a = np.array([[2.0, 1.0], [1.0, 2.0]])
        root = matrix_sqrt_psd(a)
        np.testing.assert_allclose(root @ root, a, atol=1e-10)
        np.testing.assert_allclose(np.linalg.eigvalsh(root) ** 2, [1.0, 3.0], atol=1e-10)

    def test_reconstruction_random(self, rng):
        for d in (2, 5, 9):
            a = random_psd(rng, d)
            root = matrix_sqrt_psd(a)
            np.testing.assert_allclose(root @ root, a, atol=1e-10)

    def test_negative_eigenvalues_clamped(self):
        root = matrix_sqrt_psd(np.diag([1.0, -1e-13]))
        np.testing.assert_allclose(root, np.diag([1.0, 0.0]), atol=1e-12)


class TestFid:
    def test_identical_stats(self, rng):
        stats = GaussianStats(rng.standard_normal(4), random_psd(rng, 4))
        assert fid(stats, stats) <= 1e-6

    def test_one_dim_mean_shift(self):
        real = GaussianStats(np.array([0.0]), np.array([[1.0]]))
        synth = GaussianStats(np.array([1.0]), np.array([[1.0]]))
        assert abs(fid(real, synth) - 1.0) < 1e-10

    def test_one_dim_variance_shift(self):
        real = GaussianStats(np.array([0.0]), np.array([[1.0]]))
        synth = GaussianStats(np.array([0.0]), np.array([[4.0]]))
        assert abs(fid(real, synth) - 1.0) < 1e-10  # 1 + 4 - 2*2

    def test_symmetry(self, rng):
        for _ in range(5):
            a = GaussianStats(rng.standard_normal(3), random_psd(rng, 3))
            b = GaussianStats(rng.standard_normal(3), random_psd(rng, 3))
            assert abs(fid(a, b) - fid(b, a)) < 1e-6

    def test_nonnegative(self, rng):
        a = GaussianStats(rng.standard_normal(3), random_psd(rng, 3))
        b = GaussianStats(a.mean + 1e-12, a.covariance.copy())
        assert fid(a, b) >= 0.0

    def test_dimension_mismatch(self):
        a = GaussianStats(np.zeros(2), np.eye(2))
        b = GaussianStats(np.zeros(3), np.eye(3))
        with pytest.raises(ValueError, match="dimension"):
            fid(a, b)

    def test_diagonal_closed_form(self, rng):
        for _ in range(10):
            d = int(rng.integers(2, 16))
            mu_r, mu_s = rng.standard_normal(d), rng.standard_normal(d)
            lam_r = rng.uniform(0.1, 5.0, d)
            lam_s = rng.uniform(0.1, 5.0, d)
            expected = np.sum((mu_r - mu_s) ** 2) + np.sum(
                (np.sqrt(lam_r) - np.sqrt(lam_s)) ** 2
            )
            got = fid(
                GaussianStats(mu_r, np.diag(lam_r)), GaussianStats(mu_s, np.diag(lam_s))
            )
            assert abs(got - expected) / expected < 1e-8

    def test_joint_rotation_invariance(self, rng):
        x = FeatureSet(rng.standard_normal((30, 4)).astype(np.float32))
        y = FeatureSet(rng.standard_normal((25, 4)).astype(np.float32))
        q, _ = np.linalg.qr(rng.standard_normal((4, 4)))

        def rotate(stats):
            return GaussianStats(q @ stats.mean, q @ stats.covariance @ q.T)

        base = fid(gaussian_stats(x), gaussian_stats(y))
        rotated = fid(rotate(gaussian_stats(x)), rotate(gaussian_stats(y)))
        assert abs(base - rotated) < 1e-6
