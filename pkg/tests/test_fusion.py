"""Tests for fusion attention and loss kernels against brute-force oracles."""

import numpy as np
import pytest

from salientservo.fusion import (
    LossWeights,
    ShapeMismatch,
    build_attention_mask,
    dice_loss,
    focal_loss,
    map_loss,
    map_loss_grad,
    masked_attention,
    total_loss,
    total_loss_grad,
)


def dense_attention_oracle(q, k, v, mask, scale_dim):
    """Independent row-by-row attention with explicit -inf bookkeeping."""
    n = q.shape[0]
    out = np.zeros_like(v)
    for i in range(n):
        logits = np.array(
            [(q[i] @ k[j] + mask[i, j]) / np.sqrt(scale_dim) for j in range(n)]
        )
        finite = np.isfinite(logits)
        w = np.zeros(n)
        z = logits[finite] - logits[finite].max()
        w[finite] = np.exp(z) / np.exp(z).sum()
        out[i] = w @ v
    return out


class TestBuildMask:
    def test_single_image_token(self):
        m = build_attention_mask(1)
        assert m.shape == (2, 2)
        assert m[0, 0] == 0 and m[1, 0] == 0 and m[1, 1] == 0
        assert m[0, 1] == -np.inf

    def test_diagonal_and_text_column_open(self):
        m = build_attention_mask(5)
        assert np.all(np.diag(m) == 0)
        assert np.all(m[:, 0] == 0)

    def test_everything_else_closed(self):
        m = build_attention_mask(4)
        for i in range(5):
            for j in range(5):
                expected = 0.0 if (i == j or j == 0) else -np.inf
                assert m[i, j] == expected

    def test_needs_image_token(self):
        with pytest.raises(ValueError):
            build_attention_mask(0)


class TestMaskedAttention:
    def test_zero_logits_blend(self):
        length, dim = 3, 4
        rng = np.random.default_rng(0)
        v = rng.normal(size=(length + 1, dim))
        q = np.zeros((length + 1, dim))
        k = np.zeros((length + 1, dim))
        out = masked_attention(q, k, v, build_attention_mask(length))
        assert np.allclose(out[0], v[0])
        for i in range(1, length + 1):
            assert np.allclose(out[i], 0.5 * (v[0] + v[i]))

    def test_matches_dense_oracle(self):
        rng = np.random.default_rng(42)
        for _ in range(25):
            length = int(rng.integers(1, 17))
            dim = int(rng.integers(1, 33))
            q = rng.normal(size=(length + 1, dim))
            k = rng.normal(size=(length + 1, dim))
            v = rng.normal(size=(length + 1, dim))
            mask = build_attention_mask(length)
            out = masked_attention(q, k, v, mask)
            ref = dense_attention_oracle(q, k, v, mask, dim)
            assert np.allclose(out, ref, atol=1e-6)

    def test_masked_weights_exactly_zero(self):
        rng = np.random.default_rng(1)
        length = 6
        q = rng.normal(size=(length + 1, 8))
        k = rng.normal(size=(length + 1, 8))
        v = np.eye(length + 1)  # weights read directly from the output
        weights = masked_attention(q, k, v, build_attention_mask(length))
        for i in range(length + 1):
            assert weights[i].sum() == pytest.approx(1.0, abs=1e-6)
            for j in range(length + 1):
                if i != j and j != 0:
                    assert weights[i, j] == 0.0

    def test_image_token_permutation_equivariance(self):
        rng = np.random.default_rng(9)
        length, dim = 8, 16
        q = rng.normal(size=(length + 1, dim))
        k = rng.normal(size=(length + 1, dim))
        v = rng.normal(size=(length + 1, dim))
        mask = build_attention_mask(length)
        out = masked_attention(q, k, v, mask)
        perm = np.concatenate([[0], 1 + rng.permutation(length)])
        out_p = masked_attention(q[perm], k[perm], v[perm], mask)
        assert np.allclose(out_p, out[perm], atol=1e-12)


class TestDiceLoss:
    def test_perfect_overlap_binary(self):
        gt = np.zeros((40, 40))
        gt[5:35, 5:35] = 1.0
        assert dice_loss(gt, gt) == pytest.approx(0.0, abs=1e-3)

    def test_total_miss(self):
        pred = np.zeros((10, 10))
        gt = np.ones((10, 10))
        assert dice_loss(pred, gt) == pytest.approx(1 - 1 / 101)

    def test_both_empty(self):
        z = np.zeros((5, 5))
        assert dice_loss(z, z) == 0.0

    def test_range_and_monotonicity(self):
        rng = np.random.default_rng(2)
        gt = (rng.uniform(size=(16, 16)) > 0.5).astype(float)
        start = rng.uniform(0.1, 0.9, size=(16, 16))
        prev = dice_loss(start, gt)
        assert 0.0 <= prev < 1.0
        for t in np.linspace(0.2, 1.0, 5):
            cur = dice_loss(start + t * (gt - start), gt)
            assert cur <= prev + 1e-12
            prev = cur

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            dice_loss(np.zeros((2, 2)), np.zeros((3, 3)))


class TestFocalLoss:
    def test_confident_correct(self):
        gt = np.zeros((20, 20))
        gt[2:10, 3:12] = 1.0
        assert focal_loss(gt, gt) < 1e-5

    def test_bce_reduction_identity(self):
        rng = np.random.default_rng(5)
        pred = rng.uniform(0.05, 0.95, size=(12, 12))
        gt = (rng.uniform(size=(12, 12)) > 0.4).astype(float)
        bce = float(np.mean(-gt * np.log(pred) - (1 - gt) * np.log(1 - pred)))
        assert focal_loss(pred, gt, gamma=0.0, alpha=0.5) == pytest.approx(0.5 * bce, abs=1e-9)

    def test_single_pixel_value(self):
        val = focal_loss(np.array([[0.5]]), np.array([[1.0]]), gamma=2.0, alpha=0.25)
        assert val == pytest.approx(0.25 * 0.25 * np.log(2.0), rel=1e-12)

    def test_nonnegative_and_monotone(self):
        rng = np.random.default_rng(6)
        gt = (rng.uniform(size=(10, 10)) > 0.5).astype(float)
        start = rng.uniform(0.2, 0.8, size=(10, 10))
        prev = focal_loss(start, gt)
        assert prev >= 0.0
        for t in np.linspace(0.25, 1.0, 4):
            cur = focal_loss(start + t * (gt - start), gt)
            assert cur <= prev + 1e-12
            prev = cur


class TestTotalLoss:
    def test_perfect_prediction(self):
        gt = np.zeros((40, 40))
        gt[5:30, 5:30] = 1.0
        sides = [gt] * 4
        assert total_loss(gt, sides, gt) < 5e-3

    def test_weight_selection(self):
        rng = np.random.default_rng(7)
        gt = (rng.uniform(size=(8, 8)) > 0.5).astype(float)
        fused = rng.uniform(0.1, 0.9, size=(8, 8))
        sides = [rng.uniform(0.1, 0.9, size=(8, 8)) for _ in range(4)]
        w = LossWeights(fused=1.0, side=(0.0, 0.0, 0.0, 0.0))
        assert total_loss(fused, sides, gt, w) == pytest.approx(map_loss(fused, gt))

    def test_equal_outputs_scale_linearly(self):
        rng = np.random.default_rng(8)
        gt = (rng.uniform(size=(8, 8)) > 0.5).astype(float)
        out = rng.uniform(0.1, 0.9, size=(8, 8))
        assert total_loss(out, [out] * 4, gt) == pytest.approx(5 * map_loss(out, gt), rel=1e-12)

    def test_weights_validation(self):
        with pytest.raises(ValueError):
            LossWeights(fused=0.0, side=(0.0, 0.0, 0.0, 0.0))
        with pytest.raises(ValueError):
            LossWeights(fused=-1.0)

    def test_side_count(self):
        gt = np.zeros((4, 4))
        with pytest.raises(ValueError):
            total_loss(gt, [gt] * 3, gt)


class TestGradients:
    def test_map_loss_gradient_vs_finite_differences(self):
        rng = np.random.default_rng(11)
        pred = rng.uniform(0.2, 0.8, size=(8, 8))
        gt = (rng.uniform(size=(8, 8)) > 0.5).astype(float)
        grad = map_loss_grad(pred, gt)
        h = 1e-6
        for _ in range(20):
            i, j = rng.integers(0, 8, size=2)
            bumped_up = pred.copy()
            bumped_up[i, j] += h
            bumped_dn = pred.copy()
            bumped_dn[i, j] -= h
            fd = (map_loss(bumped_up, gt) - map_loss(bumped_dn, gt)) / (2 * h)
            assert grad[i, j] == pytest.approx(fd, rel=1e-4, abs=1e-8)

    def test_total_loss_gradient_vs_finite_differences(self):
        rng = np.random.default_rng(12)
        gt = (rng.uniform(size=(8, 8)) > 0.5).astype(float)
        fused = rng.uniform(0.2, 0.8, size=(8, 8))
        sides = [rng.uniform(0.2, 0.8, size=(8, 8)) for _ in range(4)]
        weights = LossWeights(fused=1.0, side=(0.5, 1.0, 2.0, 1.5))
        grads = total_loss_grad(fused, sides, gt, weights)
        h = 1e-6
        maps = [fused] + sides
        for m_idx in range(5):
            i, j = rng.integers(0, 8, size=2)
            up = [m.copy() for m in maps]
            dn = [m.copy() for m in maps]
            up[m_idx][i, j] += h
            dn[m_idx][i, j] -= h
            fd = (
                total_loss(up[0], up[1:], gt, weights)
                - total_loss(dn[0], dn[1:], gt, weights)
            ) / (2 * h)
            assert grads[m_idx][i, j] == pytest.approx(fd, rel=1e-4, abs=1e-8)
