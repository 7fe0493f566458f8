"""Prediction heads and the regression + ranking objective."""

import numpy as np
import pytest

from hyperlag.autodiff import Tensor
from hyperlag.exceptions import ConfigError, ShapeError
from hyperlag.params import ParamStore
from hyperlag.predictor import (
    init_head_params,
    mse_loss,
    predict,
    rank_loss,
    total_loss,
)


def make_heads(scale_lengths, lookback, d, hidden, no_skip=False, seed=0):
    store = ParamStore(seed)
    init_head_params(store, scale_lengths, lookback, d, hidden, no_skip=no_skip)
    return store


class TestPredict:
    def test_zero_heads_zero_prediction(self):
        store = make_heads([4], lookback=8, d=2, hidden=3)
        for name, t in store.items():
            t.data[:] = 0.0
        latents = [Tensor(np.random.default_rng(0).normal(size=(5, 4, 2)))]
        nodes = [Tensor(np.random.default_rng(1).normal(size=(5, 8, 2)))]
        y_hat, per_scale = predict(latents, nodes, store)
        np.testing.assert_array_equal(y_hat.data, 0.0)
        assert len(per_scale) == 1

    def test_skip_branch_alone_when_fused_head_zeroed(self):
        store = make_heads([4], lookback=8, d=2, hidden=3, seed=3)
        for name, t in store.items():
            if "head_fused" in name:
                t.data[:] = 0.0
        rng = np.random.default_rng(2)
        latents = [Tensor(rng.normal(size=(5, 4, 2)))]
        nodes = [Tensor(rng.normal(size=(5, 8, 2)))]
        y_hat, _ = predict(latents, nodes, store)
        w1 = store["scale1.head_skip.w1"].data
        w2 = store["scale1.head_skip.w2"].data
        expected = np.tanh(latents[0].data.reshape(5, 8) @ w1) @ w2
        np.testing.assert_allclose(y_hat.data, expected.reshape(-1), atol=1e-12)

    def test_no_skip_creates_no_skip_params(self):
        store = make_heads([4], lookback=8, d=2, hidden=3, no_skip=True)
        assert not any("head_skip" in name for name in store.names())
        rng = np.random.default_rng(4)
        latents = [Tensor(rng.normal(size=(5, 4, 2)))]
        nodes = [Tensor(rng.normal(size=(5, 8, 2)))]
        y_hat, _ = predict(latents, nodes, store, no_skip=True)
        assert y_hat.shape == (5,)

    def test_matches_affine_chain_oracle(self):
        store = make_heads([3], lookback=4, d=2, hidden=2, seed=5)
        rng = np.random.default_rng(5)
        latents = [Tensor(rng.normal(size=(2, 3, 2)))]
        nodes = [Tensor(rng.normal(size=(2, 4, 2)))]
        y_hat, per_scale = predict(latents, nodes, store)

        def head(prefix, x):
            flat = x.reshape(x.shape[0], -1)
            h = np.tanh(flat @ store[f"{prefix}.w1"].data + store[f"{prefix}.b1"].data)
            return (h @ store[f"{prefix}.w2"].data + store[f"{prefix}.b2"].data).reshape(-1)

        expected = head("scale1.head_skip", latents[0].data) + head(
            "scale1.head_fused", nodes[0].data
        )
        np.testing.assert_allclose(y_hat.data, expected, atol=1e-12)
        np.testing.assert_allclose(
            y_hat.data, per_scale[0].data, atol=1e-15
        )

    def test_prediction_is_sum_of_scale_contributions(self):
        store = make_heads([4, 2], lookback=8, d=2, hidden=3, seed=6)
        rng = np.random.default_rng(6)
        latents = [Tensor(rng.normal(size=(5, 4, 2))), Tensor(rng.normal(size=(5, 2, 2)))]
        nodes = [Tensor(rng.normal(size=(5, 8, 2))) for _ in range(2)]
        y_hat, per_scale = predict(latents, nodes, store)
        np.testing.assert_allclose(
            y_hat.data, per_scale[0].data + per_scale[1].data, atol=1e-12
        )


class TestMseLoss:
    def test_perfect_prediction(self):
        y = np.array([0.1, -0.2])
        assert mse_loss(Tensor(y), y).item() == 0.0

    def test_hand_case(self):
        out = mse_loss(Tensor([1.0, 2.0]), np.zeros(2))
        assert out.item() == pytest.approx(5.0, abs=1e-15)

    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(7)
        y_hat, y = rng.normal(size=12), rng.normal(size=12)
        expected = sum((a - b) ** 2 for a, b in zip(y_hat, y))
        assert mse_loss(Tensor(y_hat), y).item() == pytest.approx(expected, rel=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            mse_loss(Tensor([1.0]), np.zeros(2))


class TestRankLoss:
    def test_same_ordering_is_zero(self):
        y = np.array([0.3, -0.1, 0.2])
        assert rank_loss(Tensor(2.0 * y), y).item() == 0.0

    def test_hand_enumeration_of_swapped_pair(self):
        # y = (1, 0), prediction (0, 1): both ordered pairs contribute 1.
        out = rank_loss(Tensor([0.0, 1.0]), np.array([1.0, 0.0]))
        assert out.item() == pytest.approx(2.0, abs=1e-15)

    def test_equal_true_values_zero(self):
        out = rank_loss(Tensor([3.0, -1.0, 0.5]), np.zeros(3))
        assert out.item() == 0.0

    def test_invariant_to_constant_shift(self):
        rng = np.random.default_rng(8)
        y_hat, y = rng.normal(size=10), rng.normal(size=10)
        base = rank_loss(Tensor(y_hat), y).item()
        shifted = rank_loss(Tensor(y_hat + 17.3), y).item()
        assert shifted == pytest.approx(base, rel=1e-12)

    def test_matches_pair_loop_oracle(self):
        rng = np.random.default_rng(9)
        y_hat, y = rng.normal(size=7), rng.normal(size=7)
        expected = 0.0
        for i in range(7):
            for j in range(7):
                expected += max(0.0, -(y_hat[i] - y_hat[j]) * (y[i] - y[j]))
        assert rank_loss(Tensor(y_hat), y).item() == pytest.approx(expected, rel=1e-12)


class TestTotalLoss:
    def test_alpha_zero_is_pure_mse(self):
        rng = np.random.default_rng(10)
        y_hat, y = rng.normal(size=5), rng.normal(size=5)
        total = total_loss(Tensor(y_hat), y, alpha=0.0).item()
        assert total == pytest.approx(mse_loss(Tensor(y_hat), y).item(), rel=1e-15)

    def test_weighted_sum(self):
        rng = np.random.default_rng(11)
        y_hat, y = rng.normal(size=5), rng.normal(size=5)
        m = mse_loss(Tensor(y_hat), y).item()
        r = rank_loss(Tensor(y_hat), y).item()
        assert total_loss(Tensor(y_hat), y, alpha=1.0).item() == pytest.approx(m + r, rel=1e-12)
        assert total_loss(Tensor(y_hat), y, alpha=2.5).item() == pytest.approx(
            m + 2.5 * r, rel=1e-12
        )

    def test_perfect_prediction_zero(self):
        y = np.array([0.2, -0.3, 0.05])
        assert total_loss(Tensor(y), y).item() == 0.0

    def test_negative_alpha_rejected(self):
        with pytest.raises(ConfigError):
            total_loss(Tensor([0.0]), np.zeros(1), alpha=-0.1)

    def test_nonnegative_randomized(self):
        rng = np.random.default_rng(12)
        for _ in range(100):
            n = int(rng.integers(2, 12))
            value = total_loss(
                Tensor(rng.normal(size=n)), rng.normal(size=n), alpha=rng.uniform(0, 3)
            ).item()
            assert value >= 0.0

    def test_gradient_passes_finite_differences_off_kink(self):
        rng = np.random.default_rng(13)
        y = rng.normal(size=6)
        p = Tensor(rng.normal(size=6), requires_grad=True)
        total_loss(p, y, alpha=1.0).backward()
        analytic = p.grad.copy()
        h = 1e-7
        for i in range(6):
            saved = p.data[i]
            p.data[i] = saved + h
            up = total_loss(Tensor(p.data), y).item()
            p.data[i] = saved - h
            down = total_loss(Tensor(p.data), y).item()
            p.data[i] = saved
            numeric = (up - down) / (2 * h)
            assert analytic[i] == pytest.approx(numeric, rel=1e-5, abs=1e-7)
