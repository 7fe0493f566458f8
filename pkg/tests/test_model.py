"""End-to-end forward/backward properties of the assembled model."""

import numpy as np
import pytest

from hyperlag import autodiff as ad
from hyperlag.autodiff import Tensor
from hyperlag.gradcheck import finite_difference_check
from hyperlag.model import ModelConfig, forward, init_model_params, loss_for_sample
from hyperlag.multiscale import ScaleSpec
from hyperlag.params import ParamStore

TINY = ModelConfig(
    lookback=16,
    latent_dim=4,
    head_hidden=4,
    scales=(ScaleSpec(1, 1, 3), ScaleSpec(2, 2, 2)),
)


def random_market(rng, n=8, k=3, lookback=16):
    window = rng.normal(size=(n, lookback, 5))
    membership = np.zeros((n, k))
    membership[np.arange(n), rng.integers(0, k, size=n)] = 1.0
    for col in range(k):
        if membership[:, col].sum() == 0:
            membership[rng.integers(0, n), col] = 1.0
    target = rng.normal(scale=0.02, size=n)
    return window, membership, target


class TestGradients:
    def test_linear_model_exact_finite_differences(self):
        # Central differences are exact for quadratics, so a pure linear
        # regression loss checks out at 1e-8.
        rng = np.random.default_rng(0)
        x = rng.normal(size=(12, 3))
        y = rng.normal(size=(12, 1))
        store = ParamStore(1)
        w = store.add_weight("w", (3, 1), 3, 1)
        b = store.add_zeros("b", (1, 1))

        def loss_fn():
            resid = ad.matmul(Tensor(x), w) + b - Tensor(y)
            return (resid * resid).sum()

        report = finite_difference_check(loss_fn, store, step=1e-5, tolerance=1e-8)
        assert report.passed, report.summary_lines()[-1]

    def test_corrupted_backward_rule_detected(self, monkeypatch):
        rng = np.random.default_rng(1)
        window, membership, target = random_market(rng)
        store = init_model_params(TINY, seed=3)

        original = ad.tanh

        def corrupted(x):
            out = original(x)
            if out.requires_grad:
                inner = out._backward

                def skewed():
                    out.grad *= 1.05
                    inner()

                out._backward = skewed
            return out

        monkeypatch.setattr(ad, "tanh", corrupted)
        monkeypatch.setattr(Tensor, "tanh", lambda self: corrupted(self))
        report = finite_difference_check(
            lambda: loss_for_sample(store, TINY, window, membership, target),
            store,
            tolerance=1e-4,
        )
        assert not report.passed

    def test_full_model_gradient_check_small(self):
        # The exhaustive sweep lives in the acceptance suite; spot-check a
        # smaller configuration here to keep the unit tests fast.
        cfg = ModelConfig(
            lookback=8, latent_dim=2, head_hidden=3,
            scales=(ScaleSpec(1, 1, 3), ScaleSpec(2, 2, 2)),
        )
        rng = np.random.default_rng(2)
        window, membership, target = random_market(rng, n=5, k=2, lookback=8)
        store = init_model_params(cfg, seed=5)
        report = finite_difference_check(
            lambda: loss_for_sample(store, cfg, window, membership, target),
            store,
            tolerance=1e-4,
        )
        assert report.passed, report.summary_lines()[-1]


class TestEquivariance:
    def test_stock_permutation_permutes_predictions(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            window, membership, _ = random_market(rng)
            store = init_model_params(TINY, seed=int(rng.integers(1000)))
            base = forward(store, TINY, window, membership).y_hat.data
            perm = rng.permutation(window.shape[0])
            moved = forward(store, TINY, window[perm], membership[perm]).y_hat.data
            np.testing.assert_allclose(moved, base[perm], atol=1e-10)

    def test_industry_permutation_permutes_hyperedges(self):
        rng = np.random.default_rng(4)
        window, membership, _ = random_market(rng)
        store = init_model_params(TINY, seed=11)
        perm = rng.permutation(membership.shape[1])
        base = forward(store, TINY, window, membership)
        moved = forward(store, TINY, window, membership[:, perm])
        for b, m in zip(base.edge_states, moved.edge_states):
            np.testing.assert_allclose(b.data[perm], m.data, atol=1e-12)
        np.testing.assert_allclose(
            base.y_hat.data, moved.y_hat.data, atol=1e-10
        )


class TestAblations:
    def test_no_lead_lag_is_bitexact_identity(self):
        cfg = ModelConfig(
            lookback=TINY.lookback, latent_dim=TINY.latent_dim,
            head_hidden=TINY.head_hidden, scales=TINY.scales, no_lead_lag=True,
        )
        rng = np.random.default_rng(5)
        window, membership, _ = random_market(rng)
        store = init_model_params(cfg, seed=7)
        assert not any("leadlag" in name for name in store.names())
        state = forward(store, cfg, window, membership)
        for edges, updated in zip(state.edge_states, state.leadlag_edges):
            assert updated is edges  # the bypass is the same tensor

    def test_no_fusion_is_bitexact_identity(self):
        cfg = ModelConfig(
            lookback=TINY.lookback, latent_dim=TINY.latent_dim,
            head_hidden=TINY.head_hidden, scales=TINY.scales, no_fusion=True,
        )
        rng = np.random.default_rng(6)
        window, membership, _ = random_market(rng)
        store = init_model_params(cfg, seed=7)
        assert "fusion.metric_factor" not in store
        state = forward(store, cfg, window, membership)
        assert state.stochastic is None
        for upsampled, fused in zip(state.upsampled_edges, state.fused_edges):
            assert fused is upsampled

    def test_no_total_multiscale_forces_single_raw_scale(self):
        cfg = ModelConfig(
            lookback=TINY.lookback, latent_dim=TINY.latent_dim,
            head_hidden=TINY.head_hidden, scales=TINY.scales,
            no_total_multiscale=True,
        )
        assert cfg.effective_scales() == (ScaleSpec(1, 1, TINY.scales[0].lead_lag_window),)
        rng = np.random.default_rng(7)
        window, membership, _ = random_market(rng)
        store = init_model_params(cfg, seed=7)
        assert not any(name.startswith("scale2.") for name in store.names())
        state = forward(store, cfg, window, membership)
        assert len(state.scale_latents) == 1
        assert state.scale_latents[0].shape == (8, 16, 4)

    def test_no_skip_drops_raw_latent_heads(self):
        cfg = ModelConfig(
            lookback=TINY.lookback, latent_dim=TINY.latent_dim,
            head_hidden=TINY.head_hidden, scales=TINY.scales, no_skip=True,
        )
        store = init_model_params(cfg, seed=7)
        assert not any("head_skip" in name for name in store.names())
        rng = np.random.default_rng(8)
        window, membership, _ = random_market(rng)
        assert forward(store, cfg, window, membership).y_hat.shape == (8,)


class TestCausality:
    def test_latents_never_see_future_inputs(self):
        # For each scale, latent position p may depend on raw inputs up to
        # p * stride + kernel - 1 only; autodiff exposes the true support.
        rng = np.random.default_rng(9)
        window, membership, _ = random_market(rng)
        for i, spec in enumerate(TINY.scales):
            store = init_model_params(TINY, seed=13)
            t_i = spec.output_length(TINY.lookback)
            for p in range(t_i):
                x = Tensor(window, requires_grad=True)
                from hyperlag.multiscale import extract_scale_latents

                _, _, latents = extract_scale_latents(x, store, TINY.scales)
                latents[i][:, : p + 1, :].sum().backward()
                horizon = p * spec.stride + spec.kernel - 1
                np.testing.assert_array_equal(x.grad[:, horizon + 1 :, :], 0.0)
                assert np.abs(x.grad[:, horizon, :]).max() > 0


class TestDeterminism:
    def test_identical_seed_identical_loss_trajectory(self):
        from hyperlag.params import Adam

        def run():
            rng = np.random.default_rng(10)
            window, membership, target = random_market(rng)
            store = init_model_params(TINY, seed=21)
            adam = Adam(store, lr=5e-3)
            losses = []
            for _ in range(5):
                loss = loss_for_sample(store, TINY, window, membership, target)
                losses.append(loss.item())
                loss.backward()
                adam.step()
            return losses, store.snapshot()

        losses1, params1 = run()
        losses2, params2 = run()
        assert losses1 == losses2
        for name in params1:
            np.testing.assert_array_equal(params1[name], params2[name])
