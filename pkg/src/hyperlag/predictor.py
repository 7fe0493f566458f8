"""Per-scale prediction heads and the regression + pairwise ranking loss.

Each scale contributes two heads: one reads the raw per-stock latents (the
skip path, bypassing the hypergraph), one reads the fused node states.
Both flatten the stock's time-by-latent block through a two-layer MLP
(affine, tanh, affine) to a single scalar; scale contributions sum into
the prediction.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .exceptions import ConfigError, ShapeError
from .params import ParamStore


def init_head_params(
    store: ParamStore,
    scale_lengths: list[int],
    lookback: int,
    latent_dim: int,
    hidden: int,
    no_skip: bool = False,
) -> None:
    for i, t_i in enumerate(scale_lengths, start=1):
        if not no_skip:
            _init_mlp(store, f"scale{i}.head_skip", t_i * latent_dim, hidden)
        _init_mlp(store, f"scale{i}.head_fused", lookback * latent_dim, hidden)


def _init_mlp(store: ParamStore, prefix: str, in_dim: int, hidden: int) -> None:
    store.add_weight(f"{prefix}.w1", (in_dim, hidden), in_dim, hidden)
    store.add_zeros(f"{prefix}.b1", (1, hidden))
    store.add_weight(f"{prefix}.w2", (hidden, 1), hidden, 1)
    store.add_zeros(f"{prefix}.b2", (1, 1))


def _mlp_head(store: ParamStore, prefix: str, x: Tensor) -> Tensor:
    hidden = ad.matmul(x, store[f"{prefix}.w1"]) + store[f"{prefix}.b1"]
    return ad.matmul(hidden.tanh(), store[f"{prefix}.w2"]) + store[f"{prefix}.b2"]


def predict(
    scale_latents: list[Tensor],
    fused_nodes: list[Tensor],
    store: ParamStore,
    no_skip: bool = False,
) -> tuple[Tensor, list[Tensor]]:
    """Sum of per-scale head outputs; returns (y_hat (N,), per-scale list)."""
    per_scale: list[Tensor] = []
    for i, (latent, nodes) in enumerate(zip(scale_latents, fused_nodes), start=1):
        n = latent.shape[0]
        contribution = _mlp_head(store, f"scale{i}.head_fused", nodes.reshape(n, -1))
        if not no_skip:
            skip = _mlp_head(store, f"scale{i}.head_skip", latent.reshape(n, -1))
            contribution = contribution + skip
        per_scale.append(contribution)
    total = per_scale[0]
    for extra in per_scale[1:]:
        total = total + extra
    return total.reshape(-1), [p.reshape(-1) for p in per_scale]


def mse_loss(y_hat: Tensor, y: np.ndarray) -> Tensor:
    """Sum of squared errors (squared 2-norm, not the mean)."""
    y = np.asarray(y, dtype=np.float64)
    if y_hat.shape != y.shape:
        raise ShapeError(f"prediction/target length mismatch: {y_hat.shape} vs {y.shape}")
    diff = y_hat - ad.constant(y)
    return (diff * diff).sum()


def rank_loss(y_hat: Tensor, y: np.ndarray) -> Tensor:
    """Pairwise hinge over all ordered stock pairs.

    Zero exactly when every pair's predicted difference shares the sign of
    the true difference (or either difference is zero); the hinge
    subgradient at the kink is 0.
    """
    y = np.asarray(y, dtype=np.float64)
    if y_hat.shape != y.shape:
        raise ShapeError(f"prediction/target length mismatch: {y_hat.shape} vs {y.shape}")
    n = y.shape[0]
    pred_diff = y_hat.reshape(n, 1) - y_hat.reshape(1, n)
    true_diff = y[:, None] - y[None, :]
    return ad.relu(pred_diff * ad.constant(-true_diff)).sum()


def total_loss(y_hat: Tensor, y: np.ndarray, alpha: float = 1.0) -> Tensor:
    """MSE plus alpha times the pairwise ranking hinge."""
    if alpha < 0:
        raise ConfigError(f"ranking weight must be non-negative, got {alpha}")
    loss = mse_loss(y_hat, y)
    if alpha > 0:
        loss = loss + rank_loss(y_hat, y) * alpha
    return loss
