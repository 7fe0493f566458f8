"""Industry hypergraph machinery: adaptive hyperedge construction,
sliding-window lead-lag attention between hyperedges, and cross-scale
fusion driven by a learned Mahalanobis metric.

Hyperedges aggregate member-stock latents with softmax weights that
respect the binary membership matrix exactly (non-members get a -inf
logit). Lead-lag attention lets each hyperedge's window-final "lagging"
point attend over the leading positions of every hyperedge. Fusion
up-samples all scales to a common length, scores pairwise affinity with a
learned metric, and mixes hyperedges with a degree-normalized stochastic
operator; both lead-lag and fusion carry exact identity bypasses used as
ablation switches.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .params import ParamStore

AFFINITY_EPS = 1e-8


def build_hyperedges(
    latent: Tensor, membership: np.ndarray, score_weight: Tensor
) -> tuple[Tensor, Tensor]:
    """Soft membership weights and hyperedge states for one scale.

    Each stock gets a scalar score from its flattened (T_i, d) latent
    block; scores are masked to the binary membership pattern and softmaxed
    over stocks within each industry. Returns the column-stochastic
    weighted incidence (N, K) and hyperedges (K, T_i, d).
    """
    n, t_i, d = latent.shape
    flat = latent.reshape(n, t_i * d)
    scores = ad.matmul(flat, score_weight)  # (N, 1)
    logits = ad.masked_fill(scores, membership > 0, -np.inf)  # (N, K)
    weights = ad.softmax(logits, axis=0)
    edges = ad.matmul(weights.transpose(1, 0), flat).reshape(-1, t_i, d)
    return weights, edges


def sliding_patches(edges: Tensor, window: int) -> Tensor:
    """Stride-1 temporal patches (K, T_i - window + 1, window, d)."""
    return ad.sliding_patches(edges, window)


def lead_lag_aggregate(
    edges: Tensor,
    window: int,
    time_map_weight: Tensor,
    time_map_bias: Tensor,
) -> tuple[Tensor, Tensor]:
    """Cross-hyperedge attention from each patch's lagging point onto the
    leading positions of all hyperedges, residual-added to the input.

    For follower edge m and patch p, the query is the patch's final time
    step; keys and values are the leading ``window - 1`` steps of patch p
    across all K edges, attended jointly over the K * (window - 1) cells
    with 1/sqrt(d) logit scaling. The per-edge context sequence (one
    context per patch) is mapped back to length T_i by a learned affine
    time map, then added to ``edges``.

    Returns (updated edges (K, T_i, d), attention (K, P, K, window - 1)).
    """
    k_edges, t_i, d = edges.shape
    patches = sliding_patches(edges, window)  # (K, P, w, d)
    n_patches = t_i - window + 1
    query = patches[:, :, window - 1, :]  # (K, P, d)
    leading = patches[:, :, : window - 1, :]  # (K, P, w-1, d)

    # Batch over patches: logits[p, m, (kappa, o)] = q . key / sqrt(d)
    q_pb = query.transpose(1, 0, 2)  # (P, K, d)
    keys = leading.transpose(1, 0, 2, 3).reshape(n_patches, k_edges * (window - 1), d)
    logits = ad.matmul(q_pb, keys.transpose(0, 2, 1)) * (1.0 / np.sqrt(d))
    attention = ad.softmax(logits, axis=2)  # (P, K, K*(w-1))
    context = ad.matmul(attention, keys)  # (P, K, d)

    # Affine map along the patch axis back to T_i, then the residual path.
    ctx_kd = context.transpose(1, 2, 0)  # (K, d, P)
    mapped = ad.matmul(ctx_kd, time_map_weight.transpose(1, 0))  # (K, d, T_i)
    updated = mapped.transpose(0, 2, 1) + time_map_bias + edges
    attn_full = attention.reshape(n_patches, k_edges, k_edges, window - 1)
    return updated, attn_full.transpose(1, 0, 2, 3)


def edge_to_node(weights: Tensor, edges: Tensor) -> Tensor:
    """Send hyperedge states back to member stocks: (N, K) . (K, T, d)."""
    k_edges, t_i, d = edges.shape
    flat = edges.reshape(k_edges, t_i * d)
    return ad.matmul(weights, flat).reshape(-1, t_i, d)


def upsample_edges(edges: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Learned affine map along time from T_i to the reference length T."""
    mapped = ad.matmul(edges.transpose(0, 2, 1), weight.transpose(1, 0))
    return mapped.transpose(0, 2, 1) + bias


def mahalanobis_affinity(
    stacked: Tensor, metric_factor: Tensor, eps: float = AFFINITY_EPS
) -> tuple[Tensor, Tensor, Tensor]:
    """Pairwise distances, inverse affinities, and the stochastic mixing
    operator between hyperedges of all scales, per time step.

    ``stacked`` is (S*K, T, d); the metric is Q = L^T L through the factor
    L, so distances reduce to squared Euclidean distances of rows mapped
    through L. Returns (distance, affinity, stochastic) each shaped
    (T, S*K, S*K); the softmax normalizes over the first edge axis, so each
    [t, :, j] column sums to 1.
    """
    mapped = ad.matmul(stacked, metric_factor.transpose(1, 0))  # (SK, T, d)
    per_step = mapped.transpose(1, 0, 2)  # (T, SK, d)
    distance = ad.pairwise_sqdist(per_step)  # (T, SK, SK)
    m = stacked.shape[0]
    off_diag = ad.constant(1.0 - np.eye(m))
    affinity = ad.power(ad.maximum(distance, eps), -1.0) * off_diag
    stochastic = ad.softmax(affinity, axis=1)
    return distance, affinity, stochastic


# Row sums below this floor only arise when the inverse-distance logits
# saturate the softmax into exact-zero underflow; such rows carry no
# representable mass and drop out of the mixing (residual path only),
# which is the continuous limit of the normalization as the row vanishes.
DEGREE_FLOOR = 1e-12


def fuse_scales(stacked: Tensor, stochastic: Tensor, mix_weight: Tensor) -> Tensor:
    """Degree-normalized cross-scale message passing with a residual path.

    The operator is Deg^{-1/2} B Deg^{-1/2} with Deg the diagonal of B's
    row sums per time step; the mixed states pass through ``mix_weight``
    and add back onto the input.
    """
    per_step = stacked.transpose(1, 0, 2)  # (T, SK, d)
    row_sums = stochastic.sum(axis=2, keepdims=True)  # (T, SK, 1)
    alive = ad.constant((row_sums.data > DEGREE_FLOOR).astype(np.float64))
    inv_root = ad.power(ad.maximum(row_sums, DEGREE_FLOOR), -0.5) * alive
    normalized = stochastic * inv_root * inv_root.transpose(0, 2, 1)
    mixed = ad.matmul(ad.matmul(normalized, per_step), mix_weight)
    return (mixed + per_step).transpose(1, 0, 2)  # (SK, T, d)


def fused_edge_to_node(weights: Tensor, fused_scale: Tensor) -> Tensor:
    """Per-scale hyperedge-to-stock message passing after fusion."""
    return edge_to_node(weights, fused_scale)


@dataclass
class HypergraphParams:
    """Names of this module's parameter groups, per scale."""

    n_scales: int
    no_lead_lag: bool
    no_fusion: bool


def init_hypergraph_params(
    store: ParamStore,
    scale_lengths: list[int],
    lead_lag_windows: list[int],
    lookback: int,
    latent_dim: int,
    no_lead_lag: bool = False,
    no_fusion: bool = False,
) -> HypergraphParams:
    for i, t_i in enumerate(scale_lengths, start=1):
        prefix = f"scale{i}"
        store.add_weight(f"{prefix}.score.weight", (t_i * latent_dim, 1), t_i * latent_dim, 1)
        if not no_lead_lag:
            n_patches = t_i - lead_lag_windows[i - 1] + 1
            store.add_weight(f"{prefix}.leadlag.time_map.weight", (t_i, n_patches), n_patches, t_i)
            store.add_zeros(f"{prefix}.leadlag.time_map.bias", (t_i, 1))
        store.add_weight(f"{prefix}.upsample.weight", (lookback, t_i), t_i, lookback)
        store.add_zeros(f"{prefix}.upsample.bias", (lookback, 1))
    if not no_fusion:
        store.add_weight("fusion.metric_factor", (latent_dim, latent_dim), latent_dim, latent_dim)
        store.add_weight("fusion.mix.weight", (latent_dim, latent_dim), latent_dim, latent_dim)
    return HypergraphParams(len(scale_lengths), no_lead_lag, no_fusion)
