"""Full forward composition of the forecaster and its configuration.

The forward pass takes one normalized lookback window over all stocks plus
the binary industry membership matrix and produces next-day return
predictions. Ablation switches replace the lead-lag and fusion stages with
exact identity paths (their parameters are then never created), force a
single raw-resolution scale, or drop the raw-latent skip heads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import hypergraph as hg
from . import multiscale as ms
from . import predictor as pred
from .autodiff import Tensor
from .exceptions import ConfigError, ShapeError
from .multiscale import ScaleSpec
from .params import ParamStore

DEFAULT_SCALES = (
    ScaleSpec(kernel=1, stride=1, lead_lag_window=4),
    ScaleSpec(kernel=2, stride=2, lead_lag_window=3),
    ScaleSpec(kernel=4, stride=4, lead_lag_window=2),
)


@dataclass(frozen=True)
class ModelConfig:
    lookback: int = 16
    n_features: int = 5
    latent_dim: int = 8
    head_hidden: int = 16
    scales: tuple[ScaleSpec, ...] = DEFAULT_SCALES
    alpha: float = 1.0
    no_fusion: bool = False
    no_total_multiscale: bool = False
    no_lead_lag: bool = False
    no_skip: bool = False

    def effective_scales(self) -> tuple[ScaleSpec, ...]:
        """Scale set after ablations; the no-multiscale switch forces a
        single kernel-1 stride-1 scale (keeping scale 1's lead-lag window)."""
        if self.no_total_multiscale:
            first = self.scales[0]
            return (ScaleSpec(kernel=1, stride=1, lead_lag_window=first.lead_lag_window),)
        return self.scales

    def validate(self) -> None:
        if self.lookback < 2:
            raise ConfigError(f"lookback must be at least 2, got {self.lookback}")
        if self.latent_dim < 1:
            raise ConfigError(f"latent dim must be positive, got {self.latent_dim}")
        if self.head_hidden < 1:
            raise ConfigError(f"head hidden width must be positive, got {self.head_hidden}")
        if self.alpha < 0:
            raise ConfigError(f"ranking weight must be non-negative, got {self.alpha}")
        if not self.scales:
            raise ConfigError("at least one scale is required")
        ms.scale_lengths(self.lookback, self.effective_scales())


@dataclass
class ForwardState:
    """Everything the forward pass computes, for tests and diagnostics."""

    y_hat: Tensor
    per_scale_pred: list[Tensor]
    scale_latents: list[Tensor]
    incidences: list[Tensor]
    edge_states: list[Tensor]
    leadlag_edges: list[Tensor]
    attention: list[Tensor | None]
    upsampled_edges: list[Tensor]
    fused_edges: list[Tensor]
    fused_nodes: list[Tensor]
    distance: Tensor | None = None
    affinity: Tensor | None = None
    stochastic: Tensor | None = None
    leadlag_nodes: list[Tensor] = field(default_factory=list)


def init_model_params(config: ModelConfig, seed: int) -> ParamStore:
    """Create and initialize every learnable array for ``config``."""
    config.validate()
    scales = config.effective_scales()
    lengths = ms.scale_lengths(config.lookback, scales)
    store = ParamStore(seed)
    ms.init_multiscale_params(store, scales, config.lookback, config.n_features, config.latent_dim)
    hg.init_hypergraph_params(
        store,
        lengths,
        [s.lead_lag_window for s in scales],
        config.lookback,
        config.latent_dim,
        no_lead_lag=config.no_lead_lag,
        no_fusion=config.no_fusion,
    )
    pred.init_head_params(
        store, lengths, config.lookback, config.latent_dim, config.head_hidden,
        no_skip=config.no_skip,
    )
    return store


def forward(
    store: ParamStore,
    config: ModelConfig,
    window: np.ndarray,
    membership: np.ndarray,
    compute_diagnostics: bool = False,
) -> ForwardState:
    """One forward pass over a normalized (N, lookback, F) window."""
    window = np.asarray(window, dtype=np.float64)
    membership = np.asarray(membership, dtype=np.float64)
    if window.ndim != 3 or window.shape[1] != config.lookback or window.shape[2] != config.n_features:
        raise ShapeError(
            f"window shape {window.shape} does not match "
            f"(N, {config.lookback}, {config.n_features})"
        )
    if membership.ndim != 2 or membership.shape[0] != window.shape[0]:
        raise ShapeError(
            f"membership shape {membership.shape} does not match {window.shape[0]} stocks"
        )
    scales = config.effective_scales()
    x = ad.constant(window)

    _, _, latents = ms.extract_scale_latents(x, store, scales)

    incidences: list[Tensor] = []
    edge_states: list[Tensor] = []
    leadlag_edges: list[Tensor] = []
    attention: list[Tensor | None] = []
    upsampled: list[Tensor] = []
    for i, (spec, latent) in enumerate(zip(scales, latents), start=1):
        weights, edges = hg.build_hyperedges(latent, membership, store[f"scale{i}.score.weight"])
        incidences.append(weights)
        edge_states.append(edges)
        if config.no_lead_lag:
            updated, attn = edges, None
        else:
            updated, attn = hg.lead_lag_aggregate(
                edges,
                spec.lead_lag_window,
                store[f"scale{i}.leadlag.time_map.weight"],
                store[f"scale{i}.leadlag.time_map.bias"],
            )
        leadlag_edges.append(updated)
        attention.append(attn)
        upsampled.append(
            hg.upsample_edges(
                updated, store[f"scale{i}.upsample.weight"], store[f"scale{i}.upsample.bias"]
            )
        )

    distance = affinity = stochastic = None
    if config.no_fusion:
        fused_edges = list(upsampled)
    else:
        stacked = ad.concat(upsampled, axis=0)  # (S*K, T, d)
        distance, affinity, stochastic = hg.mahalanobis_affinity(
            stacked, store["fusion.metric_factor"]
        )
        fused_all = hg.fuse_scales(stacked, stochastic, store["fusion.mix.weight"])
        k = membership.shape[1]
        fused_edges = [fused_all[i * k : (i + 1) * k] for i in range(len(scales))]

    fused_nodes = [
        hg.fused_edge_to_node(weights, fused)
        for weights, fused in zip(incidences, fused_edges)
    ]
    y_hat, per_scale = pred.predict(latents, fused_nodes, store, no_skip=config.no_skip)

    state = ForwardState(
        y_hat=y_hat,
        per_scale_pred=per_scale,
        scale_latents=latents,
        incidences=incidences,
        edge_states=edge_states,
        leadlag_edges=leadlag_edges,
        attention=attention,
        upsampled_edges=upsampled,
        fused_edges=fused_edges,
        fused_nodes=fused_nodes,
        distance=distance,
        affinity=affinity,
        stochastic=stochastic,
    )
    if compute_diagnostics:
        state.leadlag_nodes = [
            hg.edge_to_node(weights, edges)
            for weights, edges in zip(incidences, leadlag_edges)
        ]
    return state


def loss_for_sample(
    store: ParamStore,
    config: ModelConfig,
    window: np.ndarray,
    membership: np.ndarray,
    target: np.ndarray,
) -> Tensor:
    state = forward(store, config, window, membership)
    return pred.total_loss(state.y_hat, target, alpha=config.alpha)
