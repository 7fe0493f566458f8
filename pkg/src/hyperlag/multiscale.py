"""Per-scale temporal down-sampling, causal mixing, and latent projection.

Each scale applies a learned shared 1-D convolution kernel (scale 1 keeps
the raw resolution with kernel 1 / stride 1), then a causal per-position
affine map along time (position j sees only inputs 1..j), then a pointwise
linear projection from the indicator axis into the latent dimension.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .exceptions import ConfigError
from .params import ParamStore


@dataclass(frozen=True)
class ScaleSpec:
    """Convolution kernel/stride and lead-lag window for one scale."""

    kernel: int
    stride: int
    lead_lag_window: int

    def output_length(self, lookback: int) -> int:
        if self.kernel < 1 or self.stride < 1:
            raise ConfigError(f"kernel and stride must be positive: {self}")
        if self.kernel > lookback:
            raise ConfigError(f"kernel {self.kernel} exceeds lookback {lookback}")
        return (lookback - self.kernel) // self.stride + 1


def scale_lengths(lookback: int, scales: tuple[ScaleSpec, ...]) -> list[int]:
    """Down-sampled lengths per scale; validates T^i >= k^i >= 2."""
    lengths = []
    for i, spec in enumerate(scales, start=1):
        t_i = spec.output_length(lookback)
        if t_i < 2:
            raise ConfigError(f"scale {i} output length {t_i} is below 2")
        if not 2 <= spec.lead_lag_window <= t_i:
            raise ConfigError(
                f"scale {i} lead-lag window {spec.lead_lag_window} "
                f"must lie in [2, {t_i}]"
            )
        lengths.append(t_i)
    return lengths


def causal_mask(length: int) -> np.ndarray:
    """Lower-triangular (inclusive) mask: row j selects positions <= j."""
    return np.tril(np.ones((length, length)))


def init_multiscale_params(
    store: ParamStore,
    scales: tuple[ScaleSpec, ...],
    lookback: int,
    n_features: int,
    latent_dim: int,
) -> None:
    lengths = scale_lengths(lookback, scales)
    for i, (spec, t_i) in enumerate(zip(scales, lengths), start=1):
        prefix = f"scale{i}"
        store.add_weight(f"{prefix}.conv.kernel", (spec.kernel,), spec.kernel, 1)
        store.add_weight(f"{prefix}.mix.weight", (t_i, t_i), t_i, 1)
        store.add_zeros(f"{prefix}.mix.bias", (t_i, 1))
        store.add_weight(f"{prefix}.project.weight", (n_features, latent_dim), n_features, latent_dim)


def decompose(x: Tensor, store: ParamStore, scales: tuple[ScaleSpec, ...]) -> list[Tensor]:
    """Learned per-scale down-sampling of an (N, T, F) window."""
    return [
        ad.conv1d(x, store[f"scale{i}.conv.kernel"], spec.stride)
        for i, spec in enumerate(scales, start=1)
    ]


def causal_mix(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Per-position affine map over time prefixes; never looks forward.

    Output position j is an affine function of inputs 1..j, applied per
    stock and per feature: weight row j (masked lower-triangular) holds the
    prefix coefficients and bias[j] the offset.
    """
    t = x.shape[1]
    masked = weight * ad.constant(causal_mask(t))
    # (N, T, F) -> (N, F, T) @ (T, T)^T walks the time axis, then back.
    mixed = ad.matmul(x.transpose(0, 2, 1), masked.transpose(1, 0))
    return mixed.transpose(0, 2, 1) + bias


def project(x: Tensor, weight: Tensor) -> Tensor:
    """Pointwise linear map along the feature axis: (N, T, F) @ (F, d)."""
    return ad.matmul(x, weight)


def extract_scale_latents(
    x: Tensor, store: ParamStore, scales: tuple[ScaleSpec, ...]
) -> tuple[list[Tensor], list[Tensor], list[Tensor]]:
    """Full per-scale chain; returns (raw, mixed, latent) lists."""
    raw = decompose(x, store, scales)
    mixed = []
    latent = []
    for i, x_i in enumerate(raw, start=1):
        m_i = causal_mix(x_i, store[f"scale{i}.mix.weight"], store[f"scale{i}.mix.bias"])
        mixed.append(m_i)
        latent.append(project(m_i, store[f"scale{i}.project.weight"]))
    return raw, mixed, latent
