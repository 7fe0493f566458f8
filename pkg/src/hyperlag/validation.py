"""Input validation helpers for the estimator surface."""

from __future__ import annotations

import numpy as np

from .data import IndustryIncidence, MarketPanel
from .exceptions import ConfigError, ShapeError


def check_panel(panel: MarketPanel) -> MarketPanel:
    if not isinstance(panel, MarketPanel):
        raise ConfigError(f"expected a MarketPanel, got {type(panel).__name__}")
    panel.validate()
    return panel


def check_incidence(incidence: IndustryIncidence, n_stocks: int) -> IndustryIncidence:
    if not isinstance(incidence, IndustryIncidence):
        raise ConfigError(f"expected an IndustryIncidence, got {type(incidence).__name__}")
    incidence.validate()
    if incidence.matrix.shape[0] != n_stocks:
        raise ShapeError(
            f"incidence rows {incidence.matrix.shape[0]} disagree with {n_stocks} stocks"
        )
    return incidence


def check_window(window, n_stocks: int, lookback: int, n_features: int) -> np.ndarray:
    window = np.asarray(window, dtype=np.float64)
    expected = (n_stocks, lookback, n_features)
    if window.shape != expected:
        raise ShapeError(f"window shape {window.shape} does not match {expected}")
    if not np.isfinite(window).all():
        raise ConfigError("window contains non-finite values")
    return window
