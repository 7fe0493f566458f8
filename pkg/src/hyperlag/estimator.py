"""Scikit-learn style estimator wrapping the full pipeline.

``fit`` takes an aligned market panel plus the industry membership
structure, normalizes indicators with train-split statistics, trains with
Adam, and keeps the parameters of the best validation-IC epoch.
``predict`` maps a raw lookback window to next-day return forecasts.
Hyperparameters follow sklearn conventions (stored verbatim in
``__init__``, learned state in trailing-underscore attributes), so
``get_params``/``set_params``/``clone`` compose with the wider ecosystem.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .data import MarketPanel, IndustryIncidence, SampleSplits, SplitSpec, make_samples, normalization_stats
from .evaluation import MetricsReport, compute_report
from .exceptions import ContractError
from .model import DEFAULT_SCALES, ForwardState, ModelConfig, forward, init_model_params
from .multiscale import ScaleSpec
from .params import ParamStore
from .training import TrainResult, predict_samples, train, validation_ic
from .validation import check_incidence, check_panel, check_window


def _scale_specs(scales, lead_lag_windows) -> tuple[ScaleSpec, ...]:
    if scales is None:
        return DEFAULT_SCALES
    if lead_lag_windows is None or len(lead_lag_windows) != len(scales):
        raise ContractError("lead_lag_windows must match scales in length")
    return tuple(
        ScaleSpec(kernel=k, stride=s, lead_lag_window=w)
        for (k, s), w in zip(scales, lead_lag_windows)
    )


class HyperlagForecaster(BaseEstimator):
    """Multi-scale hypergraph forecaster of next-day stock return ratios.

    Parameters mirror the training configuration; ``scales`` is a sequence
    of (kernel, stride) pairs with one ``lead_lag_windows`` entry each, or
    None for the defaults (1,1), (2,2), (4,4) with windows 4, 3, 2.
    """

    def __init__(
        self,
        lookback: int = 16,
        latent_dim: int = 8,
        head_hidden: int = 16,
        scales=None,
        lead_lag_windows=None,
        alpha: float = 1.0,
        lr: float = 5e-3,
        epochs: int = 100,
        seed: int = 0,
        no_fusion: bool = False,
        no_total_multiscale: bool = False,
        no_lead_lag: bool = False,
        no_skip: bool = False,
        prec_n: int = 10,
        annualize: bool = False,
    ):
        self.lookback = lookback
        self.latent_dim = latent_dim
        self.head_hidden = head_hidden
        self.scales = scales
        self.lead_lag_windows = lead_lag_windows
        self.alpha = alpha
        self.lr = lr
        self.epochs = epochs
        self.seed = seed
        self.no_fusion = no_fusion
        self.no_total_multiscale = no_total_multiscale
        self.no_lead_lag = no_lead_lag
        self.no_skip = no_skip
        self.prec_n = prec_n
        self.annualize = annualize

    # -- configuration ----------------------------------------------------

    def model_config(self, n_features: int = 5) -> ModelConfig:
        return ModelConfig(
            lookback=self.lookback,
            n_features=n_features,
            latent_dim=self.latent_dim,
            head_hidden=self.head_hidden,
            scales=_scale_specs(self.scales, self.lead_lag_windows),
            alpha=self.alpha,
            no_fusion=self.no_fusion,
            no_total_multiscale=self.no_total_multiscale,
            no_lead_lag=self.no_lead_lag,
            no_skip=self.no_skip,
        )

    # -- estimator API ------------------------------------------------------

    def fit(
        self,
        panel: MarketPanel,
        incidence: IndustryIncidence,
        split: SplitSpec | None = None,
    ) -> "HyperlagForecaster":
        check_panel(panel)
        check_incidence(incidence, panel.n_stocks)
        if split is None:
            n = panel.n_days
            train_days = max(int(n * 0.7), self.lookback + 2)
            rest = n - train_days
            split = SplitSpec(train=train_days, valid=rest // 2, test=rest - rest // 2)
        split.validate(panel.n_days)

        config = self.model_config(n_features=panel.values.shape[2])
        config.validate()
        mean, std = normalization_stats(panel, split.train)
        normalized = (panel.values - mean) / std
        samples = make_samples(panel, self.lookback, split, normalized=normalized)

        store = init_model_params(config, self.seed)
        result = train(
            store,
            config,
            samples.train,
            samples.valid,
            incidence.matrix,
            epochs=self.epochs,
            lr=self.lr,
        )
        store.restore(result.best_params)

        self.config_ = config
        self.params_ = store
        self.norm_mean_ = mean
        self.norm_std_ = std
        self.split_ = split
        self.samples_ = samples
        self.membership_ = incidence.matrix.copy()
        self.industry_names_ = list(incidence.industry_names)
        self.tickers_ = list(panel.tickers)
        self.dates_ = list(panel.dates)
        self.train_result_ = result
        self.history_ = result.history
        self.best_epoch_ = result.best_epoch
        self.best_valid_ic_ = result.best_valid_ic
        return self

    def restore(
        self,
        panel: MarketPanel,
        incidence: IndustryIncidence,
        split: SplitSpec,
        param_arrays: dict[str, np.ndarray],
        norm_mean: np.ndarray,
        norm_std: np.ndarray,
    ) -> "HyperlagForecaster":
        """Rebuild fitted state from checkpointed arrays without training."""
        check_panel(panel)
        check_incidence(incidence, panel.n_stocks)
        split.validate(panel.n_days)
        config = self.model_config(n_features=panel.values.shape[2])
        config.validate()
        store = init_model_params(config, self.seed)
        store.restore(param_arrays)
        normalized = (panel.values - norm_mean) / norm_std
        self.config_ = config
        self.params_ = store
        self.norm_mean_ = np.asarray(norm_mean, dtype=np.float64)
        self.norm_std_ = np.asarray(norm_std, dtype=np.float64)
        self.split_ = split
        self.samples_ = make_samples(panel, self.lookback, split, normalized=normalized)
        self.membership_ = incidence.matrix.copy()
        self.industry_names_ = list(incidence.industry_names)
        self.tickers_ = list(panel.tickers)
        self.dates_ = list(panel.dates)
        return self

    def _check_fitted(self) -> None:
        if not hasattr(self, "params_"):
            raise ContractError("estimator is not fitted; call fit first")

    def predict(self, window: np.ndarray) -> np.ndarray:
        """Next-day return forecasts for one raw (N, lookback, F) window."""
        self._check_fitted()
        window = check_window(
            window, window.shape[0], self.config_.lookback, self.config_.n_features
        )
        normalized = (window - self.norm_mean_) / self.norm_std_
        state = forward(self.params_, self.config_, normalized, self.membership_)
        return state.y_hat.data.copy()

    def forward_state(self, window: np.ndarray, raw: bool = True) -> ForwardState:
        """Full forward diagnostics (attention, affinities, node states)."""
        self._check_fitted()
        if raw:
            window = (np.asarray(window, dtype=np.float64) - self.norm_mean_) / self.norm_std_
        return forward(
            self.params_, self.config_, window, self.membership_, compute_diagnostics=True
        )

    def evaluate(self, subset: str = "test") -> MetricsReport:
        """Metrics over a fitted split subset ('train', 'valid', or 'test')."""
        self._check_fitted()
        samples = getattr(self.samples_, subset)
        predictions = predict_samples(self.params_, self.config_, samples, self.membership_)
        return compute_report(
            predictions,
            [s.target for s in samples],
            [s.day_index for s in samples],
            prec_n=self.prec_n,
            annualize=self.annualize,
        )

    def score(self, *_args, **_kwargs) -> float:
        """Mean daily IC on the test split (sklearn score convention)."""
        return self.evaluate("test").ic_mean

    def valid_ic(self) -> float:
        self._check_fitted()
        return validation_ic(self.params_, self.config_, self.samples_.valid, self.membership_)
