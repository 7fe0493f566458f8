"""Multi-scale hypergraph forecaster for stock panels with industry
lead-lag attention, built on a self-contained reverse-mode autodiff core.
"""

from .autodiff import Tensor
from .data import (
    IndustryIncidence,
    LeadLagLink,
    MarketPanel,
    Sample,
    SplitSpec,
    ingest_csv,
    make_samples,
    synthesize_market,
)
from .estimator import HyperlagForecaster
from .evaluation import MetricsReport, compute_report
from .model import ModelConfig, ForwardState, forward, init_model_params
from .multiscale import ScaleSpec
from .params import Adam, ParamStore

__version__ = "0.1.0"

__all__ = [
    "Adam",
    "ForwardState",
    "HyperlagForecaster",
    "IndustryIncidence",
    "LeadLagLink",
    "MarketPanel",
    "MetricsReport",
    "ModelConfig",
    "ParamStore",
    "Sample",
    "ScaleSpec",
    "SplitSpec",
    "Tensor",
    "compute_report",
    "forward",
    "ingest_csv",
    "init_model_params",
    "make_samples",
    "synthesize_market",
    "__version__",
]
