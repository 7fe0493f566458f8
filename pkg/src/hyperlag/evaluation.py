"""Ranking and portfolio metrics: daily cross-sectional information
coefficient, its information ratio, top-N precision, and the Sharpe ratio
of a daily equal-weight top-N long-only strategy.

Days whose predictions or realized returns have zero cross-sectional
variance carry no ranking information; the report excludes them from the
IC average and records which days were dropped.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import ConfigError, DegenerateSliceError, NumericError

logger = logging.getLogger(__name__)


def ic(y_hat: np.ndarray, y: np.ndarray) -> float:
    """Pearson correlation of one day's cross-section."""
    y_hat = np.asarray(y_hat, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if y_hat.shape != y.shape or y_hat.ndim != 1:
        raise ConfigError(f"mismatched vectors: {y_hat.shape} vs {y.shape}")
    if y_hat.size < 2:
        raise ConfigError("correlation needs at least 2 stocks")
    a = y_hat - y_hat.mean()
    b = y - y.mean()
    denom = np.sqrt((a * a).sum() * (b * b).sum())
    if denom == 0:
        raise DegenerateSliceError("zero cross-sectional variance")
    return float((a * b).sum() / denom)


def icir(daily_ic: np.ndarray) -> float:
    """mean(IC) / std(IC) with sample (n-1) standard deviation."""
    daily_ic = np.asarray(daily_ic, dtype=np.float64)
    if daily_ic.size < 2:
        raise ConfigError("information ratio needs at least 2 days")
    std = daily_ic.std(ddof=1)
    if std == 0:
        raise DegenerateSliceError("daily IC series has zero variance")
    return float(daily_ic.mean() / std)


def prec_at_n(y_hat: np.ndarray, y: np.ndarray, n: int = 10) -> float:
    """Fraction of the top-n predicted stocks whose realized return is
    positive; prediction ties break by stable input order."""
    y_hat = np.asarray(y_hat, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if n < 1 or n > y_hat.size:
        raise ConfigError(f"top-n of {n} invalid for {y_hat.size} stocks")
    order = np.argsort(-y_hat, kind="stable")[:n]
    return float((y[order] > 0).sum() / n)


def sharpe(daily_returns: np.ndarray, annualize: bool = False) -> float:
    """Mean over sample std of daily portfolio returns, risk-free rate 0.

    Unannualized by default; ``annualize`` multiplies by sqrt(252).
    """
    daily_returns = np.asarray(daily_returns, dtype=np.float64)
    if daily_returns.size < 2:
        raise ConfigError("Sharpe ratio needs at least 2 days")
    std = daily_returns.std(ddof=1)
    if std == 0:
        raise NumericError("zero variance in daily portfolio returns")
    value = daily_returns.mean() / std
    if annualize:
        value *= np.sqrt(252.0)
    return float(value)


def top_n_return(y_hat: np.ndarray, y: np.ndarray, n: int) -> float:
    """Realized equal-weight return of the day's top-n predicted stocks."""
    if n < 1 or n > y_hat.size:
        raise ConfigError(f"top-n of {n} invalid for {y_hat.size} stocks")
    order = np.argsort(-np.asarray(y_hat, dtype=np.float64), kind="stable")[:n]
    return float(np.asarray(y, dtype=np.float64)[order].mean())


def backtest_sharpe(
    predictions: list[np.ndarray],
    targets: list[np.ndarray],
    top_n: int,
    annualize: bool = False,
) -> tuple[float, np.ndarray]:
    """Sharpe ratio of the daily top-N strategy plus its return series."""
    if len(predictions) != len(targets):
        raise ConfigError("prediction and target day counts disagree")
    daily = np.array(
        [top_n_return(p, t, top_n) for p, t in zip(predictions, targets)]
    )
    return sharpe(daily, annualize=annualize), daily


@dataclass
class MetricsReport:
    ic_mean: float
    icir: float
    prec_at_n: float
    sharpe: float
    n: int
    daily_ic: np.ndarray
    daily_return: np.ndarray
    day_indices: list[int]
    excluded_days: list[int] = field(default_factory=list)

    @property
    def n_days(self) -> int:
        return len(self.day_indices)

    def to_dict(self) -> dict:
        return {
            "ic": self.ic_mean,
            "icir": self.icir if np.isfinite(self.icir) else None,
            "prec_at_n": self.prec_at_n,
            "sharpe": self.sharpe,
            "n": self.n,
            "n_days": self.n_days,
            "excluded_days": list(self.excluded_days),
            "daily_ic": [float(v) for v in self.daily_ic],
            "daily_return": [float(v) for v in self.daily_return],
            "day_indices": list(self.day_indices),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def write_json(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())

    def text_table(self) -> str:
        header = f"{'IC':>10s} {'ICIR':>10s} {'Prec@' + str(self.n):>10s} {'SR':>10s}"
        row = (
            f"{self.ic_mean:>10.4f} {self.icir:>10.4f} "
            f"{self.prec_at_n:>10.4f} {self.sharpe:>10.4f}"
        )
        return header + "\n" + row + "\n"


def compute_report(
    predictions: list[np.ndarray],
    targets: list[np.ndarray],
    day_indices: list[int],
    prec_n: int = 10,
    annualize: bool = False,
) -> MetricsReport:
    """Aggregate per-day predictions into the summary report."""
    if not predictions:
        raise ConfigError("no evaluation days")
    daily_ic: list[float] = []
    daily_prec: list[float] = []
    excluded: list[int] = []
    for p, t, day in zip(predictions, targets, day_indices):
        daily_prec.append(prec_at_n(p, t, n=prec_n))
        try:
            daily_ic.append(ic(p, t))
        except DegenerateSliceError:
            logger.warning("day %d excluded from IC: zero variance", day)
            excluded.append(day)
    if not daily_ic:
        raise DegenerateSliceError("every evaluation day was degenerate")
    ic_arr = np.array(daily_ic)
    try:
        ic_ratio = icir(ic_arr)
    except (ConfigError, DegenerateSliceError):
        logger.warning("daily IC series degenerate; information ratio undefined")
        ic_ratio = float("nan")
    sr, daily_ret = backtest_sharpe(predictions, targets, prec_n, annualize=annualize)
    return MetricsReport(
        ic_mean=float(ic_arr.mean()),
        icir=ic_ratio,
        prec_at_n=float(np.mean(daily_prec)),
        sharpe=sr,
        n=prec_n,
        daily_ic=ic_arr,
        daily_return=daily_ret,
        day_indices=list(day_indices),
        excluded_days=excluded,
    )
