"""Market panels, CSV ingestion, sample windowing, and a synthetic market
generator with planted intra-industry correlation and inter-industry
lead-lag links.

Prices are long-format CSV ``date,ticker,open,high,low,close,volume``;
industry membership is ``ticker,industry``. Alignment keeps the calendar
dates inside the common [latest first date, earliest last date] range of
all tickers; a ticker missing a calendar date inside that range is a gap
and rejected.
"""

from __future__ import annotations

import csv
import datetime
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import ConfigError, IngestionError

FEATURE_NAMES = ("open", "high", "low", "close", "volume")
CLOSE_INDEX = 3
PRICES_HEADER = ["date", "ticker", "open", "high", "low", "close", "volume"]
INDUSTRY_HEADER = ["ticker", "industry"]


@dataclass
class MarketPanel:
    """Aligned stock panel: N tickers by T_total days by F=5 indicators."""

    tickers: list[str]
    dates: list[str]
    values: np.ndarray  # (N, T_total, 5) float64
    close_index: int = CLOSE_INDEX

    @property
    def n_stocks(self) -> int:
        return len(self.tickers)

    @property
    def n_days(self) -> int:
        return len(self.dates)

    def closes(self) -> np.ndarray:
        return self.values[:, :, self.close_index]

    def validate(self) -> None:
        n, t, f = self.values.shape
        if n != len(self.tickers) or t != len(self.dates) or f != len(FEATURE_NAMES):
            raise IngestionError(
                f"panel shape {self.values.shape} disagrees with axes "
                f"({len(self.tickers)}, {len(self.dates)}, {len(FEATURE_NAMES)})"
            )
        if any(a >= b for a, b in zip(self.dates, self.dates[1:])):
            raise IngestionError("panel dates must be strictly increasing")
        if not np.isfinite(self.values).all():
            raise IngestionError("panel contains non-finite values")
        prices = self.values[:, :, : CLOSE_INDEX + 1]
        if (prices <= 0).any():
            raise IngestionError("panel contains non-positive prices")
        if (self.values[:, :, 4] < 0).any():
            raise IngestionError("panel contains negative volumes")


@dataclass
class IndustryIncidence:
    """Binary stock-to-industry membership matrix H of shape (N, K)."""

    matrix: np.ndarray  # (N, K) float64 of {0, 1}
    industry_names: list[str]

    @property
    def n_industries(self) -> int:
        return len(self.industry_names)

    def validate(self) -> None:
        h = self.matrix
        if h.ndim != 2 or h.shape[1] != len(self.industry_names):
            raise IngestionError(f"incidence shape {h.shape} disagrees with names")
        if not np.isin(h, (0.0, 1.0)).all():
            raise IngestionError("incidence matrix must be binary")
        if (h.sum(axis=1) < 1).any():
            raise IngestionError("every stock needs at least one industry")
        if (h.sum(axis=0) < 1).any():
            raise IngestionError("every industry needs at least one stock")


@dataclass
class Sample:
    """One training example: a lookback window and the next day's returns.

    ``day_index`` is the target day t; the window covers days
    [t - 1 - lookback + 1, t - 1] and the target is
    (close[t] - close[t-1]) / close[t-1].
    """

    window: np.ndarray  # (N, lookback, F) view into the normalized panel
    target: np.ndarray  # (N,)
    day_index: int


@dataclass
class SplitSpec:
    """Chronological train/valid/test day counts."""

    train: int
    valid: int
    test: int

    def validate(self, n_days: int) -> None:
        for label, count in (("train", self.train), ("valid", self.valid), ("test", self.test)):
            if count < 0:
                raise ConfigError(f"{label} split must be non-negative, got {count}")
        if self.train + self.valid + self.test > n_days:
            raise ConfigError(
                f"split {self.train}+{self.valid}+{self.test} exceeds {n_days} days"
            )

    def boundaries(self) -> tuple[int, int, int]:
        """End-exclusive day indices of the train, valid, and test segments."""
        a = self.train
        b = a + self.valid
        c = b + self.test
        return a, b, c


@dataclass
class SampleSplits:
    train: list[Sample] = field(default_factory=list)
    valid: list[Sample] = field(default_factory=list)
    test: list[Sample] = field(default_factory=list)


# -- ingestion ----------------------------------------------------------------


def _parse_price_row(row: list[str], line_no: int) -> tuple[str, str, list[float]]:
    if len(row) != 7:
        raise IngestionError(f"prices row {line_no}: expected 7 fields, got {len(row)}")
    date, ticker = row[0].strip(), row[1].strip()
    if not date or not ticker:
        raise IngestionError(f"prices row {line_no}: empty date or ticker")
    try:
        numbers = [float(v) for v in row[2:]]
    except ValueError as exc:
        raise IngestionError(f"prices row {line_no}: unparseable number ({exc})") from exc
    if any(not np.isfinite(v) for v in numbers):
        raise IngestionError(f"prices row {line_no}: non-finite value")
    if any(v <= 0 for v in numbers[: CLOSE_INDEX + 1]):
        raise IngestionError(f"prices row {line_no}: non-positive price")
    if numbers[4] < 0:
        raise IngestionError(f"prices row {line_no}: negative volume")
    return date, ticker, numbers


def ingest_csv(
    prices_path: str | Path, industry_path: str | Path
) -> tuple[MarketPanel, IndustryIncidence]:
    """Load and align a prices CSV and an industry CSV."""
    per_ticker: dict[str, dict[str, list[float]]] = {}
    with open(prices_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != PRICES_HEADER:
            raise IngestionError(f"prices header must be {','.join(PRICES_HEADER)}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            date, ticker, numbers = _parse_price_row(row, line_no)
            rows = per_ticker.setdefault(ticker, {})
            if date in rows:
                raise IngestionError(
                    f"prices row {line_no}: duplicate (date, ticker) = ({date}, {ticker})"
                )
            rows[date] = numbers
    if not per_ticker:
        raise IngestionError("prices file holds no data rows")

    start = max(min(rows) for rows in per_ticker.values())
    stop = min(max(rows) for rows in per_ticker.values())
    if start > stop:
        raise IngestionError("tickers share no common date range")
    calendar = sorted(
        {d for rows in per_ticker.values() for d in rows if start <= d <= stop}
    )
    tickers = sorted(per_ticker)
    for ticker in tickers:
        rows = per_ticker[ticker]
        for date in calendar:
            if date not in rows:
                raise IngestionError(f"ticker {ticker} is missing date {date}")

    values = np.empty((len(tickers), len(calendar), len(FEATURE_NAMES)))
    for i, ticker in enumerate(tickers):
        rows = per_ticker[ticker]
        for j, date in enumerate(calendar):
            values[i, j, :] = rows[date]

    membership: dict[str, str] = {}
    with open(industry_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != INDUSTRY_HEADER:
            raise IngestionError(f"industry header must be {','.join(INDUSTRY_HEADER)}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise IngestionError(f"industry row {line_no}: expected 2 fields")
            ticker, industry = row[0].strip(), row[1].strip()
            if ticker in membership:
                raise IngestionError(f"industry row {line_no}: duplicate ticker {ticker}")
            membership[ticker] = industry
    missing = [t for t in tickers if t not in membership]
    if missing:
        raise IngestionError(f"tickers missing an industry row: {missing[:5]}")

    industry_names = sorted({membership[t] for t in tickers})
    column = {name: k for k, name in enumerate(industry_names)}
    matrix = np.zeros((len(tickers), len(industry_names)))
    for i, ticker in enumerate(tickers):
        matrix[i, column[membership[ticker]]] = 1.0

    panel = MarketPanel(tickers=tickers, dates=calendar, values=values)
    incidence = IndustryIncidence(matrix=matrix, industry_names=industry_names)
    panel.validate()
    incidence.validate()
    return panel, incidence


def write_prices_csv(panel: MarketPanel, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(PRICES_HEADER)
        for j, date in enumerate(panel.dates):
            for i, ticker in enumerate(panel.tickers):
                writer.writerow([date, ticker] + [repr(float(v)) for v in panel.values[i, j]])


def write_industry_csv(
    incidence: IndustryIncidence, tickers: list[str], path: str | Path
) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(INDUSTRY_HEADER)
        for i, ticker in enumerate(tickers):
            k = int(np.argmax(incidence.matrix[i]))
            writer.writerow([ticker, incidence.industry_names[k]])


# -- targets and windows -------------------------------------------------------


def compute_return(panel: MarketPanel, t: int) -> np.ndarray:
    """1-day return ratio (close[t] - close[t-1]) / close[t-1] per stock."""
    if t < 1:
        raise IndexError(f"returns need a previous day, got t={t}")
    if t >= panel.n_days:
        raise IndexError(f"day index {t} out of range ({panel.n_days} days)")
    closes = panel.closes()
    return (closes[:, t] - closes[:, t - 1]) / closes[:, t - 1]


def normalization_stats(panel: MarketPanel, train_days: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-indicator mean/std over the train-split days only."""
    if train_days < 2:
        raise ConfigError("normalization needs at least 2 train days")
    segment = panel.values[:, :train_days, :]
    mean = segment.mean(axis=(0, 1))
    std = segment.std(axis=(0, 1))
    std = np.where(std > 0, std, 1.0)
    return mean, std


def make_samples(
    panel: MarketPanel,
    lookback: int,
    split: SplitSpec,
    drop_last: bool = False,
    normalized: np.ndarray | None = None,
) -> SampleSplits:
    """Stride-1 sliding windows, one sample per target day across all stocks.

    Windows cover days [t - lookback, t - 1] for target day t; day 0 never
    enters a window, keeping every windowed day's own return well defined.
    A sample belongs to the split containing its target day. ``drop_last``
    is accepted for interface parity; with one-day samples there is never a
    trailing fragment to drop, so False and True behave identically.
    """
    split.validate(panel.n_days)
    if normalized is None:
        normalized = panel.values
    if normalized.shape != panel.values.shape:
        raise ConfigError("normalized values must match the panel shape")
    train_end, valid_end, test_end = split.boundaries()
    if lookback + 1 > train_end:
        raise ConfigError(
            f"lookback {lookback} does not fit in a {train_end}-day train span"
        )
    closes = panel.closes()
    out = SampleSplits()
    first_target = lookback + 1  # window start stays >= day 1
    for t in range(first_target, test_end):
        window = normalized[:, t - lookback : t, :]
        target = (closes[:, t] - closes[:, t - 1]) / closes[:, t - 1]
        sample = Sample(window=window, target=target, day_index=t)
        if t < train_end:
            out.train.append(sample)
        elif t < valid_end:
            out.valid.append(sample)
        else:
            out.test.append(sample)
    del drop_last
    return out


# -- synthetic market ----------------------------------------------------------


@dataclass
class LeadLagLink:
    leader: str
    follower: str
    lag: int
    strength: float


def default_industry_names(count: int) -> list[str]:
    if count <= 26:
        return [chr(ord("A") + k) for k in range(count)]
    return [f"IND{k:03d}" for k in range(count)]


def synthesize_market(
    seed: int,
    n_stocks: int,
    n_industries: int,
    n_days: int,
    links: list[LeadLagLink],
    noise: float = 0.2,
    factor_vol: float = 0.01,
) -> tuple[MarketPanel, IndustryIncidence, dict]:
    """Seeded synthetic panel with planted industry factors and lead-lag links.

    Each industry carries a latent daily return factor. A follower industry
    mixes (1 - strength) of its own innovation with strength times the
    leader's factor ``lag`` days back. Stock returns add idiosyncratic noise
    scaled by ``noise`` relative to the factor volatility; prices compound
    from 100.
    """
    if n_stocks < 1 or n_industries < 1 or n_days < 3:
        raise ConfigError("need at least 1 stock, 1 industry, and 3 days")
    if n_stocks % n_industries != 0:
        raise ConfigError(
            f"{n_stocks} stocks do not split evenly over {n_industries} industries"
        )
    if not 0.0 <= noise:
        raise ConfigError(f"noise must be non-negative, got {noise}")
    names = default_industry_names(n_industries)
    index = {name: k for k, name in enumerate(names)}
    for link in links:
        if link.leader not in index or link.follower not in index:
            raise ConfigError(f"unknown industry in link {link.leader}->{link.follower}")
        if link.leader == link.follower:
            raise ConfigError("a lead-lag link needs two distinct industries")
        if link.lag < 1:
            raise ConfigError(f"lag must be >= 1, got {link.lag}")
        if link.lag >= n_days:
            raise ConfigError(f"lag {link.lag} must be below the day count {n_days}")
        if not 0.0 < link.strength < 1.0:
            raise ConfigError(f"strength must lie in (0, 1), got {link.strength}")
    followers = [link.follower for link in links]
    if len(set(followers)) != len(followers):
        raise ConfigError("each industry may follow at most one leader")

    rng = np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, 0x5EED])
    innovations = rng.normal(0.0, factor_vol, size=(n_industries, n_days))
    factors = innovations.copy()
    by_follower = {index[l.follower]: l for l in links}
    for t in range(n_days):
        for k in range(n_industries):
            link = by_follower.get(k)
            if link is not None and t - link.lag >= 0:
                lead = factors[index[link.leader], t - link.lag]
                factors[k, t] = (1.0 - link.strength) * innovations[k, t] + link.strength * lead

    per_industry = n_stocks // n_industries
    industry_of = np.repeat(np.arange(n_industries), per_industry)
    idio = rng.normal(0.0, noise * factor_vol, size=(n_stocks, n_days))
    returns = factors[industry_of] + idio
    np.clip(returns, -0.5, 0.5, out=returns)

    closes = 100.0 * np.cumprod(1.0 + returns, axis=1)
    opens = np.empty_like(closes)
    opens[:, 0] = 100.0
    opens[:, 1:] = closes[:, :-1]
    spread = np.abs(rng.normal(0.0, 0.2 * factor_vol, size=closes.shape))
    highs = np.maximum(opens, closes) * (1.0 + spread)
    lows = np.minimum(opens, closes) * (1.0 - spread)
    volumes = np.exp(rng.normal(np.log(1e6), 0.5, size=closes.shape))

    values = np.stack([opens, highs, lows, closes, volumes], axis=2)
    start = datetime.date(2020, 1, 1)
    dates = [(start + datetime.timedelta(days=j)).isoformat() for j in range(n_days)]
    tickers = [f"S{i:04d}" for i in range(n_stocks)]
    matrix = np.zeros((n_stocks, n_industries))
    matrix[np.arange(n_stocks), industry_of] = 1.0

    panel = MarketPanel(tickers=tickers, dates=dates, values=values)
    incidence = IndustryIncidence(matrix=matrix, industry_names=names)
    panel.validate()
    incidence.validate()
    ground_truth = {
        "seed": int(seed),
        "n_stocks": n_stocks,
        "n_industries": n_industries,
        "n_days": n_days,
        "noise": noise,
        "factor_vol": factor_vol,
        "links": [
            {
                "leader": link.leader,
                "follower": link.follower,
                "lag": link.lag,
                "strength": link.strength,
            }
            for link in links
        ],
    }
    return panel, incidence, ground_truth


def write_ground_truth(ground_truth: dict, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(ground_truth, fh, sort_keys=True, indent=2)
        fh.write("\n")


def lagged_correlation(a: np.ndarray, b: np.ndarray, lag: int) -> float:
    """Pearson correlation of a[t] against b[t + lag]; the brute-force oracle
    used to verify planted lead-lag structure."""
    if lag < 0:
        raise ConfigError("lag must be non-negative")
    if lag >= a.size - 1:
        raise ConfigError("lag leaves fewer than 2 overlapping points")
    x = a[: a.size - lag]
    y = b[lag:]
    x = x - x.mean()
    y = y - y.mean()
    denom = np.sqrt((x * x).sum() * (y * y).sum())
    if denom == 0:
        raise ZeroDivisionError("constant series in lagged correlation")
    return float((x * y).sum() / denom)
