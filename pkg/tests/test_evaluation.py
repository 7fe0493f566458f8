"""Metric definitions: IC, ICIR, top-N precision, Sharpe, and the report."""

import json

import numpy as np
import pytest

from hyperlag.evaluation import (
    backtest_sharpe,
    compute_report,
    ic,
    icir,
    prec_at_n,
    sharpe,
    top_n_return,
)
from hyperlag.exceptions import ConfigError, DegenerateSliceError, NumericError


class TestIC:
    def test_perfect_correlation(self):
        y = np.array([0.1, -0.2, 0.3])
        assert ic(y, y) == pytest.approx(1.0, abs=1e-12)

    def test_perfect_anticorrelation(self):
        y = np.array([0.1, -0.2, 0.3])
        assert ic(-y, y) == pytest.approx(-1.0, abs=1e-12)

    def test_hand_pearson(self):
        value = ic(np.array([1.0, 2.0, 3.0]), np.array([1.0, 2.0, 4.0]))
        # direct formula: 3 / sqrt(2 * 14/3)
        assert value == pytest.approx(3.0 / np.sqrt(2 * 14 / 3), rel=1e-12)
        assert value == pytest.approx(0.9820, abs=1e-4)

    def test_constant_vector_degenerate(self):
        with pytest.raises(DegenerateSliceError):
            ic(np.ones(4), np.arange(4.0))
        with pytest.raises(DegenerateSliceError):
            ic(np.arange(4.0), np.ones(4))

    def test_positive_affine_invariance(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            y_hat, y = rng.normal(size=8), rng.normal(size=8)
            a, b = rng.uniform(0.1, 5.0), rng.normal()
            assert ic(a * y_hat + b, y) == pytest.approx(ic(y_hat, y), rel=1e-9)


class TestICIR:
    def test_hand_case(self):
        # mean 0.2, sample std sqrt(0.02): ratio sqrt(2)
        assert icir(np.array([0.1, 0.3])) == pytest.approx(np.sqrt(2.0), rel=1e-12)

    def test_constant_series_rejected(self):
        with pytest.raises(DegenerateSliceError):
            icir(np.full(5, 0.2))

    def test_sign_flip_antisymmetry(self):
        series = np.array([0.05, 0.12, -0.03, 0.2])
        assert icir(-series) == pytest.approx(-icir(series), rel=1e-12)

    def test_needs_two_days(self):
        with pytest.raises(ConfigError):
            icir(np.array([0.1]))


class TestPrecAtN:
    def test_all_positive(self):
        rng = np.random.default_rng(1)
        y_hat = rng.normal(size=15)
        assert prec_at_n(y_hat, np.abs(rng.normal(size=15)) + 0.01, 10) == 1.0

    def test_six_of_ten(self):
        y_hat = -np.arange(12.0)  # picks indices 0..9 in order
        y = np.array([1, 1, 1, 1, 1, 1, -1, -1, -1, -1, 5, 5], dtype=float)
        assert prec_at_n(y_hat, y, 10) == pytest.approx(0.6)

    def test_all_negative(self):
        rng = np.random.default_rng(2)
        y_hat = rng.normal(size=15)
        assert prec_at_n(y_hat, -np.abs(rng.normal(size=15)) - 0.01, 10) == 0.0

    def test_ties_break_by_stable_order(self):
        y_hat = np.zeros(4)
        y = np.array([1.0, 1.0, -1.0, -1.0])
        assert prec_at_n(y_hat, y, 2) == 1.0  # stable sort keeps indices 0, 1

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            y_hat = rng.normal(size=12)
            y = rng.normal(size=12)
            transformed = np.exp(2.0 * y_hat) + 1.0
            assert prec_at_n(transformed, y, 5) == prec_at_n(y_hat, y, 5)

    def test_n_larger_than_universe_rejected(self):
        with pytest.raises(ConfigError):
            prec_at_n(np.zeros(5), np.zeros(5), 6)


class TestSharpe:
    def test_constant_returns_rejected(self):
        with pytest.raises(NumericError):
            sharpe(np.full(4, 0.01))

    def test_zero_mean(self):
        assert sharpe(np.array([0.01, -0.01])) == pytest.approx(0.0, abs=1e-15)

    def test_hand_case(self):
        assert sharpe(np.array([0.02, 0.0, 0.01])) == pytest.approx(1.0, rel=1e-12)

    def test_annualization_flag(self):
        series = np.array([0.02, 0.0, 0.01])
        assert sharpe(series, annualize=True) == pytest.approx(np.sqrt(252.0), rel=1e-12)

    def test_backtest_picks_top_n(self):
        predictions = [np.array([3.0, 2.0, 1.0, 0.0]), np.array([0.0, 1.0, 2.0, 3.0])]
        targets = [np.array([0.04, 0.02, 0.0, -0.5]), np.array([-0.5, 0.0, 0.01, 0.03])]
        sr, daily = backtest_sharpe(predictions, targets, top_n=2)
        np.testing.assert_allclose(daily, [0.03, 0.02], atol=1e-15)
        assert sr == pytest.approx(np.mean(daily) / np.std(daily, ddof=1), rel=1e-12)

    def test_top_n_return_equal_weight(self):
        assert top_n_return(np.array([1.0, 5.0, 3.0]), np.array([0.0, 0.02, 0.04]), 2) == (
            pytest.approx(0.03)
        )


class TestReport:
    def build(self, rng, n_days=6, n_stocks=12, degenerate=()):
        predictions, targets = [], []
        for day in range(n_days):
            if day in degenerate:
                targets.append(np.zeros(n_stocks))
            else:
                targets.append(rng.normal(0, 0.02, size=n_stocks))
            predictions.append(targets[-1] + rng.normal(0, 0.02, size=n_stocks))
        return predictions, targets

    def test_summary_fields_recompute_from_daily_series(self):
        rng = np.random.default_rng(4)
        predictions, targets = self.build(rng)
        report = compute_report(predictions, targets, list(range(6)), prec_n=5)
        assert report.ic_mean == pytest.approx(report.daily_ic.mean(), rel=1e-12)
        assert report.icir == pytest.approx(
            report.daily_ic.mean() / report.daily_ic.std(ddof=1), rel=1e-12
        )
        assert report.sharpe == pytest.approx(
            report.daily_return.mean() / report.daily_return.std(ddof=1), rel=1e-12
        )

    def test_degenerate_day_excluded_and_recorded(self):
        rng = np.random.default_rng(5)
        predictions, targets = self.build(rng, degenerate=(2,))
        report = compute_report(predictions, targets, list(range(6)), prec_n=5)
        assert report.excluded_days == [2]
        assert len(report.daily_ic) == 5
        assert report.n_days == 6

    def test_oracle_predictions_reach_ic_one(self):
        rng = np.random.default_rng(6)
        _, targets = self.build(rng)
        report = compute_report(targets, targets, list(range(6)), prec_n=5)
        assert report.ic_mean == pytest.approx(1.0, abs=1e-12)
        assert not np.isfinite(report.icir)  # constant IC has no ratio
        assert json.loads(report.to_json())["icir"] is None

    def test_json_fixed_field_names(self):
        rng = np.random.default_rng(7)
        predictions, targets = self.build(rng)
        report = compute_report(predictions, targets, list(range(6)), prec_n=5)
        payload = json.loads(report.to_json())
        for key in ("ic", "icir", "prec_at_n", "sharpe", "n_days", "excluded_days"):
            assert key in payload

    def test_text_table_layout(self):
        rng = np.random.default_rng(8)
        predictions, targets = self.build(rng)
        report = compute_report(predictions, targets, list(range(6)), prec_n=5)
        lines = report.text_table().strip().splitlines()
        assert lines[0].split() == ["IC", "ICIR", "Prec@5", "SR"]
        assert len(lines[1].split()) == 4
