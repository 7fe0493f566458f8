"""Batch command-line interface: synth, train, eval, gradcheck.

All commands are non-interactive; exit code 0 means success, 1 a
configuration/input error, and 2 a numeric failure. Errors print a single
machine-parsable line ``error: <category>: <message>`` to stderr. The
``HYPERLAG_LOG`` environment variable (debug/info/warning/quiet) controls
log verbosity.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .config import RunConfig, load_config, write_config_echo
from .data import (
    IndustryIncidence,
    MarketPanel,
    ingest_csv,
    synthesize_market,
    write_ground_truth,
    write_industry_csv,
    write_prices_csv,
)
from .estimator import HyperlagForecaster
from .evaluation import compute_report
from .exceptions import ConfigError, ContractError, NumericError, ShapeError
from .gradcheck import finite_difference_check
from .model import forward, init_model_params, loss_for_sample
from .training import TrainingDiverged, predict_samples

logger = logging.getLogger("hyperlag")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERIC = 2

GRADCHECK_LIMITS = {"n_stocks": 8, "n_industries": 3, "lookback": 16, "latent_dim": 4}


def _setup_logging() -> None:
    level_name = os.environ.get("HYPERLAG_LOG", "warning").lower()
    levels = {
        "debug": logging.DEBUG,
        "info": logging.INFO,
        "warning": logging.WARNING,
        "quiet": logging.CRITICAL,
    }
    if level_name not in levels:
        raise ConfigError(f"HYPERLAG_LOG must be one of {sorted(levels)}, got {level_name!r}")
    logging.basicConfig(
        level=levels[level_name],
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )


def _load_market(config: RunConfig) -> tuple[MarketPanel, IndustryIncidence, dict | None]:
    if config.source == "csv":
        panel, incidence = ingest_csv(config.prices, config.industries)
        return panel, incidence, None
    spec = config.synth
    panel, incidence, truth = synthesize_market(
        seed=config.seed,
        n_stocks=spec.n_stocks,
        n_industries=spec.n_industries,
        n_days=spec.n_days,
        links=spec.links,
        noise=spec.noise,
        factor_vol=spec.factor_vol,
    )
    return panel, incidence, truth


def _estimator_from_config(config: RunConfig) -> HyperlagForecaster:
    return HyperlagForecaster(
        lookback=config.lookback,
        latent_dim=config.latent_dim,
        head_hidden=config.head_hidden,
        scales=[tuple(s) for s in config.scales],
        lead_lag_windows=list(config.lead_lag_windows),
        alpha=config.alpha,
        lr=config.lr,
        epochs=config.epochs,
        seed=config.seed,
        no_fusion=config.no_fusion,
        no_total_multiscale=config.no_total_multiscale,
        no_lead_lag=config.no_lead_lag,
        no_skip=config.no_skip,
        prec_n=config.prec_n,
        annualize=config.annualize,
    )


def _write_predictions(path: Path, panel: MarketPanel, samples, predictions) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", "ticker", "y_hat", "y_true"])
        for sample, y_hat in zip(samples, predictions):
            date = panel.dates[sample.day_index]
            for i, ticker in enumerate(panel.tickers):
                writer.writerow([date, ticker, repr(float(y_hat[i])), repr(float(sample.target[i]))])


def _write_training_log(path: Path, history) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "valid_ic"])
        for row in history:
            writer.writerow([row.epoch, repr(row.train_loss), repr(row.valid_ic)])


def _checkpoint_arrays(est: HyperlagForecaster) -> dict[str, np.ndarray]:
    arrays = est.params_.snapshot()
    arrays["norm.mean"] = est.norm_mean_.copy()
    arrays["norm.std"] = est.norm_std_.copy()
    return arrays


def _dump_diagnostics(path: Path, est: HyperlagForecaster, panel: MarketPanel) -> None:
    """Attention and affinity tensors for the last test-split window."""
    samples = est.samples_.test or est.samples_.valid or est.samples_.train
    state = est.forward_state(samples[-1].window, raw=False)
    payload: dict[str, np.ndarray] = {}
    for i, attn in enumerate(state.attention, start=1):
        if attn is not None:
            # axes: (follower edge, patch, leader edge, leading offset)
            payload[f"attention_scale{i}"] = attn.data
    for i, weights in enumerate(state.incidences, start=1):
        payload[f"incidence_scale{i}"] = weights.data
    if state.stochastic is not None:
        # axes: (time, source edge, destination edge), columns sum to 1
        payload["affinity_stochastic"] = state.stochastic.data
        payload["affinity_distance"] = state.distance.data
    payload["day_index"] = np.array([samples[-1].day_index])
    np.savez(path, **payload)


def cmd_synth(args: argparse.Namespace) -> int:
    config = load_config(args.config, args.set, args.seed)
    if config.source != "synthetic":
        raise ConfigError("synth requires data.source = 'synthetic'")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    panel, incidence, truth = _load_market(config)
    write_prices_csv(panel, out / "prices.csv")
    write_industry_csv(incidence, panel.tickers, out / "industries.csv")
    write_ground_truth(truth, out / "ground_truth.json")
    write_config_echo(config, out / "config.toml")
    print(f"wrote {panel.n_stocks} stocks x {panel.n_days} days to {out}")
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    config = load_config(args.config, args.set, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    panel, incidence, _ = _load_market(config)
    est = _estimator_from_config(config)
    try:
        est.fit(panel, incidence, split=config.split)
    except TrainingDiverged as exc:
        arrays = dict(exc.last_good)
        arrays["norm.mean"], arrays["norm.std"] = _norm_stats_for(config, panel)
        save_checkpoint(out / "model.ckpt", arrays, config.seed, config.config_hash())
        write_config_echo(config, out / "config.toml")
        _write_training_log(out / "training_log.csv", exc.history)
        raise
    save_checkpoint(out / "model.ckpt", _checkpoint_arrays(est), config.seed, config.config_hash())
    write_config_echo(config, out / "config.toml")
    _write_training_log(out / "training_log.csv", est.history_)
    report = est.evaluate("test")
    report.write_json(out / "metrics.json")
    (out / "metrics.txt").write_text(report.text_table())
    predictions = predict_samples(est.params_, est.config_, est.samples_.test, est.membership_)
    _write_predictions(out / "predictions.csv", panel, est.samples_.test, predictions)
    if args.dump_diagnostics:
        _dump_diagnostics(out / "diagnostics.npz", est, panel)
    print(
        f"trained {config.epochs} epochs; best epoch {est.best_epoch_} "
        f"(valid IC {est.best_valid_ic_:.4f}); test IC {report.ic_mean:.4f}"
    )
    return EXIT_OK


def _norm_stats_for(config: RunConfig, panel: MarketPanel) -> tuple[np.ndarray, np.ndarray]:
    from .data import normalization_stats

    return normalization_stats(panel, config.split.train)


def cmd_eval(args: argparse.Namespace) -> int:
    config = load_config(args.config, args.set, args.seed)
    arrays, rng_seed, stored_hash = load_checkpoint(args.checkpoint)
    if stored_hash != config.config_hash():
        raise ConfigError(
            f"checkpoint config hash {stored_hash[:12]} does not match "
            f"config hash {config.config_hash()[:12]}"
        )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    panel, incidence, _ = _load_market(config)
    est = _estimator_from_config(config)
    norm_mean = arrays.pop("norm.mean")
    norm_std = arrays.pop("norm.std")
    est.restore(panel, incidence, config.split, arrays, norm_mean, norm_std)
    report = est.evaluate("test")
    report.write_json(out / "metrics.json")
    (out / "metrics.txt").write_text(report.text_table())
    predictions = predict_samples(est.params_, est.config_, est.samples_.test, est.membership_)
    _write_predictions(out / "predictions.csv", panel, est.samples_.test, predictions)
    if args.dump_diagnostics:
        _dump_diagnostics(out / "diagnostics.npz", est, panel)
    print(report.text_table(), end="")
    return EXIT_OK


def cmd_gradcheck(args: argparse.Namespace) -> int:
    overrides = list(args.set)
    if args.config is None:
        # Tiny defaults sized for an exhaustive finite-difference sweep.
        overrides = [
            "data.synth.n_stocks=8",
            "data.synth.n_industries=2",
            "data.synth.n_days=40",
            "split.train=30", "split.valid=5", "split.test=5",
            "model.latent_dim=4",
            "model.head_hidden=4",
            "model.scales=[[1,1],[2,2]]",
            "model.lead_lag_windows=[3,2]",
        ] + overrides
    config = load_config(args.config, overrides, args.seed)
    limits = GRADCHECK_LIMITS
    if config.synth.n_stocks > limits["n_stocks"]:
        raise ConfigError(f"gradcheck needs n_stocks <= {limits['n_stocks']}")
    if config.synth.n_industries > limits["n_industries"]:
        raise ConfigError(f"gradcheck needs n_industries <= {limits['n_industries']}")
    if config.lookback > limits["lookback"]:
        raise ConfigError(f"gradcheck needs lookback <= {limits['lookback']}")
    if config.latent_dim > limits["latent_dim"]:
        raise ConfigError(f"gradcheck needs latent_dim <= {limits['latent_dim']}")
    panel, incidence, _ = _load_market(config)
    from .data import make_samples, normalization_stats

    mean, std = normalization_stats(panel, config.split.train)
    normalized = (panel.values - mean) / std
    samples = make_samples(panel, config.lookback, config.split, normalized=normalized)
    sample = samples.train[0]
    model_config = config.model_config(n_features=panel.values.shape[2])
    store = init_model_params(model_config, config.seed)
    report = finite_difference_check(
        lambda: loss_for_sample(
            store, model_config, sample.window, incidence.matrix, sample.target
        ),
        store,
        step=float(args.step),
        tolerance=float(args.tolerance),
    )
    for line in report.summary_lines():
        print(line)
    if not report.passed:
        raise NumericError(
            "gradient check failed for: " + ", ".join(report.failing_params())
        )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hyperlag",
        description="Multi-scale hypergraph stock forecaster: data synthesis, "
        "training, evaluation, and gradient verification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", type=str, default=None, help="TOML config path")
        p.add_argument("--out", type=str, default="runs/latest", help="artifact directory")
        p.add_argument(
            "--set", action="append", default=[], metavar="KEY=VALUE",
            help="override a config key, e.g. --set train.lr=0.01",
        )
        p.add_argument("--seed", type=int, default=None, help="override train.seed")

    p_synth = sub.add_parser("synth", help="write a synthetic market to CSV")
    common(p_synth)
    p_synth.set_defaults(func=cmd_synth)

    p_train = sub.add_parser("train", help="train a model and write run artifacts")
    common(p_train)
    p_train.add_argument(
        "--dump-diagnostics", action="store_true",
        help="write attention/affinity tensors for the last test window",
    )
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint on the test split")
    common(p_eval)
    p_eval.add_argument("--checkpoint", type=str, required=True)
    p_eval.add_argument("--dump-diagnostics", action="store_true")
    p_eval.set_defaults(func=cmd_eval)

    p_grad = sub.add_parser("gradcheck", help="finite-difference gradient verification")
    common(p_grad)
    p_grad.add_argument("--step", type=float, default=1e-5, help="finite-difference step")
    p_grad.add_argument("--tolerance", type=float, default=1e-4)
    p_grad.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        _setup_logging()
        args = build_parser().parse_args(argv)
        return args.func(args)
    except (ConfigError, ShapeError, ContractError, OSError) as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"error: numeric: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
