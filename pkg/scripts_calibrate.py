"""Calibration sweep for the lead-lag recovery acceptance run (scratch)."""
import json
import sys
import time

import numpy as np

from hyperlag.data import LeadLagLink, SplitSpec, synthesize_market, lagged_correlation
from hyperlag.estimator import HyperlagForecaster


def attention_mass(est, leader_idx, follower_idx, samples, scale=0):
    masses = []
    for sample in samples:
        state = est.forward_state(sample.window, raw=False)
        a = state.attention[scale].data
        masses.append(a[follower_idx, :, leader_idx, :].sum(axis=-1).mean())
    return float(np.mean(masses))


def run(spec):
    market_seed = spec.get("market_seed", 11)
    panel, incidence, _ = synthesize_market(
        seed=market_seed, n_stocks=24, n_industries=3, n_days=300,
        links=[LeadLagLink("A", "B", 2, 0.9)], noise=0.2,
    )
    split = SplitSpec(*spec.get("split", (210, 45, 45)))
    est = HyperlagForecaster(
        lookback=16,
        latent_dim=spec.get("d", 8),
        head_hidden=spec.get("hidden", 16),
        scales=spec.get("scales"),
        lead_lag_windows=spec.get("windows"),
        lr=spec.get("lr", 5e-3),
        epochs=spec.get("epochs", 150),
        seed=spec.get("train_seed", 0),
        no_lead_lag=spec.get("no_lead_lag", False),
        prec_n=10,
    )
    t0 = time.time()
    est.fit(panel, incidence, split=split)
    elapsed = time.time() - t0
    report = est.evaluate("test")
    mass = None
    if not spec.get("no_lead_lag", False):
        mass = attention_mass(est, 0, 1, est.samples_.test)
    losses = [r.train_loss for r in est.history_]
    ics = [r.valid_ic for r in est.history_]
    print(json.dumps({
        "spec": spec,
        "time_s": round(elapsed),
        "best_epoch": est.best_epoch_,
        "valid_ic": round(est.best_valid_ic_, 3),
        "test_ic": round(report.ic_mean, 3),
        "mass": None if mass is None else round(mass, 3),
        "loss_first5": [round(v, 5) for v in losses[:5]],
        "loss_last5": [round(v, 5) for v in losses[-5:]],
        "valid_ic_tail": [round(v, 3) for v in ics[-5:]],
    }))


if __name__ == "__main__":
    run(json.loads(sys.argv[1]))
