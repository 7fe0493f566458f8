"""Deterministic training loop: one sample per trading day, Adam updates,
and best-validation-IC checkpoint selection.

Samples run in chronological order every epoch, so identical seed, config,
and data reproduce the loss trajectory bit for bit. A non-finite loss
aborts with the last finite parameter snapshot attached to the error.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .data import Sample
from .evaluation import ic
from .exceptions import ConfigError, DegenerateSliceError, NumericError
from .model import ModelConfig, forward, loss_for_sample
from .params import Adam, ParamStore

logger = logging.getLogger(__name__)


@dataclass
class EpochRow:
    epoch: int
    train_loss: float
    valid_ic: float


@dataclass
class TrainResult:
    history: list[EpochRow] = field(default_factory=list)
    best_epoch: int = 0
    best_valid_ic: float = float("-inf")
    best_params: dict[str, np.ndarray] = field(default_factory=dict)


class TrainingDiverged(NumericError):
    """Raised when the loss leaves the finite range mid-training."""

    def __init__(self, message: str, last_good: dict[str, np.ndarray], history: list[EpochRow]):
        super().__init__(message)
        self.last_good = last_good
        self.history = history


def predict_samples(
    store: ParamStore,
    config: ModelConfig,
    samples: list[Sample],
    membership: np.ndarray,
) -> list[np.ndarray]:
    """Forward-only predictions, one vector per sample day."""
    outputs = []
    for sample in samples:
        state = forward(store, config, sample.window, membership)
        outputs.append(state.y_hat.data.copy())
    return outputs


def validation_ic(
    store: ParamStore,
    config: ModelConfig,
    samples: list[Sample],
    membership: np.ndarray,
) -> float:
    """Mean daily IC over ``samples``; degenerate days are skipped."""
    if not samples:
        return float("nan")
    values = []
    for sample, y_hat in zip(samples, predict_samples(store, config, samples, membership)):
        try:
            values.append(ic(y_hat, sample.target))
        except DegenerateSliceError:
            continue
    return float(np.mean(values)) if values else float("nan")


def train(
    store: ParamStore,
    config: ModelConfig,
    train_samples: list[Sample],
    valid_samples: list[Sample],
    membership: np.ndarray,
    epochs: int,
    lr: float = 5e-3,
) -> TrainResult:
    """Run ``epochs`` passes and keep the best-validation-IC snapshot.

    With zero epochs the initialization itself is the selected snapshot.
    Validation IC ties keep the earlier epoch, so selection is
    deterministic.
    """
    if epochs < 0:
        raise ConfigError(f"epochs must be non-negative, got {epochs}")
    if not train_samples and epochs > 0:
        raise ConfigError("no training samples")
    result = TrainResult()
    result.best_params = store.snapshot()
    result.best_epoch = 0
    try:
        result.best_valid_ic = validation_ic(store, config, valid_samples, membership)
    except NumericError:
        result.best_valid_ic = float("nan")
    optimizer = Adam(store, lr=lr)
    last_good = store.snapshot()
    for epoch in range(1, epochs + 1):
        total = 0.0
        for sample in train_samples:
            try:
                loss = loss_for_sample(store, config, sample.window, membership, sample.target)
                value = loss.item()
            except NumericError as exc:
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch}, day {sample.day_index}: {exc}",
                    last_good,
                    result.history,
                ) from exc
            if not np.isfinite(value):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch}, day {sample.day_index}",
                    last_good,
                    result.history,
                )
            loss.backward()
            optimizer.step()
            total += value
        last_good = store.snapshot()
        train_loss = total / len(train_samples)
        valid = validation_ic(store, config, valid_samples, membership)
        result.history.append(EpochRow(epoch=epoch, train_loss=train_loss, valid_ic=valid))
        if valid_samples:
            improved = np.isfinite(valid) and (
                not np.isfinite(result.best_valid_ic) or valid > result.best_valid_ic
            )
        else:
            improved = True  # no validation split: keep the final epoch
        if improved:
            result.best_valid_ic = valid
            result.best_epoch = epoch
            result.best_params = store.snapshot()
        logger.info(
            "epoch %d: train loss %.6f, valid IC %s", epoch, train_loss,
            f"{valid:.4f}" if np.isfinite(valid) else "n/a",
        )
    if not result.best_params:
        result.best_params = store.snapshot()
    return result
