"""Adam optimization with a triangular cyclical learning-rate schedule,
oversampled epochs, validation-driven early stopping, and best-checkpoint
retention.

Randomness is split into fixed streams derived from the seed (sampling,
dropout), so (seed, config, data) fully determines the final parameters.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import kernels
from .data_io import (HEADS, MODALITIES, FeatureRecord, gather_labels,
                      hash_tag, oversample_indices)
from .errors import ConfigError, DataError, NumericsError
from .evaluation import evaluate_model, head_f1_scores
from .model import MmmtModel, loss_and_grads, prepare_labels
from .rng import RngState
from .tensor_core import Parameter


@dataclass
class TrainConfig:
    """Every training hyperparameter, explicit and serializable."""

    max_epochs: int = 100
    batch_size: int = 256
    base_lr: float = 1e-4
    max_lr: float = 1e-3
    lr_step_size_epochs: int = 5
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    early_stop_patience_epochs: int | None = 10   # None disables early stopping
    head_mask: tuple[str, ...] = HEADS
    modality_mask: tuple[str, ...] = MODALITIES
    oversample_mode: str = "mean-inverse"
    head_weights: dict[str, float] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        self.head_mask = tuple(self.head_mask)
        self.modality_mask = tuple(self.modality_mask)

    def validate(self) -> None:
        if self.max_epochs < 1:
            raise ConfigError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.max_lr >= self.base_lr > 0:
            raise ConfigError(f"need max_lr >= base_lr > 0, got base {self.base_lr} "
                              f"max {self.max_lr}")
        if self.lr_step_size_epochs < 1:
            raise ConfigError("lr_step_size_epochs must be >= 1")
        if self.early_stop_patience_epochs is not None and \
                self.early_stop_patience_epochs < 0:
            raise ConfigError("early_stop_patience_epochs must be >= 0 or None")
        if not set(self.head_mask) <= set(HEADS) or not self.head_mask:
            raise ConfigError(f"head_mask must be a non-empty subset of {HEADS}")
        if not set(self.modality_mask) <= set(MODALITIES) or not self.modality_mask:
            raise ConfigError(f"modality_mask must be a non-empty subset of {MODALITIES}")
        if self.oversample_mode != "mean-inverse" and self.oversample_mode not in HEADS:
            raise ConfigError(f"oversample_mode must be 'mean-inverse' or one of "
                              f"{HEADS}, got {self.oversample_mode!r}")


def lr_at(step: int, steps_per_epoch: int, cfg: TrainConfig) -> float:
    """Triangular cyclical learning rate.

    Half-cycle s = lr_step_size_epochs * steps_per_epoch steps; the rate
    climbs linearly base -> max over s steps, back down over the next s,
    and repeats. Endpoints are returned exactly.
    """
    if step < 0:
        raise ConfigError(f"step must be >= 0, got {step}")
    s = cfg.lr_step_size_epochs * steps_per_epoch
    cycle = math.floor(1 + step / (2 * s))
    x = abs(step / s - 2 * cycle + 1)
    t = max(0.0, 1.0 - x)
    if t <= 0.0:
        return cfg.base_lr
    if t >= 1.0:
        return cfg.max_lr
    return cfg.base_lr + (cfg.max_lr - cfg.base_lr) * t


class AdamState:
    """First/second moments per parameter plus the shared step counter."""

    def __init__(self, params: list[Parameter]):
        self.m = {p.name: np.zeros_like(p.value) for p in params}
        self.v = {p.name: np.zeros_like(p.value) for p in params}
        self.t = 0


def adam_step(params: list[Parameter], state: AdamState, lr: float,
              cfg: TrainConfig) -> None:
    """One bias-corrected Adam update over all parameters."""
    state.t += 1
    bc1 = 1.0 - cfg.adam_beta1 ** state.t
    bc2 = 1.0 - cfg.adam_beta2 ** state.t
    for p in params:
        if not np.isfinite(p.grad).all():
            raise NumericsError(f"non-finite gradient for parameter {p.name} "
                                f"at step {state.t}")
        kernels.adam_update(p.value, p.grad, state.m[p.name], state.v[p.name],
                            lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps,
                            bc1, bc2)


@dataclass
class TrainResult:
    model: MmmtModel            # best-validation checkpoint
    log: list[dict]             # one entry per completed epoch
    best_epoch: int
    best_metric: float


def train(model: MmmtModel, train_records: list[FeatureRecord],
          val_records: list[FeatureRecord], cfg: TrainConfig) -> TrainResult:
    """Full training run; returns the best checkpoint and the epoch log.

    Per epoch: one oversampled index pass split into mini-batches (final
    partial batch kept), forward/loss/backward/Adam with the cyclical rate,
    then validation weighted F1 per enabled head. The checkpoint with the
    best mean validation F1 is retained; training stops after
    early_stop_patience_epochs epochs without improvement, or at max_epochs.
    """
    cfg.validate()
    if not train_records or not val_records:
        raise DataError("training and validation splits must be non-empty")

    steps_per_epoch = math.ceil(len(train_records) / cfg.batch_size)
    sample_rng = RngState(cfg.seed).derive(hash_tag("sample"))
    dropout_rng = RngState(cfg.seed).derive(hash_tag("dropout"))
    adam = AdamState(model.parameters())
    head_weights = cfg.head_weights or None

    labels_all = prepare_labels(model, gather_labels(train_records))
    best_metric = -math.inf
    best_epoch = -1
    best_params: dict[str, np.ndarray] | None = None
    epochs_since_best = 0
    log: list[dict] = []
    step = 0

    for epoch in range(cfg.max_epochs):
        order = oversample_indices(train_records, cfg.oversample_mode,
                                   seed=sample_rng.next_u64())
        epoch_lr = lr_at(step, steps_per_epoch, cfg)
        loss_sums = {h: 0.0 for h in cfg.head_mask}
        total_sum = 0.0
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            batch = [train_records[i] for i in idx]
            labels = {h: labels_all[h][idx] for h in cfg.head_mask}
            model.zero_grads()
            total, per_head = loss_and_grads(
                model, batch, cfg.modality_mask, cfg.head_mask, labels,
                training=True, rng=dropout_rng, head_weights=head_weights)
            if not math.isfinite(total):
                raise NumericsError(f"non-finite loss {total} at step {step}")
            adam_step(model.parameters(), adam, lr_at(step, steps_per_epoch, cfg), cfg)
            total_sum += total
            for h in per_head:
                loss_sums[h] += per_head[h]
            step += 1

        report = evaluate_model(model, val_records, cfg.modality_mask)
        f1s = head_f1_scores(report, cfg.head_mask)
        metric = sum(f1s.values()) / len(f1s)
        if metric > best_metric:
            best_metric = metric
            best_epoch = epoch
            best_params = {n: p.value.copy() for n, p in model.params.items()}
            epochs_since_best = 0
        else:
            epochs_since_best += 1

        log.append({
            "epoch": epoch,
            "lr": epoch_lr,
            "train_loss_total": total_sum / steps_per_epoch,
            "train_loss": {h: loss_sums[h] / steps_per_epoch for h in cfg.head_mask},
            "val_f1": f1s,
            "val_metric": metric,
            "best_metric": best_metric,
        })

        if cfg.early_stop_patience_epochs is not None and \
                epochs_since_best > cfg.early_stop_patience_epochs:
            break

    best = model.clone()
    assert best_params is not None
    for name, value in best_params.items():
        best.params[name].value[...] = value
    return TrainResult(model=best, log=log, best_epoch=best_epoch,
                       best_metric=best_metric)


def train_config_to_dict(cfg: TrainConfig) -> dict:
    d = asdict(cfg)
    d["head_mask"] = list(cfg.head_mask)
    d["modality_mask"] = list(cfg.modality_mask)
    return d
