"""CORAL ordinal-regression head.

One shared scalar projection g(x) = <x, w> per sample plus K-1 threshold
biases. Extended labels encode rank r as r ones followed by zeros; the loss
is the sum of per-threshold binary cross-entropies, and prediction counts
thresholds whose logit is positive.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, LabelError
from .tensor_core import Parameter, Tensor, bce_with_logits, sigmoid


@dataclass
class CoralHead:
    """Shared logit projection w (d_model) and K-1 threshold biases."""

    w: Parameter
    b: Parameter
    num_classes: int

    def __post_init__(self):
        if self.num_classes < 2:
            raise DimensionError(f"CORAL head needs K >= 2, got {self.num_classes}")
        if self.b.value.shape != (self.num_classes - 1,):
            raise DimensionError(
                f"CORAL head K={self.num_classes} needs {self.num_classes - 1} "
                f"biases, got shape {tuple(self.b.value.shape)}")
        if self.w.value.ndim != 1:
            raise DimensionError(
                f"CORAL weight must be a vector, got shape {tuple(self.w.value.shape)}")


def extend_labels(rank: int, num_classes: int) -> np.ndarray:
    """Rank r in [0, K-1] -> K-1 bits, the first r set."""
    if not 0 <= rank < num_classes:
        raise LabelError(f"rank {rank} outside [0, {num_classes - 1}]")
    bits = np.zeros(num_classes - 1, dtype=np.float64)
    bits[:rank] = 1.0
    return bits


def extend_labels_batch(ranks: np.ndarray, num_classes: int) -> np.ndarray:
    """Vectorized label extension; raises on any out-of-range rank."""
    ranks = np.asarray(ranks)
    bad = (ranks < 0) | (ranks >= num_classes)
    if bad.any():
        i = int(np.argmax(bad))
        raise LabelError(f"rank {int(ranks[i])} outside [0, {num_classes - 1}] "
                         f"at batch index {i}")
    thresholds = np.arange(num_classes - 1)
    return (ranks[:, None] > thresholds[None, :]).astype(np.float64)


def coral_forward(pooled: Tensor, head: CoralHead) -> Tensor:
    """Logits [batch, K-1]: logit_k = <pooled, w> + b_k."""
    if pooled.ndim != 2 or pooled.shape[1] != head.w.value.shape[0]:
        raise DimensionError(
            f"pooled shape {tuple(pooled.shape)} incompatible with head dim "
            f"{head.w.value.shape[0]}")
    g = pooled @ head.w.value
    return g[:, None] + head.b.value[None, :]


def coral_forward_backward(dlogits: Tensor, pooled: Tensor, head: CoralHead) -> Tensor:
    """Accumulates head gradients, returns dpooled."""
    dg = dlogits.sum(axis=1)
    head.w.grad += pooled.T @ dg
    head.b.grad += dlogits.sum(axis=0)
    return dg[:, None] * head.w.value[None, :]


def coral_loss(logits: Tensor, extended: Tensor) -> float:
    """Mean over the batch of the summed per-threshold BCEs."""
    if logits.shape != extended.shape:
        raise DimensionError(
            f"logits shape {tuple(logits.shape)} != labels shape {tuple(extended.shape)}")
    per_sample = bce_with_logits(logits, extended).sum(axis=1)
    return float(per_sample.mean())


def coral_loss_grad(logits: Tensor, extended: Tensor) -> Tensor:
    """d(coral_loss)/d(logits) = (sigma(logit) - bit) / batch."""
    return (sigmoid(logits) - extended) / logits.shape[0]


def coral_predict(logits: Tensor) -> np.ndarray:
    """Rank per sample: number of strictly positive threshold logits."""
    return (np.asarray(logits) > 0.0).sum(axis=1).astype(np.int64)
