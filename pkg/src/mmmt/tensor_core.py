"""Dense-tensor primitives with forward ops, analytic backwards, and a
finite-difference gradient checker.

Tensors are plain float64 numpy arrays (row-major, 1-3 dims). There is no
autodiff tape: each op exposes an explicit backward function and the model
module composes them in reverse. All elementwise/rowwise inner loops are
delegated to the selected kernel backend (see mmmt.kernels).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ConfigError, DimensionError
from .rng import RngState

Tensor = np.ndarray

_LN_EPS_DEFAULT = 1e-5


@dataclass
class Parameter:
    """A named trainable tensor and its gradient accumulator."""

    name: str
    value: Tensor
    grad: Tensor = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        self.value = np.asarray(self.value, dtype=np.float64)
        if self.grad is None:
            self.grad = np.zeros_like(self.value)
        elif self.grad.shape != self.value.shape:
            raise DimensionError(
                f"parameter {self.name}: grad shape {self.grad.shape} "
                f"!= value shape {self.value.shape}")


def zero_grads(params: list[Parameter]) -> None:
    for p in params:
        p.grad[...] = 0.0


# ---------------------------------------------------------------------------
# matmul

def matmul(a: Tensor, b: Tensor) -> Tensor:
    """2-d matrix product with shape validation."""
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul shape mismatch: {tuple(a.shape)} @ {tuple(b.shape)}")
    return a @ b


def matmul_backward(dout: Tensor, a: Tensor, b: Tensor) -> tuple[Tensor, Tensor]:
    """Gradients of matmul: dA = dC @ B^T, dB = A^T @ dC."""
    return dout @ b.T, a.T @ dout


# ---------------------------------------------------------------------------
# elementwise / rowwise ops (kernel-backed)

def gelu(x: Tensor) -> Tensor:
    """Exact GELU, x * Phi(x) with the erf-based normal CDF."""
    return kernels.gelu_fwd(np.asarray(x, dtype=np.float64))


def gelu_backward(x: Tensor, dout: Tensor) -> Tensor:
    return kernels.gelu_bwd(x, dout)


def softmax_rows(x: Tensor) -> Tensor:
    """Stabilized softmax over the rows of a 2-d tensor. Rows sum to 1."""
    if x.ndim != 2:
        raise DimensionError(f"softmax_rows expects 2-d input, got shape {tuple(x.shape)}")
    return kernels.softmax_rows(np.asarray(x, dtype=np.float64))


def softmax_rows_backward(probs: Tensor, dprobs: Tensor) -> Tensor:
    return kernels.softmax_rows_bwd(probs, dprobs)


def layer_norm(x: Tensor, gain: Parameter, bias: Parameter,
               eps: float = _LN_EPS_DEFAULT) -> Tensor:
    """Per-row zero-mean unit-variance normalization, then affine."""
    out, _, _ = layer_norm_forward(x, gain.value, bias.value, eps)
    return out


def layer_norm_forward(x: Tensor, gain: Tensor, bias: Tensor,
                       eps: float = _LN_EPS_DEFAULT):
    """Cached variant for composition: returns (out, xhat, inv_std)."""
    if eps <= 0:
        raise ConfigError(f"layer_norm eps must be positive, got {eps}")
    if x.ndim != 2 or x.shape[1] != gain.shape[0] or x.shape[1] != bias.shape[0]:
        raise DimensionError(
            f"layer_norm shapes: x {tuple(x.shape)}, gain {tuple(gain.shape)}, "
            f"bias {tuple(bias.shape)}")
    return kernels.layer_norm_fwd(np.asarray(x, dtype=np.float64), gain, bias, eps)


def layer_norm_backward(dout: Tensor, xhat: Tensor, inv_std: Tensor, gain: Tensor):
    """Returns (dx, dgain, dbias)."""
    return kernels.layer_norm_bwd(dout, xhat, inv_std, gain)


def sigmoid(x: Tensor) -> Tensor:
    return kernels.sigmoid(np.asarray(x, dtype=np.float64))


def bce_with_logits(logits: Tensor, targets: Tensor) -> Tensor:
    """Elementwise binary cross-entropy, stable log-sum form (never log 0)."""
    return kernels.bce_with_logits(logits, np.asarray(targets, dtype=np.float64))


# ---------------------------------------------------------------------------
# dropout

def dropout(x: Tensor, rate: float, rng: RngState, training: bool) -> Tensor:
    """Inverted dropout. Identity when not training or rate == 0."""
    y, _ = dropout_forward(x, rate, rng, training)
    return y


def dropout_forward(x: Tensor, rate: float, rng: RngState, training: bool):
    """Returns (out, scaled_mask). Backward is dout * scaled_mask.

    rate == 0 and eval mode consume no randomness.
    """
    if not 0.0 <= rate < 1.0:
        raise ConfigError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x, None
    keep = (rng.uniform(x.size) >= rate).astype(np.float64).reshape(x.shape)
    scaled = keep / (1.0 - rate)
    return x * scaled, scaled


def dropout_backward(dout: Tensor, scaled_mask) -> Tensor:
    if scaled_mask is None:
        return dout
    return dout * scaled_mask


# ---------------------------------------------------------------------------
# gradient checking

def grad_check(f, params: list[Parameter], eps: float = 1e-5,
               max_elements_per_param: int | None = None,
               rng: RngState | None = None) -> float:
    """Worst relative error between param.grad and central differences of f.

    `f` is a zero-argument callable returning the scalar loss at the current
    parameter values; the caller must have populated each param's .grad with
    the analytic gradient at the unperturbed point before calling. Relative
    error is |a - n| / max(1, |a|, |n|).

    When `max_elements_per_param` is set, that many coordinates per parameter
    are checked, chosen deterministically from `rng` (full sweep otherwise).
    """
    worst = 0.0
    for p in params:
        flat_v = p.value.ravel()
        flat_g = p.grad.ravel()
        n = flat_v.size
        if max_elements_per_param is not None and n > max_elements_per_param:
            if rng is None:
                rng = RngState(0)
            indices = sorted({rng.next_below(n) for _ in range(max_elements_per_param)})
        else:
            indices = range(n)
        for i in indices:
            orig = flat_v[i]
            flat_v[i] = orig + eps
            f_plus = f()
            flat_v[i] = orig - eps
            f_minus = f()
            flat_v[i] = orig
            numeric = (f_plus - f_minus) / (2.0 * eps)
            analytic = flat_g[i]
            rel = abs(analytic - numeric) / max(1.0, abs(analytic), abs(numeric))
            if rel > worst:
                worst = rel
    return worst
