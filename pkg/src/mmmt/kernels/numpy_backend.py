"""Pure-numpy reference implementations of the hot kernels.

Always importable; the numba backend mirrors these signatures exactly.
All kernels take and return float64 arrays.
"""

from __future__ import annotations

import numpy as np
from scipy.special import erf

NAME = "numpy"

_INV_SQRT2 = 0.7071067811865476
_INV_SQRT2PI = 0.3989422804014327


def gelu_fwd(x: np.ndarray) -> np.ndarray:
    """Exact erf-based GELU: x * Phi(x)."""
    return x * (0.5 * (1.0 + erf(x * _INV_SQRT2)))


def gelu_bwd(x: np.ndarray, dout: np.ndarray) -> np.ndarray:
    """dGELU/dx = Phi(x) + x * phi(x), scaled by the upstream gradient."""
    cdf = 0.5 * (1.0 + erf(x * _INV_SQRT2))
    pdf = np.exp(-0.5 * x * x) * _INV_SQRT2PI
    return dout * (cdf + x * pdf)


def softmax_rows(x: np.ndarray) -> np.ndarray:
    """Row-wise softmax of a 2-d array, max-subtracted for stability."""
    shifted = x - x.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def softmax_rows_bwd(probs: np.ndarray, dprobs: np.ndarray) -> np.ndarray:
    """Backward through row-wise softmax given its output probabilities."""
    inner = (dprobs * probs).sum(axis=1, keepdims=True)
    return probs * (dprobs - inner)


def layer_norm_fwd(x: np.ndarray, gain: np.ndarray, bias: np.ndarray, eps: float):
    """Per-row normalize-then-affine. Returns (out, xhat, inv_std)."""
    mu = x.mean(axis=1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv_std
    return xhat * gain + bias, xhat, inv_std


def layer_norm_bwd(dout: np.ndarray, xhat: np.ndarray, inv_std: np.ndarray,
                   gain: np.ndarray):
    """Returns (dx, dgain, dbias) for layer_norm_fwd."""
    dgain = (dout * xhat).sum(axis=0)
    dbias = dout.sum(axis=0)
    dxhat = dout * gain
    m1 = dxhat.mean(axis=1, keepdims=True)
    m2 = (dxhat * xhat).mean(axis=1, keepdims=True)
    dx = inv_std * (dxhat - m1 - xhat * m2)
    return dx, dgain, dbias


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def bce_with_logits(logits: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Elementwise binary cross-entropy in the stable log-sum form."""
    return np.maximum(logits, 0.0) - logits * targets + np.log1p(np.exp(-np.abs(logits)))


def adam_update(p: np.ndarray, g: np.ndarray, m: np.ndarray, v: np.ndarray,
                lr: float, beta1: float, beta2: float, eps: float,
                bc1: float, bc2: float) -> None:
    """One in-place Adam step; bc1/bc2 are the bias-correction denominators."""
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * (g * g)
    p -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
