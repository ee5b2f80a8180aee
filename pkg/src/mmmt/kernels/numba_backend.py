"""numba @njit implementations of the hot kernels.

Same signatures and semantics as numpy_backend; selected by default when
numba imports (see kernels/__init__). Loops are written flat so each
kernel compiles once and caches.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

NAME = "numba"

_INV_SQRT2 = 0.7071067811865476
_INV_SQRT2PI = 0.3989422804014327


@njit(cache=True)
def _gelu_fwd_flat(x, out):
    for i in range(x.size):
        v = x[i]
        out[i] = v * (0.5 * (1.0 + math.erf(v * _INV_SQRT2)))


def gelu_fwd(x: np.ndarray) -> np.ndarray:
    flat = np.ascontiguousarray(x, dtype=np.float64).ravel()
    out = np.empty_like(flat)
    _gelu_fwd_flat(flat, out)
    return out.reshape(x.shape)


@njit(cache=True)
def _gelu_bwd_flat(x, dout, dx):
    for i in range(x.size):
        v = x[i]
        cdf = 0.5 * (1.0 + math.erf(v * _INV_SQRT2))
        pdf = math.exp(-0.5 * v * v) * _INV_SQRT2PI
        dx[i] = dout[i] * (cdf + v * pdf)


def gelu_bwd(x: np.ndarray, dout: np.ndarray) -> np.ndarray:
    flat = np.ascontiguousarray(x, dtype=np.float64).ravel()
    dflat = np.ascontiguousarray(dout, dtype=np.float64).ravel()
    dx = np.empty_like(flat)
    _gelu_bwd_flat(flat, dflat, dx)
    return dx.reshape(x.shape)


@njit(cache=True)
def _softmax_rows(x, out):
    rows, cols = x.shape
    for r in range(rows):
        hi = x[r, 0]
        for c in range(1, cols):
            if x[r, c] > hi:
                hi = x[r, c]
        total = 0.0
        for c in range(cols):
            e = math.exp(x[r, c] - hi)
            out[r, c] = e
            total += e
        for c in range(cols):
            out[r, c] /= total


def softmax_rows(x: np.ndarray) -> np.ndarray:
    x = np.ascontiguousarray(x, dtype=np.float64)
    out = np.empty_like(x)
    _softmax_rows(x, out)
    return out


@njit(cache=True)
def _softmax_rows_bwd(probs, dprobs, dx):
    rows, cols = probs.shape
    for r in range(rows):
        inner = 0.0
        for c in range(cols):
            inner += dprobs[r, c] * probs[r, c]
        for c in range(cols):
            dx[r, c] = probs[r, c] * (dprobs[r, c] - inner)


def softmax_rows_bwd(probs: np.ndarray, dprobs: np.ndarray) -> np.ndarray:
    probs = np.ascontiguousarray(probs, dtype=np.float64)
    dprobs = np.ascontiguousarray(dprobs, dtype=np.float64)
    dx = np.empty_like(probs)
    _softmax_rows_bwd(probs, dprobs, dx)
    return dx


@njit(cache=True)
def _layer_norm_fwd(x, gain, bias, eps, out, xhat, inv_std):
    rows, cols = x.shape
    for r in range(rows):
        mu = 0.0
        for c in range(cols):
            mu += x[r, c]
        mu /= cols
        var = 0.0
        for c in range(cols):
            d = x[r, c] - mu
            var += d * d
        var /= cols
        istd = 1.0 / math.sqrt(var + eps)
        inv_std[r, 0] = istd
        for c in range(cols):
            h = (x[r, c] - mu) * istd
            xhat[r, c] = h
            out[r, c] = h * gain[c] + bias[c]


def layer_norm_fwd(x: np.ndarray, gain: np.ndarray, bias: np.ndarray, eps: float):
    x = np.ascontiguousarray(x, dtype=np.float64)
    out = np.empty_like(x)
    xhat = np.empty_like(x)
    inv_std = np.empty((x.shape[0], 1), dtype=np.float64)
    _layer_norm_fwd(x, gain, bias, eps, out, xhat, inv_std)
    return out, xhat, inv_std


@njit(cache=True)
def _layer_norm_bwd(dout, xhat, inv_std, gain, dx, dgain, dbias):
    rows, cols = dout.shape
    for c in range(cols):
        dgain[c] = 0.0
        dbias[c] = 0.0
    for r in range(rows):
        m1 = 0.0
        m2 = 0.0
        for c in range(cols):
            dgain[c] += dout[r, c] * xhat[r, c]
            dbias[c] += dout[r, c]
            dh = dout[r, c] * gain[c]
            m1 += dh
            m2 += dh * xhat[r, c]
        m1 /= cols
        m2 /= cols
        istd = inv_std[r, 0]
        for c in range(cols):
            dh = dout[r, c] * gain[c]
            dx[r, c] = istd * (dh - m1 - xhat[r, c] * m2)


def layer_norm_bwd(dout: np.ndarray, xhat: np.ndarray, inv_std: np.ndarray,
                   gain: np.ndarray):
    dout = np.ascontiguousarray(dout, dtype=np.float64)
    dx = np.empty_like(dout)
    dgain = np.empty(dout.shape[1], dtype=np.float64)
    dbias = np.empty(dout.shape[1], dtype=np.float64)
    _layer_norm_bwd(dout, xhat, inv_std, gain, dx, dgain, dbias)
    return dx, dgain, dbias


@njit(cache=True)
def _sigmoid_flat(x, out):
    for i in range(x.size):
        v = x[i]
        if v >= 0.0:
            out[i] = 1.0 / (1.0 + math.exp(-v))
        else:
            e = math.exp(v)
            out[i] = e / (1.0 + e)


def sigmoid(x: np.ndarray) -> np.ndarray:
    flat = np.ascontiguousarray(x, dtype=np.float64).ravel()
    out = np.empty_like(flat)
    _sigmoid_flat(flat, out)
    return out.reshape(x.shape)


@njit(cache=True)
def _bce_flat(logits, targets, out):
    for i in range(logits.size):
        l = logits[i]
        out[i] = max(l, 0.0) - l * targets[i] + math.log1p(math.exp(-abs(l)))


def bce_with_logits(logits: np.ndarray, targets: np.ndarray) -> np.ndarray:
    lf = np.ascontiguousarray(logits, dtype=np.float64).ravel()
    tf = np.ascontiguousarray(targets, dtype=np.float64).ravel()
    out = np.empty_like(lf)
    _bce_flat(lf, tf, out)
    return out.reshape(logits.shape)


@njit(cache=True)
def _adam_flat(p, g, m, v, lr, beta1, beta2, eps, bc1, bc2):
    for i in range(p.size):
        mi = beta1 * m[i] + (1.0 - beta1) * g[i]
        vi = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i]
        m[i] = mi
        v[i] = vi
        p[i] -= lr * (mi / bc1) / (math.sqrt(vi / bc2) + eps)


def adam_update(p: np.ndarray, g: np.ndarray, m: np.ndarray, v: np.ndarray,
                lr: float, beta1: float, beta2: float, eps: float,
                bc1: float, bc2: float) -> None:
    _adam_flat(p.ravel(), g.ravel(), m.ravel(), v.ravel(),
               lr, beta1, beta2, eps, bc1, bc2)
