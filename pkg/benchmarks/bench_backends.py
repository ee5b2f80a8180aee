#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Times each hot kernel on shapes the model actually uses, plus one full
training step. Run after `pip install -e .`:

    python benchmarks/bench_backends.py
"""

import time

import numpy as np

from mmmt.kernels import numpy_backend

try:
    from mmmt.kernels import numba_backend
except ImportError:
    numba_backend = None

from mmmt.data_io import gather_labels, generate_synthetic
from mmmt.model import ModelConfig, init_model, loss_and_grads
from mmmt.rng import RngState
from mmmt.training import AdamState, TrainConfig, adam_step


def bench(fn, *args, repeat=200):
    fn(*args)  # warm-up / JIT compile
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn(*args)
    return (time.perf_counter() - t0) / repeat


def kernel_benchmarks():
    rng = RngState(0)
    rows, cols = 768, 64          # batch 256 x 3 tokens at d_model 64
    x = rng.gaussian(rows * cols).reshape(rows, cols)
    gain = rng.gaussian(cols) + 1.0
    bias = rng.gaussian(cols)
    dout = rng.gaussian(rows * cols).reshape(rows, cols)
    big = rng.gaussian(rows * 256).reshape(rows, 256)

    cases = [
        ("gelu_fwd [768x256]", lambda impl: impl.gelu_fwd(big)),
        ("gelu_bwd [768x256]", lambda impl: impl.gelu_bwd(big, big)),
        ("softmax_rows [768x64]", lambda impl: impl.softmax_rows(x)),
        ("layer_norm_fwd [768x64]",
         lambda impl: impl.layer_norm_fwd(x, gain, bias, 1e-5)),
    ]

    o, h, i = numpy_backend.layer_norm_fwd(x, gain, bias, 1e-5)
    cases.append(("layer_norm_bwd [768x64]",
                  lambda impl: impl.layer_norm_bwd(dout, h, i, gain)))

    p = x.copy()
    m = np.zeros_like(p)
    v = np.zeros_like(p)
    cases.append(("adam_update [768x64]",
                  lambda impl: impl.adam_update(p, dout, m, v, 1e-3, 0.9,
                                                0.999, 1e-8, 0.1, 0.001)))

    print(f"{'kernel':<26} {'numpy':>10} {'numba':>10} {'speedup':>8}")
    for name, call in cases:
        t_np = bench(lambda: call(numpy_backend))
        if numba_backend is None:
            print(f"{name:<26} {t_np * 1e6:>8.1f}us {'n/a':>10}")
            continue
        t_nb = bench(lambda: call(numba_backend))
        print(f"{name:<26} {t_np * 1e6:>8.1f}us {t_nb * 1e6:>8.1f}us "
              f"{t_np / t_nb:>7.2f}x")


def train_step_benchmark():
    records = generate_synthetic(64, seed=1, separability=0.5)
    labels = gather_labels(records)
    model = init_model(ModelConfig(), RngState(0))
    cfg = TrainConfig()
    adam = AdamState(model.parameters())
    rng = RngState(3)

    def step():
        model.zero_grads()
        loss_and_grads(model, records, labels=labels, training=True, rng=rng)
        adam_step(model.parameters(), adam, 1e-4, cfg)

    t = bench(step, repeat=20)
    print(f"\nfull train step (batch 64, default config): {t * 1e3:.1f} ms "
          f"(active backend: {__import__('mmmt.kernels', fromlist=['BACKEND']).BACKEND})")


if __name__ == "__main__":
    kernel_benchmarks()
    train_step_benchmark()
