import numpy as np
import pytest

from mmmt.data_io import generate_synthetic
from mmmt.model import ModelConfig

SMALL_DIMS = (8, 6, 7)


def small_config(**overrides) -> ModelConfig:
    """Tiny architecture with the same shape as the default: 4 layers,
    mixed head counts, adapter bottleneck. Cheap enough for exhaustive
    finite differences."""
    base = dict(d_image=8, d_clip=6, d_text=7, d_common=16, d_model=8,
                layers=4, heads_per_layer=(2, 2, 4, 4), ff_multiplier=4,
                dropout_rate=0.0)
    base.update(overrides)
    return ModelConfig(**base)


@pytest.fixture
def tiny_batch():
    return generate_synthetic(2, seed=5, separability=0.5, dims=SMALL_DIMS)


@pytest.fixture
def small_records():
    return generate_synthetic(12, seed=9, separability=0.7, dims=SMALL_DIMS)


def relative_error(a: float, n: float) -> float:
    return abs(a - n) / max(1.0, abs(a), abs(n))


def finite_diff_grads(f, params, eps=1e-5):
    """Independent central-difference gradient oracle over Parameter lists."""
    grads = []
    for p in params:
        flat = p.value.ravel()
        g = np.empty_like(flat)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            fp = f()
            flat[i] = orig - eps
            fm = f()
            flat[i] = orig
            g[i] = (fp - fm) / (2 * eps)
        grads.append(g.reshape(p.value.shape))
    return grads
