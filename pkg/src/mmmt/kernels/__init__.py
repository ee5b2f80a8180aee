"""Hot-kernel backend selection.

Two interchangeable backends live here: numba @njit loops and a pure
numpy fallback. The env var MMMT_BACKEND picks one explicitly
("numba" / "numpy"); unset, numba is used when importable. The active
choice is exported as BACKEND. Everything above this package is
backend-agnostic.
"""

import os

from . import numpy_backend

_requested = os.environ.get("MMMT_BACKEND", "").strip().lower()

if _requested == "numpy":
    _impl = numpy_backend
elif _requested == "numba":
    from . import numba_backend as _impl
elif _requested == "":
    try:
        from . import numba_backend as _impl
    except ImportError:
        _impl = numpy_backend
else:
    raise RuntimeError(f"MMMT_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

BACKEND = _impl.NAME

gelu_fwd = _impl.gelu_fwd
gelu_bwd = _impl.gelu_bwd
softmax_rows = _impl.softmax_rows
softmax_rows_bwd = _impl.softmax_rows_bwd
layer_norm_fwd = _impl.layer_norm_fwd
layer_norm_bwd = _impl.layer_norm_bwd
sigmoid = _impl.sigmoid
bce_with_logits = _impl.bce_with_logits
adam_update = _impl.adam_update
