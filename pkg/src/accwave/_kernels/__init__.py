"""Stepper kernel backend selection.

The compiled Cython kernel is preferred when built; the numpy fallback is
arithmetic-identical. Set ACCWAVE_FORCE_NUMPY_KERNEL=1 to force the fallback
(used by the equivalence tests and the benchmark).
"""

import os

from . import _stepper_np

if os.environ.get("ACCWAVE_FORCE_NUMPY_KERNEL"):
    _impl = _stepper_np
else:
    try:
        from . import _stepper_cy as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = _stepper_np

BACKEND = _impl.BACKEND
max_wave_speed = _impl.max_wave_speed
step_kernel = _impl.step_kernel
adam_fused = _impl.adam_fused

numpy_backend = _stepper_np


def cython_backend():
    """Return the compiled backend module, or None if it is not built."""
    try:
        from . import _stepper_cy  # type: ignore[attr-defined]
    except ImportError:
        return None
    return _stepper_cy
