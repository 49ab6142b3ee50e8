"""Select the compiled kernels when available, else the numpy fallback.

Set ``PMERGE_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _pykernels

if os.environ.get("PMERGE_PURE_PYTHON", "") not in ("", "0"):
    impl = _pykernels
else:
    try:
        from . import _kernels as impl
    except ImportError:  # extension not built
        impl = _pykernels

BACKEND = impl.BACKEND
calibrate = impl.calibrate
bisect_rows = impl.bisect_rows
ex_quantile_min = impl.ex_quantile_min
ex_tight = impl.ex_tight

# codes are shared by both backends
RUGER = _pykernels.RUGER
GRID_HARMONIC = _pykernels.GRID_HARMONIC
GENERALIZED_GRID = _pykernels.GENERALIZED_GRID
ARITHMETIC = _pykernels.ARITHMETIC
HARMONIC = _pykernels.HARMONIC
GEOMETRIC = _pykernels.GEOMETRIC
GENERALIZED_MEAN = _pykernels.GENERALIZED_MEAN
PREFIX_MAX = _pykernels.PREFIX_MAX
BATCH_THRESHOLD = _pykernels.BATCH_THRESHOLD
EX_OR_RAND = _pykernels.EX_OR_RAND
TIGHT_ARITHMETIC = _pykernels.TIGHT_ARITHMETIC
TIGHT_HARMONIC = _pykernels.TIGHT_HARMONIC
TIGHT_GEOMETRIC = _pykernels.TIGHT_GEOMETRIC


def backends():
    """All importable backend modules, keyed by name (used by tests and the benchmark)."""
    out = {"python": _pykernels}
    try:
        from . import _kernels
        out["cython"] = _kernels
    except ImportError:
        pass
    return out
