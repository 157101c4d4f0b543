"""Hot numerical kernels with a compiled core and a pure-Python fallback.

At import time the compiled Cython extension is preferred; set
QNUIS_PURE_PYTHON=1 to force the numpy fallback. ``BACKEND`` records which
implementation is active. ``benchmarks/bench_kernels.py`` compares the two.
"""

import os

from . import _fallback

__all__ = [
    "BACKEND",
    "sld_eig_scale",
    "dcomm_eig_scale",
    "pair_gram",
    "cfim_from_table",
    "born_probs",
    "available_backends",
]

_impl = _fallback
BACKEND = "fallback"

if os.environ.get("QNUIS_PURE_PYTHON", "0") != "1":
    try:
        from . import _speedups as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        pass

sld_eig_scale = _impl.sld_eig_scale
dcomm_eig_scale = _impl.dcomm_eig_scale
pair_gram = _impl.pair_gram
cfim_from_table = _impl.cfim_from_table
born_probs = _impl.born_probs


def available_backends():
    """Mapping backend name -> module, for tests and benchmarks."""
    backends = {"fallback": _fallback}
    try:
        from . import _speedups

        backends["compiled"] = _speedups
    except ImportError:
        pass
    return backends
