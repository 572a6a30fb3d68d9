"""Hot-loop kernels with compiled/pure backend selection.

The Cython extension `_core` is preferred when importable; the
pure-numpy `_reference` module is the fallback. Set the environment
variable TLSPECTRO_PURE_PYTHON=1 before import to force the fallback
(used by the benchmark and the backend equality test).
"""

import os

from . import _reference

__all__ = ["BACKEND", "tls_susceptibility", "reference"]

reference = _reference

if os.environ.get("TLSPECTRO_PURE_PYTHON", "") not in ("", "0"):
    BACKEND = "python"
    tls_susceptibility = _reference.tls_susceptibility
else:
    try:
        from . import _core

        BACKEND = "compiled"
        tls_susceptibility = _core.tls_susceptibility
    except ImportError:
        BACKEND = "python"
        tls_susceptibility = _reference.tls_susceptibility
