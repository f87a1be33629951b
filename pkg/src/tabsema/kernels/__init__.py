"""Hot-kernel dispatch: compiled extension if available, numpy fallback otherwise.

Set TABSEMA_PURE_PYTHON=1 to force the fallback (used by the benchmark and
for debugging).
"""

import os

from . import _pykernels

if os.environ.get("TABSEMA_PURE_PYTHON"):
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels
        BACKEND = "python"

jaro = _impl.jaro
gru_sequence = _impl.gru_sequence

__all__ = ["jaro", "gru_sequence", "BACKEND"]
