"""Kernel backend selection.

The hot kernels (residual-net forward/backward, self-financing panel
recursions) exist twice: a compiled Cython core (``rlhedge.kernels._core``)
and a pure-numpy fallback.  The compiled core is used when importable;
``RLHEDGE_BACKEND=numpy|compiled`` forces a choice (``compiled`` raises if
the extension is missing).  ``benchmarks/bench_backends.py`` compares both.
"""

import os

from . import numpy_backend

_choice = os.environ.get("RLHEDGE_BACKEND", "auto").lower()

if _choice == "numpy":
    _impl = numpy_backend
elif _choice == "compiled":
    from . import _core as _impl  # noqa: F401  (ImportError is the contract)
else:
    try:
        from . import _core as _impl
    except ImportError:
        _impl = numpy_backend

BACKEND = _impl.NAME

resnet_forward = _impl.resnet_forward
resnet_backward = _impl.resnet_backward
qlbs_backward_panel = _impl.qlbs_backward_panel
rlop_forward_panels = _impl.rlop_forward_panels
