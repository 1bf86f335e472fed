"""Kernel backend selection.

The hot kernels (MLP forward passes with analytic input derivatives and the
matching reverse-mode parameter gradients) exist twice: a compiled Cython
extension (``_core``) and a pure-numpy twin (``numpy_backend``).  The
extension is picked at import when present; set ``MFG_BACKEND=numpy`` or
``MFG_BACKEND=cython`` to force one side.  Both compute the same recursions;
results agree to floating-point roundoff but are not bitwise identical, so
seeds reproduce runs only within one backend.
"""

import os

from . import numpy_backend

_choice = os.environ.get("MFG_BACKEND", "auto").lower()

if _choice == "numpy":
    impl = numpy_backend
elif _choice == "cython":
    from . import _core as impl  # raises if the extension was not built
elif _choice == "auto":
    try:
        from . import _core as impl
    except ImportError:
        impl = numpy_backend
else:
    raise ValueError(f"MFG_BACKEND must be auto, numpy or cython, got {_choice!r}")

IDENTITY = numpy_backend.IDENTITY
EXP = numpy_backend.EXP


def backend_name():
    return impl.name


value_forward = impl.value_forward
value_forward_ctx = impl.value_forward_ctx
value_backward = impl.value_backward
partials_forward_ctx = impl.partials_forward_ctx
partials_backward = impl.partials_backward
