"""Backend selection for the hot kernels.

The compiled extension is used when it imports; otherwise, or when
``BSDIB_PURE_PYTHON=1`` is set, the pure-Python kernels are used.
"""

import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("BSDIB_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # noqa: F811

        BACKEND = "cython"
    except ImportError:
        pass

cell_matrices = _impl.cell_matrices
face_matrices = _impl.face_matrices
imex_rhs = _impl.imex_rhs


def get_backend(name):
    """Return the kernel module for ``"python"`` or ``"cython"`` (raises ImportError if unavailable)."""
    if name == "python":
        return _pykernels
    if name == "cython":
        from . import _ckernels

        return _ckernels
    raise ValueError(f"unknown kernel backend {name!r}")
