"""Backend selection for the ANM hot loop.

The compiled extension ``starloc._anm_ext`` is used when it imports;
otherwise the numpy implementation in :mod:`starloc._anm_py` takes over.
Set ``STARLOC_BACKEND=python`` to force the fallback.
"""

import logging
import os

from . import _anm_py

log = logging.getLogger(__name__)

python_backend = _anm_py

try:
    from . import _anm_ext as compiled_backend
except ImportError:  # extension not built
    compiled_backend = None

if compiled_backend is not None and os.environ.get("STARLOC_BACKEND", "").lower() != "python":
    backend = compiled_backend
    BACKEND_NAME = "cython"
else:
    backend = python_backend
    BACKEND_NAME = "python"
    if compiled_backend is None:
        log.debug("compiled ANM kernels unavailable; using numpy fallback")


def get_backend(name=None):
    """Kernel module by name (``"cython"``/``"python"``), default the active one."""
    if name is None:
        return backend
    if name == "python":
        return python_backend
    if name == "cython":
        if compiled_backend is None:
            raise ImportError("starloc._anm_ext is not built")
        return compiled_backend
    raise ValueError(f"unknown backend {name!r}")
