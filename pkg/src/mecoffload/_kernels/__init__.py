"""Numeric core selection: compiled extension when importable, numpy fallback otherwise.

Set MECOFFLOAD_KERNELS=python or =cython to force a backend.
"""
import os

_requested = os.environ.get("MECOFFLOAD_KERNELS", "").strip().lower()

if _requested == "python":
    from . import pykernels as _impl
elif _requested == "cython":
    from . import _cykernels as _impl
elif _requested == "":
    try:
        from . import _cykernels as _impl
    except ImportError:
        from . import pykernels as _impl
else:
    raise ImportError(f"MECOFFLOAD_KERNELS must be 'python' or 'cython', got {_requested!r}")

BACKEND = _impl.BACKEND_NAME
golden_batch = _impl.golden_batch
stage_update = _impl.stage_update
stage_update_discrete = _impl.stage_update_discrete
