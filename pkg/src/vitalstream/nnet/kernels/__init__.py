"""Kernel backend selection.

The compiled extension is preferred when built; otherwise the numpy
reference kernels are used. Both expose the same four functions with
identical semantics. Set ``VITALSTREAM_KERNELS=numpy`` to force the
fallback (e.g. for benchmarking) or ``=compiled`` to fail loudly when the
extension is missing.
"""

import os

_choice = os.environ.get("VITALSTREAM_KERNELS", "auto").strip().lower()
if _choice not in ("auto", "numpy", "compiled"):
    raise ValueError(f"VITALSTREAM_KERNELS must be auto|numpy|compiled, got {_choice!r}")

BACKEND = "numpy"
if _choice in ("auto", "compiled"):
    try:
        from ._fast import (  # noqa: F401
            conv1d_backward,
            conv1d_forward,
            maxpool1d_backward,
            maxpool1d_forward,
        )
        BACKEND = "compiled"
    except ImportError:
        if _choice == "compiled":
            raise

if BACKEND == "numpy":
    from .reference import (  # noqa: F401
        conv1d_backward,
        conv1d_forward,
        maxpool1d_backward,
        maxpool1d_forward,
    )

__all__ = ["BACKEND", "conv1d_forward", "conv1d_backward",
           "maxpool1d_forward", "maxpool1d_backward"]
