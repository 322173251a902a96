"""Numeric kernel selection.

Prefers the compiled Cython extension and falls back to the pure-Python
implementation when the extension is missing or MQAG_PURE_PYTHON=1 is set.
Both expose the same functions with identical semantics.
"""

from __future__ import annotations

import os

if os.environ.get("MQAG_PURE_PYTHON") == "1":
    from . import _fallback as _impl

    KERNEL_BACKEND = "python"
else:
    try:
        from . import _speedups as _impl  # type: ignore[no-redef]

        KERNEL_BACKEND = "cython"
    except ImportError:
        from . import _fallback as _impl  # type: ignore[no-redef]

        KERNEL_BACKEND = "python"

kl_div = _impl.kl_div
total_variation = _impl.total_variation
hellinger = _impl.hellinger
one_best = _impl.one_best
entropy2 = _impl.entropy2
lcs_length = _impl.lcs_length

__all__ = [
    "KERNEL_BACKEND",
    "entropy2",
    "hellinger",
    "kl_div",
    "lcs_length",
    "one_best",
    "total_variation",
]
