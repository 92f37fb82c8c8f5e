"""Kernel backend selection.

The compiled extension is preferred when importable; PRIOMAC_BACKEND=pure
forces the fallback and PRIOMAC_BACKEND=compiled makes a missing extension
an import error instead of a silent downgrade.
"""

import os

_choice = os.environ.get("PRIOMAC_BACKEND", "").strip().lower()
if _choice not in ("", "pure", "compiled"):
    raise ImportError(
        f"PRIOMAC_BACKEND must be 'pure' or 'compiled', not {_choice!r}"
    )

if _choice == "pure":
    from ._pykernels import Channel, EventQueue, fuzzy_core

    BACKEND = "pure"
else:
    try:
        from ._kernels import Channel, EventQueue, fuzzy_core

        BACKEND = "compiled"
    except ImportError:
        if _choice == "compiled":
            raise
        from ._pykernels import Channel, EventQueue, fuzzy_core

        BACKEND = "pure"

__all__ = ["BACKEND", "Channel", "EventQueue", "fuzzy_core"]
