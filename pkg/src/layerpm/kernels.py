"""Kernel backend selection.

Prefers the compiled extension, falls back to the pure-Python twin.
LAYERPM_KERNELS=py forces the fallback; LAYERPM_KERNELS=c requires the
extension (ImportError if it was not built).
"""

from __future__ import annotations

import os

_forced = os.environ.get("LAYERPM_KERNELS", "").strip().lower()

if _forced in ("py", "python"):
    from layerpm import _kernels_py as _impl

    BACKEND = "python"
elif _forced == "c":
    from layerpm import _kernels_c as _impl  # type: ignore[no-redef]

    BACKEND = "c"
else:
    try:
        from layerpm import _kernels_c as _impl  # type: ignore[no-redef]

        BACKEND = "c"
    except ImportError:
        from layerpm import _kernels_py as _impl  # type: ignore[no-redef]

        BACKEND = "python"

closure = _impl.closure
reverse_closure = _impl.reverse_closure
lex_topo = _impl.lex_topo
kahn_layers = _impl.kahn_layers


def backend_name() -> str:
    return BACKEND
