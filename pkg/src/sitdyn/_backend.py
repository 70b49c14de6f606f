"""Kernel selection: compiled extension if available, pure Python otherwise.

Importing this module binds ``run_steps``, ``classify_fate``,
``query_below``, ``query_many``, and ``entry_steps`` to either the
compiled ``sitdyn._kernel`` or the pure-Python ``sitdyn._fallback``
implementation.  Setting the environment variable ``SITDYN_PURE=1``
forces the fallback even when the extension is importable (useful for
benchmarking and for debugging the kernels themselves).
"""

from __future__ import annotations

import os

from sitdyn._fallback import (
    PV_CAPACITY,
    PV_COMPET,
    PV_EGG_DEATH,
    PV_EGG_LAY,
    PV_ENCOUNTER,
    PV_FEMALE_DEATH,
    PV_FEMALE_FRAC,
    PV_MALE_DEATH,
    PV_MATURATION,
    PV_SIZE,
    PV_STERILE_DEATH,
)

__all__ = [
    "BACKEND",
    "COMPILED",
    "run_steps",
    "classify_fate",
    "query_below",
    "query_many",
    "entry_steps",
    "PV_EGG_LAY",
    "PV_CAPACITY",
    "PV_FEMALE_FRAC",
    "PV_MATURATION",
    "PV_EGG_DEATH",
    "PV_MALE_DEATH",
    "PV_FEMALE_DEATH",
    "PV_ENCOUNTER",
    "PV_COMPET",
    "PV_STERILE_DEATH",
    "PV_SIZE",
]

if os.environ.get("SITDYN_PURE", "").strip() not in ("", "0"):
    _impl = None
else:
    try:
        from sitdyn import _kernel as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = None

if _impl is None:
    from sitdyn import _fallback as _impl  # noqa: F811

run_steps = _impl.run_steps
classify_fate = _impl.classify_fate
query_below = _impl.query_below
query_many = _impl.query_many
entry_steps = _impl.entry_steps
COMPILED: bool = bool(_impl.COMPILED)
BACKEND: str = "compiled" if COMPILED else "pure-python"
