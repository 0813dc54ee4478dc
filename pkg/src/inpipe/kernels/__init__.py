"""Hot-loop kernels with a compiled core and a pure-Python fallback.

The compiled extension is optional: if it failed to build (no C
compiler) or the environment variable ``INPIPE_PURE=1`` is set, the
pure-Python twins are used instead.  Both backends are bit-identical by
contract (enforced by the test suite), so replay hashes do not depend on
which one is active.

>>> from inpipe import kernels
>>> kernels.transmissibility(0.0, 0.4)
1.0
"""

from __future__ import annotations

import os

from . import _pure

if os.environ.get("INPIPE_PURE") == "1":
    _impl = _pure
else:
    try:
        from . import _core as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _pure

step_pose = _impl.step_pose
solve_center = _impl.solve_center
ring_forces = _impl.ring_forces
transmissibility = _impl.transmissibility
clean_decay = _impl.clean_decay
inject_spread = _impl.inject_spread


def backend_name() -> str:
    """Return which kernel backend is active: ``"compiled"`` or ``"pure"``."""
    return "pure" if _impl is _pure else "compiled"


__all__ = [
    "step_pose",
    "solve_center",
    "ring_forces",
    "transmissibility",
    "clean_decay",
    "inject_spread",
    "backend_name",
]
