"""Backend selection for the hot loops.

The compiled extension is used when it imports cleanly.  Setting the
environment variable ``SPECTRAL_LAB_PURE=1`` forces the numpy fallback,
which is handy for cross-checking and for platforms without a compiler.
"""

import os

from . import _pykernels

SINC = _pykernels.SINC
GAUSS = _pykernels.GAUSS

_NAMES = (
    "transfer_final",
    "transfer_path",
    "propagate_vector",
    "pk_cumulative",
    "norm_sums",
    "atom_sum",
    "jump_sum",
    "cross_sum",
)


def _load():
    if os.environ.get("SPECTRAL_LAB_PURE", "") not in ("", "0"):
        return _pykernels, "python"
    try:
        from . import _ckernels
    except ImportError:
        return _pykernels, "python"
    return _ckernels, "compiled"


_impl, BACKEND = _load()

transfer_final = _impl.transfer_final
transfer_path = _impl.transfer_path
propagate_vector = _impl.propagate_vector
pk_cumulative = _impl.pk_cumulative
norm_sums = _impl.norm_sums
atom_sum = _impl.atom_sum
jump_sum = _impl.jump_sum
cross_sum = _impl.cross_sum


def backend_module(name):
    """Return the kernel module for ``"python"`` or ``"compiled"``."""
    if name == "python":
        return _pykernels
    if name == "compiled":
        from . import _ckernels

        return _ckernels
    raise ValueError(f"unknown backend {name!r}")
