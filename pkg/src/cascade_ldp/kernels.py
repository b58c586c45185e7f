"""Backend selection for the hot kernels.

Two kernels dominate runtime: the min-plus level of the rate recursion
(``minplus_level``) and the depth-first finite-tree sampler
(``sample_finite_block``). The compiled extension ``_ckernels`` is used when
it imports; otherwise, or when ``CASCADE_LDP_BACKEND=python`` is set, the
numpy implementation in ``_pykernels`` takes over. Both backends consume
random numbers in the same order and produce identical samples.
"""
import os

from . import _pykernels

KIND_CODES = _pykernels.KIND_CODES

_BACKENDS = {"python": _pykernels}
try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None
else:
    _BACKENDS["cython"] = _ckernels


def available():
    return sorted(_BACKENDS)


def get_backend(name=None):
    """Kernel module by name; ``None`` picks the environment default."""
    if name is None:
        name = os.environ.get("CASCADE_LDP_BACKEND", "cython" if _ckernels else "python")
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ImportError(f"kernel backend {name!r} unavailable; have {available()}") from None


BACKEND = "cython" if get_backend() is _ckernels and _ckernels is not None else "python"
