"""Numeric kernel backends.

The compiled Cython core is preferred when it has been built; otherwise the
numpy reference backend is used. Selection happens once at import and can be
forced with METAPRED_KERNELS=python|cython (anything else means auto).

In auto mode the convolution ops route by problem size: the compiled loops
win below ~2k filter*channel products, while numpy's einsum rides BLAS past
that (see benchmarks/bench_kernels.py).
"""

import os

from . import _ref

_OPS = (
    "conv1d_fwd",
    "conv1d_dx",
    "conv1d_dw",
    "embed_bag_fwd",
    "embed_bag_bwd",
    "maxpool_time_fwd",
    "pool_scatter",
    "pool_take",
    "gather_rows",
    "scatter_add_rows",
)

# measured crossovers (see benchmarks/bench_kernels.py): the compiled conv
# loops stop paying off once the filter*channel product grows past these
_CONV_FWD_MAX_DF = 2048
_CONV_DX_MAX_DF = 1024
_CONV_DW_MAX_DF = 4096


def load_backend(name="auto"):
    """Return the kernel module for `name` ("python", "cython", or "auto")."""
    if name == "python":
        return _ref
    try:
        from . import _core
    except ImportError:
        if name == "cython":
            raise
        return _ref
    return _core


def _routed_conv(core):
    def conv1d_fwd(x, w):
        impl = core if w.shape[0] * w.shape[2] <= _CONV_FWD_MAX_DF else _ref
        return impl.conv1d_fwd(x, w)

    def conv1d_dx(g, w, seq_len):
        impl = core if w.shape[0] * w.shape[2] <= _CONV_DX_MAX_DF else _ref
        return impl.conv1d_dx(g, w, seq_len)

    def conv1d_dw(x, g):
        impl = core if g.shape[2] * x.shape[2] <= _CONV_DW_MAX_DF else _ref
        return impl.conv1d_dw(x, g)

    return conv1d_fwd, conv1d_dx, conv1d_dw


_mode = os.environ.get("METAPRED_KERNELS", "auto")
_active = load_backend(_mode)
BACKEND = _active.BACKEND

embed_bag_fwd = _active.embed_bag_fwd
embed_bag_bwd = _active.embed_bag_bwd
maxpool_time_fwd = _active.maxpool_time_fwd
pool_scatter = _active.pool_scatter
pool_take = _active.pool_take
gather_rows = _active.gather_rows
scatter_add_rows = _active.scatter_add_rows

if BACKEND == "cython" and _mode != "cython":
    conv1d_fwd, conv1d_dx, conv1d_dw = _routed_conv(_active)
else:
    conv1d_fwd = _active.conv1d_fwd
    conv1d_dx = _active.conv1d_dx
    conv1d_dw = _active.conv1d_dw

__all__ = ["BACKEND", "load_backend", *_OPS]
