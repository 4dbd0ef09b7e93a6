"""Pure-numpy reference implementations of the hot kernels.

Used as the fallback backend when the compiled core is unavailable and as
the correctness oracle for it. All functions take and return contiguous
arrays and never mutate their inputs.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

BACKEND = "python"


def conv1d_fwd(x, w):
    """Valid 1-D convolution over the time axis.

    x: (B, T, d), w: (F, l, d) -> (B, T-l+1, F)
    out[b,t,f] = sum_{tau,c} x[b,t+tau,c] * w[f,tau,c]
    """
    width = w.shape[1]
    wins = sliding_window_view(x, width, axis=1)  # (B, T-l+1, d, l)
    return np.ascontiguousarray(np.einsum("btcl,flc->btf", wins, w, optimize=True))


def conv1d_dx(g, w, seq_len):
    """Cotangent of conv1d_fwd w.r.t. its input.

    g: (B, T-l+1, F), w: (F, l, d) -> (B, seq_len, d)
    """
    width = w.shape[1]
    gp = np.pad(g, ((0, 0), (width - 1, width - 1), (0, 0)))
    wins = sliding_window_view(gp, width, axis=1)  # (B, seq_len, F, l)
    return np.ascontiguousarray(
        np.einsum("btfl,flc->btc", wins, w[:, ::-1, :], optimize=True)
    )


def conv1d_dw(x, g):
    """Cotangent of conv1d_fwd w.r.t. its weights.

    x: (B, T, d), g: (B, T-l+1, F) -> (F, l, d)
    """
    width = x.shape[1] - g.shape[1] + 1
    wins = sliding_window_view(x, width, axis=1)  # (B, T-l+1, d, l)
    return np.ascontiguousarray(np.einsum("btf,btcl->flc", g, wins, optimize=True))


def embed_bag_fwd(table, codes, slot_mask):
    """Masked gather-sum of embedding rows per visit.

    table: (V, d), codes: (B, T, S) int32, slot_mask: (B, T, S)
    -> (B, T, d) with out[b,t] = sum_s slot_mask[b,t,s] * table[codes[b,t,s]]
    """
    rows = table[codes]  # (B, T, S, d)
    return np.ascontiguousarray((rows * slot_mask[..., None]).sum(axis=2))


def embed_bag_bwd(g, codes, slot_mask, n_rows):
    """Scatter-add adjoint of embed_bag_fwd into a (n_rows, d) table."""
    d = g.shape[-1]
    out = np.zeros((n_rows, d), dtype=g.dtype)
    contrib = g[:, :, None, :] * slot_mask[..., None]  # (B, T, S, d)
    np.add.at(out, codes.reshape(-1), contrib.reshape(-1, d))
    return out


def maxpool_time_fwd(x, lengths):
    """Max over the first `lengths[b]` time steps, per feature.

    x: (B, T, F), lengths: (B,) int64, each >= 1
    Returns (out (B, F), argmax (B, F) int64); ties resolve to the lowest
    time index.
    """
    t_idx = np.arange(x.shape[1])
    masked = np.where(t_idx[None, :, None] < lengths[:, None, None], x, -np.inf)
    arg = masked.argmax(axis=1)
    out = np.take_along_axis(x, arg[:, None, :], axis=1)[:, 0, :]
    return np.ascontiguousarray(out), np.ascontiguousarray(arg)


def pool_scatter(g, argmax, seq_len):
    """Place g[b,f] at time argmax[b,f]; zeros elsewhere. -> (B, seq_len, F)"""
    out = np.zeros((g.shape[0], seq_len, g.shape[1]), dtype=g.dtype)
    np.put_along_axis(out, argmax[:, None, :], g[:, None, :], axis=1)
    return out


def pool_take(h, argmax):
    """Read h[b, argmax[b,f], f]. -> (B, F)"""
    return np.ascontiguousarray(
        np.take_along_axis(h, argmax[:, None, :], axis=1)[:, 0, :]
    )


def gather_rows(x, idx):
    """Row lookup x[idx]; idx: (m,) int32 -> (m, d)."""
    return np.ascontiguousarray(x[idx])


def scatter_add_rows(g, idx, n_rows):
    """Adjoint of gather_rows: add g[i] into row idx[i] of a zero table."""
    out = np.zeros((n_rows,) + g.shape[1:], dtype=g.dtype)
    np.add.at(out, idx, g)
    return out
