# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernel core: same contracts as metapred.kernels._ref."""

import numpy as np

cimport cython
cimport numpy as cnp

cnp.import_array()

BACKEND = "cython"

ctypedef fused real:
    float
    double


# ---------------------------------------------------------------- conv1d

def conv1d_fwd(x, w):
    out = np.zeros((x.shape[0], x.shape[1] - w.shape[1] + 1, w.shape[0]),
                   dtype=x.dtype)
    # (F, l, d) -> (l, d, F) so the inner accumulation runs contiguously
    # over the filter axis of both w and out
    wt = np.ascontiguousarray(np.transpose(w, (1, 2, 0)))
    _conv1d_fwd(x, wt, out)
    return out


def _conv1d_fwd(const real[:, :, ::1] x, const real[:, :, ::1] wt, real[:, :, ::1] out):
    cdef Py_ssize_t B = x.shape[0], d = x.shape[2]
    cdef Py_ssize_t l = wt.shape[0], F = wt.shape[2]
    cdef Py_ssize_t To = out.shape[1]
    cdef Py_ssize_t b, t, f, tau, c
    cdef real xv
    with nogil:
        for b in range(B):
            for t in range(To):
                for tau in range(l):
                    for c in range(d):
                        xv = x[b, t + tau, c]
                        if xv == 0:
                            continue
                        for f in range(F):
                            out[b, t, f] = out[b, t, f] + xv * wt[tau, c, f]


def conv1d_dx(g, w, seq_len):
    out = np.zeros((g.shape[0], seq_len, w.shape[2]), dtype=g.dtype)
    _conv1d_dx(g, w, out)
    return out


def _conv1d_dx(const real[:, :, ::1] g, const real[:, :, ::1] w, real[:, :, ::1] out):
    cdef Py_ssize_t B = g.shape[0], To = g.shape[1], F = g.shape[2]
    cdef Py_ssize_t l = w.shape[1], d = w.shape[2]
    cdef Py_ssize_t b, t, f, tau, c
    cdef real gv
    with nogil:
        for b in range(B):
            for t in range(To):
                for f in range(F):
                    gv = g[b, t, f]
                    for tau in range(l):
                        for c in range(d):
                            out[b, t + tau, c] = out[b, t + tau, c] + gv * w[f, tau, c]


def conv1d_dw(x, g):
    width = x.shape[1] - g.shape[1] + 1
    out = np.zeros((g.shape[2], width, x.shape[2]), dtype=x.dtype)
    _conv1d_dw(x, g, out)
    return out


def _conv1d_dw(const real[:, :, ::1] x, const real[:, :, ::1] g, real[:, :, ::1] out):
    cdef Py_ssize_t B = x.shape[0], d = x.shape[2]
    cdef Py_ssize_t To = g.shape[1], F = g.shape[2]
    cdef Py_ssize_t l = out.shape[1]
    cdef Py_ssize_t b, t, f, tau, c
    cdef real gv
    with nogil:
        for b in range(B):
            for t in range(To):
                for f in range(F):
                    gv = g[b, t, f]
                    for tau in range(l):
                        for c in range(d):
                            out[f, tau, c] = out[f, tau, c] + gv * x[b, t + tau, c]


# ----------------------------------------------------------- embedding bag

def embed_bag_fwd(table, codes, slot_mask):
    out = np.zeros((codes.shape[0], codes.shape[1], table.shape[1]),
                   dtype=table.dtype)
    _embed_bag_fwd(table, codes, slot_mask, out)
    return out


def _embed_bag_fwd(const real[:, ::1] table, const cnp.int32_t[:, :, ::1] codes,
                   const real[:, :, ::1] slot_mask, real[:, :, ::1] out):
    cdef Py_ssize_t B = codes.shape[0], T = codes.shape[1], S = codes.shape[2]
    cdef Py_ssize_t d = table.shape[1]
    cdef Py_ssize_t b, t, s, c
    cdef Py_ssize_t row
    cdef real m
    with nogil:
        for b in range(B):
            for t in range(T):
                for s in range(S):
                    m = slot_mask[b, t, s]
                    if m == 0:
                        continue
                    row = codes[b, t, s]
                    for c in range(d):
                        out[b, t, c] = out[b, t, c] + m * table[row, c]


def embed_bag_bwd(g, codes, slot_mask, n_rows):
    out = np.zeros((n_rows, g.shape[2]), dtype=g.dtype)
    _embed_bag_bwd(g, codes, slot_mask, out)
    return out


def _embed_bag_bwd(const real[:, :, ::1] g, const cnp.int32_t[:, :, ::1] codes,
                   const real[:, :, ::1] slot_mask, real[:, ::1] out):
    cdef Py_ssize_t B = codes.shape[0], T = codes.shape[1], S = codes.shape[2]
    cdef Py_ssize_t d = g.shape[2]
    cdef Py_ssize_t b, t, s, c
    cdef Py_ssize_t row
    cdef real m
    with nogil:
        for b in range(B):
            for t in range(T):
                for s in range(S):
                    m = slot_mask[b, t, s]
                    if m == 0:
                        continue
                    row = codes[b, t, s]
                    for c in range(d):
                        out[row, c] = out[row, c] + m * g[b, t, c]


# -------------------------------------------------------------- max pooling

def maxpool_time_fwd(x, lengths):
    out = np.zeros((x.shape[0], x.shape[2]), dtype=x.dtype)
    arg = np.zeros((x.shape[0], x.shape[2]), dtype=np.int64)
    _maxpool_time_fwd(x, lengths, out, arg)
    return out, arg


def _maxpool_time_fwd(const real[:, :, ::1] x, const cnp.int64_t[::1] lengths,
                      real[:, ::1] out, cnp.int64_t[:, ::1] arg):
    cdef Py_ssize_t B = x.shape[0], F = x.shape[2]
    cdef Py_ssize_t b, t, f, n
    cdef real best, v
    cdef Py_ssize_t best_t
    with nogil:
        for b in range(B):
            n = lengths[b]
            for f in range(F):
                best = x[b, 0, f]
                best_t = 0
                for t in range(1, n):
                    v = x[b, t, f]
                    if v > best:
                        best = v
                        best_t = t
                out[b, f] = best
                arg[b, f] = best_t


def pool_scatter(g, argmax, seq_len):
    out = np.zeros((g.shape[0], seq_len, g.shape[1]), dtype=g.dtype)
    _pool_scatter(g, argmax, out)
    return out


def _pool_scatter(const real[:, ::1] g, const cnp.int64_t[:, ::1] argmax,
                  real[:, :, ::1] out):
    cdef Py_ssize_t B = g.shape[0], F = g.shape[1]
    cdef Py_ssize_t b, f
    with nogil:
        for b in range(B):
            for f in range(F):
                out[b, argmax[b, f], f] = g[b, f]


def pool_take(h, argmax):
    out = np.zeros((h.shape[0], h.shape[2]), dtype=h.dtype)
    _pool_take(h, argmax, out)
    return out


def _pool_take(const real[:, :, ::1] h, const cnp.int64_t[:, ::1] argmax, real[:, ::1] out):
    cdef Py_ssize_t B = h.shape[0], F = h.shape[2]
    cdef Py_ssize_t b, f
    with nogil:
        for b in range(B):
            for f in range(F):
                out[b, f] = h[b, argmax[b, f], f]


# ------------------------------------------------------------- row scatter

def gather_rows(x, idx):
    out = np.zeros((idx.shape[0], x.shape[1]), dtype=x.dtype)
    _gather_rows(x, idx, out)
    return out


def _gather_rows(const real[:, ::1] x, const cnp.int32_t[::1] idx, real[:, ::1] out):
    cdef Py_ssize_t m = idx.shape[0], d = x.shape[1]
    cdef Py_ssize_t i, c
    with nogil:
        for i in range(m):
            for c in range(d):
                out[i, c] = x[idx[i], c]


def scatter_add_rows(g, idx, n_rows):
    out = np.zeros((n_rows, g.shape[1]), dtype=g.dtype)
    _scatter_add_rows(g, idx, out)
    return out


def _scatter_add_rows(const real[:, ::1] g, const cnp.int32_t[::1] idx, real[:, ::1] out):
    cdef Py_ssize_t m = idx.shape[0], d = g.shape[1]
    cdef Py_ssize_t i, c
    cdef Py_ssize_t row
    with nogil:
        for i in range(m):
            row = idx[i]
            for c in range(d):
                out[row, c] = out[row, c] + g[i, c]
