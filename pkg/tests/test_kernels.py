"""Compiled core vs numpy fallback: identical contracts, matching results."""

import numpy as np
import numpy.testing as npt
import pytest

from metapred.kernels import load_backend

REF = load_backend("python")
try:
    CORE = load_backend("cython")
    HAVE_CORE = CORE.BACKEND == "cython"
except ImportError:
    CORE = REF
    HAVE_CORE = False

needs_core = pytest.mark.skipif(not HAVE_CORE, reason="compiled core not built")


@pytest.fixture(params=[np.float32, np.float64], ids=["f32", "f64"])
def data(request):
    dt = request.param
    rng = np.random.default_rng(42)
    rtol = 1e-5 if dt == np.float32 else 1e-12
    return rng, dt, rtol


@needs_core
def test_conv_trio_matches(data):
    rng, dt, rtol = data
    x = rng.normal(size=(4, 12, 6)).astype(dt)
    w = rng.normal(size=(5, 3, 6)).astype(dt)
    g = rng.normal(size=(4, 10, 5)).astype(dt)
    npt.assert_allclose(CORE.conv1d_fwd(x, w), REF.conv1d_fwd(x, w), rtol=rtol, atol=rtol)
    npt.assert_allclose(CORE.conv1d_dx(g, w, 12), REF.conv1d_dx(g, w, 12), rtol=rtol, atol=rtol)
    npt.assert_allclose(CORE.conv1d_dw(x, g), REF.conv1d_dw(x, g), rtol=10 * rtol, atol=10 * rtol)


@needs_core
def test_embed_bag_matches(data):
    rng, dt, rtol = data
    table = rng.normal(size=(30, 8)).astype(dt)
    codes = rng.integers(0, 30, size=(5, 7, 4)).astype(np.int32)
    mask = (rng.random((5, 7, 4)) > 0.25).astype(dt)
    g = rng.normal(size=(5, 7, 8)).astype(dt)
    npt.assert_allclose(CORE.embed_bag_fwd(table, codes, mask),
                        REF.embed_bag_fwd(table, codes, mask), rtol=rtol, atol=rtol)
    npt.assert_allclose(CORE.embed_bag_bwd(g, codes, mask, 30),
                        REF.embed_bag_bwd(g, codes, mask, 30), rtol=10 * rtol, atol=10 * rtol)


@needs_core
def test_pool_and_scatter_match(data):
    rng, dt, _ = data
    x = rng.normal(size=(6, 9, 4)).astype(dt)
    lengths = rng.integers(1, 10, size=6)
    o1, a1 = REF.maxpool_time_fwd(x, lengths)
    o2, a2 = CORE.maxpool_time_fwd(x, lengths)
    npt.assert_array_equal(o1, o2)
    npt.assert_array_equal(a1, a2)
    g = rng.normal(size=(6, 4)).astype(dt)
    npt.assert_array_equal(REF.pool_scatter(g, a1, 9), CORE.pool_scatter(g, a1, 9))
    h = rng.normal(size=(6, 9, 4)).astype(dt)
    npt.assert_array_equal(REF.pool_take(h, a1), CORE.pool_take(h, a1))


@needs_core
def test_row_ops_match(data):
    rng, dt, rtol = data
    x = rng.normal(size=(20, 5)).astype(dt)
    idx = rng.integers(0, 20, size=13).astype(np.int32)
    npt.assert_array_equal(REF.gather_rows(x, idx), CORE.gather_rows(x, idx))
    g = rng.normal(size=(13, 5)).astype(dt)
    npt.assert_allclose(REF.scatter_add_rows(g, idx, 20),
                        CORE.scatter_add_rows(g, idx, 20), rtol=rtol, atol=rtol)


def test_backends_are_deterministic(data):
    rng, dt, _ = data
    x = rng.normal(size=(3, 8, 4)).astype(dt)
    w = rng.normal(size=(2, 3, 4)).astype(dt)
    for mod in ({REF, CORE} if HAVE_CORE else {REF}):
        a = mod.conv1d_fwd(x, w)
        b = mod.conv1d_fwd(x, w)
        assert a.tobytes() == b.tobytes()


def test_pool_tie_breaks_low_index_both_backends():
    x = np.array([[[1.0], [1.0], [0.5]]], dtype=np.float32)
    for mod in ({REF, CORE} if HAVE_CORE else {REF}):
        _, arg = mod.maxpool_time_fwd(x, np.array([3]))
        assert arg[0, 0] == 0
