import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kasnerlin.background import KasnerBackground, flrw, metric_at
from kasnerlin.linear_geometry import christoffel_lin, curvature, ricci_lin, scalar_curv_lin

wave = st.tuples(st.integers(-4, 4), st.integers(-4, 4), st.integers(-4, 4)).filter(lambda k: any(k))
backgrounds = st.tuples(st.floats(0.0, 0.25), st.floats(0, 2 * np.pi)).map(
    lambda p: KasnerBackground.from_sigma(*p))
times = st.floats(1e-6, 1.0)
seeds = st.integers(0, 2**31)


def sym(rng):
    a = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    return a + a.T


def one(k, gamma, bg, t):
    _, ginv = metric_at(bg, t)
    return np.array([k]), np.asarray(gamma)[None], ginv


def test_k_zero_annihilates(rng):
    kv, gam, ginv = one((0, 0, 0), sym(rng), flrw(), 0.3)
    c = curvature(gam, kv, ginv)
    assert not np.any(c.christ) and not np.any(c.ricci_mixed) and not np.any(c.scalar)


def test_christoffel_example():
    gam = np.zeros((3, 3))
    gam[0, 0] = 1.0
    kv, gam, ginv = one((0, 1, 0), gam, flrw(), 1.0)
    G = christoffel_lin(gam, kv, ginv)[0]
    expect = np.zeros((3, 3, 3), complex)
    expect[0, 0, 1] = expect[0, 1, 0] = 0.5j
    expect[1, 0, 0] = -0.5j
    assert np.allclose(G, expect, atol=1e-15)


@given(seeds, wave, backgrounds, times)
def test_christoffel_symmetric_and_linear(seed, k, bg, t):
    rng = np.random.default_rng(seed)
    a, b = sym(rng), sym(rng)
    c = complex(*rng.standard_normal(2))
    kv, _, ginv = one(k, a, bg, t)
    G = christoffel_lin((a + c * b)[None], kv, ginv)[0]
    assert np.allclose(G, np.swapaxes(G, 1, 2))
    Ga = christoffel_lin(a[None], kv, ginv)[0]
    Gb = christoffel_lin(b[None], kv, ginv)[0]
    assert np.allclose(G, Ga + c * Gb, rtol=1e-12, atol=1e-12 * np.max(np.abs(G)))
    R = scalar_curv_lin((a + c * b)[None], kv, ginv)[0]
    Ra = scalar_curv_lin(a[None], kv, ginv)[0]
    Rb = scalar_curv_lin(b[None], kv, ginv)[0]
    assert abs(R - Ra - c * Rb) <= 1e-11 * max(abs(Ra), abs(Rb), 1.0)


@given(seeds, wave, backgrounds, times)
def test_pure_gauge_has_no_curvature(seed, k, bg, t):
    # gamma_ab = d_a X_b + d_b X_a for a covector field X
    rng = np.random.default_rng(seed)
    X = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    ik = 1j * np.array(k, float)
    gam = np.outer(ik, X) + np.outer(X, ik)
    kv, gam, ginv = one(k, gam, bg, t)
    c = curvature(gam, kv, ginv)
    scale = np.max(np.abs(ginv)) ** 2 * np.dot(k, k) ** 1.5 * np.max(np.abs(X))
    assert np.max(np.abs(c.ricci_mixed)) <= 1e-12 * scale
    assert abs(c.scalar[0]) <= 1e-12 * scale


def test_transverse_traceless_has_no_scalar_curvature():
    # k along x1; TT perturbation lives in the (2,3) block
    gam = np.zeros((3, 3), complex)
    gam[1, 1], gam[2, 2], gam[1, 2], gam[2, 1] = 1.0, -1.0, 0.3, 0.3
    kv, gam, ginv = one((1, 0, 0), gam, flrw(), 1.0)
    assert abs(scalar_curv_lin(gam, kv, ginv)[0]) < 1e-15


@given(seeds, wave, backgrounds, times)
def test_conformal_perturbation(seed, k, bg, t):
    # gamma = 2 phi g: Ric^i_j = (g^{ii} k_i k_j + delta^i_j mu) phi and R = 4 mu phi
    rng = np.random.default_rng(seed)
    phi = complex(*rng.standard_normal(2))
    g, ginv = metric_at(bg, t)
    kf = np.array(k, float)
    mu = kf**2 @ ginv
    kv, gam, _ = one(k, 2 * phi * np.diag(g), bg, t)
    c = curvature(gam, kv, ginv)
    expect = (ginv[:, None] * np.outer(kf, kf) + mu * np.eye(3)) * phi
    assert np.allclose(c.ricci_mixed[0], expect, rtol=1e-11, atol=1e-11 * np.max(np.abs(expect)))
    assert c.scalar[0] == pytest.approx(4 * mu * phi, rel=1e-11)


@given(seeds, wave, backgrounds, times)
def test_ricci_trace_matches_scalar(seed, k, bg, t):
    rng = np.random.default_rng(seed)
    kv, gam, ginv = one(k, sym(rng), bg, t)
    c = curvature(gam, kv, ginv)
    tr = np.trace(c.ricci_mixed[0])
    assert abs(tr - c.scalar[0]) <= 1e-12 * max(abs(c.scalar[0]), np.max(np.abs(c.ricci_mixed)))


@given(seeds, wave, backgrounds, times)
def test_lowered_ricci_is_symmetric(seed, k, bg, t):
    rng = np.random.default_rng(seed)
    g, _ = metric_at(bg, t)
    kv, gam, ginv = one(k, sym(rng), bg, t)
    low = g[:, None] * ricci_lin(gam, kv, ginv)[0]
    assert np.allclose(low, low.T, rtol=1e-11, atol=1e-11 * np.max(np.abs(low)))


@given(seeds, wave, backgrounds, times)
def test_reality(seed, k, bg, t):
    # the mode -k with conjugated data gives conjugated curvature
    rng = np.random.default_rng(seed)
    a = sym(rng)
    _, ginv = metric_at(bg, t)
    kv = np.array([k, [-x for x in k]])
    gam = np.stack([a, np.conj(a)])
    c = curvature(gam, kv, ginv)
    assert np.allclose(c.ricci_mixed[1], np.conj(c.ricci_mixed[0]))
    assert np.allclose(c.christ[1], np.conj(c.christ[0]))
    assert c.scalar[1] == pytest.approx(np.conj(c.scalar[0]))
