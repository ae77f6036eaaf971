import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kasnerlin.background import KasnerBackground, flrw, from_exponents, metric_at
from kasnerlin.errors import StaleLapse, ZeroScalarAmplitude
from kasnerlin.gauge_cmc import (constraint_residuals, evolution_rhs, lapse_time_derivative,
                                 lapse_upper_residual, make_initial_data, normalized_constraint_residuals,
                                 relative_constraint_residuals, solve_lapse, with_lapse)
from kasnerlin.linear_geometry import scalar_curv_lin
from kasnerlin.spectral_state import Gauge, l2_norm, solution_norm, sobolev_norm_gk, zero_state

backgrounds = st.tuples(st.floats(0.0, 0.2), st.floats(0, 2 * np.pi)).map(
    lambda p: KasnerBackground.from_sigma(*p))
seeds = st.integers(0, 10_000)


def test_solve_lapse_examples():
    one = np.ones((1, 3, 3))
    assert solve_lapse(one, np.zeros((1, 3)), flrw(), 0.5)[0] == 0
    # conformal gamma = 2 phi g has R = 4 mu phi; phi = 1/4, k = e1 gives R = 1
    gam = 0.5 * np.eye(3)[None]
    k = np.array([[1, 0, 0]])
    assert scalar_curv_lin(gam, k, np.ones(3))[0] == pytest.approx(1.0)
    assert solve_lapse(gam, k, flrw(), 1.0)[0] == pytest.approx(-0.5)


def test_solve_lapse_small_t():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((3, 3))
    gam = (a + a.T)[None]
    k = np.array([[1, -2, 1]])
    for t in (1e-6, 1e-8):
        _, ginv = metric_at(flrw(), t)
        R = scalar_curv_lin(gam, k, ginv)[0]
        ratio = solve_lapse(gam, k, flrw(), t)[0] / (-(t**2) * R)
        assert ratio == pytest.approx(1.0, abs=10 * t ** (4 / 3) * 6)


def test_lapse_time_derivative_trivial():
    z = np.zeros((2, 3, 3))
    k = np.array([[1, 0, 0], [-1, 0, 0]])
    assert not np.any(lapse_time_derivative(z, z, k, flrw(), 0.3))
    one = np.ones((1, 3, 3))
    assert lapse_time_derivative(one, one, np.zeros((1, 3)), flrw(), 0.3)[0] == 0


@given(seeds, backgrounds, st.floats(1e-4, 1.0))
def test_lapse_time_derivative_finite_difference(seed, bg, t):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    b = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    g0, dg = (a + a.T)[None], (b + b.T)[None]
    k = rng.integers(-3, 4, size=(1, 3))
    h = 1e-4
    tau = np.log(t)

    def nu(s):
        return solve_lapse(g0 + (s - tau) * dg, k, bg, np.exp(s))[0]

    fd = (nu(tau + h) - nu(tau - h)) / (2 * h)
    exact = lapse_time_derivative(g0, dg, k, bg, t)[0]
    assert abs(fd - exact) <= 1e-6 * max(abs(exact), abs(nu(tau)), 1e-300)


def test_residuals_of_zero_state():
    z = zero_state(flrw(), Gauge.cmc(), 2)
    for v in constraint_residuals(z).values():
        assert not np.any(v)


@given(seeds, backgrounds)
def test_constructed_data_satisfy_constraints(seed, bg):
    s = make_initial_data(bg, seed=seed, k_max=2)
    S = solution_norm(s, 1)
    res = constraint_residuals(s)
    for key in ("ham", "mom", "mom_up"):
        assert np.max(np.abs(res[key])) < 1e-12 * S
    assert max(relative_constraint_residuals(s).values()) < 1e-12
    assert max(normalized_constraint_residuals(s).values()) < 1e-12


def test_homogeneous_data():
    bg = from_exponents(0.5, 0.3)
    s = make_initial_data(bg, seed=5, k_max=0)
    khK = np.sum((1 / 3 - np.array(bg.q)) * np.diag(s.kmix[0]))
    assert s.nu[0] == 0
    assert s.chi[0] == pytest.approx(-khK / bg.A, rel=1e-13)
    assert abs(constraint_residuals(s)["ham"][0]) < 1e-14


def test_determinism_and_zero_amplitude():
    a = make_initial_data(flrw(), seed=11, k_max=2)
    b = make_initial_data(flrw(), seed=11, k_max=2)
    assert np.array_equal(a.kmix, b.kmix) and np.array_equal(a.chi, b.chi)
    with pytest.raises(ZeroScalarAmplitude):
        make_initial_data(from_exponents(1.0, 0.0, strict_positive=False), seed=0, k_max=1)


def test_callable_spectrum():
    s = make_initial_data(flrw(), seed=1, k_max=2, spectrum=lambda k2: np.exp(-k2))
    assert max(relative_constraint_residuals(s).values()) < 1e-12


def test_rhs_examples():
    z = zero_state(flrw(), Gauge.cmc(), 1)
    r = evolution_rhs(z)
    assert not any(np.any(x) for x in (r.dgamma_dtau, r.dkmix_dtau, r.dpsi_dtau, r.dchi_dtau))
    rng = np.random.default_rng(3)
    a = rng.standard_normal((3, 3))
    s = zero_state(flrw(), Gauge.cmc(), 0).copy(gamma=(a + a.T)[None].astype(complex), chi=np.array([0.7 + 0j]))
    r = evolution_rhs(s)
    assert np.allclose(r.dgamma_dtau, (2 / 3) * s.gamma, rtol=1e-14)
    assert r.dchi_dtau[0] == 0
    assert r.dpsi_dtau[0] == 0.7


def test_stale_lapse():
    s = make_initial_data(flrw(), seed=0, k_max=1)
    with pytest.raises(StaleLapse):
        evolution_rhs(s.copy(nu=s.nu + 1e-3))
    evolution_rhs(with_lapse(s.copy(nu=s.nu + 1e-3)))


@given(seeds, backgrounds, st.floats(1e-6, 1.0))
def test_trace_preserved_by_rhs(seed, bg, t):
    s = with_lapse(make_initial_data(bg, seed=seed, k_max=1).copy(t=t))
    r = evolution_rhs(s)
    tr = np.einsum("naa->n", r.dkmix_dtau)
    assert np.max(np.abs(tr)) <= 1e-10 * np.max(np.abs(r.dkmix_dtau))


@given(seeds, backgrounds, st.floats(1e-3, 1.0))
def test_lapse_forms_equivalent(seed, bg, t):
    s = make_initial_data(bg, seed=seed, k_max=2, t=t)
    up = lapse_upper_residual(s)
    assert np.max(np.abs(up)) < 1e-12 * solution_norm(s, 2)


def elliptic_ratio(s):
    A = s.bg.A
    lhs = s.t**2 * sobolev_norm_gk("ddnu", 0, s)
    rhs = abs(2 * A * A - 1) * l2_norm("nu", s) + 2 * A * l2_norm("pi", s) + 2 * s.bg.sigma * sobolev_norm_gk("K", 0, s)
    return lhs / rhs


def test_elliptic_inequality_holdout():
    rng = np.random.default_rng(7)
    ratios = []
    for i in range(100):
        bg = KasnerBackground.from_sigma(rng.uniform(0, 0.2), rng.uniform(0, 2 * np.pi))
        t = 10 ** rng.uniform(-6, 0)
        ratios.append(elliptic_ratio(make_initial_data(bg, seed=i, k_max=2, t=t)))
    C_fit = max(ratios[:50])
    assert max(ratios[50:]) <= C_fit * (1 + 0.5)
    assert max(ratios) <= 1.0 + 1e-12
