import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kasnerlin.background import flrw, from_exponents
from kasnerlin.diagnostics import (bang_limits, decay_fit, energies, energy_norm_comparison, identity_metric,
                                   identity_parabolic, identity_scalar_lapse, is_pure_log_growth,
                                   lapse_estimate_holdout, monotonicity_report, sign_audit_ok,
                                   total_energy_series, vtd_ratio)
from kasnerlin.errors import InsufficientDepth, InsufficientSpan, MissingAccumulator, WrongGauge
from kasnerlin.gauge_cmc import make_initial_data
from kasnerlin.integrator import IntegratorOptions, integrate
from kasnerlin.spectral_state import VOLUME, Gauge, synthesize, zero_state


def _zero_traj(gauge):
    return integrate(zero_state(flrw(), gauge, 1), IntegratorOptions(t_min=1e-5))


# ---------------------------------------------------------------- energies

def test_energies_zero():
    rep = energies(zero_state(flrw(), Gauge.cmc(), 2))
    assert rep.e_total_sq == 0 and rep.e_metric_sq == 0 and rep.e_lapse_sq == 0


@given(st.floats(1e-6, 1.0))
def test_energy_homogeneous_pi(t):
    s = zero_state(from_exponents(0.5, 0.3), Gauge.cmc(), 1, t=t)
    chi = np.zeros(s.n_modes, complex)
    chi[s.index_of((0, 0, 0))] = 1.0
    rep = energies(s.copy(chi=chi))
    assert rep.e_scalar_sq == pytest.approx(VOLUME, rel=1e-14)


def test_metric_energy_quadrature():
    s = make_initial_data(flrw(), seed=7, k_max=2)
    npts = 2 * (2 * 2 + 1)
    total = 0.0
    for i in range(3):
        for j in range(3):
            K = synthesize(s.kmix[:, i, j], s.kvec, npts).real
            total += np.mean(K**2)
            for a in range(3):
                d = synthesize(1j * s.kvec[:, a] * s.gamma[:, i, j], s.kvec, npts).real
                total += 0.25 * np.mean(d**2)
    assert energies(s).e_metric_sq == pytest.approx(VOLUME * total, rel=1e-10)


def test_energy_orders_increase():
    s = make_initial_data(flrw(), seed=1, k_max=2)
    assert energies(s, N=2).e_total_sq >= energies(s, N=1).e_total_sq >= energies(s).e_total_sq > 0


# ---------------------------------------------------------------- identities

def test_identities_zero():
    tr = _zero_traj(Gauge.cmc())
    assert identity_scalar_lapse(tr, 1e-4).residual == 0
    assert identity_metric(tr, 1e-4).residual == 0
    trp = _zero_traj(Gauge.parabolic(3.0))
    for which in ("scalar-lapse", "metric"):
        assert identity_parabolic(trp, 1e-4, which).residual == 0


def test_identities_homogeneous():
    init = make_initial_data(from_exponents(0.5, 0.3), seed=2, k_max=0)
    tr = integrate(init, IntegratorOptions(t_min=1e-6))
    for t in (1e-2, 1e-4, 1e-6):
        assert identity_scalar_lapse(tr, t).relative_residual < 1e-10
        assert identity_metric(tr, t).relative_residual < 1e-10


def test_identities_refine():
    init = make_initial_data(flrw(), seed=0, k_max=2)
    tr = integrate(init, IntegratorOptions(t_min=1e-4, rel_tol=1e-10))
    for f in (identity_scalar_lapse, identity_metric):
        assert f(tr, 1e-4).relative_residual < 1e-6
    errs = []
    for m in (4, 8):
        trm = integrate(init, IntegratorOptions(t_min=1e-2, steps_per_checkpoint=m))
        errs.append(identity_scalar_lapse(trm, 1e-2).residual)
    # high-order accumulators: slope at least 4
    assert abs(errs[0]) / abs(errs[1]) >= 2**4


def test_trapezoid_accumulators_second_order():
    init = make_initial_data(flrw(), seed=0, k_max=1)
    errs = []
    for m in (8, 16):
        tr = integrate(init, IntegratorOptions(t_min=1e-2, steps_per_checkpoint=m, accumulate="trapezoid"))
        errs.append(identity_metric(tr, 1e-2).residual)
    assert abs(errs[0]) / abs(errs[1]) >= 2**2 * 0.9


def test_wrong_gauge_and_missing_accumulator():
    tr = _zero_traj(Gauge.cmc())
    with pytest.raises(WrongGauge):
        identity_parabolic(tr, 1e-4)
    with pytest.raises(MissingAccumulator):
        identity_metric(tr, 1e-4, order=3)


def test_parabolic_identities(runs):
    tr = runs.parabolic()
    for t in (1e-2, 1e-4, 1e-6):
        for which in ("scalar-lapse", "metric"):
            assert identity_parabolic(tr, t, which).relative_residual < 1e-6
            assert identity_parabolic(tr, t, which, variant="naive").relative_residual > 1e-3
    with pytest.raises(WrongGauge):
        identity_scalar_lapse(tr, 1e-4)
    hold = lapse_estimate_holdout(tr, float(np.sqrt(tr.times[-1])))
    assert hold["holds"] and hold["C_fit"] >= 0


# ---------------------------------------------------------------- decay fits

def test_decay_fit_examples():
    ts = np.logspace(-8, 0, 33)
    assert decay_fit(ts, ts**2).exponent == pytest.approx(2.0, abs=1e-10)
    assert decay_fit(ts, np.full_like(ts, 3.0)).exponent == pytest.approx(0.0, abs=1e-12)
    f = decay_fit(ts, ts ** (2 / 3) * (1 + np.abs(np.log(ts))), with_log=True)
    assert f.log_factor_detected
    assert f.exponent == pytest.approx(2 / 3, abs=1e-6)
    plain = decay_fit(ts, ts**1.5, with_log=True)
    assert not plain.log_factor_detected


def test_decay_fit_span():
    with pytest.raises(InsufficientSpan):
        decay_fit(np.logspace(-1, 0, 20), np.ones(20))
    with pytest.raises(InsufficientSpan):
        decay_fit(np.logspace(-4, 0, 5), np.ones(5))


@given(st.floats(-2, 2), st.floats(0.1, 10))
def test_decay_fit_power_law(p, a):
    ts = np.logspace(-6, 0, 25)
    assert decay_fit(ts, a * ts**p).exponent == pytest.approx(p, abs=1e-9)


def test_log_growth_persistence():
    ts = np.logspace(-8, 0, 33)
    grow = 1 + np.abs(np.log(ts))
    f = decay_fit(ts, grow, with_log=True)
    assert is_pure_log_growth(f, ts, grow)
    settle = 2.0 - np.exp(-np.abs(np.log(ts)) / 3)
    g = decay_fit(ts, settle, (1e-8, 1e-2), with_log=True)
    assert not is_pure_log_growth(g, ts, settle)


# ---------------------------------------------------------------- Bang limits

def test_bang_limits_depth_and_trivial():
    with pytest.raises(InsufficientDepth):
        bang_limits(integrate(zero_state(flrw(), Gauge.cmc(), 1), IntegratorOptions(t_min=1e-3)))
    out = bang_limits(_zero_traj(Gauge.cmc()))
    assert not np.any(out["K_bang"]) and not np.any(out["Psi_bang"]) and not np.any(out["h_bang"])


def test_bang_limits_homogeneous():
    init = make_initial_data(from_exponents(0.5, 0.3), seed=4, k_max=0)
    out = bang_limits(integrate(init, IntegratorOptions(t_min=1e-6)))
    assert np.allclose(out["K_bang"][0], init.kmix[0], atol=1e-14)
    assert out["Psi_bang"][0] == pytest.approx(init.chi[0], abs=1e-14)
    assert out["K_bang_trace_relative"] < 1e-12


def test_bang_limits_generic(runs):
    out = bang_limits(runs.cmc(0.05))
    assert all(r >= 0.6 for r in out["cauchy_rates"].values())
    assert out["K_bang_trace_relative"] < 1e-10


# ---------------------------------------------------------------- monotonicity

def test_monotonicity_zero():
    rep = monotonicity_report(_zero_traj(Gauge.cmc()))
    assert rep["energy_sq_t"] == 0 and all(v == 0 for v in rep["past_favorable"].values())


def test_monotonicity_flrw(runs):
    tr = runs.cmc(0.0)
    rep = monotonicity_report(tr, 0.1)
    assert rep["c_fit"] * rep["sigma"] == 0.0
    ts, e2 = total_energy_series(tr, 0.1)
    assert np.all(e2 <= 1.5 * e2[0])
    assert abs(decay_fit(ts, e2, (1e-8, 1e-3)).exponent) < 0.02
    assert all(v <= 0 for v in rep["past_favorable"].values())


def test_monotonicity_holdout_sigma(runs):
    rep = monotonicity_report(runs.cmc(0.05), 0.1)
    assert rep["holdout_holds"]
    assert rep["C_fit"] >= 1.0


def test_sign_audit(runs):
    for tr in (runs.cmc(0.0), runs.cmc(0.05), runs.parabolic()):
        assert all(sign_audit_ok(tr).values())


def test_vtd_ratio_decreases(runs):
    tr = runs.cmc(0.05)
    r = np.array([vtd_ratio(s) for s in tr.checkpoints])
    assert r[-1] < 0.1 * r[0]
    late = r[tr.times <= 1e-3]
    assert np.all(np.diff(late) <= 1e-12)


def test_energy_norm_comparison(runs):
    for sigma in (0.0, 0.05):
        tr = runs.cmc(sigma)
        out = energy_norm_comparison(tr, 0.1, 4)
        for side in out.values():
            # bounded by a modest multiple of the initial ratio over eight decades
            assert side["max_ratio"] < 2.0
        if sigma == 0.0:
            ts = tr.times
            late = (1e-8, 1e-5)
            assert abs(out["energy_over_norm"]["c_fit"] * sigma) < 0.02
            from kasnerlin.spectral_state import solution_norm
            E = np.sqrt(total_energy_series(tr, 0.1, 4)[1])
            S = np.array([solution_norm(s, 4) for s in tr.checkpoints])
            assert abs(decay_fit(ts, E / S, late).exponent) < 0.02
