"""Energies, identity residuals, monotonicity reports, decay fits and Bang limits."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import InsufficientDepth, InsufficientSpan, WrongGauge
from .forms import spatial_integrals
from .gauge_cmc import core_rhs
from .integrator import PAST_FAVORABLE, Trajectory
from .spectral_state import FieldState, energy_weight, sobolev_norm_coeffs, sobolev_norm_frame


# ---------------------------------------------------------------- energies

@dataclass
class EnergyReport:
    t: float
    e_metric_sq: float
    e_scalar_sq: float
    e_dlapse_sq: float
    e_lapse_sq: float
    e_total_sq: float
    e_almost_total_sq: float
    sigma_star: float
    N: int


def state_integrals(state: FieldState, N: int = 0) -> dict:
    weight = None if N == 0 else energy_weight(state.kvec, N)
    return spatial_integrals(state.bg, state.t, state.kvec, state.gamma, state.kmix,
                             state.psi, state.pi, state.require_lapse(), weight=weight)


def _energy_parts(d: dict) -> tuple:
    return (d["e_K"] + 0.25 * d["e_dgamma"], d["e_pi"] + d["e_dpsi"], d["e_dnu"], d["e_nu"])


def energies(state: FieldState, sigma_star: float = 0.1, N: int = 0) -> EnergyReport:
    """All energies of one state; ``N > 0`` sums over derivatives up to order ``N``."""
    em, es, edl, el = _energy_parts(state_integrals(state, N))
    return EnergyReport(
        t=state.t, e_metric_sq=em, e_scalar_sq=es, e_dlapse_sq=edl, e_lapse_sq=el,
        e_total_sq=sigma_star * em + es + edl + el,
        e_almost_total_sq=sigma_star * em + es + el,
        sigma_star=sigma_star, N=N,
    )


def total_energy_series(traj: Trajectory, sigma_star: float, N: int = 0, almost: bool | None = None):
    if almost is None:
        almost = traj.gauge.is_parabolic
    vals = []
    for s in traj.checkpoints:
        rep = energies(s, sigma_star, N)
        vals.append(rep.e_almost_total_sq if almost else rep.e_total_sq)
    return traj.times.copy(), np.array(vals)


# ---------------------------------------------------------------- identities

@dataclass
class IdentityResidual:
    identity: str
    t: float
    lhs_value: float
    rhs_value: float
    residual: float
    relative_residual: float
    terms: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def _assemble(name, t, lhs, boundary, spacetime, traj, order=0):
    """``rhs = boundary + sum coeff * accumulator``; relative residual against the largest term."""
    terms = dict(boundary)
    for label, coeff, key in spacetime:
        terms[label] = terms.get(label, 0.0) + coeff * traj.acc(key, t, order)
    rhs = float(sum(terms.values()))
    res = lhs - rhs
    scale = max([abs(lhs), abs(rhs)] + [abs(v) for v in terms.values()])
    rel = 0.0 if res == 0.0 else abs(res) / scale
    return IdentityResidual(name, t, lhs, rhs, res, rel, terms)


def identity_scalar_lapse(traj: Trajectory, t: float, order: int = 0) -> IdentityResidual:
    if traj.gauge.is_parabolic:
        raise WrongGauge("scalar-lapse identity is stated for the CMC gauge")
    A = traj.bg.A
    d1 = state_integrals(traj.checkpoints[0], order)
    dt = state_integrals(traj.state_at(t), order)

    def energy(d):
        return d["e_pi"] + d["e_dpsi"] + d["e_dnu"] + (1.0 - A * A) * d["e_nu"]

    boundary = {"energy(1)": energy(d1), "C1(1)": d1["c1"], "-C1(t)": -dt["c1"]}
    spacetime = [
        ("-2 int |s dPsi|^2", -2.0, "e_dpsi"),
        ("-2 int C2", -2.0, "c2"),
        ("-int |s dnu|^2", -1.0, "e_dnu"),
        ("-A int Q1", -A, "q1"),
        ("-int nu^2", -1.0, "e_nu"),
        ("-int C1", -1.0, "c1"),
    ]
    return _assemble("scalar_lapse", t, energy(dt), boundary, spacetime, traj, order)


def _metric_spacetime(A):
    return [
        ("-1/2 int |s dgamma|^2", -0.5, "e_dgamma"),
        ("-1/2 int C3", -0.5, "c3"),
        ("int C4", 1.0, "c4"),
        ("int C5", 1.0, "c5"),
        ("int C6", 1.0, "c6"),
        ("int C7", 1.0, "c7"),
        ("A int Q2", A, "q2"),
        ("-A int Q3", -A, "q3"),
    ]


def identity_metric(traj: Trajectory, t: float, order: int = 0) -> IdentityResidual:
    if traj.gauge.is_parabolic:
        raise WrongGauge("use identity_parabolic for the parabolic gauge")
    A = traj.bg.A
    d1 = state_integrals(traj.checkpoints[0], order)
    dt = state_integrals(traj.state_at(t), order)
    energy = lambda d: d["e_K"] + 0.25 * d["e_dgamma"]  # noqa: E731
    return _assemble("metric", t, energy(dt), {"energy(1)": energy(d1)},
                     _metric_spacetime(A), traj, order)


def identity_parabolic(traj: Trajectory, t: float, which: str = "scalar-lapse",
                       variant: str = "corrected", order: int = 0, C_fit: float = 0.0) -> IdentityResidual:
    """Parabolic-gauge identities.

    ``variant="corrected"`` includes the lapse terms generated by the
    Hamiltonian constraint ``... + (2A^2 - 4/(3 lam)) nu = 0``;
    ``variant="naive"`` omits them.  ``which="lapse-energy-estimate"``
    returns the inequality with ``C_fit`` as the constant: a nonpositive
    ``residual`` means it holds.
    """
    if not traj.gauge.is_parabolic:
        raise WrongGauge("parabolic identities need a parabolic trajectory")
    A = traj.bg.A
    ell = traj.gauge.lam_inv
    d1 = state_integrals(traj.checkpoints[0], order)
    dt = state_integrals(traj.state_at(t), order)
    corrected = variant == "corrected"

    if which == "scalar-lapse":
        a_nu = A * A + 0.5 * ell * (1.0 - ell)

        def energy(d):
            return d["e_pi"] + d["e_dpsi"] + a_nu * d["e_nu"] - A * d["q4"]

        nu_coeff = (1.0 - ell) * (1.0 + ell / 3.0) if corrected else 1.0 - ell * ell
        spacetime = [
            ("-2 int |s dPsi|^2", -2.0, "e_dpsi"),
            ("-2 int C2", -2.0, "c2"),
            ("-(1-1/lam) int |s dnu|^2", -(1.0 - ell), "e_dnu"),
            ("-c_nu int nu^2", -nu_coeff, "e_nu"),
            ("-A int Q1", -A, "q1"),
            ("-(1-1/lam) int C1", -(1.0 - ell), "c1"),
        ]
        return _assemble(f"parabolic_scalar_lapse[{variant}]", t, energy(dt),
                         {"energy(1)": energy(d1)}, spacetime, traj, order)

    if which == "metric":
        energy = lambda d: d["e_K"] + 0.25 * d["e_dgamma"]  # noqa: E731
        spacetime = _metric_spacetime(A)
        spacetime[5] = ("(1-1/lam) int C7", 1.0 - ell, "c7")
        spacetime += [
            ("-2/lam int |s dnu|^2", -2.0 * ell, "e_dnu"),
            ("1/lam int Q3(dnu)", ell, "q3nu"),
        ]
        if corrected:
            spacetime.append(("-(2/3)(1/lam)(1-1/lam) int nu^2", -(2.0 / 3.0) * ell * (1.0 - ell), "e_nu"))
        return _assemble(f"parabolic_metric[{variant}]", t, energy(dt),
                         {"energy(1)": energy(d1)}, spacetime, traj, order)

    if which == "lapse-energy-estimate":
        sigma = traj.bg.sigma
        lhs = ell * dt["e_dnu"]
        boundary = {"1/lam E_dlapse(1)": ell * d1["e_dnu"]}
        spacetime = [
            ("-int |s^2 ddnu|^2", -1.0, "ddnu"),
            ("-(4/3 - 2 sigma)/lam int |s dnu|^2", -(4.0 / 3.0 - 2.0 * sigma) * ell, "e_dnu"),
            ("C int (khat:K)^2", C_fit, "khK2"),
            ("C int pi^2", C_fit, "e_pi"),
            ("C int nu^2", C_fit, "e_nu"),
        ]
        return _assemble("parabolic_lapse_estimate", t, lhs, boundary, spacetime, traj, order)

    raise ValueError(f"unknown identity {which!r}")


def lapse_estimate_deficit(traj: Trajectory, order: int = 0):
    """Per checkpoint: ``lhs - rhs`` without the C terms, and the C-multiplied integral."""
    ts = traj.times[1:]
    deficit, base = [], []
    for t in ts:
        r = identity_parabolic(traj, t, "lapse-energy-estimate", order=order, C_fit=0.0)
        deficit.append(r.residual)
        base.append(traj.acc("khK2", t, order) + traj.acc("e_pi", t, order) + traj.acc("e_nu", t, order))
    return ts, np.array(deficit), np.array(base)


def lapse_estimate_holdout(traj: Trajectory, t_split: float, order: int = 0) -> dict:
    """Fit ``C`` on ``[t_split, 1]`` and test the inequality on ``[t_min, t_split)``."""
    ts, deficit, base = lapse_estimate_deficit(traj, order)
    fit = ts >= t_split
    hold = ~fit
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(base > 0, deficit / base, np.where(deficit > 0, np.inf, 0.0))
    C_fit = float(max(0.0, np.max(ratio[fit], initial=0.0)))
    slack = deficit[hold] - C_fit * base[hold]
    scale = np.maximum(np.abs(deficit[hold]), np.abs(C_fit * base[hold]))
    worst = float(np.max(slack / np.where(scale > 0, scale, 1.0), initial=-np.inf))
    return {"C_fit": C_fit, "holds": bool(np.all(slack <= 1e-9 * np.maximum(scale, 1e-300))),
            "worst_relative_slack": worst, "t_split": t_split,
            "max_ratio_holdout": float(np.max(ratio[hold], initial=-np.inf))}


# ---------------------------------------------------------------- monotonicity

def monotonicity_report(traj: Trajectory, sigma_star: float = 0.1, t: float | None = None,
                        N: int = 0, t_mid: float | None = None) -> dict:
    """Terms of the approximate monotonicity inequality and a fitted ``(C, c)``.

    ``C`` and ``c`` in ``E(t) <= C E(1) t^{-c sigma}`` are fitted on
    ``[t_mid, 1]`` and checked on the remaining checkpoints.
    """
    if t is None:
        t = float(traj.times[-1])
    parabolic = traj.gauge.is_parabolic
    ts, e2 = total_energy_series(traj, sigma_star, N)
    E = np.sqrt(e2)
    i = traj.index_at(t)
    sigma = traj.bg.sigma
    acc = lambda k: traj.acc(k, t, N)  # noqa: E731
    favorable = {
        "-(1/6) sigma* int |s dgamma|^2": -sigma_star / 6.0 * acc("e_dgamma"),
        "-(1/6) int |s dPsi|^2": -acc("e_dpsi") / 6.0,
        "-(1/2) int nu^2": -0.5 * acc("e_nu"),
    }
    if not parabolic:
        favorable["-(1/6) int |s dnu|^2"] = -acc("e_dnu") / 6.0
    e_int = sigma_star * (acc("e_K") + 0.25 * acc("e_dgamma")) + acc("e_pi") + acc("e_dpsi") + acc("e_nu")
    if not parabolic:
        e_int += acc("e_dnu")
    if t_mid is None:
        t_mid = float(np.sqrt(traj.times[-1]))
    fitc = fit_growth_constants(ts, E, sigma, t_mid)
    return {
        "t": t,
        "sigma": sigma,
        "sigma_star": sigma_star,
        "N": N,
        "energy_sq_t": float(e2[i]),
        "energy_sq_1": float(e2[0]),
        "past_favorable": favorable,
        "growth_integral_per_c_sigma": float(e_int),
        "sign_audit": dict(traj.sign_audit),
        **fitc,
    }


def fit_growth_constants(ts, E, sigma: float, t_mid: float) -> dict:
    """Fit ``E(t) <= C E(1) t^{-c sigma}`` on ``t >= t_mid``; validate below it.

    ``c sigma`` is the largest growth rate of ``ln E`` against ``-ln t``
    over one-decade windows inside the fit window, and ``C`` the smallest
    constant that then covers the fit window.
    """
    ts = np.asarray(ts, dtype=float)
    E = np.asarray(E, dtype=float)
    if not np.any(E):
        return {"C_fit": 1.0, "c_fit": 0.0, "growth_rate_fit": 0.0, "t_mid": float(t_mid),
                "holdout_holds": True, "holdout_worst_log_excess": -np.inf, "max_ratio": 0.0}
    lt = -np.log(ts)
    lr = np.log(E / E[0])
    fit = ts >= t_mid * (1 - 1e-12)
    hold = ~fit
    rate = 0.0
    idx = np.flatnonzero(fit)
    for i in idx:
        j = idx[lt[idx] >= lt[i] + np.log(10.0) - 1e-9]
        if len(j):
            j = j[0]
            rate = max(rate, (lr[j] - lr[i]) / (lt[j] - lt[i]))
    c = rate / sigma if sigma > 0 else 0.0
    lnC = max(float(np.max(lr[fit] - c * sigma * lt[fit])), 0.0)
    viol = lr[hold] - (lnC + c * sigma * lt[hold])
    return {
        "C_fit": float(np.exp(lnC)),
        "c_fit": float(c),
        "growth_rate_fit": float(rate),
        "t_mid": float(t_mid),
        "holdout_holds": bool(np.all(viol <= 1e-12)),
        "holdout_worst_log_excess": float(np.max(viol, initial=-np.inf)),
        "max_ratio": float(np.max(np.exp(lr))),
    }


def growth_bound_check(traj: Trajectory, sigma_star: float = 0.1, N: int = 4,
                       t_mid: float | None = None, window=(1e-7, 1e-3), margin: float = 0.03) -> dict:
    """Fitted energy exponent against the allowance ``c_fit sigma + margin``."""
    ts, e2 = total_energy_series(traj, sigma_star, N)
    E = np.sqrt(e2)
    if t_mid is None:
        t_mid = float(np.sqrt(ts[-1]))
    fc = fit_growth_constants(ts, E, traj.bg.sigma, t_mid)
    fit = decay_fit(ts, E, window, quantity="E_total")
    allowance = fc["c_fit"] * traj.bg.sigma + margin
    return {**fc, "exponent": fit.exponent, "allowance": allowance,
            "passes": bool(abs(fit.exponent) <= allowance and fc["holdout_holds"])}


def fit_slope(x, y) -> float:
    A = np.vstack([x, np.ones_like(x)]).T
    return float(np.linalg.lstsq(A, y, rcond=None)[0][0])


# ---------------------------------------------------------------- decay fits

@dataclass
class DecayFit:
    quantity: str
    exponent: float
    window: tuple
    rms_misfit: float
    log_factor_detected: bool
    log_exponent: float | None = None
    log_coeffs: tuple | None = None
    f_ratio: float | None = None
    n_points: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def _log_model_rss(p, lt, lv):
    """Residual of ``v = t^p (a + b ln t)`` with ``(a, b)`` solved linearly in relative terms."""
    v = np.exp(lv)
    X = np.vstack([np.ones_like(lt), lt]).T * np.exp(p * lt)[:, None] / v[:, None]
    coef, *_ = np.linalg.lstsq(X, np.ones_like(lt), rcond=None)
    model = (X @ coef)
    if np.any(model <= 0):
        return np.inf, coef
    return float(np.sum(np.log(model) ** 2)), coef


def decay_fit(ts, values, window=None, with_log: bool = False, quantity: str = "",
              f_threshold: float = 10.0) -> DecayFit:
    """Log-log slope of ``values`` against ``ts`` inside ``window``.

    With ``with_log`` a second model ``t^p (a + b ln t)`` is also fitted and
    preferred when its F-ratio against the pure power law exceeds
    ``f_threshold``.
    """
    ts = np.asarray(ts, dtype=float)
    vs = np.asarray(values, dtype=float)
    if window is None:
        window = (float(ts.min()), float(ts.max()))
    lo, hi = window
    sel = (ts >= lo * (1 - 1e-12)) & (ts <= hi * (1 + 1e-12)) & (vs > 0)
    if sel.sum() < 10 or np.log10(ts[sel].max() / ts[sel].min()) < 2 - 1e-9:
        raise InsufficientSpan(f"need 10 points over 2 decades, got {int(sel.sum())}")
    lt = np.log(ts[sel])
    lv = np.log(vs[sel])
    n = len(lt)
    A = np.vstack([lt, np.ones_like(lt)]).T
    coef, *_ = np.linalg.lstsq(A, lv, rcond=None)
    resid = lv - A @ coef
    rss1 = float(np.sum(resid**2))
    out = DecayFit(quantity, float(coef[0]), (lo, hi), float(np.sqrt(rss1 / n)), False, n_points=n)
    if not with_log:
        return out
    p1 = float(coef[0])
    res = minimize_scalar(lambda p: _log_model_rss(p, lt, lv)[0],
                          bracket=(p1 - 0.5, p1 + 0.5), tol=1e-12)
    p2 = float(res.x)
    rss2, ab = _log_model_rss(p2, lt, lv)
    floor = 1e-24 * n
    gain = rss1 - rss2
    if gain <= floor:
        F = 0.0
    else:
        F = gain / max(rss2 / max(n - 3, 1), floor)
    out.f_ratio = float(F)
    out.log_exponent = p2
    out.log_coeffs = (float(ab[0]), float(ab[1]))
    if F > f_threshold:
        out.log_factor_detected = True
        out.exponent = p2
        out.rms_misfit = float(np.sqrt(rss2 / n))
    return out


def is_pure_log_growth(fit: DecayFit, ts=None, values=None, tol: float = 0.05,
                       persistence: float = 0.5) -> bool:
    """A log factor is present, the power part vanishes and the value keeps growing toward t -> 0.

    With ``ts``/``values`` the growth per decade in the older half of the
    window must be at least ``persistence`` times that of the younger half;
    a quantity settling to a limit fails this even when the F-test fires.
    """
    if not fit.log_factor_detected or abs(fit.exponent) > tol:
        return False
    a, b = fit.log_coeffs
    if a != 0 and b / a >= 0:
        return False
    if ts is None:
        return True
    ts = np.asarray(ts, dtype=float)
    vs = np.asarray(values, dtype=float)
    lo, hi = fit.window
    mid = np.sqrt(lo * hi)
    order = np.argsort(ts)
    at = lambda t: float(np.interp(np.log(t), np.log(ts[order]), vs[order]))  # noqa: E731
    late = (at(lo) - at(mid)) / np.log10(mid / lo)
    early = (at(mid) - at(hi)) / np.log10(hi / mid)
    return early > 0 and late >= persistence * early


# ---------------------------------------------------------------- norm series

def dtau_kmix(state: FieldState) -> np.ndarray:
    nu = state.require_lapse()
    _, dk, _, _ = core_rhs(state.bg, state.t, state.kvec, state.gamma, state.kmix,
                           state.psi, state.chi, nu, state.gauge.lam_inv)
    return dk


def norm_series(traj: Trajectory, N: int = 4) -> dict:
    """Time series of the norms appearing in the improved decay estimates."""
    out = {k: [] for k in ("nu_HNm1", "nu_HNm2", "pi_HNm1", "dtK_HNm1", "dpsi_HNm2", "K_HNm1")}
    for s in traj.checkpoints:
        n = s.n_modes
        out["nu_HNm1"].append(sobolev_norm_frame("nu", N - 1, s))
        out["nu_HNm2"].append(sobolev_norm_frame("nu", N - 2, s))
        out["pi_HNm1"].append(sobolev_norm_frame("pi", N - 1, s))
        dk = dtau_kmix(s).reshape(n, 9) / s.t
        out["dtK_HNm1"].append(sobolev_norm_coeffs(dk, s.kvec, N - 1))
        out["dpsi_HNm2"].append(sobolev_norm_frame("dpsi", N - 2, s))
        out["K_HNm1"].append(sobolev_norm_frame("K", N - 1, s))
    return {k: np.array(v) for k, v in out.items()}


def vtd_ratio(state: FieldState) -> float:
    """Size of the spatial term of the wave equation against the time-derivative terms."""
    _, ginv = state.metric()
    mu = state.kvec.astype(float) ** 2 @ ginv
    spatial = np.abs(state.t**2 * mu * state.psi)
    timeterm = np.abs(state.pi) + np.abs(state.chi)
    den = np.sqrt(np.sum(timeterm**2))
    return float(np.sqrt(np.sum(spatial**2)) / den) if den > 0 else 0.0


# ---------------------------------------------------------------- Bang limits

def _rescaled_metric(state: FieldState, K_bang: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """``t^{-2 q_j} gamma_ij`` plus the log or power correction built from ``K_bang``."""
    q = state.bg.qarr
    lt = np.log(state.t)
    out = state.gamma * np.exp(-2.0 * q[None, None, :] * lt)
    for i in range(3):
        for j in range(3):
            dq = q[i] - q[j]
            if abs(dq) <= tol:
                out[:, i, j] += 2.0 * lt * K_bang[:, i, j]
            else:
                out[:, i, j] += np.exp(2.0 * dq * lt) / dq * K_bang[:, i, j]
    return out


def _richardson(x1, x2, x3, r):
    """Limit of a sequence sampled at ``t, r t, r^2 t`` assuming ``x = L + c t^p``."""
    d1 = np.linalg.norm(x2 - x1)
    d2 = np.linalg.norm(x3 - x2)
    if d1 == 0.0 or d2 == 0.0:
        return x3.copy(), np.inf
    rp = d2 / d1
    p = np.log(rp) / np.log(r)
    if not (0.0 < rp < 1.0):
        return x3.copy(), p
    return x3 + (x3 - x2) * rp / (1.0 - rp), p


def _cauchy_rate(ts, series, window):
    diffs = np.array([np.linalg.norm(series[m + 1] - series[m]) for m in range(len(series) - 1)])
    tt = ts[1:]
    sel = (tt >= window[0]) & (tt <= window[1]) & (diffs > 0)
    if sel.sum() < 3:
        return float("inf") if np.all(diffs[(tt >= window[0]) & (tt <= window[1])] == 0) else float("nan")
    return fit_slope(np.log(tt[sel]), np.log(diffs[sel]))


def bang_limits(traj: Trajectory, window: tuple | None = None) -> dict:
    """Estimates of ``K_Bang``, ``Psi_Bang`` and ``h_Bang`` with Cauchy rates."""
    ts = traj.times
    if ts[-1] > 1e-4:
        raise InsufficientDepth(f"trajectory stops at t={ts[-1]:.2e}; need t <= 1e-4")
    if window is None:
        window = (float(ts[-1]), 1e-3)
    cps = traj.checkpoints
    r = ts[-1] / ts[-2]
    Ks = [c.kmix for c in cps]
    pis = [c.pi for c in cps]
    K_bang, pK = _richardson(Ks[-3], Ks[-2], Ks[-1], r)
    Psi_bang, pP = _richardson(pis[-3], pis[-2], pis[-1], r)
    hs = [_rescaled_metric(c, K_bang) for c in cps]
    h_bang, pH = _richardson(hs[-3], hs[-2], hs[-1], r)
    trace = np.einsum("naa->n", K_bang)
    Kscale = max(float(np.max(np.abs(K_bang), initial=0.0)), 1e-300)
    return {
        "K_bang": K_bang,
        "Psi_bang": Psi_bang,
        "h_bang": h_bang,
        "richardson_rates": {"K": float(pK), "pi": float(pP), "metric": float(pH)},
        "cauchy_rates": {
            "K": _cauchy_rate(ts, Ks, window),
            "pi": _cauchy_rate(ts, pis, window),
            "metric": _cauchy_rate(ts, hs, window),
        },
        "K_bang_trace_max": float(np.max(np.abs(trace), initial=0.0)),
        "K_bang_trace_relative": float(np.max(np.abs(trace), initial=0.0)) / Kscale,
    }


def sign_audit_ok(traj: Trajectory, slack: float = -1e-14) -> dict:
    return {name: (traj.sign_audit.get(name, np.inf) >= slack) for name in PAST_FAVORABLE}


def energy_norm_comparison(traj: Trajectory, sigma_star: float = 0.1, N: int = 4,
                           t_mid: float | None = None, window=(1e-7, 1e-3)) -> dict:
    """Two-sided comparison of the order-N total energy with the solution norm.

    Each ratio is bounded by ``C t^{-c sigma}`` with constants fitted above
    ``t_mid`` and checked below it; the late-time log-log slopes are also reported.
    """
    from .spectral_state import solution_norm

    ts, e2 = total_energy_series(traj, sigma_star, N)
    E = np.sqrt(e2)
    S = np.array([solution_norm(s, N) for s in traj.checkpoints])
    if t_mid is None:
        t_mid = float(np.sqrt(ts[-1]))
    out = {}
    for name, ratio in (("energy_over_norm", E / S), ("norm_over_energy", S / E)):
        fc = fit_growth_constants(ts, ratio, traj.bg.sigma, t_mid)
        # bound relative to the ratio at t=1 so C is the full constant
        fc["C_fit"] *= float(ratio[0])
        fc["slope"] = decay_fit(ts, ratio, window).exponent
        out[name] = fc
    return out
