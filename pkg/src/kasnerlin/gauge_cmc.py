"""Linearized Einstein-scalar field system in the CMC-transported gauge.

Time is ``tau = ln t``.  In this gauge the lapse perturbation is slaved to
the metric perturbation through an algebraic relation in each mode.  The
helpers prefixed with ``core_`` take the inverse gauge parameter ``ell``
(zero here) so the parabolic family can reuse them.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .background import KasnerBackground, metric_at, rescaled_secfund
from .errors import SolveFailure, StaleLapse, ZeroScalarAmplitude
from .linear_geometry import christoffel_lin, ricci_lin, scalar_curv_lin
from .spectral_state import FieldState, Gauge, conj_index, l2_norm_coeffs, lattice, solution_norm

_STALE_TOL = 1e-12


@dataclass
class CmcRhs:
    dgamma_dtau: np.ndarray
    dkmix_dtau: np.ndarray
    dpsi_dtau: np.ndarray
    dchi_dtau: np.ndarray


def mu_k(kvec, ginv):
    """``sum_a g^{aa} k_a^2``, the symbol of minus the background Laplacian."""
    return np.asarray(kvec, dtype=float) ** 2 @ ginv


def scalar_curv_weights(gamma, kvec):
    """Coefficients ``c[e, a]`` with ``R = sum_{e,a} g^{ee} g^{aa} c[e, a]``.

    Expanding the two terms of the linearized scalar curvature gives
    ``c[e, a] = k_e^2 gamma_aa - k_e k_a gamma_ea``.
    """
    kf = np.asarray(kvec, dtype=float)
    diag = np.einsum("naa->na", gamma)
    return kf[:, :, None] ** 2 * diag[:, None, :] - kf[:, :, None] * kf[:, None, :] * gamma


def solve_lapse(gamma, kvec, bg: KasnerBackground, t: float):
    """Per-mode lapse from ``t^2 Lap(nu) - nu = t^2 R``."""
    _, ginv = metric_at(bg, t)
    R = scalar_curv_lin(gamma, kvec, ginv)
    return -(t * t) * R / (1.0 + t * t * mu_k(kvec, ginv))


def lapse_time_derivative(gamma, dgamma_dtau, kvec, bg: KasnerBackground, t: float):
    """``t d_t nu`` for the algebraic CMC lapse, by the product rule."""
    _, ginv = metric_at(bg, t)
    q = bg.qarr
    t2 = t * t
    c = scalar_curv_weights(gamma, kvec)
    gg = np.outer(ginv, ginv)
    expo = 2.0 - 2.0 * q[:, None] - 2.0 * q[None, :]
    t2R = t2 * np.einsum("ea,nea->n", gg, c)
    dt2R = t2 * np.einsum("ea,nea->n", gg * expo, c) + t2 * scalar_curv_lin(dgamma_dtau, kvec, ginv)
    kf2 = np.asarray(kvec, dtype=float) ** 2
    D = 1.0 + t2 * (kf2 @ ginv)
    dD = t2 * (kf2 @ (ginv * (2.0 - 2.0 * q)))
    return -(dt2R * D - t2R * dD) / (D * D)


# ---------------------------------------------------------------- shared core

def core_rhs(bg, t, kvec, gamma, kmix, psi, chi, nu, ell=0.0, christ=None):
    """Right-hand sides for ``(gamma, K, Psi, chi)`` given the lapse."""
    g, ginv = metric_at(bg, t)
    q = bg.qarr
    t2 = t * t
    kf = np.asarray(kvec, dtype=float)
    if christ is None:
        christ = christoffel_lin(gamma, kvec, ginv)
    ric = ricci_lin(gamma, kvec, ginv, christ)
    # -2 gamma_ia k^a_j - 2 g_ia K^a_j - 2 g_ia k^a_j nu with k = diag(-q)
    dgamma = 2.0 * gamma * q[None, None, :] - 2.0 * g[None, :, None] * kmix
    dgamma = dgamma + np.einsum("ij,n->nij", np.diag(2.0 * g * q), nu)
    dkmix = t2 * ginv[None, :, None] * kf[:, :, None] * kf[:, None, :] * nu[:, None, None]
    dkmix = dkmix + (1.0 - ell) * np.einsum("ij,n->nij", np.diag(q), nu) + t2 * ric
    mu = kf**2 @ ginv
    dpsi = chi + bg.A * nu
    dchi = -t2 * mu * psi - bg.A * (1.0 - ell) * nu
    return dgamma, dkmix, dpsi, dchi


def core_constraints(bg, t, kvec, gamma, kmix, psi, chi, nu, ell=0.0, ham_nu_coeff=None):
    """Left-minus-right of the linearized constraints, per mode.

    ``ham_nu_coeff`` overrides the lapse coefficient of the Hamiltonian
    constraint; by default it is ``2 A^2 - (4/3) ell``, the value obtained by
    linearizing with the trace ``K^a_a = ell nu``.
    """
    g, ginv = metric_at(bg, t)
    q = bg.qarr
    A = bg.A
    t2 = t * t
    kf = np.asarray(kvec, dtype=float)
    ik = 1j * kf
    _, khat = rescaled_secfund(bg)
    kh = np.diag(khat)
    christ = christoffel_lin(gamma, kvec, ginv)
    R = scalar_curv_lin(gamma, kvec, ginv, christ)
    pi = chi + A * nu
    khK = np.einsum("a,naa->n", kh, kmix)
    if ham_nu_coeff is None:
        ham_nu_coeff = 2.0 * A * A - (4.0 / 3.0) * ell
    ham_terms = [t2 * R, -2.0 * khK, -2.0 * A * pi, ham_nu_coeff * nu]
    ham = sum(ham_terms)

    cont = np.einsum("naai->ni", christ)  # Gamma^a_{ai}
    div_low = np.einsum("na,nai->ni", ik, kmix)
    mom_terms = [
        div_low,
        -ell * ik * nu[:, None],
        A * ik * psi[:, None],
        cont * kh[None, :],
        -np.einsum("naai,a->ni", christ, kh),
    ]
    mom = sum(mom_terms)

    div_up = np.einsum("b,nb,nib->ni", ginv, ik, kmix)
    tr_christ = np.einsum("b,nibb->ni", ginv, christ)  # g^{ab} Gamma^i_{ab}
    mom_up_terms = [
        div_up,
        -ell * ginv[None, :] * ik * nu[:, None],
        A * ginv[None, :] * ik * psi[:, None],
        np.einsum("b,nibb->ni", ginv * kh, christ),
        -tr_christ * kh[None, :],
    ]
    mom_up = sum(mom_up_terms)

    # lowered second fundamental form must stay symmetric
    low = g[None, :, None] * kmix - gamma * q[None, None, :]
    sym = low - np.swapaxes(low, 1, 2)
    iu = np.triu_indices(3, 1)
    sym = sym[:, iu[0], iu[1]]
    sym_terms = [g[None, :, None] * kmix, gamma * q[None, None, :]]

    trace = np.einsum("naa->n", kmix) - ell * nu

    lapse_low_terms = [-t2 * (kf**2 @ ginv) * nu, -nu, -t2 * R]
    return {
        "ham": (ham, ham_terms),
        "mom": (mom, mom_terms),
        "mom_up": (mom_up, mom_up_terms),
        "sym": (sym, sym_terms),
        "trace": (trace, [kmix, ell * nu]),
        "lapse": (sum(lapse_low_terms), lapse_low_terms),
    }


def relative_residual(resid, terms, weights=None) -> float:
    """L2 norm of a residual over the sum of L2 norms of its terms."""
    n = len(resid)
    num = l2_norm_coeffs(np.asarray(resid).reshape(n, -1), weights)
    den = sum(l2_norm_coeffs(np.asarray(x).reshape(n, -1), weights) for x in terms)
    if den == 0.0:
        return 0.0 if num == 0.0 else float("inf")
    return num / den


# ---------------------------------------------------------------- public ops

def constraint_residuals(state: FieldState) -> dict:
    """Per-mode residuals of the CMC constraints.

    Keys ``ham``, ``mom`` and ``mom_up`` hold the Hamiltonian and the lower and upper momentum constraints;
    ``sym`` the symmetry of the lowered second fundamental form, ``trace`` the
    gauge condition and ``lapse`` the lower lapse equation.
    """
    nu = state.require_lapse()
    out = core_constraints(state.bg, state.t, state.kvec, state.gamma, state.kmix,
                           state.psi, state.chi, nu, 0.0)
    return {key: val[0] for key, val in out.items()}


def relative_constraint_residuals(state: FieldState) -> dict:
    nu = state.require_lapse()
    ell = state.gauge.lam_inv
    out = core_constraints(state.bg, state.t, state.kvec, state.gamma, state.kmix,
                           state.psi, state.chi, nu, ell)
    if state.gauge.is_parabolic:
        out.pop("lapse")
    return {key: relative_residual(r, terms) for key, (r, terms) in out.items()}


def normalized_constraint_residuals(state: FieldState, ham_nu_coeff=None) -> dict:
    """Residual L2 norms divided by the solution norm of matching order.

    Undifferentiated relations use the order-0 solution norm and the lower
    momentum form the order-1 norm.  The raised momentum form carries an
    inverse metric factor that grows as t -> 0, so it is measured in the
    background norm against the sum of its own terms instead.
    """
    nu = state.require_lapse()
    ell = state.gauge.lam_inv
    out = core_constraints(state.bg, state.t, state.kvec, state.gamma, state.kmix,
                           state.psi, state.chi, nu, ell, ham_nu_coeff)
    if state.gauge.is_parabolic:
        out.pop("lapse")
    s0 = solution_norm(state, 0)
    s1 = solution_norm(state, 1)
    res = {}
    g, _ = state.metric()
    for key, (r, terms) in out.items():
        if key == "mom_up":
            res[key] = relative_residual(r, terms, g)
            continue
        num = l2_norm_coeffs(np.asarray(r).reshape(len(r), -1))
        den = s1 if key.startswith("mom") else s0
        res[key] = 0.0 if num == 0.0 else num / den
    return res


def lapse_upper_residual(state: FieldState):
    """Residual of ``2 A pi + 2 khat:K = t^2 Lap(nu) + (2A^2 - 1) nu``."""
    nu = state.require_lapse()
    _, ginv = state.metric()
    _, khat = rescaled_secfund(state.bg)
    A = state.bg.A
    khK = np.einsum("a,naa->n", np.diag(khat), state.kmix)
    lap = -state.t**2 * mu_k(state.kvec, ginv) * nu
    return 2 * A * state.pi + 2 * khK - lap - (2 * A * A - 1) * nu


def with_lapse(state: FieldState) -> FieldState:
    """Copy of ``state`` with the CMC lapse freshly solved."""
    nu = solve_lapse(state.gamma, state.kvec, state.bg, state.t)
    return state.copy(nu=nu)


def evolution_rhs(state: FieldState, check: bool = True) -> CmcRhs:
    nu = state.require_lapse()
    if check:
        fresh = solve_lapse(state.gamma, state.kvec, state.bg, state.t)
        scale = max(float(np.max(np.abs(fresh), initial=0.0)), 1.0)
        if np.max(np.abs(fresh - nu), initial=0.0) > _STALE_TOL * scale:
            raise StaleLapse("lapse does not match the current metric perturbation")
    dg, dk, dp, dc = core_rhs(state.bg, state.t, state.kvec, state.gamma, state.kmix,
                              state.psi, state.chi, nu, 0.0)
    return CmcRhs(dg, dk, dp, dc)


# ---------------------------------------------------------------- initial data

def _amplitude(kvec, spectrum):
    """Per-mode amplitude: ``(1 + |k|^2)^(-spectrum)``, or ``spectrum(|k|^2)`` if callable."""
    k2 = np.sum(np.asarray(kvec, dtype=float) ** 2, axis=1)
    if callable(spectrum):
        return np.asarray(spectrum(k2), dtype=float)
    return (1.0 + k2) ** (-float(spectrum))


def _hermitian(arr, partner):
    return 0.5 * (arr + np.conj(arr[partner]))


def _draw(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def draw_fields(kvec, seed, spectrum=2.0, draw_lapse=False):
    """Hermitian-symmetric random fields with the given amplitude law."""
    rng = np.random.default_rng(seed)
    n = len(kvec)
    amp = _amplitude(kvec, spectrum)
    partner = conj_index(kvec)
    gamma = _draw(rng, (n, 3, 3))
    gamma = 0.5 * (gamma + np.swapaxes(gamma, 1, 2))
    kmix = _draw(rng, (n, 3, 3))
    psi = _draw(rng, n)
    nu = _draw(rng, n) if draw_lapse else None
    out = {
        "gamma": _hermitian(gamma * amp[:, None, None], partner),
        "kmix": _hermitian(kmix * amp[:, None, None], partner),
        "psi": _hermitian(psi * amp, partner),
    }
    if draw_lapse:
        out["nu"] = _hermitian(nu * amp, partner)
    return out, partner


def constraint_matrix(bg, t, kvec, gamma, psi, nu, ell):
    """Linear conditions ``C x = b`` on the nine components ``x = K.ravel()``.

    Rows: three momentum equations (lower form), the trace condition and the
    three symmetry conditions on the lowered second fundamental form.
    """
    g, ginv = metric_at(bg, t)
    q = bg.qarr
    A = bg.A
    n = len(kvec)
    ik = 1j * np.asarray(kvec, dtype=float)
    _, khat = rescaled_secfund(bg)
    kh = np.diag(khat)
    christ = christoffel_lin(gamma, kvec, ginv)
    C = np.zeros((n, 7, 9), complex)
    b = np.zeros((n, 7), complex)
    cont = np.einsum("naai->ni", christ)
    for i in range(3):
        for a in range(3):
            C[:, i, 3 * a + i] = ik[:, a]
    b[:, :3] = (ell * ik * nu[:, None] - A * ik * psi[:, None] - cont * kh[None, :]
                + np.einsum("naai,a->ni", christ, kh))
    for a in range(3):
        C[:, 3, 4 * a] = 1.0
    b[:, 3] = ell * nu
    for r, (i, j) in enumerate(((0, 1), (0, 2), (1, 2))):
        C[:, 4 + r, 3 * i + j] = g[i]
        C[:, 4 + r, 3 * j + i] = -g[j]
        b[:, 4 + r] = (q[j] - q[i]) * gamma[:, i, j]
    return C, b


def least_norm_correction(kmix0, C, b, kvec):
    """Minimal Frame-norm change of ``kmix0`` satisfying ``C x = b`` per mode."""
    n = len(kvec)
    x0 = kmix0.reshape(n, 9)
    r = b - np.einsum("nij,nj->ni", C, x0)
    x = x0.copy()
    zero = np.all(np.asarray(kvec) == 0, axis=1)
    for m in range(n):
        Cm, rm = (C[m, 3:], r[m, 3:]) if zero[m] else (C[m], r[m])
        s = np.linalg.svd(Cm, compute_uv=False)
        if s[-1] <= 1e-12 * s[0]:
            raise SolveFailure(f"constraint system singular at mode {tuple(kvec[m])}")
        x[m] = x0[m] + np.linalg.pinv(Cm) @ rm
    return x.reshape(n, 3, 3)


def hamiltonian_pi(bg, t, kvec, gamma, kmix, nu, ham_nu_coeff):
    """Solve the Hamiltonian constraint for ``t d_t Psi``."""
    if bg.A == 0.0:
        raise ZeroScalarAmplitude("Hamiltonian constraint cannot fix the scalar momentum when A = 0")
    _, ginv = metric_at(bg, t)
    _, khat = rescaled_secfund(bg)
    R = scalar_curv_lin(gamma, kvec, ginv)
    khK = np.einsum("a,naa->n", np.diag(khat), kmix)
    return (t * t * R - 2.0 * khK + ham_nu_coeff * nu) / (2.0 * bg.A)


def make_initial_data(bg: KasnerBackground, seed: int = 0, k_max: int = 4,
                      spectrum=2.0, t: float = 1.0, check: bool = True) -> FieldState:
    """Constraint-satisfying CMC data drawn with a power-law spectrum."""
    if bg.A == 0.0:
        raise ZeroScalarAmplitude("CMC data construction needs A > 0")
    kvec = lattice(k_max)
    fields, partner = draw_fields(kvec, seed, spectrum)
    gamma, psi = fields["gamma"], fields["psi"]
    nu = solve_lapse(gamma, kvec, bg, t)
    C, b = constraint_matrix(bg, t, kvec, gamma, psi, nu, 0.0)
    kmix = least_norm_correction(fields["kmix"], C, b, kvec)
    kmix = _hermitian(kmix, partner)
    pi = hamiltonian_pi(bg, t, kvec, gamma, kmix, nu, 2.0 * bg.A**2)
    chi = _hermitian(pi - bg.A * nu, partner)
    state = FieldState(t, bg, Gauge.cmc(), kvec, gamma, kmix, psi, chi, nu, partner)
    if check:
        _check_constructed(state)
    return state


def _check_constructed(state: FieldState, tol: float = 1e-12):
    rel = relative_constraint_residuals(state)
    bad = {k: v for k, v in rel.items() if v > tol}
    if bad:
        raise SolveFailure(f"constructed data violate constraints: {bad}")
