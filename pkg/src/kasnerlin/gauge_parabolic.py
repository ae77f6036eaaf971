"""Linearized system in the parabolic lapse gauge ``K^a_a = lam^{-1} nu``.

The lapse is an evolved unknown obeying
``dnu/dtau = lam [(t^2 mu_k + 1 - 1/lam) nu + t^2 R]``, which is well posed
only toward the past.  The self-coupling coefficient integrates in closed
form, which the integrator uses as an exponential factor.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .background import KasnerBackground, metric_at, rescaled_secfund
from .errors import ConfigError, ZeroScalarAmplitude
from .gauge_cmc import (
    _check_constructed,
    _hermitian,
    constraint_matrix,
    core_constraints,
    core_rhs,
    draw_fields,
    hamiltonian_pi,
    least_norm_correction,
    mu_k,
)
from .linear_geometry import scalar_curv_lin
from .spectral_state import FieldState, Gauge, lattice


@dataclass(frozen=True)
class ParabolicParams:
    lam: float

    def __post_init__(self):
        if self.lam == 0:
            raise ConfigError("lambda must be nonzero")

    @property
    def monotone_regime(self) -> bool:
        return self.lam >= 3.0


@dataclass
class ParabolicRhs:
    dgamma_dtau: np.ndarray
    dkmix_dtau: np.ndarray
    dpsi_dtau: np.ndarray
    dchi_dtau: np.ndarray
    dnu_dtau: np.ndarray


def hamiltonian_nu_coeff(A: float, lam: float) -> float:
    """Lapse coefficient of the linearized Hamiltonian constraint, ``2A^2 - 4/(3 lam)``."""
    return 2.0 * A * A - 4.0 / (3.0 * lam)


def naive_hamiltonian_nu_coeff(A: float, lam: float) -> float:
    """The alternative coefficient ``2(A^2 - 1/lam)``; kept for comparison runs."""
    return 2.0 * (A * A - 1.0 / lam)


def lapse_rate(bg: KasnerBackground, t: float, kvec, lam: float):
    """Per-mode self-coupling ``lam (t^2 mu_k + 1 - 1/lam)``."""
    _, ginv = metric_at(bg, t)
    return lam * (t * t * mu_k(kvec, ginv) + 1.0 - 1.0 / lam)


def lapse_rate_integral(bg: KasnerBackground, tau: float, tau0: float, kvec, lam: float):
    """``int_{tau0}^{tau}`` of :func:`lapse_rate`, exactly.

    Uses ``t^2 mu_k = sum_a k_a^2 exp((2 - 2 q_a) tau)``.
    """
    kf2 = np.asarray(kvec, dtype=float) ** 2
    p = 2.0 - 2.0 * bg.qarr
    out = np.zeros(len(kf2))
    for a in range(3):
        if p[a] == 0.0:
            out += kf2[:, a] * (tau - tau0)
        else:
            out += kf2[:, a] * np.exp(p[a] * tau0) * np.expm1(p[a] * (tau - tau0)) / p[a]
    return lam * (out + (1.0 - 1.0 / lam) * (tau - tau0))


def lapse_rhs(state: FieldState):
    lam = state.gauge.lam
    _, ginv = state.metric()
    R = scalar_curv_lin(state.gamma, state.kvec, ginv)
    t2 = state.t**2
    return lam * ((t2 * mu_k(state.kvec, ginv) + 1.0 - 1.0 / lam) * state.nu + t2 * R)


def evolution_rhs_parabolic(state: FieldState) -> ParabolicRhs:
    nu = state.require_lapse()
    ell = state.gauge.lam_inv
    dg, dk, dp, dc = core_rhs(state.bg, state.t, state.kvec, state.gamma, state.kmix,
                              state.psi, state.chi, nu, ell)
    return ParabolicRhs(dg, dk, dp, dc, lapse_rhs(state))


def constraint_residuals_parabolic(state: FieldState, ham_nu_coeff: float | None = None) -> dict:
    """Residuals ``ham``, ``mom``, ``mom_up``, ``trace`` (plus ``sym``) per mode."""
    nu = state.require_lapse()
    lam = state.gauge.lam
    if ham_nu_coeff is None:
        ham_nu_coeff = hamiltonian_nu_coeff(state.bg.A, lam)
    out = core_constraints(state.bg, state.t, state.kvec, state.gamma, state.kmix,
                           state.psi, state.chi, nu, 1.0 / lam, ham_nu_coeff)
    out.pop("lapse")
    return {key: val[0] for key, val in out.items()}


def lapse_upper_residual(state: FieldState):
    """Residual of the lapse equation written with the Hamiltonian substituted."""
    nu = state.require_lapse()
    lam = state.gauge.lam
    _, ginv = state.metric()
    _, khat = rescaled_secfund(state.bg)
    A = state.bg.A
    khK = np.einsum("a,naa->n", np.diag(khat), state.kmix)
    lap = -state.t**2 * mu_k(state.kvec, ginv) * nu
    coeff = 2.0 * A * A - 1.0 - 1.0 / (3.0 * lam)
    return 2 * A * state.pi + 2 * khK - lapse_rhs(state) / lam - lap - coeff * nu


def make_initial_data_parabolic(bg: KasnerBackground, lam: float, seed: int = 0, k_max: int = 4,
                                spectrum=2.0, t: float = 1.0, check: bool = True) -> FieldState:
    """Constraint-satisfying parabolic data; the lapse is free data."""
    ParabolicParams(lam)
    if bg.A == 0.0:
        raise ZeroScalarAmplitude("data construction needs A > 0")
    ell = 1.0 / lam
    kvec = lattice(k_max)
    fields, partner = draw_fields(kvec, seed, spectrum, draw_lapse=True)
    gamma, psi, nu = fields["gamma"], fields["psi"], fields["nu"]
    C, b = constraint_matrix(bg, t, kvec, gamma, psi, nu, ell)
    kmix = _hermitian(least_norm_correction(fields["kmix"], C, b, kvec), partner)
    pi = hamiltonian_pi(bg, t, kvec, gamma, kmix, nu, hamiltonian_nu_coeff(bg.A, lam))
    chi = _hermitian(pi - bg.A * nu, partner)
    state = FieldState(t, bg, Gauge.parabolic(lam), kvec, gamma, kmix, psi, chi, nu, partner)
    if check:
        _check_constructed(state)
    return state
