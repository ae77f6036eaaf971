"""Backward integration in ``tau = ln t`` with stage-level accumulators.

The stepper is the Dormand-Prince 5(4) pair.  In the parabolic gauge the
stiff lapse self-coupling is integrated exactly through a per-step
exponential factor (a Lawson transformation of the same tableau).

Accumulators hold ``int_t^1 s^{-1} F(s) ds = int_tau^0 F dtau'`` for every
spatial integral ``F`` listed in :mod:`kasnerlin.forms`.  By default they
reuse the Runge-Kutta stages, so they converge at the order of the stepper.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import forms
from .background import metric_at
from .errors import ConfigError, ForwardParabolic, NonFiniteState, StepLimitExceeded
from .gauge_cmc import core_rhs, mu_k
from .gauge_parabolic import lapse_rate_integral
from .linear_geometry import christoffel_lin, scalar_curv_lin
from .spectral_state import FieldState, energy_weight

log = logging.getLogger(__name__)

# Dormand-Prince 5(4) coefficients
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_BHAT = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B - _BHAT

# integrands whose dx-integral carries a past-favorable sign
PAST_FAVORABLE = {
    "scalar_grad": ("e_dpsi", "c2"),
    "metric_grad": ("e_dgamma", "c3"),
    "dlapse": ("e_dnu",),
    "lapse": ("e_nu",),
    "ddlapse": ("ddnu",),
}


@dataclass
class IntegratorOptions:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-14
    t_min: float = 1e-8
    checkpoints_per_decade: int = 4
    scheme: str = "auto"  # "rk45", "rk45-expo" or "auto"
    max_steps: int = 200_000
    accumulate: str = "stages"  # "stages" (high order) or "trapezoid"
    steps_per_checkpoint: int | None = None  # fixed-step mode when set
    orders: tuple = (0,)  # derivative orders for accumulated integrals
    first_step: float = 1e-3
    extra_times: tuple = ()

    def __post_init__(self):
        if not (0.0 < self.t_min < 1.0):
            raise ConfigError("t_min must lie in (0, 1)")
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ConfigError("tolerances must be positive")
        if self.scheme not in ("auto", "rk45", "rk45-expo"):
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        if self.accumulate not in ("stages", "trapezoid"):
            raise ConfigError(f"unknown accumulator mode {self.accumulate!r}")


@dataclass
class Trajectory:
    checkpoints: list
    accumulators: dict  # key -> array aligned with checkpoints
    times: np.ndarray
    stats: dict = field(default_factory=dict)
    sign_audit: dict = field(default_factory=dict)
    options: IntegratorOptions | None = None

    @property
    def gauge(self):
        return self.checkpoints[0].gauge

    @property
    def bg(self):
        return self.checkpoints[0].bg

    def index_at(self, t: float, rtol: float = 1e-9) -> int:
        hits = np.flatnonzero(np.abs(self.times - t) <= rtol * t)
        if len(hits) == 0:
            raise KeyError(f"no checkpoint at t={t}")
        return int(hits[0])

    def state_at(self, t: float) -> FieldState:
        return self.checkpoints[self.index_at(t)]

    def acc(self, key: str, t: float, order: int = 0) -> float:
        from .errors import MissingAccumulator

        name = f"{key}@{order}"
        if name not in self.accumulators:
            raise MissingAccumulator(name)
        return float(self.accumulators[name][self.index_at(t)])


class LinearSystem:
    """Packs a gauge system into an ``(n, ncomp)`` complex state array.

    Columns: 9 metric, 9 second fundamental form, Psi, chi and, in the
    parabolic gauge, the lapse.
    """

    def __init__(self, bg, gauge, kvec):
        self.bg = bg
        self.gauge = gauge
        self.kvec = kvec
        self.parabolic = gauge.is_parabolic
        self.ncomp = 21 if self.parabolic else 20
        self.ell = gauge.lam_inv
        self.kf2 = np.asarray(kvec, dtype=float) ** 2

    def pack(self, s: FieldState) -> np.ndarray:
        n = s.n_modes
        cols = [s.gamma.reshape(n, 9), s.kmix.reshape(n, 9), s.psi[:, None], s.chi[:, None]]
        if self.parabolic:
            cols.append(s.require_lapse()[:, None])
        return np.concatenate(cols, axis=1).astype(complex)

    def split(self, y):
        n = len(y)
        gamma = y[:, 0:9].reshape(n, 3, 3)
        kmix = y[:, 9:18].reshape(n, 3, 3)
        return gamma, kmix, y[:, 18], y[:, 19], (y[:, 20] if self.parabolic else None)

    def evaluate(self, tau: float, y: np.ndarray):
        """Right-hand side and the fields needed by the integrands."""
        t = float(np.exp(tau))
        gamma, kmix, psi, chi, nu = self.split(y)
        _, ginv = metric_at(self.bg, t)
        christ = christoffel_lin(gamma, self.kvec, ginv)
        R = scalar_curv_lin(gamma, self.kvec, ginv, christ)
        t2mu = t * t * (self.kf2 @ ginv)
        if nu is None:
            nu = -(t * t) * R / (1.0 + t2mu)
        dg, dk, dp, dc = core_rhs(self.bg, t, self.kvec, gamma, kmix, psi, chi, nu, self.ell, christ)
        n = len(y)
        cols = [dg.reshape(n, 9), dk.reshape(n, 9), dp[:, None], dc[:, None]]
        if self.parabolic:
            lam = self.gauge.lam
            cols.append((lam * ((t2mu + 1.0 - self.ell) * nu + t * t * R))[:, None])
        dy = np.concatenate(cols, axis=1)
        aux = (t, gamma, kmix, psi, chi + self.bg.A * nu, nu, christ)
        return dy, aux

    def linear_part(self, tau: float) -> np.ndarray | None:
        """Diagonal rate removed from the stage values under the exponential scheme."""
        if not self.parabolic:
            return None
        t = float(np.exp(tau))
        _, ginv = metric_at(self.bg, t)
        lam = self.gauge.lam
        rate = np.zeros((len(self.kvec), self.ncomp))
        rate[:, 20] = lam * (t * t * (self.kf2 @ ginv) + 1.0 - self.ell)
        return rate

    def exponent(self, tau: float, tau0: float) -> np.ndarray:
        out = np.zeros((len(self.kvec), self.ncomp))
        out[:, 20] = lapse_rate_integral(self.bg, tau, tau0, self.kvec, self.gauge.lam)
        return out

    def project(self, y: np.ndarray, partner: np.ndarray) -> float:
        """Enforce the trace condition and Hermitian symmetry in place.

        Returns the trace defect removed, relative to the size of K.
        """
        gamma, kmix, psi, chi, nu = self.split(y)
        target = 0.0 if nu is None else self.ell * nu
        tr = np.einsum("naa->n", kmix) - target
        scale = max(float(np.max(np.abs(kmix), initial=0.0)), 1e-300)
        defect = float(np.max(np.abs(tr), initial=0.0)) / scale
        for a in range(3):
            y[:, 9 + 4 * a] -= tr / 3.0
        y[:] = 0.5 * (y + np.conj(y[partner]))
        return defect

    def unpack(self, tau: float, y: np.ndarray, template: FieldState) -> FieldState:
        t = float(np.exp(tau))
        gamma, kmix, psi, chi, nu = self.split(y.copy())
        if nu is None:
            _, ginv = metric_at(self.bg, t)
            R = scalar_curv_lin(gamma, self.kvec, ginv)
            nu = -(t * t) * R / (1.0 + t * t * (self.kf2 @ ginv))
        s = FieldState(t, self.bg, self.gauge, self.kvec, gamma.copy(), kmix.copy(),
                       psi.copy(), chi.copy(), nu.copy(), template.partner)
        return s


class _Integrands:
    """Evaluates accumulator integrands and keeps the sign audit."""

    def __init__(self, kvec, orders):
        self.orders = tuple(orders)
        self.weights = {M: energy_weight(kvec, M) for M in self.orders}
        self.keys = None
        self.audit = {name: np.inf for name in PAST_FAVORABLE}

    def __call__(self, aux) -> np.ndarray:
        t, gamma, kmix, psi, pi, nu, christ = aux
        from .spectral_state import VOLUME

        d = forms.mode_densities(self._bg, t, self._kvec, gamma, kmix, psi, pi, nu, christ)
        if self.keys is None:
            self.keys = [f"{k}@{M}" for M in self.orders for k in d]
        vals = []
        for M in self.orders:
            w = self.weights[M]
            for k in d:
                vals.append(VOLUME * float(np.dot(w, d[k])))
        for name, parts in PAST_FAVORABLE.items():
            total = sum(float(np.sum(d[p])) for p in parts)
            scale = sum(float(np.sum(np.abs(d[p]))) for p in parts)
            if scale > 0.0:
                self.audit[name] = min(self.audit[name], total / scale)
        return np.array(vals)


def checkpoint_times(opts: IntegratorOptions, t0: float = 1.0) -> np.ndarray:
    """Log-spaced checkpoint times from ``t0`` down to ``t_min``."""
    cpd = opts.checkpoints_per_decade
    decades = np.log10(t0 / opts.t_min)
    n = int(np.floor(decades * cpd + 1e-9))
    ts = t0 * 10.0 ** (-np.arange(n + 1) / cpd)
    ts = list(ts)
    if ts[-1] > opts.t_min * (1 + 1e-12):
        ts.append(opts.t_min)
    ts.extend(t for t in opts.extra_times if opts.t_min < t < t0)
    ts = np.array(sorted(set(ts), reverse=True))
    return ts


def integrate(initial: FieldState, opts: IntegratorOptions | None = None,
              t_end: float | None = None) -> Trajectory:
    """Integrate ``initial`` toward the past, recording checkpoints and accumulators."""
    opts = opts or IntegratorOptions()
    gauge = initial.gauge
    t0 = initial.t
    if t_end is None:
        t_end = opts.t_min
    if t_end > t0:
        if gauge.is_parabolic:
            raise ForwardParabolic("the parabolic lapse gauge only integrates toward the past")
        if t_end > 1.0:
            raise ConfigError("integration past t=1 is not supported")
    if t_end <= 0.0:
        raise ConfigError("t_end must be positive")
    scheme = opts.scheme
    if scheme == "auto":
        scheme = "rk45-expo" if gauge.is_parabolic else "rk45"
    use_expo = scheme == "rk45-expo" and gauge.is_parabolic

    system = LinearSystem(initial.bg, gauge, initial.kvec)
    integrand = _Integrands(initial.kvec, opts.orders)
    integrand._bg, integrand._kvec = initial.bg, initial.kvec
    partner = initial.partner

    if t_end < t0:
        times = checkpoint_times(IntegratorOptions(**{**opts.__dict__, "t_min": t_end}), t0)
    else:
        times = np.array([t0, t_end])
    taus = np.log(times)

    y = system.pack(initial)
    tau = float(np.log(t0))
    f_n, aux = system.evaluate(tau, y)
    g_n = integrand(aux)
    acc = np.zeros_like(g_n)

    checkpoints = [system.unpack(tau, y, initial)]
    acc_hist = [acc.copy()]
    stats = {"steps": 0, "rejected": 0, "evaluations": 1, "max_trace_defect": 0.0,
             "max_hermitian_defect": 0.0, "scheme": scheme}
    direction = -1.0 if t_end < t0 else 1.0
    h = direction * abs(opts.first_step)
    wall = time.perf_counter()

    for target in taus[1:]:
        nsub = opts.steps_per_checkpoint
        fixed_h = None if nsub is None else (target - tau) / nsub
        while direction * (target - tau) > 1e-14:
            if stats["steps"] >= opts.max_steps:
                raise StepLimitExceeded(f"more than {opts.max_steps} steps before t={np.exp(tau):.3e}")
            if fixed_h is not None:
                h = fixed_h
            if direction * (tau + h - target) > 0:
                h = target - tau
            y_new, f_new, g_stages, err, aux_new = _dp_step(
                system, integrand, tau, y, h, f_n, g_n, use_expo, opts)
            stats["evaluations"] += 6
            if fixed_h is None:
                fac = 0.9 * (max(err, 1e-16)) ** (-0.2)
                if err > 1.0:
                    stats["rejected"] += 1
                    h *= min(1.0, max(0.2, fac))
                    continue
            if not np.all(np.isfinite(y_new)):
                raise NonFiniteState(f"non-finite state near t={np.exp(tau + h):.3e}")
            tau = tau + h
            y = y_new
            stats["max_hermitian_defect"] = max(
                stats["max_hermitian_defect"],
                float(np.max(np.abs(y[partner] - np.conj(y)), initial=0.0)))
            stats["max_trace_defect"] = max(stats["max_trace_defect"], system.project(y, partner))
            acc = accumulate_spacetime_integrals(acc, g_stages, h, opts.accumulate)
            f_n, aux = system.evaluate(tau, y)
            g_n = integrand(aux)
            stats["evaluations"] += 1
            stats["steps"] += 1
            if fixed_h is None:
                h *= min(5.0, max(0.2, fac))
        tau = float(target)
        checkpoints.append(system.unpack(tau, y, initial))
        acc_hist.append(acc.copy())

    stats["wall_time"] = time.perf_counter() - wall
    acc_arr = np.array(acc_hist)
    accumulators = {k: acc_arr[:, j] for j, k in enumerate(integrand.keys)}
    return Trajectory(checkpoints=checkpoints, accumulators=accumulators,
                      times=np.array([c.t for c in checkpoints]), stats=stats,
                      sign_audit=dict(integrand.audit), options=opts)


def _dp_step(system, integrand, tau, y, h, f0, g0, use_expo, opts):
    """One Dormand-Prince step; returns the new state, derivatives and error norm."""
    ks = [None] * 7
    gs = [None] * 7
    if use_expo:
        L0 = system.linear_part(tau)
        ks[0] = f0 - L0 * y
    else:
        ks[0] = f0
    gs[0] = g0
    aux = None
    y_stage = None
    for i in range(1, 7):
        ti = tau + _C[i] * h
        incr = sum(_A[i][j] * ks[j] for j in range(i) if _A[i][j] != 0.0)
        if use_expo:
            Ei = system.exponent(ti, tau)
            # stage values in the transformed frame, mapped back by exp(Phi)
            y_stage = np.exp(Ei) * (y + h * incr)
            f, aux = system.evaluate(ti, y_stage)
            ks[i] = np.exp(-Ei) * (f - system.linear_part(ti) * y_stage)
        else:
            y_stage = y + h * incr
            f, aux = system.evaluate(ti, y_stage)
            ks[i] = f
        gs[i] = integrand(aux)
    # the seventh stage sits at tau + h with the fifth-order weights (FSAL)
    y_new = y_stage
    err_vec = h * sum(_E[j] * ks[j] for j in range(7) if _E[j] != 0.0)
    if use_expo:
        err_vec = np.exp(system.exponent(tau + h, tau)) * err_vec
    scale = opts.abs_tol + opts.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
    err = float(np.sqrt(np.mean((np.abs(err_vec) / scale) ** 2)))
    return y_new, f, gs, err, aux


def accumulate_spacetime_integrals(acc: np.ndarray, stage_values, h: float,
                                   mode: str = "stages") -> np.ndarray:
    """Advance ``int_t^1 f dtau`` over one step of size ``h`` (negative toward the past).

    ``stage_values`` are the integrands at the seven Dormand-Prince stages;
    ``"stages"`` uses the fifth-order weights, ``"trapezoid"`` the endpoints.
    """
    if mode == "trapezoid":
        return acc - 0.5 * h * (stage_values[0] + stage_values[6])
    return acc - h * sum(_B[j] * stage_values[j] for j in range(7) if _B[j] != 0.0)
