"""Kasner and FLRW background data.

The background metric is ``-dt^2 + sum_i t^(2 q_i) (dx^i)^2`` with scalar field
``A ln t``.  Exponents satisfy ``sum q = 1`` and ``sum q^2 = 1 - A^2``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ExponentDomain, ExponentSign, NonpositiveTime

# Roundoff allowance when deciding whether sum q^2 exceeds one.
_DOMAIN_SLACK = 1e-14


@dataclass(frozen=True)
class KasnerBackground:
    q: tuple
    A: float
    sigma: float
    strict_positive: bool = True

    @property
    def q_max(self) -> float:
        return max(self.q)

    @property
    def qarr(self) -> np.ndarray:
        return np.asarray(self.q, dtype=float)

    @classmethod
    def from_exponents(cls, q1: float, q2: float, strict_positive: bool = True):
        q3 = 1.0 - q1 - q2
        q = (float(q1), float(q2), float(q3))
        sumsq = q1 * q1 + q2 * q2 + q3 * q3
        if sumsq > 1.0 + _DOMAIN_SLACK:
            raise ExponentDomain(f"sum q^2 = {sumsq!r} exceeds 1 for q = {q}")
        if strict_positive and min(q) <= 0.0:
            raise ExponentSign(f"non-positive exponent in {q}")
        A = float(np.sqrt(max(1.0 - sumsq, 0.0)))
        # sum (q - 1/3)^2 avoids the cancellation in sumsq - 1/3 near FLRW
        sigma = float(np.sqrt(sum((qi - 1.0 / 3.0) ** 2 for qi in q)))
        return cls(q=q, A=A, sigma=sigma, strict_positive=strict_positive)

    @classmethod
    def flrw(cls):
        third = 1.0 / 3.0
        return cls(q=(third, third, third), A=float(np.sqrt(2.0 / 3.0)), sigma=0.0)

    @classmethod
    def from_sigma(cls, sigma: float, angle: float = 0.0, strict_positive: bool = True):
        """Background with prescribed anisotropy.

        Exponents are ``1/3 + sigma * (cos a e1 + sin a e2)`` with ``e1, e2`` an
        orthonormal basis of the trace-free plane.  ``angle=0`` puts the largest
        deviation on the first exponent.
        """
        e1 = np.array([2.0, -1.0, -1.0]) / np.sqrt(6.0)
        e2 = np.array([0.0, 1.0, -1.0]) / np.sqrt(2.0)
        q = 1.0 / 3.0 + sigma * (np.cos(angle) * e1 + np.sin(angle) * e2)
        return cls.from_exponents(q[0], q[1], strict_positive=strict_positive)

    def to_dict(self) -> dict:
        return {"q": list(self.q), "A": self.A, "sigma": self.sigma}


def flrw() -> KasnerBackground:
    return KasnerBackground.flrw()


def from_exponents(q1: float, q2: float, strict_positive: bool = True) -> KasnerBackground:
    return KasnerBackground.from_exponents(q1, q2, strict_positive)


def _check_time(t):
    t = np.asarray(t, dtype=float)
    if np.any(~(t > 0.0)):
        raise NonpositiveTime(f"t must be positive, got {t!r}")
    return t


def tpow(bg: KasnerBackground, t: float, power: float = 2.0) -> np.ndarray:
    """``t**(power * q_i)`` evaluated as ``exp(power q_i ln t)``."""
    t = _check_time(t)
    return np.exp(power * bg.qarr * np.log(t))


def metric_at(bg: KasnerBackground, t: float):
    """Diagonals of the background 3-metric and its inverse at time ``t``."""
    t = _check_time(t)
    lt = np.log(t)
    g = np.exp(2.0 * bg.qarr * lt)
    ginv = np.exp(-2.0 * bg.qarr * lt)
    return g, ginv


def kretschmann(bg: KasnerBackground, t: float) -> float:
    t = _check_time(t)
    q = bg.qarr
    pairs = q[0] ** 2 * q[1] ** 2 + q[0] ** 2 * q[2] ** 2 + q[1] ** 2 * q[2] ** 2
    bracket = np.sum(q**4) + pairs + np.sum(q**2) - 2.0 * np.sum(q**3)
    return float(4.0 * bracket * np.exp(-4.0 * np.log(t)))


def rescaled_secfund(bg: KasnerBackground):
    """Time-rescaled mixed second fundamental form and its trace-free part.

    Both are constant diagonal matrices: ``diag(-q)`` and ``diag(1/3 - q)``.
    """
    q = bg.qarr
    return np.diag(-q), np.diag(1.0 / 3.0 - q)


def mixed_norm_gk(T: np.ndarray, g: np.ndarray) -> float:
    """Pointwise g-norm of a real mixed (1,1) tensor with diagonal metric ``g``."""
    w = np.outer(g, 1.0 / g)
    return float(np.sqrt(np.sum(w * np.abs(T) ** 2)))
