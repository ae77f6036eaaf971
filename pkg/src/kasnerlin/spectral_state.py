"""Band-limited Fourier representation of the linearized unknowns on T^3.

The torus has coordinate side length 2 pi, fields are expanded as
``f(x) = sum_k fhat_k exp(i k.x)`` over integer wave vectors and spatial
derivatives act as ``i k``.  Parseval reads
``int f g dx = (2 pi)^3 sum_k Re(fhat_k conj(ghat_k))`` for real fields.

All per-mode data live in arrays with a leading mode axis, so every
operation is vectorized over the lattice.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache
from itertools import product

import numpy as np

from .background import KasnerBackground, metric_at
from .errors import ConfigError, MissingLapse

VOLUME = (2.0 * np.pi) ** 3


@dataclass(frozen=True)
class Gauge:
    kind: str = "cmc"
    lam: float | None = None

    def __post_init__(self):
        if self.kind not in ("cmc", "parabolic"):
            raise ConfigError(f"unknown gauge {self.kind!r}")
        if self.kind == "cmc" and self.lam is not None:
            raise ConfigError("lambda given for CMC gauge")
        if self.kind == "parabolic" and (self.lam is None or self.lam == 0):
            raise ConfigError("parabolic gauge needs a nonzero lambda")

    @classmethod
    def cmc(cls):
        return cls("cmc")

    @classmethod
    def parabolic(cls, lam: float):
        return cls("parabolic", float(lam))

    @property
    def is_parabolic(self) -> bool:
        return self.kind == "parabolic"

    @property
    def lam_inv(self) -> float:
        return 0.0 if self.lam is None else 1.0 / self.lam

    @property
    def monotone_regime(self) -> bool:
        """True when the parabolic parameter is in the proven range."""
        return self.kind == "cmc" or self.lam >= 3.0

    def to_dict(self) -> dict:
        return {"kind": self.kind, "lambda": self.lam}


# ---------------------------------------------------------------- lattice

def lattice(k_max: int) -> np.ndarray:
    """All integer wave vectors with ``|k_j| <= k_max`` in lexicographic order.

    The order is symmetric, so the partner of mode ``m`` is ``n - 1 - m``.
    """
    r = np.arange(-k_max, k_max + 1)
    return np.array(list(product(r, r, r)), dtype=np.int64)


def conj_index(kvec: np.ndarray) -> np.ndarray:
    """Index of ``-k`` for each row of ``kvec``."""
    lookup = {tuple(k): m for m, k in enumerate(kvec.tolist())}
    try:
        return np.array([lookup[tuple(-np.asarray(k))] for k in kvec.tolist()])
    except KeyError as exc:
        raise ConfigError("mode set is not closed under negation") from exc


@lru_cache(maxsize=16)
def multi_indices(M: int) -> tuple:
    """Multi-indices ``(n1, n2, n3)`` with ``n1 + n2 + n3 <= M``."""
    return tuple(I for I in product(range(M + 1), repeat=3) if sum(I) <= M)


def derivative_weights(kvec: np.ndarray, M: int) -> np.ndarray:
    """``|k^I|^2`` for every multi-index of order at most ``M``, shape ``(nI, n)``."""
    kf = np.asarray(kvec, dtype=float)
    rows = []
    for I in multi_indices(M):
        w = np.ones(len(kf))
        for j, nj in enumerate(I):
            if nj:
                w = w * kf[:, j] ** (2 * nj)
        rows.append(w)
    return np.array(rows)


def energy_weight(kvec: np.ndarray, M: int) -> np.ndarray:
    """``sum_{|I| <= M} |k^I|^2``, the per-mode factor of an order-M energy."""
    return derivative_weights(kvec, M).sum(axis=0)


# ---------------------------------------------------------------- state

@dataclass
class ModeState:
    k: tuple
    gamma: np.ndarray
    kmix: np.ndarray
    psi: complex
    chi: complex
    nu: complex | None


@dataclass
class FieldState:
    """Linearized unknowns at one time on a band-limited lattice.

    ``gamma[m]`` is the symmetric metric perturbation, ``kmix[m, i, j]`` the
    mixed second fundamental form perturbation ``K^i_j``, ``chi`` the evolved
    scalar momentum ``t d_t Psi - A nu`` and ``nu`` the lapse perturbation.
    """

    t: float
    bg: KasnerBackground
    gauge: Gauge
    kvec: np.ndarray
    gamma: np.ndarray
    kmix: np.ndarray
    psi: np.ndarray
    chi: np.ndarray
    nu: np.ndarray | None = None
    _partner: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def tau(self) -> float:
        return float(np.log(self.t))

    @property
    def n_modes(self) -> int:
        return len(self.kvec)

    @property
    def partner(self) -> np.ndarray:
        if self._partner is None:
            self._partner = conj_index(self.kvec)
        return self._partner

    def metric(self):
        return metric_at(self.bg, self.t)

    def require_lapse(self) -> np.ndarray:
        if self.nu is None:
            raise MissingLapse("lapse has not been populated")
        return self.nu

    @property
    def pi(self) -> np.ndarray:
        """``t d_t Psi``, reconstructed as ``chi + A nu``."""
        return self.chi + self.bg.A * self.require_lapse()

    def mode(self, k) -> ModeState:
        m = self.index_of(k)
        return ModeState(
            k=tuple(int(x) for x in self.kvec[m]),
            gamma=self.gamma[m].copy(),
            kmix=self.kmix[m].copy(),
            psi=complex(self.psi[m]),
            chi=complex(self.chi[m]),
            nu=None if self.nu is None else complex(self.nu[m]),
        )

    def index_of(self, k) -> int:
        hits = np.flatnonzero(np.all(self.kvec == np.asarray(k), axis=1))
        if len(hits) == 0:
            raise KeyError(f"mode {tuple(k)} not in lattice")
        return int(hits[0])

    def copy(self, **changes) -> "FieldState":
        new = replace(self, **changes)
        for name in ("gamma", "kmix", "psi", "chi", "nu"):
            if name not in changes and getattr(new, name) is not None:
                setattr(new, name, getattr(new, name).copy())
        new._partner = None if "kvec" in changes else self._partner
        return new

    def hermitian_defect(self) -> float:
        """Largest ``|X(-k) - conj X(k)|`` over all stored fields."""
        p = self.partner
        worst = 0.0
        for arr in (self.gamma, self.kmix, self.psi, self.chi, self.nu):
            if arr is None:
                continue
            worst = max(worst, float(np.max(np.abs(arr[p] - np.conj(arr)), initial=0.0)))
        return worst

    def to_dict(self) -> dict:
        iu = np.triu_indices(3)
        modes = []
        for m in range(self.n_modes):
            g6 = self.gamma[m][iu]
            k9 = self.kmix[m].reshape(-1)
            modes.append({
                "k": [int(x) for x in self.kvec[m]],
                "gamma": [[float(z.real), float(z.imag)] for z in g6],
                "kmix": [[float(z.real), float(z.imag)] for z in k9],
                "psi": [float(self.psi[m].real), float(self.psi[m].imag)],
                "chi": [float(self.chi[m].real), float(self.chi[m].imag)],
                "nu": None if self.nu is None else [float(self.nu[m].real), float(self.nu[m].imag)],
            })
        return {
            "t": self.t,
            "gauge": self.gauge.to_dict(),
            "bg": self.bg.to_dict(),
            "modes": modes,
        }

    @classmethod
    def from_dict(cls, d: dict, bg: KasnerBackground | None = None) -> "FieldState":
        if bg is None:
            q = d["bg"]["q"]
            bg = KasnerBackground.from_exponents(q[0], q[1], strict_positive=False)
        gd = d["gauge"]
        gauge = Gauge(gd["kind"], gd.get("lambda"))
        n = len(d["modes"])
        kvec = np.array([m["k"] for m in d["modes"]], dtype=np.int64)
        gamma = np.zeros((n, 3, 3), complex)
        kmix = np.zeros((n, 3, 3), complex)
        iu = np.triu_indices(3)
        c = lambda pair: complex(pair[0], pair[1])  # noqa: E731
        psi = np.array([c(m["psi"]) for m in d["modes"]])
        chi = np.array([c(m["chi"]) for m in d["modes"]])
        has_nu = all(m["nu"] is not None for m in d["modes"])
        nu = np.array([c(m["nu"]) for m in d["modes"]]) if has_nu else None
        for j, m in enumerate(d["modes"]):
            g6 = np.array([c(z) for z in m["gamma"]])
            gamma[j][iu] = g6
            gamma[j] = gamma[j] + np.triu(gamma[j], 1).T
            kmix[j] = np.array([c(z) for z in m["kmix"]]).reshape(3, 3)
        return cls(d["t"], bg, gauge, kvec, gamma, kmix, psi, chi, nu)


def zero_state(bg: KasnerBackground, gauge: Gauge, k_max: int, t: float = 1.0) -> FieldState:
    kvec = lattice(k_max)
    n = len(kvec)
    z = np.zeros(n, complex)
    return FieldState(t, bg, gauge, kvec, np.zeros((n, 3, 3), complex),
                      np.zeros((n, 3, 3), complex), z.copy(), z.copy(), z.copy())


# ---------------------------------------------------------------- fields

def field_components(state: FieldState, name: str):
    """Fourier coefficients of a named field and its g-norm component weights.

    Returns ``(coeffs, gweights)`` where ``coeffs`` has shape ``(n, c)`` and
    ``|T|^2_g = sum_c gweights[c] |T_c|^2`` pointwise.
    """
    g, ginv = state.metric()
    ik = 1j * state.kvec.astype(float)
    n = state.n_modes
    if name == "K":
        return state.kmix.reshape(n, 9), np.outer(g, ginv).reshape(9)
    if name == "gamma":
        return state.gamma.reshape(n, 9), np.outer(ginv, ginv).reshape(9)
    if name == "dgamma":
        c = ik[:, :, None, None] * state.gamma[:, None, :, :]
        w = np.einsum("e,a,b->eab", ginv, ginv, ginv)
        return c.reshape(n, 27), w.reshape(27)
    if name == "psi":
        return state.psi[:, None], np.ones(1)
    if name == "pi":
        return state.pi[:, None], np.ones(1)
    if name == "chi":
        return state.chi[:, None], np.ones(1)
    if name == "dpsi":
        return ik * state.psi[:, None], ginv.copy()
    if name == "nu":
        return state.require_lapse()[:, None], np.ones(1)
    if name == "dnu":
        return ik * state.require_lapse()[:, None], ginv.copy()
    if name == "ddnu":
        c = ik[:, :, None] * ik[:, None, :] * state.require_lapse()[:, None, None]
        return c.reshape(n, 9), np.outer(ginv, ginv).reshape(9)
    raise KeyError(f"unknown field {name!r}")


def l2_norm_coeffs(coeffs: np.ndarray, weights: np.ndarray | None = None) -> float:
    c = np.asarray(coeffs)
    if c.ndim == 1:
        c = c[:, None]
    a2 = np.abs(c.reshape(len(c), -1)) ** 2
    if weights is not None:
        a2 = a2 * np.asarray(weights)[None, :]
    return float(np.sqrt(VOLUME * a2.sum()))


def sobolev_norm_coeffs(coeffs, kvec, M: int, weights=None) -> float:
    """``sum_{|I| <= M} || |d_I T| ||_{L^2}`` for coefficients ``(n, c)``."""
    c = np.asarray(coeffs)
    if c.ndim == 1:
        c = c[:, None]
    a2 = np.abs(c.reshape(len(c), -1)) ** 2
    if weights is not None:
        a2 = a2 * np.asarray(weights)[None, :]
    per_mode = a2.sum(axis=1)
    dw = derivative_weights(kvec, M)
    return float(np.sum(np.sqrt(VOLUME * dw @ per_mode)))


def l2_norm(name: str, state: FieldState) -> float:
    coeffs, _ = field_components(state, name)
    return l2_norm_coeffs(coeffs)


def sobolev_norm_frame(name: str, M: int, state: FieldState) -> float:
    coeffs, _ = field_components(state, name)
    return sobolev_norm_coeffs(coeffs, state.kvec, M)


def sobolev_norm_gk(name: str, M: int, state: FieldState) -> float:
    coeffs, w = field_components(state, name)
    return sobolev_norm_coeffs(coeffs, state.kvec, M, w)


def solution_norm_parts(state: FieldState, M: int) -> dict:
    """The individual groups of the high solution norm with their t-weights."""
    state.require_lapse()
    t = state.t
    w = np.exp((2.0 / 3.0) * np.log(t))
    parts = {
        "K": sobolev_norm_frame("K", M, state),
        "dgamma": sobolev_norm_frame("dgamma", M, state),
        "pi": sobolev_norm_frame("pi", M, state),
        "dpsi": w * sobolev_norm_frame("dpsi", M, state),
    }
    pmax = 1 if state.gauge.is_parabolic else 2
    for p in range(pmax + 1):
        parts[f"nu_{p}"] = w**p * sobolev_norm_frame("nu", M + p, state)
    return parts


def solution_norm(state: FieldState, M: int) -> float:
    """High solution norm; the parabolic variant stops the lapse sum at p=1."""
    return float(sum(solution_norm_parts(state, M).values()))


def synthesize(coeffs: np.ndarray, kvec: np.ndarray, npts: int) -> np.ndarray:
    """Real-space values of a band-limited field on a uniform ``npts^3`` grid."""
    grid = np.zeros((npts, npts, npts), complex)
    idx = tuple(np.mod(kvec[:, j], npts) for j in range(3))
    np.add.at(grid, idx, coeffs)
    return np.fft.ifftn(grid) * npts**3
