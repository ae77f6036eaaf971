"""Spatial integrals of the energy densities, quadratic forms and cubic forms.

Each entry is ``int_{T^3} (...) dx`` evaluated with Parseval.  Because the
background is diagonal every contraction collapses to weighted sums over
components, and a product of two real fields ``X Y`` integrates to
``(2 pi)^3 sum_k Re(Xhat conj(Yhat))``.

Names used as keys:

========== ===========================================================
e_K        |K|^2_g
e_dgamma   |t d gamma|^2_g
e_pi       (t d_t Psi)^2
e_dpsi     |t d Psi|^2_g
e_dnu      |t d nu|^2_g
e_nu       nu^2
c1 .. c7   cubic forms with the constant background tensors
q1 .. q4   quadratic forms coupling the scalar field and the lapse
q3nu       the q3 form with d nu in place of d Psi
ddnu       |t^2 d d nu|^2_g
khK2       (khat:K)^2
========== ===========================================================
"""
from __future__ import annotations

import numpy as np

from .background import metric_at, rescaled_secfund
from .linear_geometry import christoffel_lin
from .spectral_state import VOLUME


def _re(x, y):
    return (x * np.conj(y)).real


def mode_densities(bg, t, kvec, gamma, kmix, psi, pi, nu, christ=None) -> dict:
    """Per-mode contributions; summing over modes and scaling by the volume gives the integrals."""
    g, ginv = metric_at(bg, t)
    q = bg.qarr
    _, khat = rescaled_secfund(bg)
    kh = np.diag(khat)
    t2 = t * t
    kf = np.asarray(kvec, dtype=float)
    k2 = kf**2
    if christ is None:
        christ = christoffel_lin(gamma, kvec, ginv)

    mu = k2 @ ginv
    absg2 = np.abs(gamma) ** 2
    gg = np.outer(ginv, ginv)
    # sum_e g^{ee} k_e^2 weighted by the (1 - q_e) factor of C3 is split below
    g2_ai = np.einsum("ai,nai->n", gg, absg2)
    absK2 = np.abs(kmix) ** 2
    psi2 = np.abs(psi) ** 2
    nu2 = np.abs(nu) ** 2
    psinu = _re(psi, nu)
    diagK = np.einsum("naa->na", kmix)

    d = {}
    d["e_K"] = np.einsum("ia,nia->n", np.outer(g, ginv), absK2)
    d["e_dgamma"] = t2 * mu * g2_ai
    d["e_pi"] = np.abs(pi) ** 2
    d["e_dpsi"] = t2 * mu * psi2
    d["e_dnu"] = t2 * mu * nu2
    d["e_nu"] = nu2
    d["c1"] = 2.0 * np.einsum("a,na->n", kh, _re(diagK, nu[:, None]))
    d["c2"] = t2 * (k2 @ (ginv * -q)) * psi2
    d["c3"] = t2 * (k2 @ (ginv * -q)) * g2_ai
    d["c4"] = 2.0 * np.einsum("ia,nia->n", np.outer(g, ginv) * (kh[:, None] - kh[None, :]), absK2)

    trc = np.einsum("e,nbee->nb", ginv, christ)  # g^{ef} Gamma^b_{ef}
    wtr = np.einsum("i,i,naii->na", ginv, kh, christ)  # g^{ii} khat_i Gamma^a_{ii}
    cont = np.einsum("naab->nb", christ)  # Gamma^a_{ab}
    kcont = np.einsum("a,naab->nb", kh, christ)  # khat_a Gamma^a_{ab}
    c5 = np.einsum("a,na->n", g * kh, np.abs(trc) ** 2)
    c5 = c5 - np.einsum("a,na->n", g, _re(wtr, trc))
    c5 = c5 + np.sum(_re(kcont, trc), axis=1)
    c5 = c5 - np.sum(kh[None, :] * _re(cont, trc), axis=1)
    d["c5"] = t2 * c5

    ik = 1j * kf
    dnu = ik * nu[:, None]
    dpsi = ik * psi[:, None]
    c6 = 2.0 * np.einsum("i,ni->n", ginv * kh, _re(cont, dnu))
    c6 = c6 - 2.0 * np.einsum("i,ni->n", ginv, _re(kcont, dnu))
    gdiag = np.einsum("nii->ni", gamma)
    # s^2 g^{ii} g^{ee} k^i_i d_e gamma_ii d_e nu
    c6 = c6 + np.einsum("i,e,ne,ni->n", ginv * -q, ginv, k2, _re(gdiag, nu[:, None]))
    d["c6"] = t2 * c6
    d["c7"] = 2.0 * np.einsum("a,na->n", g * ginv * kh, _re(diagK, nu[:, None]))
    d["q1"] = 2.0 * t2 * (k2 @ ginv) * psinu
    d["q2"] = d["q1"].copy()
    d["q3"] = 2.0 * t2 * np.sum(_re(trc, dpsi), axis=1)
    d["q3nu"] = 2.0 * t2 * np.sum(_re(trc, dnu), axis=1)
    d["q4"] = 2.0 * _re(pi, nu)
    d["ddnu"] = t2 * t2 * mu * mu * nu2
    d["khK2"] = np.abs(np.einsum("a,na->n", kh, diagK)) ** 2
    return d


def spatial_integrals(bg, t, kvec, gamma, kmix, psi, pi, nu, christ=None, weight=None) -> dict:
    """Integrals over the torus; ``weight`` multiplies each mode (order-M energies)."""
    d = mode_densities(bg, t, kvec, gamma, kmix, psi, pi, nu, christ)
    if weight is None:
        return {key: float(VOLUME * v.sum()) for key, v in d.items()}
    return {key: float(VOLUME * (weight * v).sum()) for key, v in d.items()}
