"""Linearized Christoffel symbols and curvature, evaluated mode by mode.

Every function is vectorized over a leading mode axis.  ``gamma`` has shape
``(n, 3, 3)`` (symmetric), ``kvec`` has shape ``(n, 3)`` and ``ginv`` is the
diagonal of the inverse background metric.  Spatial derivatives act as
multiplication by ``i k``.  Indices are raised and lowered with the
background metric only.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class LinearizedCurvature:
    christ: np.ndarray  # (n, 3, 3, 3) as [i, a, b] for Gamma^i_{ab}
    ricci_mixed: np.ndarray  # (n, 3, 3) as [i, j]
    scalar: np.ndarray  # (n,)


def christoffel_lin(gamma, kvec, ginv):
    """``Gamma^i_{ab} = 1/2 g^{ic} (d_a gamma_cb + d_b gamma_ac - d_c gamma_ab)``."""
    gamma = np.asarray(gamma)
    ik = 1j * np.asarray(kvec, dtype=float)
    da_g_ib = np.einsum("na,nib->niab", ik, gamma)
    db_g_ia = np.einsum("nb,nia->niab", ik, gamma)
    di_g_ab = np.einsum("ni,nab->niab", ik, gamma)
    return 0.5 * ginv[None, :, None, None] * (da_g_ib + db_g_ia - di_g_ab)


def _mu(kvec, ginv):
    kf = np.asarray(kvec, dtype=float)
    return kf**2 @ ginv


def scalar_curv_lin(gamma, kvec, ginv, christ=None):
    if christ is None:
        christ = christoffel_lin(gamma, kvec, ginv)
    kf = np.asarray(kvec, dtype=float)
    trg = np.einsum("a,naa->n", ginv, gamma)
    first = 0.5 * _mu(kf, ginv) * trg
    second = np.einsum("e,na,naee->n", ginv, 1j * kf, christ)
    return first + second


def ricci_lin(gamma, kvec, ginv, christ=None):
    """Mixed linearized Ricci tensor ``Ric^i_j`` with shape ``(n, 3, 3)``."""
    if christ is None:
        christ = christoffel_lin(gamma, kvec, ginv)
    kf = np.asarray(kvec, dtype=float)
    ik = 1j * kf
    mu = _mu(kf, ginv)
    # -1/2 g^{ia} g^{ef} d_e d_f gamma_ja, with d_e d_f -> -k_e k_f
    t1 = 0.5 * mu[:, None, None] * ginv[None, :, None] * np.swapaxes(gamma, 1, 2)
    trace_christ = np.einsum("e,nbee->nb", ginv, christ)  # g^{ef} Gamma^b_{ef}
    t2 = 0.5 * ik[:, None, :] * trace_christ[:, :, None]
    g = 1.0 / ginv
    t3 = 0.5 * ginv[None, :, None] * g[None, None, :] * ik[:, :, None] * trace_christ[:, None, :]
    return t1 + t2 + t3


def curvature(gamma, kvec, ginv) -> LinearizedCurvature:
    christ = christoffel_lin(gamma, kvec, ginv)
    return LinearizedCurvature(
        christ=christ,
        ricci_mixed=ricci_lin(gamma, kvec, ginv, christ),
        scalar=scalar_curv_lin(gamma, kvec, ginv, christ),
    )
