"""Shear-induced infidelity within the correct eigenladder.

A photon-number-dependent frequency omega(n) makes a coherent state pick up
a quadratic phase q (n - nbar)^2.  For small q|beta|^2 the renormalized
in-ladder infidelity is 1 - F_c = 3 (q|beta|^2)^2, with

    d(q|beta|^2)/dt = (nbar/2) domega/dn |_nbar.

For constant slope and nbar = (eps t)^2 this integrates to
q|beta|^2 = slope eps^2 t^3 / 6, i.e. 1 - F_c = (1/12)(eps^2 t^3 slope)^2.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .spectrum import LadderProfile


@dataclass(frozen=True)
class ShearEstimate:
    q_beta2: float

    @property
    def infidelity(self) -> float:
        return 3.0 * self.q_beta2**2


def infidelity_closed_form(eps, t, domega_dn):
    """(1/12) (eps^2 t^3 domega/dn)^2 with eps in rad/ns, t in ns."""
    eps = np.abs(eps)
    return (eps**2 * np.asarray(t, dtype=float) ** 3 * domega_dn) ** 2 / 12.0


def qbeta2_closed_form(eps, t, domega_dn):
    return domega_dn * np.abs(eps) ** 2 * np.asarray(t, dtype=float) ** 3 / 6.0


def _integrand(profile: LadderProfile, nbar: np.ndarray) -> np.ndarray:
    return 0.5 * nbar * profile.slope_at(nbar)


def integrate_qbeta2(
    profile: LadderProfile,
    nbar_of_t,
    t_grid: np.ndarray,
    *,
    check_halving: bool = True,
    rtol: float = 1e-2,
) -> np.ndarray:
    """q|beta|^2 on ``t_grid`` by trapezoidal quadrature.

    ``nbar_of_t`` is either a callable or an array sampled on ``t_grid``.
    With ``check_halving`` the integral is recomputed on a grid refined by
    two (callable source) or coarsened by two (array source), and a
    RuntimeError is raised if the endpoints disagree by more than ``rtol``
    relative to the largest |q|beta|^2| reached.
    """
    t = np.asarray(t_grid, dtype=float)
    if callable(nbar_of_t):
        nb = np.array([float(nbar_of_t(x)) for x in t])
    else:
        nb = np.asarray(nbar_of_t, dtype=float)
        if nb.shape != t.shape:
            raise ValueError("sampled nbar must match t_grid")
    q = cumulative_trapezoid(_integrand(profile, nb), t, initial=0.0)
    if check_halving and len(t) >= 5:
        if callable(nbar_of_t):
            tf = np.linspace(t[0], t[-1], 2 * len(t) - 1)
            nf = np.array([float(nbar_of_t(x)) for x in tf])
            alt = cumulative_trapezoid(_integrand(profile, nf), tf, initial=0.0)[::2]
            diff = np.abs(alt - q)
        else:
            tc, nc = t[::2], nb[::2]
            alt = cumulative_trapezoid(_integrand(profile, nc), tc, initial=0.0)
            diff = np.abs(alt - q[::2])
        scale = max(np.max(np.abs(q)), 1e-300)
        if np.max(diff) > rtol * scale:
            raise RuntimeError(f"quadrature refinement changed q|beta|^2 by {np.max(diff) / scale:.2e} (relative)")
    return q


def shear_table(t, qbeta2, eps, domega_dn0, infid_sim=None) -> dict:
    """CSV columns t_ns, qbeta2, infid_est_integrated, infid_est_closed, infid_sim."""
    t = np.asarray(t, dtype=float)
    q = np.asarray(qbeta2, dtype=float)
    sim = np.full_like(t, np.nan) if infid_sim is None else np.asarray(infid_sim, dtype=float)
    return {
        "t_ns": t,
        "qbeta2": q,
        "infid_est_integrated": 3.0 * q**2,
        "infid_est_closed": infidelity_closed_form(eps, t, domega_dn0),
        "infid_sim": sim,
    }
