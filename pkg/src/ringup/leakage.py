"""Stray population leaked into a neighbouring eigenladder during ring-up.

The leaked amplitude c obeys dc/dt = i eps g'/Delta_n + i Omega_n c, where
Delta_n is the Stark-shifted detuning between the two ladders and Omega_n the
rotating-frame energy gap that sets the oscillation frequency.  The steady
state gives P_ss = |eps g' / (Omega Delta)|^2; a sudden switch-on overshoots
to 4 P_ss(0), and the oscillation dephases on t_decay = 1.23 |chi eps|^-1/2.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.ndimage import uniform_filter1d

from .model import DriveEnvelope, SystemParams
from .spectrum import DressedBasis

DECAY_PREFACTOR = 1.23
VALIDITY_LIMIT = 0.01
PERTURBATIVE_LIMIT = 0.1


@dataclass(frozen=True)
class LeakagePrediction:
    p_ss: float
    p_max: float
    omega_osc: float
    t_decay: float
    nbar: float = 0.0
    valid: bool = True


def ladder_gaps(basis: DressedBasis, lower: int):
    """(Delta_n, Omega_n) arrays for the ladder pair (lower, lower+1)."""
    E = basis.energies
    delta = E[1:, lower] - E[:-1, lower + 1]
    omega = E[:, lower] - E[:, lower + 1]
    return delta, omega[:-1]


def _at(arr: np.ndarray, nbar: float) -> float:
    idx = int(np.rint(nbar))
    if idx < 0 or idx >= len(arr):
        raise IndexError(f"nbar={nbar} outside the computed ladder range")
    return float(arr[idx])


def chi_from_spectrum(basis: DressedBasis, k: int = 0) -> float:
    """chi_k = (omega_r^(k+1)(0) - omega_r^(k)(0)) / 2 from the eigenenergies."""
    return 0.5 * float(basis.ladder_frequency(k + 1)[0] - basis.ladder_frequency(k)[0])


def steady_state(eps: complex, g: float, omega: float, delta: float) -> float:
    if omega == 0:
        raise ValueError("Omega = 0: inter-ladder resonance, leakage model invalid")
    return float(abs(eps * g / (omega * delta)) ** 2)


def crude_stray_estimate(eps_ghz: float, g_ghz: float, delta_ghz: float) -> float:
    """Order-of-magnitude P_stray ~ (eps g / Delta^2)^2."""
    return (eps_ghz * g_ghz / delta_ghz**2) ** 2


def _flag(p_ss: float, eps, g, omega, delta) -> bool:
    ratio = abs(eps * g / (omega * delta))
    if ratio > PERTURBATIVE_LIMIT:
        warnings.warn(f"eps g/(Omega Delta) = {ratio:.3f} > {PERTURBATIVE_LIMIT}: perturbative leakage model stressed")
    return p_ss <= VALIDITY_LIMIT


def predict_ground(params: SystemParams, basis: DressedBasis, nbar: float, eps: complex) -> LeakagePrediction:
    """Leakage from ladder 0 into ladder 1; ``eps`` is eps/2pi in GHz."""
    e, g = 2 * np.pi * eps, params.g_ang
    delta, omega = ladder_gaps(basis, 0)
    om0 = float(omega[0])
    if om0 == 0 or _at(omega, nbar) == 0:
        raise ValueError("Omega = 0: inter-ladder resonance, leakage model invalid")
    p_ss = steady_state(e, g, _at(omega, nbar), _at(delta, nbar))
    p_max = 4 * steady_state(e, g, om0, float(delta[0]))
    chi = chi_from_spectrum(basis, 0)
    t_dec = DECAY_PREFACTOR * abs(chi * e) ** -0.5
    valid = _flag(p_ss, e, g, _at(omega, nbar), _at(delta, nbar))
    return LeakagePrediction(p_ss=p_ss, p_max=p_max, omega_osc=_at(omega, nbar), t_decay=t_dec, nbar=nbar, valid=valid)


def predict_excited(params: SystemParams, basis: DressedBasis, nbar: float, eps: complex):
    """Leakage from bar|0,1> into ladders 0 and 2.

    The ladder-0 branch is the ground-state result (same transmon pair).  The
    ladder-2 branch substitutes g -> sqrt(2) g, Delta -> Delta + eta,
    Omega_0 -> Omega_0 + eta and 2 chi -> 2 chi' = omega_r^(2)(0) - omega_r^(1)(0).
    """
    to0 = predict_ground(params, basis, nbar, eps)
    e = 2 * np.pi * eps
    g2 = np.sqrt(2.0) * params.g_ang
    chi2 = chi_from_spectrum(basis, 1)
    _, omega = ladder_gaps(basis, 0)
    om0 = float(omega[0]) + params.eta_ang
    d0 = params.detuning + params.eta_ang

    def pss(n):
        return steady_state(e, g2, om0 - 2 * chi2 * n, d0 - 2 * chi2 * n)

    p_ss = pss(nbar)
    t_dec = DECAY_PREFACTOR * abs(chi2 * e) ** -0.5
    valid = _flag(p_ss, e, g2, om0 - 2 * chi2 * nbar, d0 - 2 * chi2 * nbar)
    to2 = LeakagePrediction(p_ss=p_ss, p_max=4 * pss(0.0), omega_osc=om0 - 2 * chi2 * nbar, t_decay=t_dec, nbar=nbar, valid=valid)
    return to0, to2


def integrate_c(
    basis: DressedBasis,
    envelope: DriveEnvelope,
    nbar_of_t,
    t_grid: np.ndarray,
    lower: int = 0,
) -> np.ndarray:
    """Integrate dc/dt = i eps g'/Delta_n + i Omega_n c on ``t_grid``.

    ``nbar_of_t`` is a callable n(t) (e.g. (eps t)^2 or an interpolated
    simulation trace); Delta and Omega are looked up at the nearest rung.
    ``lower`` selects the ladder pair (lower, lower+1); the coupling is
    g sqrt(lower+1).
    """
    delta, omega = ladder_gaps(basis, lower)
    gc = basis.params.g_ang * np.sqrt(lower + 1.0)
    top = len(delta) - 1

    def rhs(t, y):
        c = complex(y[0], y[1])
        idx = min(int(round(float(nbar_of_t(t)))), top)
        dc = 1j * envelope(t) * gc / delta[idx] + 1j * omega[idx] * c
        return [dc.real, dc.imag]

    t_grid = np.asarray(t_grid, dtype=float)
    sol = solve_ivp(rhs, (t_grid[0], t_grid[-1]), [0.0, 0.0], t_eval=t_grid, method="DOP853",
                    rtol=1e-9, atol=1e-14, max_step=0.05)
    return sol.y[0] + 1j * sol.y[1]


# ---------------------------------------------------------------- trace analysis

def _estimate_period(t: np.ndarray, x: np.ndarray) -> float:
    x = x - np.mean(x)
    spec = np.abs(np.fft.rfft(x * np.hanning(len(x))))
    freqs = np.fft.rfftfreq(len(x), d=t[1] - t[0])
    spec[0] = 0
    return 1.0 / freqs[np.argmax(spec)]


def _crossings(t: np.ndarray, x: np.ndarray) -> np.ndarray:
    s = np.signbit(x)
    idx = np.flatnonzero(s[1:] != s[:-1])
    # linear interpolation of each zero
    return t[idx] - x[idx] * (t[idx + 1] - t[idx]) / (x[idx + 1] - x[idx])


def detrend(t: np.ndarray, p: np.ndarray, period: float | None = None):
    """(centre, deviation): centre is a moving average over one period."""
    t, p = np.asarray(t, float), np.asarray(p, float)
    period = period or _estimate_period(t, p)
    width = max(3, int(round(period / (t[1] - t[0]))))
    centre = uniform_filter1d(p, size=width, mode="nearest")
    return centre, p - centre


def oscillation_envelope(t: np.ndarray, p: np.ndarray, period: float | None = None):
    """Per-period max |P - centre|, returned at period midpoints."""
    t, p = np.asarray(t, float), np.asarray(p, float)
    period = period or _estimate_period(t, p)
    _, dev = detrend(t, p, period)
    edges = np.arange(t[0] + period / 2, t[-1] - period / 2, period)
    mids, amps = [], []
    for a in edges:
        m = (t >= a) & (t < a + period)
        if m.sum() > 2:
            mids.append(a + period / 2)
            amps.append(np.max(np.abs(dev[m])))
    return np.array(mids), np.array(amps)


def fit_decay_time(t: np.ndarray, p_stray: np.ndarray, period: float | None = None, fraction: float = 1 / 3) -> float:
    """Time at which the oscillation amplitude of P_stray first drops to
    ``fraction`` of its initial value (ns)."""
    t, p = np.asarray(t, float), np.asarray(p_stray, float)
    period = period or _estimate_period(t, p)
    if (t[-1] - t[0]) < 5 * period:
        raise ValueError("insufficient oscillations: trace shorter than five periods")
    mids, amps = oscillation_envelope(t, p, period)
    if len(amps) < 5:
        raise ValueError("insufficient oscillations detected")
    a0 = amps[0]
    below = np.flatnonzero(amps < fraction * a0)
    if len(below) == 0:
        raise ValueError("insufficient decay: amplitude never fell to the threshold")
    i = below[0]
    if i == 0:
        return float(mids[0])
    # linear interpolation between the straddling periods
    x0, x1, y0, y1 = mids[i - 1], mids[i], amps[i - 1], amps[i]
    return float(x0 + (fraction * a0 - y0) * (x1 - x0) / (y1 - y0))


def oscillation_frequency(t: np.ndarray, p: np.ndarray, window_periods: int = 10, period: float | None = None):
    """Windowed zero-crossing frequency (rad/ns) of the detrended trace.

    Returns (window centre times, angular frequencies).
    """
    t, p = np.asarray(t, float), np.asarray(p, float)
    period = period or _estimate_period(t, p)
    _, dev = detrend(t, p, period)
    zs = _crossings(t, dev)
    span = window_periods * period
    centres, freqs = [], []
    start = t[0] + period
    while start + span <= t[-1] - period / 2:
        z = zs[(zs >= start) & (zs < start + span)]
        if len(z) >= 4:
            centres.append(0.5 * (z[0] + z[-1]))
            freqs.append(np.pi * (len(z) - 1) / (z[-1] - z[0]))
        start += span / 2
    return np.array(centres), np.array(freqs)


def first_maximum(t: np.ndarray, p: np.ndarray, period: float) -> float:
    """Largest P within the first oscillation period."""
    t, p = np.asarray(t), np.asarray(p)
    m = t <= t[0] + period
    return float(np.max(p[m]))
