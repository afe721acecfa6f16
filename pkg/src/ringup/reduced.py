"""Hybrid phase-Fock evolution of a dressed sheared/squeezed state.

State parameters (beta, K, W) on ladder k obey

    dW/dt    = 8 K W Re(eps/beta)
    dK/dt    = [(1 - W^2)/(4 W^2) - 4 K^2] Re(eps/beta) + |beta|^2/2 * domega/dn
    dbeta/dt = -i omega(|beta|^2) beta - i eps

with omega(n), domega/dn the rotating-frame ladder frequency profile and eps
optionally replaced by an effective in-ladder drive.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .dressed import ShearedParams, SqueezeOptical, shear_to_squeeze
from .model import DriveEnvelope
from .spectrum import DressedBasis, LadderProfile, effective_drive_factor, effective_drive_factor_analytic

BETA_FLOOR = 1e-8
DRIVE_MODES = ("bare", "analytic", "matrix")


@dataclass(frozen=True)
class ReducedState:
    beta: complex
    K: float = 0.0
    W: float = 1.0
    k: int = 0
    t: float = 0.0

    def __post_init__(self):
        if not self.W > 0:
            raise ValueError(f"W must stay positive, got {self.W}")

    @property
    def sheared(self) -> ShearedParams:
        return ShearedParams(beta=self.beta, K=self.K, W=self.W, k=self.k)


@dataclass
class ReducedTrajectory:
    times: np.ndarray
    beta: np.ndarray
    K: np.ndarray
    W: np.ndarray
    k: int = 0

    def __len__(self):
        return len(self.times)

    def state(self, i: int) -> ReducedState:
        return ReducedState(complex(self.beta[i]), float(self.K[i]), float(self.W[i]), self.k, float(self.times[i]))

    def squeeze(self) -> tuple[np.ndarray, np.ndarray]:
        """(r, theta) arrays along the trajectory."""
        sq = [to_squeezed(self.state(i)) for i in range(len(self))]
        return np.array([s.r for s in sq]), np.array([s.theta for s in sq])

    def table(self) -> dict:
        r, theta = self.squeeze()
        return {
            "t_ns": self.times, "re_beta": self.beta.real, "im_beta": self.beta.imag,
            "K": self.K, "W": self.W, "r": r, "theta": theta, "nbar": np.abs(self.beta) ** 2,
        }


def to_squeezed(state: ReducedState) -> SqueezeOptical:
    return shear_to_squeeze(state.sheared)


def drive_modes(flag: str, basis: DressedBasis | None = None, k: int = 0, params=None) -> Callable[[float], float]:
    """Drive-amplitude correction factor eps_eff/eps as a function of n.

    ``bare``: 1.  ``analytic``: second-order low-photon estimate.  ``matrix``:
    numerical <bar(n-1,k)|a|bar(n,k)>/sqrt(n), linearly interpolated in n and
    held at its n=1 value below one excitation.
    """
    if flag not in DRIVE_MODES:
        raise ValueError(f"unknown drive mode {flag!r}; expected one of {DRIVE_MODES}")
    if flag == "bare":
        return lambda n: 1.0
    if flag == "analytic":
        p = params if params is not None else getattr(basis, "params", None)
        if p is None:
            raise ValueError("analytic drive correction needs system parameters")
        f = effective_drive_factor_analytic(p, k)
        return lambda n: f
    if basis is None:
        raise ValueError("matrix-element drive correction needs a DressedBasis")
    ns = np.arange(1, basis.n_valid)
    table = np.array([effective_drive_factor(basis, int(n), k) for n in ns])
    return lambda n: float(np.interp(n, ns, table))


class _Interp:
    """Scalar linear interpolation on the integer grid 0..len-1."""

    def __init__(self, values: np.ndarray, n_valid: int):
        self.v = np.asarray(values, dtype=float)
        self.top = min(n_valid, len(self.v)) - 1

    def __call__(self, x: float) -> float:
        if x > self.top:
            raise ValueError(f"|beta|^2 = {x:.1f} exceeds ladder profile range {self.top}")
        i = int(x)
        if i >= len(self.v) - 1:
            return float(self.v[-1])
        f = x - i
        return float(self.v[i] * (1 - f) + self.v[i + 1] * f)


def _rhs_factory(profile: LadderProfile, envelope: DriveEnvelope, factor: Callable[[float], float], slope_scale: float):
    omega = _Interp(profile.omega, profile.n_valid)
    slope = _Interp(profile.slope, profile.n_valid)

    def rhs(t, y):
        beta = complex(y[0], y[1])
        K, W = y[2], y[3]
        nb = beta.real**2 + beta.imag**2
        eps = envelope(t) * factor(nb)
        ratio = (eps / beta).real if abs(beta) >= BETA_FLOOR else 0.0
        dW = 8 * K * W * ratio
        dK = ((1 - W * W) / (4 * W * W) - 4 * K * K) * ratio + 0.5 * nb * slope(nb) * slope_scale
        dbeta = -1j * omega(nb) * beta - 1j * eps
        return np.array([dbeta.real, dbeta.imag, dK, dW])

    return rhs


def _rk4_run(rhs, y0, t0, t_end, dt, dt_out):
    n_out = max(1, int(round((t_end - t0) / dt_out)))
    times = np.linspace(t0, t_end, n_out + 1)
    ys = np.empty((len(times), len(y0)))
    ys[0] = y0
    y = np.array(y0, dtype=float)
    for i in range(1, len(times)):
        a, b = times[i - 1], times[i]
        m = max(1, int(np.ceil((b - a) / dt - 1e-9)))
        h = (b - a) / m
        t = a
        for _ in range(m):
            k1 = rhs(t, y)
            k2 = rhs(t + h / 2, y + h / 2 * k1)
            k3 = rhs(t + h / 2, y + h / 2 * k2)
            k4 = rhs(t + h, y + h * k3)
            y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            t += h
        ys[i] = y
    return times, ys


def evolve_reduced(
    profile: LadderProfile,
    envelope: DriveEnvelope,
    eff_drive: Callable[[float], float] | None = None,
    state0: ReducedState | None = None,
    t_end: float = 200.0,
    dt: float = 0.01,
    dt_out: float = 0.5,
    *,
    check_halving: bool = False,
    halving_tol: float = 1e-6,
    slope_scale: float = 1.0,
) -> ReducedTrajectory:
    """Integrate (beta, K, W) with fixed-step RK4.

    ``slope_scale=0`` switches the nonlinearity off in dK/dt (used by the
    invariance checks); the beta equation still sees omega(n).  With
    ``check_halving`` the run is repeated at dt/2 and a RuntimeError is
    raised if the final (beta, K, W) differ by more than ``halving_tol``.
    """
    state0 = state0 or ReducedState(beta=0j, k=profile.k)
    factor = eff_drive or (lambda n: 1.0)
    rhs = _rhs_factory(profile, envelope, factor, slope_scale)
    y0 = [state0.beta.real, state0.beta.imag, state0.K, state0.W]
    times, ys = _rk4_run(rhs, y0, state0.t, state0.t + t_end, dt, dt_out)
    if check_halving:
        _, ys2 = _rk4_run(rhs, y0, state0.t, state0.t + t_end, dt / 2, dt_out)
        err = np.max(np.abs(ys2[-1] - ys[-1]))
        if err > halving_tol:
            raise RuntimeError(f"step-halving change {err:.2e} exceeds {halving_tol:g}; reduce dt")
    if np.any(ys[:, 3] <= 0):
        raise RuntimeError("W left the positive range")
    return ReducedTrajectory(times=times, beta=ys[:, 0] + 1j * ys[:, 1], K=ys[:, 2], W=ys[:, 3], k=profile.k)
