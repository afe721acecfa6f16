"""Schrodinger propagation in the drive frame.

    i dpsi/dt = [H0 + eps(t) D + eps*(t) D^dagger] psi

Integration is adaptive (DOP853, embedded error estimate) by default; a
fixed-step RK4 mode exists for step-halving convergence checks.  The norm is
never renormalized: its drift is the error diagnostic.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp

from .model import N_TRANSMON, DriveEnvelope

TOP_LEVELS = 5
TOP_POP_LIMIT = 1e-6


class TruncationError(RuntimeError):
    """Population reached the top resonator levels of the truncated space."""


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    aux: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.times) != len(self.states):
            raise ValueError("times and states differ in length")
        if np.any(np.diff(self.times) == 0):
            raise ValueError("snapshot times must be strictly monotone")

    def __len__(self):
        return len(self.times)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def top_population(psi: np.ndarray, n_levels: int = TOP_LEVELS) -> float:
    amps = np.asarray(psi).reshape(-1, N_TRANSMON)
    return float(np.sum(np.abs(amps[-n_levels:]) ** 2))


def _time_grid(t_start: float, t_end: float, dt_out: float) -> np.ndarray:
    span = t_end - t_start
    m = max(1, int(round(abs(span) / dt_out)))
    return np.linspace(t_start, t_end, m + 1)


def evolve(
    h0: sp.spmatrix,
    drive_op: tuple[sp.spmatrix, sp.spmatrix],
    envelope: DriveEnvelope,
    psi0: np.ndarray,
    t_end: float,
    dt_out: float = 0.5,
    tol: float = 1e-10,
    *,
    t_start: float = 0.0,
    method: str = "adaptive",
    dt: float | None = None,
    check_truncation: bool = True,
) -> Trajectory:
    """Propagate ``psi0`` from ``t_start`` to ``t_end`` (either direction).

    Parameters
    ----------
    h0, drive_op
        Drive-free Hamiltonian and the pair (D, D^dagger), rad/ns.
    envelope
        Drive envelope; ``envelope(t)`` returns eps(t) in rad/ns.
    tol
        Relative local error target of the adaptive integrator (absolute
        target is tol/100).  Must lie in [1e-12, 1e-6].
    method
        ``"adaptive"`` or ``"rk4"`` (fixed step ``dt``).

    Raises
    ------
    TruncationError
        If more than 1e-6 of the population sits in the top five resonator
        levels at any snapshot.
    """
    if not 1e-12 <= tol <= 1e-6:
        raise ValueError(f"tol must lie in [1e-12, 1e-6], got {tol:g}")
    psi0 = np.asarray(psi0, dtype=complex)
    if abs(np.vdot(psi0, psi0).real - 1.0) > 1e-8:
        raise ValueError("initial state is not normalized")
    h0 = sp.csr_matrix(h0)
    D, Dh = (sp.csr_matrix(m) for m in drive_op)
    times = _time_grid(t_start, t_end, dt_out)

    def rhs(t, y):
        eps = envelope(t)
        out = h0 @ y
        if eps != 0:
            out += eps * (D @ y) + np.conj(eps) * (Dh @ y)
        return -1j * out

    if method == "adaptive":
        sol = solve_ivp(
            rhs, (times[0], times[-1]), psi0, method="DOP853", t_eval=times,
            rtol=tol, atol=tol * 1e-2,
        )
        if not sol.success:
            raise RuntimeError(f"integration failed: {sol.message}")
        states = sol.y.T
    elif method == "rk4":
        if dt is None:
            raise ValueError("rk4 mode needs a step dt")
        states = _rk4(rhs, psi0, times, dt)
    else:
        raise ValueError(f"unknown method {method!r}")

    norms = np.einsum("ij,ij->i", states.conj(), states).real
    tops = np.array([top_population(s) for s in states])
    if check_truncation and np.any(tops > TOP_POP_LIMIT):
        i = int(np.argmax(tops > TOP_POP_LIMIT))
        raise TruncationError(
            f"top {TOP_LEVELS} resonator levels hold {tops[i]:.2e} population at t={times[i]:.2f} ns "
            f"(limit {TOP_POP_LIMIT:g}); increase n_res"
        )
    return Trajectory(times=times, states=states, aux={"norm": norms, "top_pop": tops})


def _rk4(rhs, psi0, times, dt):
    out = np.empty((len(times), len(psi0)), dtype=complex)
    out[0] = psi0
    y = psi0.copy()
    for i in range(1, len(times)):
        t0, t1 = times[i - 1], times[i]
        m = max(1, int(np.ceil(abs(t1 - t0) / dt - 1e-9)))
        h = (t1 - t0) / m
        t = t0
        for _ in range(m):
            k1 = rhs(t, y)
            k2 = rhs(t + h / 2, y + h / 2 * k1)
            k3 = rhs(t + h / 2, y + h / 2 * k2)
            k4 = rhs(t + h, y + h * k3)
            y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            t += h
        out[i] = y
    return out


def expectation(op, psi: np.ndarray) -> complex:
    """<psi|op|psi> for a matrix (dense or sparse) ``op``."""
    psi = np.asarray(psi)
    if op.shape[1] != psi.shape[0]:
        raise ValueError(f"operator of shape {op.shape} does not act on a vector of length {psi.shape[0]}")
    return complex(np.vdot(psi, op @ psi))


def dressed_moments(c: np.ndarray) -> tuple[complex, complex, float]:
    """(<abar>, <abar^2>, <abar^dag abar>) for dressed amplitudes c[n] or c[n, k]."""
    c = np.asarray(c)
    if c.ndim == 1:
        c = c[:, None]
    n = np.arange(c.shape[0])[:, None]
    a1 = np.sum(np.conj(c[:-1]) * np.sqrt(n[1:]) * c[1:])
    a2 = np.sum(np.conj(c[:-2]) * np.sqrt(n[1:-1] * n[2:]) * c[2:])
    nn = float(np.sum(n * np.abs(c) ** 2))
    return complex(a1), complex(a2), nn


def photon_number(psi: np.ndarray, basis) -> float:
    """Dressed excitation number <abar^dag abar>."""
    return dressed_moments(basis.to_dressed(psi))[2]


def bare_photon_number(psi: np.ndarray) -> float:
    amps = np.asarray(psi).reshape(-1, N_TRANSMON)
    n = np.arange(amps.shape[0])[:, None]
    return float(np.sum(n * np.abs(amps) ** 2))


def write_csv(path: str | Path, columns: dict, schema: int = 1) -> Path:
    """Write equal-length columns with a ``# schema=N`` header line."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = list(columns)
    cols = [np.asarray(columns[k]) for k in names]
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema={schema}\n")
        w = csv.writer(fh)
        w.writerow(names)
        for row in zip(*cols):
            w.writerow([repr(float(v)) if np.isrealobj(v) else repr(complex(v)) for v in row])
    return path


def read_csv(path: str | Path) -> dict:
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    names, body = rows[0], rows[1:]
    return {name: np.array([float(r[i]) for r in body]) for i, name in enumerate(names)}


def trajectory_table(traj: Trajectory, basis, k: int = 0) -> dict:
    """Base CSV columns t_ns, norm, nbar, P_stray for a trajectory."""
    nbar, stray = [], []
    for psi in traj.states:
        c = basis.to_dressed(psi)
        p = np.abs(c) ** 2
        nbar.append(float(np.sum(np.arange(c.shape[0])[:, None] * p)))
        stray.append(float(np.sum(p) - np.sum(p[:, k])))
    return {"t_ns": traj.times, "norm": traj.aux["norm"], "nbar": nbar, "P_stray": stray}
