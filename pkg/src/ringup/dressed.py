"""Dressed coherent, sheared-Gaussian and squeezed states on one eigenladder.

Most functions here work on *ladder amplitudes* ``c[n]``, the coefficients
of a state ``sum_n c[n] bar|n,k>``; ``DressedBasis.ladder_state`` maps them
to the bare product basis and ``ladder_amplitudes`` goes the other way.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm
from scipy.optimize import minimize
from scipy.special import gammaln

from .propagate import dressed_moments

Q_CONTOUR_LEVELS = tuple(np.arange(1, 9) / 10 / np.pi)


@dataclass(frozen=True)
class ShearedParams:
    """Hybrid phase-Fock parameters: centre beta, shear K = q|beta|^2 and
    relative number variance W."""

    beta: complex
    K: float = 0.0
    W: float = 1.0
    k: int = 0

    def __post_init__(self):
        if not self.W > 0:
            raise ValueError(f"W must be positive, got {self.W}")

    @property
    def nbar(self) -> float:
        return abs(self.beta) ** 2


@dataclass(frozen=True)
class SqueezeOptical:
    """Displaced squeezed state D(beta) S(xi)|0>, xi = r exp(i theta)."""

    beta: complex
    r: float = 0.0
    theta: float = 0.0

    def __post_init__(self):
        if self.r < 0:
            raise ValueError(f"squeeze magnitude must be >= 0, got {self.r}")

    @property
    def xi(self) -> complex:
        return self.r * np.exp(1j * self.theta)


def ladder_amplitudes(psi: np.ndarray, basis, k: int) -> np.ndarray:
    return basis.to_dressed(psi)[:, k]


def _check_headroom(nbar: float, n_max: int, spread: float = 0.0):
    if nbar + spread >= n_max / 2:
        raise ValueError(f"mean excitation {nbar:.1f} leaves no truncation headroom in {n_max} rungs")


def coherent_amplitudes(alpha: complex, n_max: int) -> np.ndarray:
    """Poisson amplitudes exp(-|a|^2/2) a^n / sqrt(n!), computed in log space."""
    n = np.arange(n_max)
    if alpha == 0:
        out = np.zeros(n_max, dtype=complex)
        out[0] = 1.0
        return out
    log_mag = -0.5 * abs(alpha) ** 2 + n * np.log(abs(alpha)) - 0.5 * gammaln(n + 1)
    return np.exp(log_mag + 1j * n * np.angle(alpha))


def coherent_amplitudes_grid(alpha: np.ndarray, n_max: int) -> np.ndarray:
    """Poisson amplitudes for an array of alphas; shape alpha.shape + (n_max,)."""
    alpha = np.asarray(alpha, dtype=complex)[..., None]
    n = np.arange(n_max)
    mag = np.abs(alpha)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_mag = -0.5 * mag**2 + n * np.log(mag) - 0.5 * gammaln(n + 1)
    log_mag = np.where((mag == 0) & (n == 0), 0.0, log_mag)
    return np.exp(log_mag + 1j * n * np.angle(alpha))


def sheared_gaussian_amplitudes(sp: ShearedParams, n_max: int) -> np.ndarray:
    """Gaussian number distribution with linear phase n arg(beta) and
    quadratic phase -K (n - |beta|^2)^2 / |beta|^2.

    Returned as written (unnormalized) when |beta|^2 > max(20 W, 1/W), where
    the deficit is below 1e-5; otherwise normalized explicitly.
    """
    nb = sp.nbar
    if nb == 0:
        raise ValueError("sheared Gaussian needs beta != 0")
    n = np.arange(n_max)
    x = n - nb
    amp = (2 * np.pi * sp.W * nb) ** -0.25 * np.exp(-(x**2) / (4 * sp.W * nb))
    phase = n * np.angle(sp.beta) - sp.K * x**2 / nb
    c = amp * np.exp(1j * phase)
    if not nb > max(20 * sp.W, 1 / sp.W):
        c = c / np.linalg.norm(c)
    return c


def squeezed_amplitudes(opt: SqueezeOptical, n_max: int) -> np.ndarray:
    """Fock amplitudes of D(beta) S(xi)|0> with S(xi) = exp[(xi* a^2 - xi a^dag^2)/2].

    Uses the three-term recurrence implied by
    (a cosh r + a^dag e^{i theta} sinh r)|psi> = gamma |psi>,
    gamma = beta cosh r + beta* e^{i theta} sinh r, with running rescaling so
    large |beta| cannot underflow; the result is normalized.
    """
    r, th, beta = opt.r, opt.theta, complex(opt.beta)
    if r == 0:
        return coherent_amplitudes(beta, n_max)
    ch, sh = np.cosh(r), np.sinh(r)
    eith = np.exp(1j * th)
    gamma = beta * ch + np.conj(beta) * eith * sh
    log_c0 = -0.5 * abs(beta) ** 2 - 0.5 * np.conj(beta) ** 2 * eith * np.tanh(r) - 0.5 * np.log(ch)
    c = np.zeros(n_max, dtype=complex)
    c[0] = 1.0
    if n_max > 1:
        c[1] = gamma * c[0] / ch
    for n in range(1, n_max - 1):
        c[n + 1] = (gamma * c[n] - eith * sh * np.sqrt(n) * c[n - 1]) / (ch * np.sqrt(n + 1))
        big = abs(c[n + 1])
        if big > 1e150:
            c[: n + 2] *= 1e-150
            log_c0 += 150 * np.log(10)
    # restore the analytic c0 phase/magnitude up to normalization
    c = c * np.exp(1j * log_c0.imag)
    return c / np.linalg.norm(c)


def squeezed_amplitudes_expm(opt: SqueezeOptical, n_max: int, pad: int = 60) -> np.ndarray:
    """Same state from matrix exponentials in a padded Fock space (cross-check)."""
    m = n_max + pad
    a = np.diag(np.sqrt(np.arange(1, m)), 1).astype(complex)
    ad = a.conj().T
    xi = opt.xi
    S = expm(0.5 * (np.conj(xi) * a @ a - xi * ad @ ad))
    Dm = expm(opt.beta * ad - np.conj(opt.beta) * a)
    vac = np.zeros(m, dtype=complex)
    vac[0] = 1.0
    c = (Dm @ (S @ vac))[:n_max]
    return c / np.linalg.norm(c)


def make_dressed_coherent(basis, alpha: complex, k: int) -> np.ndarray:
    _check_headroom(abs(alpha) ** 2, basis.n_res)
    return basis.ladder_state(coherent_amplitudes(alpha, basis.n_res), k)


def make_sheared_gaussian(basis, sp: ShearedParams) -> np.ndarray:
    _check_headroom(sp.nbar, basis.n_res)
    return basis.ladder_state(sheared_gaussian_amplitudes(sp, basis.n_res), sp.k)


def make_dressed_squeezed(basis, opt: SqueezeOptical, k: int) -> np.ndarray:
    _check_headroom(abs(opt.beta) ** 2, basis.n_res, np.sinh(opt.r) ** 2)
    return basis.ladder_state(squeezed_amplitudes(opt, basis.n_res), k)


# ------------------------------------------------------------- conversions

def squeeze_strength(K: float, W: float) -> float:
    """S = 8 K^2 W + (W + 1/W - 2)/2; S = 0 for a coherent state."""
    return 8 * K**2 * W + (W + 1 / W - 2) / 2


def squeeze_angle(beta: complex, K: float, W: float) -> float:
    """theta: twice the angle of the minimum-variance quadrature."""
    den = 16 * K**2 * W - W + 1 / W
    return 2 * np.angle(beta) + np.arctan2(8 * K * W, den) if den != 0 else 2 * np.angle(beta) + np.sign(K) * np.pi / 2


def squeeze_angle_paper_form(beta: complex, K: float, W: float) -> float:
    """arctan plus the pi/2 [1 - sgn(den)] branch term, as usually written."""
    den = 16 * K**2 * W - W + 1 / W
    return 2 * np.angle(beta) + np.arctan(8 * K * W / den) + np.pi / 2 * (1 - np.sign(den))


def shear_to_squeeze(sp: ShearedParams) -> SqueezeOptical:
    S = squeeze_strength(sp.K, sp.W)
    r = 0.5 * np.arccosh(S + 1.0)
    return SqueezeOptical(beta=sp.beta, r=float(r), theta=float(squeeze_angle(sp.beta, sp.K, sp.W)))


def analytic_quadrature_variance(sp: ShearedParams, phi) -> np.ndarray:
    """Large-|beta| quadrature variance of the sheared Gaussian state."""
    K, W = sp.K, sp.W
    x = 2 * np.angle(sp.beta) - 2 * np.asarray(phi)
    return (W + 1 / W) / 8 + 2 * K**2 * W + K * W * np.sin(x) + ((W - 1 / W) / 8 - 2 * K**2 * W) * np.cos(x)


def analytic_quadrature_extrema(sp: ShearedParams) -> tuple[float, float]:
    S = squeeze_strength(sp.K, sp.W)
    root = np.sqrt((1 + S) ** 2 - 1)
    return (1 + S - root) / 4, (1 + S + root) / 4


def sheared_mean_a(sp: ShearedParams) -> complex:
    """<abar> including the 1/|beta| corrections."""
    b, K, W = sp.beta, sp.K, sp.W
    bc = np.conj(b)
    return b + (2 - W - 1 / W) / (8 * bc) - 1j * K * W / bc - 2 * K**2 * W / bc


def sheared_mean_a2(sp: ShearedParams) -> complex:
    """<abar^2> to leading order."""
    b, K, W = sp.beta, sp.K, sp.W
    return b**2 + b**2 / abs(b) ** 2 * (0.5 - 1 / (2 * W) - 4j * K * W - 8 * K**2 * W)


# ------------------------------------------------------------- quadratures

def quadrature_variance(c: np.ndarray, phi) -> np.ndarray:
    """Variance of X_phi = (e^{-i phi} abar + e^{i phi} abar^dag)/2 for ladder
    amplitudes ``c`` (normalized internally)."""
    c = np.asarray(c) / np.linalg.norm(c)
    a1, a2, nn = dressed_moments(c)
    phi = np.asarray(phi)
    return 0.25 * (1 + 2 * (nn - abs(a1) ** 2) + 2 * np.real(np.exp(-2j * phi) * (a2 - a1**2)))


def quadrature_extrema(c: np.ndarray) -> tuple[float, float, float]:
    """(min variance, max variance, angle of the minimum)."""
    c = np.asarray(c) / np.linalg.norm(c)
    a1, a2, nn = dressed_moments(c)
    m = a2 - a1**2
    base = 1 + 2 * (nn - abs(a1) ** 2)
    return 0.25 * (base - 2 * abs(m)), 0.25 * (base + 2 * abs(m)), float((np.angle(m) + np.pi) / 2)


# ------------------------------------------------------------- splitting & fidelity

def split_state(psi: np.ndarray, k: int, basis):
    """Split psi into sqrt(1-P) psi_k + sqrt(P) psi_perp (bare vectors)."""
    c = basis.to_dressed(psi)
    ck = np.zeros_like(c)
    ck[:, k] = c[:, k]
    cp = c - ck
    pk = float(np.sum(np.abs(ck) ** 2))
    pp = float(np.sum(np.abs(cp) ** 2))
    total = pk + pp
    p_stray = pp / total
    psi_k = basis.from_dressed(ck / np.sqrt(pk)) if pk > 0 else np.zeros_like(psi)
    psi_perp = basis.from_dressed(cp / np.sqrt(pp)) if pp > 0 else np.zeros_like(psi)
    return p_stray, psi_k, psi_perp


def overlap_coherent(c: np.ndarray, alpha: complex) -> complex:
    return complex(np.vdot(coherent_amplitudes(alpha, len(c)), c))


@dataclass(frozen=True)
class FidelityResult:
    F: float
    alpha: complex
    F_c: float
    P_stray: float
    converged: bool = True


def best_coherent_fit(c: np.ndarray, seed: complex | None = None, max_evals: int = 200):
    """Maximize |<alpha|c>|^2 over complex alpha starting from <abar>.

    Returns (F, alpha, converged); never worse than the seed.
    """
    c = np.asarray(c) / np.linalg.norm(c)
    if seed is None:
        seed = dressed_moments(c)[0]
    f_seed = abs(overlap_coherent(c, seed)) ** 2

    def loss(x):
        return -abs(overlap_coherent(c, complex(x[0], x[1]))) ** 2

    res = minimize(
        loss, [seed.real, seed.imag], method="Nelder-Mead",
        options={"maxfev": max_evals, "fatol": 1e-10, "xatol": 1e-8,
                 "initial_simplex": [[seed.real, seed.imag], [seed.real + 0.05, seed.imag], [seed.real, seed.imag + 0.05]]},
    )
    f_opt = -res.fun
    if f_opt < f_seed or not np.isfinite(f_opt):
        return f_seed, complex(seed), False
    return float(f_opt), complex(res.x[0], res.x[1]), bool(res.success)


def fidelity_dressed_coherent(psi: np.ndarray, k: int, basis) -> FidelityResult:
    """Best dressed-coherent fidelity F = (1 - P_stray) F_c."""
    c = basis.to_dressed(psi)
    total = float(np.sum(np.abs(c) ** 2))
    ck = c[:, k]
    pk = float(np.sum(np.abs(ck) ** 2))
    p_stray = 1 - pk / total
    f_c, alpha, ok = best_coherent_fit(ck)
    return FidelityResult(F=(1 - p_stray) * f_c, alpha=alpha, F_c=f_c, P_stray=p_stray, converged=ok)


def fidelity_bare_coherent(psi: np.ndarray, k: int = 0) -> tuple[float, complex]:
    """Best fidelity to a bare product |alpha>_r |k>_q."""
    amps = np.asarray(psi).reshape(-1, 7)
    col = amps[:, k]
    n = np.arange(len(col))
    seed = complex(np.sum(np.conj(amps[:-1]) * np.sqrt(n[1:, None]) * amps[1:]))
    f, alpha, _ = best_coherent_fit(col / max(np.linalg.norm(col), 1e-300), seed)
    return f * float(np.sum(np.abs(col) ** 2)) / float(np.sum(np.abs(amps) ** 2)), alpha


def fidelity_dressed_squeezed(c: np.ndarray, opt: SqueezeOptical) -> float:
    c = np.asarray(c) / np.linalg.norm(c)
    return float(abs(np.vdot(squeezed_amplitudes(opt, len(c)), c)) ** 2)


def fidelity_amplitudes(c1: np.ndarray, c2: np.ndarray) -> float:
    c1 = np.asarray(c1) / np.linalg.norm(c1)
    c2 = np.asarray(c2) / np.linalg.norm(c2)
    return float(abs(np.vdot(c1, c2)) ** 2)


# ------------------------------------------------------------- Husimi Q

def default_q_grid(c: np.ndarray, r: float = 0.0, points: int = 201):
    """Square grid centred at <abar> with half-width 4 + 2 max(1, e^r)."""
    centre = dressed_moments(np.asarray(c) / np.linalg.norm(c))[0]
    half = 4 + 4 * max(1.0, np.exp(r)) / 2
    xs = np.linspace(centre.real - half, centre.real + half, points)
    ys = np.linspace(centre.imag - half, centre.imag + half, points)
    X, Y = np.meshgrid(xs, ys)
    return X + 1j * Y


def husimi_q(c: np.ndarray, grid: np.ndarray, chunk: int = 4096) -> np.ndarray:
    """Q(alpha) = |<alpha|psi_k>|^2 / pi over a complex grid."""
    c = np.asarray(c) / np.linalg.norm(c)
    flat = np.asarray(grid, dtype=complex).ravel()
    out = np.empty(flat.shape)
    for i in range(0, len(flat), chunk):
        amps = coherent_amplitudes_grid(flat[i:i + chunk], len(c))
        out[i:i + chunk] = np.abs(np.conj(amps) @ c) ** 2 / np.pi
    return out.reshape(np.shape(grid))


def best_squeezed_fit(c: np.ndarray, seed: SqueezeOptical, max_evals: int = 600) -> tuple[float, SqueezeOptical]:
    """Maximize |<beta, xi|c>|^2 over (beta, r, theta) from ``seed``."""
    c = np.asarray(c) / np.linalg.norm(c)
    n_max = len(c)

    def loss(x):
        opt = SqueezeOptical(complex(x[0], x[1]), abs(x[2]), x[3])
        return -abs(np.vdot(squeezed_amplitudes(opt, n_max), c)) ** 2

    x0 = [seed.beta.real, seed.beta.imag, seed.r, seed.theta]
    f_seed = -loss(x0)
    res = minimize(loss, x0, method="Nelder-Mead",
                   options={"maxfev": max_evals, "fatol": 1e-12, "xatol": 1e-9})
    if -res.fun < f_seed:
        return f_seed, seed
    x = res.x
    return float(-res.fun), SqueezeOptical(complex(x[0], x[1]), abs(x[2]), float(x[3]))
