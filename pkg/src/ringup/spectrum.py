"""Eigenladders of the drive-free Hamiltonian.

The RWA coupling conserves n + k, so the 7N x 7N problem splits into
independent strips of at most seven bare states.  Each strip is diagonalized
on its own and the eigenvalues are matched to bare states by rank, which is
what makes the (n, k) labelling of hybridized states unambiguous.

Eigenvectors are stored as ``coeffs[n, k, j]``: the amplitude of the bare
state ``|n + k - j, j>`` inside the dressed state ``bar|n, k>``.
"""
from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .model import N_TRANSMON, SystemParams, build_h0, diagonal_h0, flat_index, lowering_op, to_angular

EDGE_GUARD = 10
DEGENERACY_TOL = 1e-12


def _strip_members(n_sigma: int, n_res: int):
    k = np.arange(max(0, n_sigma - (n_res - 1)), min(N_TRANSMON - 1, n_sigma) + 1)
    return n_sigma - k, k


def _strip_blocks(params: SystemParams):
    """Yield (n_sigma, n, k, block) for every RWA strip."""
    diag = diagonal_h0(params).reshape(params.n_res, N_TRANSMON)
    for n_sigma in range(params.n_res + N_TRANSMON - 1):
        n, k = _strip_members(n_sigma, params.n_res)
        block = np.diag(diag[n, k])
        # |n,k> <-> |n-1,k+1>: neighbours in the strip ordering by k
        off = params.g_ang * np.sqrt(n[:-1] * (k[:-1] + 1.0))
        block += np.diag(off, 1) + np.diag(off, -1)
        yield n_sigma, n, k, block


def _signs_by_continuity(coeffs: np.ndarray, exists: np.ndarray) -> np.ndarray:
    """Fix eigenvector signs so that each ladder's bare-component pattern
    changes continuously with n; the first rung has a positive dominant
    component."""
    N = coeffs.shape[0]
    for k in range(N_TRANSMON):
        first = True
        for n in range(N):
            if not exists[n, k]:
                continue
            v = coeffs[n, k]
            if first:
                if v[np.argmax(np.abs(v))] < 0:
                    coeffs[n, k] = -v
                first = False
                prev = coeffs[n, k]
                continue
            if np.dot(v, prev) < 0:
                coeffs[n, k] = -v
            prev = coeffs[n, k]
    return coeffs


@dataclass(frozen=True, eq=False)
class DressedBasis:
    """Sorted eigenpairs of the rotating-frame H0.

    energies[n, k] are rotating-frame eigenenergies in rad/ns; entries that
    do not exist (top strips cut by the truncation) are NaN.
    """

    params: SystemParams
    energies: np.ndarray
    coeffs: np.ndarray

    @property
    def n_res(self) -> int:
        return self.params.n_res

    @property
    def n_valid(self) -> int:
        """Rungs below this index are far enough from the truncation edge."""
        return self.params.n_res - EDGE_GUARD

    @cached_property
    def U(self) -> sp.csr_matrix:
        """Bare-from-dressed basis change, columns ordered by flat (n, k)."""
        N = self.n_res
        n, k, j = np.meshgrid(np.arange(N), np.arange(N_TRANSMON), np.arange(N_TRANSMON), indexing="ij")
        m = n + k - j
        keep = (m >= 0) & (m < N) & (self.coeffs != 0)
        rows = flat_index(m[keep], j[keep])
        cols = flat_index(n[keep], k[keep])
        return sp.csr_matrix((self.coeffs[keep], (rows, cols)), shape=(N * N_TRANSMON,) * 2)

    @cached_property
    def _UT(self) -> sp.csr_matrix:
        return self.U.T.tocsr()

    def to_dressed(self, psi: np.ndarray) -> np.ndarray:
        """Bare flat amplitudes -> dressed amplitudes c[n, k]."""
        return (self._UT @ psi).reshape(self.n_res, N_TRANSMON)

    def from_dressed(self, c: np.ndarray) -> np.ndarray:
        """Dressed amplitudes c[n, k] (or flat) -> bare flat amplitudes."""
        return self.U @ np.asarray(c).reshape(-1)

    def ladder_state(self, amps: np.ndarray, k: int) -> np.ndarray:
        """Bare flat vector of sum_n amps[n] bar|n,k>."""
        c = np.zeros((self.n_res, N_TRANSMON), dtype=complex)
        m = min(len(amps), self.n_res)
        c[:m, k] = amps[:m]
        return self.from_dressed(c)

    def eigenvector(self, n: int, k: int) -> np.ndarray:
        amps = np.zeros(n + 1)
        amps[n] = 1.0
        return self.ladder_state(amps, k)

    def ladder_frequency(self, k: int) -> np.ndarray:
        """omega_r^(k)(n) = E(n+1,k) - E(n,k) for n = 0..N-2 (rotating frame)."""
        return np.diff(self.energies[:, k])

    def profile(self, k: int) -> "LadderProfile":
        return LadderProfile.from_basis(self, k)


def diagonalize(params: SystemParams, h0: sp.spmatrix | None = None, check: bool = True) -> DressedBasis:
    """Diagonalize H0 strip by strip and label eigenpairs by (n, k).

    ``h0`` is only used for the optional residual check; the strip blocks are
    assembled directly from ``params``.
    """
    N = params.n_res
    energies = np.full((N, N_TRANSMON), np.nan)
    coeffs = np.zeros((N, N_TRANSMON, N_TRANSMON))
    exists = np.zeros((N, N_TRANSMON), dtype=bool)
    for n_sigma, n, k, block in _strip_blocks(params):
        vals, vecs = np.linalg.eigh(block)
        if len(vals) > 1:
            gaps = np.diff(vals)
            if np.min(gaps) < DEGENERACY_TOL * max(1.0, np.max(np.abs(vals))):
                raise np.linalg.LinAlgError(f"degenerate eigenvalues in strip {n_sigma}")
        # same rank order as the bare energies of the strip
        bare_rank = np.argsort(np.diag(block), kind="stable")
        for r, col in enumerate(bare_rank):
            nn, kk = n[col], k[col]
            energies[nn, kk] = vals[r]
            coeffs[nn, kk, k] = vecs[:, r]
            exists[nn, kk] = True
    coeffs = _signs_by_continuity(coeffs, exists)
    basis = DressedBasis(params=params, energies=energies, coeffs=coeffs)
    if check:
        h = build_h0(params) if h0 is None else h0
        _check_residuals(h, basis)
    return basis


def _check_residuals(h0: sp.spmatrix, basis: DressedBasis, rtol: float = 1e-9):
    U = basis.U
    E = basis.energies.reshape(-1)
    E = np.where(np.isnan(E), 0.0, E)
    res = h0 @ U - U @ sp.diags(E)
    scale = np.max(np.abs(h0.diagonal())) + np.max(np.abs(h0 - sp.diags(h0.diagonal())).sum(axis=1))
    worst = np.max(np.abs(res)) if res.nnz else 0.0
    if worst > rtol * scale:
        raise np.linalg.LinAlgError(f"eigenpair residual {worst:.3e} exceeds {rtol:g} * |H0|")


def resonant_drive_frequency(params: SystemParams, k: int = 0, n: int = 0) -> float:
    """Lab-frame ladder frequency omega_r^(k)(n)/2pi in GHz.

    Driving at this frequency makes the rotating-frame ladder frequency at
    rung n vanish.
    """
    lab = params.replace(f_d=0.0, n_res=max(n + k + 12, 16))
    b = diagonalize(lab, check=False)
    return float(b.ladder_frequency(k)[n] / (2 * np.pi))


def critical_photon_number(params: SystemParams) -> float:
    """n_c = (w_r - w_q)^2 / 4g^2."""
    delta = params.f_r - params.f_q
    if delta == 0:
        raise ValueError("critical photon number undefined at zero detuning")
    return (delta / (2.0 * params.g)) ** 2


def detuning_n(basis: DressedBasis, n, k: int = 0, weights: np.ndarray | None = None) -> float:
    """Stark-shifted detuning Delta_n = E(n+1,k) - E(n,k+1) in rad/ns.

    Non-integer ``n`` is rounded to the nearest rung unless ``weights`` (a
    distribution over n) is given, in which case Delta_n is averaged over it.
    """
    delta = basis.energies[1:, k] - basis.energies[:-1, k + 1]
    if weights is not None:
        w = np.asarray(weights, dtype=float)[: len(delta)]
        return float(np.sum(w * delta[: len(w)]) / np.sum(w))
    idx = int(np.rint(n))
    if idx < 0 or idx > basis.n_res - 2:
        raise IndexError(f"rung {n} outside 0..{basis.n_res - 2}")
    return float(delta[idx])


def detuning_profile(basis: DressedBasis, k: int = 0) -> np.ndarray:
    return basis.energies[1:, k] - basis.energies[:-1, k + 1]


def chi_approx(params: SystemParams) -> float:
    """Dispersive shift estimate chi = -(w_r/w_q) g^2 eta / (Delta (Delta + eta)), rad/ns."""
    delta, eta = params.detuning, params.eta_ang
    if delta == 0 or delta + eta == 0:
        raise ValueError("chi approximation singular for Delta = 0 or Delta = -eta")
    return -(params.omega_r / params.omega_q) * params.g_ang**2 * eta / (delta * (delta + eta))


def dressed_lowering(basis: DressedBasis) -> sp.csr_matrix:
    """abar = U a U^dagger in the bare flat basis."""
    a = lowering_op(basis.params)
    U = basis.U.astype(complex)
    return (U @ a @ U.conj().T).tocsr()


def lowering_matrix_element(basis: DressedBasis, n: int, k: int = 0) -> float:
    """<bar(n-1,k)| a |bar(n,k)>."""
    if n < 1 or n > basis.n_res - 1:
        raise IndexError(f"rung {n} outside 1..{basis.n_res - 1}")
    j = np.arange(N_TRANSMON)
    m = n + k - j
    ok = (m >= 1) & (m < basis.n_res)
    return float(np.sum(basis.coeffs[n - 1, k, ok] * basis.coeffs[n, k, ok] * np.sqrt(m[ok])))


def effective_drive_factor(basis: DressedBasis, n: int, k: int = 0) -> float:
    """eps_eff/eps from the numerical ladder matrix element at rung n."""
    return lowering_matrix_element(basis, n, k) / np.sqrt(n)


def effective_drive_factor_analytic(params: SystemParams, k: int = 0) -> float:
    """Low-photon second-order estimate of eps_eff/eps for ladders 0 and 1."""
    delta, eta, g = params.detuning, params.eta_ang, params.g_ang
    if k == 0:
        return 1.0 - 0.5 * (g / delta) ** 2
    if k == 1:
        return 1.0 + 0.5 * (g / delta) ** 2 - 0.5 * (np.sqrt(2.0) * g / (delta + eta)) ** 2
    raise ValueError("analytic drive correction is only available for k = 0, 1")


def effective_drive(basis: DressedBasis, n: int, k: int, eps: complex) -> complex:
    if n == 0:
        raise ValueError("matrix-element drive correction needs n >= 1")
    return effective_drive_factor(basis, n, k) * eps


@dataclass(frozen=True)
class LadderProfile:
    """omega_r^(k)(n) and its n-derivative on integer n, rotating frame (rad/ns).

    ``slope`` uses central differences inside and one-sided differences at
    both ends, so both arrays have length N - 1.
    """

    k: int
    omega: np.ndarray
    slope: np.ndarray
    n_valid: int

    @classmethod
    def from_basis(cls, basis: DressedBasis, k: int) -> "LadderProfile":
        omega = basis.ladder_frequency(k)
        last = np.flatnonzero(np.isfinite(omega))[-1] + 1
        omega = omega[:last]
        slope = np.gradient(omega)
        return cls(k=k, omega=omega, slope=slope, n_valid=min(basis.n_valid, last))

    @classmethod
    def linear(cls, omega0: float, slope: float, n_max: int = 1000, k: int = 0) -> "LadderProfile":
        n = np.arange(n_max, dtype=float)
        return cls(k=k, omega=omega0 + slope * n, slope=np.full(n_max, slope), n_valid=n_max)

    def _check(self, nbar):
        if np.any(np.asarray(nbar) > self.n_valid - 1):
            raise ValueError(f"n = {np.max(nbar):.1f} beyond ladder profile range {self.n_valid - 1}")

    def omega_at(self, nbar):
        self._check(nbar)
        return np.interp(nbar, np.arange(len(self.omega)), self.omega)

    def slope_at(self, nbar):
        self._check(nbar)
        return np.interp(nbar, np.arange(len(self.slope)), self.slope)


# ---------------------------------------------------------------- persistence

CACHE_MAGIC = b"RINGUPDB"
CACHE_VERSION = 1


def params_hash(params: SystemParams) -> str:
    payload = json.dumps({k: repr(v) for k, v in params.as_dict().items()}, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()


def save_basis(basis: DressedBasis, path: str | Path) -> Path:
    """Binary cache: magic, version, sha256 params hash, N, then little-endian
    float64 energies (N*7) and coefficients (N*7*7)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(CACHE_MAGIC)
        fh.write(struct.pack("<I", CACHE_VERSION))
        fh.write(params_hash(basis.params).encode("ascii"))
        fh.write(struct.pack("<q", basis.n_res))
        fh.write(np.ascontiguousarray(basis.energies, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(basis.coeffs, dtype="<f8").tobytes())
    return path


def load_basis(path: str | Path, params: SystemParams) -> DressedBasis:
    with open(path, "rb") as fh:
        if fh.read(len(CACHE_MAGIC)) != CACHE_MAGIC:
            raise ValueError(f"{path}: not a basis cache file")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != CACHE_VERSION:
            raise ValueError(f"{path}: unsupported cache version {version}")
        stored = fh.read(64).decode("ascii")
        if stored != params_hash(params):
            raise ValueError(f"{path}: cache was built for different parameters")
        (N,) = struct.unpack("<q", fh.read(8))
        energies = np.frombuffer(fh.read(8 * N * N_TRANSMON), dtype="<f8").reshape(N, N_TRANSMON)
        coeffs = np.frombuffer(fh.read(8 * N * N_TRANSMON**2), dtype="<f8").reshape(N, N_TRANSMON, N_TRANSMON)
    return DressedBasis(params=params, energies=energies.copy(), coeffs=coeffs.copy())


def cached_diagonalize(params: SystemParams, cache_dir: str | Path | None) -> DressedBasis:
    if cache_dir is None:
        return diagonalize(params)
    path = Path(cache_dir) / f"{params_hash(params)[:24]}.basis"
    if path.exists():
        return load_basis(path, params)
    basis = diagonalize(params)
    save_basis(basis, path)
    return basis
