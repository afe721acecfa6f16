"""Direct-product approximation of dressed states and transmon-resonator entanglement.

An eigenstate expands as bar|n,k> = sum_l d_l^(n,k) |n-l>_r |k+l>_q, so a
ladder superposition sum_n c_n bar|n,k> equals sum_l d_l |k+l>_q |phi_l> with
|phi_l> = sum_n c_{n+l} |n>_r.  When |<phi_0|phi_l>| ~ 1 for every relevant
l the state factorizes as

    (sum_n c_n |n>_r) (x) (sum_l e^{i phi_l} d_l |k+l>_q),
    phi_l = arg sum_n c_n^* c_{n+l}.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import N_TRANSMON
from .spectrum import DressedBasis


@dataclass(frozen=True)
class ProductApprox:
    resonator_amps: np.ndarray
    transmon_amps: np.ndarray
    infidelity: float
    k: int = 0
    d: np.ndarray | None = None  # averaged real d_l, indexed by transmon level
    phases: np.ndarray | None = None  # phi_l, indexed by transmon level


def eigen_coeffs(basis: DressedBasis, n: int, k: int) -> np.ndarray:
    """d_l^(n,k) indexed by transmon level j = k + l (length 7).

    Entries whose bare partner |n-l, k+l> would need a negative photon
    number are zero.
    """
    if not (0 <= k < N_TRANSMON) or not (0 <= n < basis.n_res):
        raise IndexError(f"(n={n}, k={k}) outside the computed basis")
    if not np.isfinite(basis.energies[n, k]):
        raise IndexError(f"bar|{n},{k}> is not part of the truncated space")
    d = np.nan_to_num(np.asarray(basis.coeffs[n, k], dtype=float))
    return d


def condition_metric(c: np.ndarray, l: int) -> float:
    """|sum_n c_n^* c_{n+l}|, which tends to 1 when the state factorizes."""
    c = np.asarray(c)
    if l == 0:
        return float(np.sum(np.abs(c) ** 2))
    if l > 0:
        return float(abs(np.vdot(c[:-l], c[l:])))
    return float(abs(np.vdot(c[-l:], c[:l])))


def _shift_overlap(c: np.ndarray, l: int) -> complex:
    if l == 0:
        return complex(np.vdot(c, c))
    if l > 0:
        return complex(np.vdot(c[:-l], c[l:]))
    return complex(np.vdot(c[-l:], c[:l]))


def product_approx(basis: DressedBasis, c: np.ndarray, k: int) -> ProductApprox:
    """Direct-product approximation of sum_n c_n bar|n,k>."""
    c = np.asarray(c, dtype=complex)
    c = c / np.linalg.norm(c)
    n_max = min(len(c), basis.n_valid)
    w = np.abs(c[:n_max]) ** 2
    d = np.einsum("n,nj->j", w, np.nan_to_num(basis.coeffs[:n_max, k, :])) / np.sum(w)
    levels = np.arange(N_TRANSMON)
    phases = np.array([np.angle(_shift_overlap(c, j - k)) for j in levels])
    trans = d * np.exp(1j * phases)
    trans = trans / np.linalg.norm(trans)
    res = c.copy()

    exact = basis.ladder_state(c, k)
    approx = np.kron(np.pad(res, (0, basis.n_res - len(res))), trans)
    infid = 1.0 - abs(np.vdot(approx, exact)) ** 2
    return ProductApprox(resonator_amps=res, transmon_amps=trans, infidelity=float(max(infid, 0.0)),
                         k=k, d=d, phases=phases)


def reduced_transmon_density(psi: np.ndarray) -> np.ndarray:
    """7x7 transmon density operator, tracing out the resonator."""
    amps = np.asarray(psi).reshape(-1, N_TRANSMON)
    return amps.T @ amps.conj()


def entanglement_of_formation(psi: np.ndarray) -> float:
    """Von Neumann entropy (bits) of the transmon reduced state of a pure psi."""
    lam = np.linalg.eigvalsh(reduced_transmon_density(psi))
    lam = lam[lam > 1e-300]
    return float(max(0.0, -np.sum(lam * np.log2(lam))))


def best_product_fidelity(psi: np.ndarray) -> float:
    """Largest squared Schmidt coefficient = best fidelity to any product state."""
    return float(np.max(np.linalg.eigvalsh(reduced_transmon_density(psi))))


def transmon_lab_frame_state(product: ProductApprox, t: float, omega_r: float) -> np.ndarray:
    """Transmon factor at lab time t: phi_l(t) = phi_l(0) - l omega_r t.

    ``omega_r`` is the lab-frame resonator frequency (rad/ns); the result is
    periodic with period 2 pi / omega_r.
    """
    l = np.arange(N_TRANSMON) - product.k
    return product.transmon_amps * np.exp(-1j * l * omega_r * t)
