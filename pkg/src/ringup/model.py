"""Physical parameters, product-basis indexing and rotating-frame Hamiltonians.

Frequencies enter as f/2pi in GHz and are converted once to angular units
(rad/ns); times are in ns throughout.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

TWO_PI = 2.0 * np.pi
N_TRANSMON = 7


def to_angular(f_ghz):
    """GHz (f/2pi) to rad/ns."""
    return TWO_PI * f_ghz


@dataclass(frozen=True)
class SystemParams:
    """Resonator-transmon parameters, all frequencies as f/2pi in GHz."""

    f_r: float = 6.0
    f_q: float = 5.0
    eta: float = 0.2
    g: float = 0.1
    f_d: float = 6.0
    n_res: int = 300
    n_tr: int = N_TRANSMON
    e0: float = 0.0

    def __post_init__(self):
        errors = self.problems()
        if errors:
            raise ValueError("; ".join(errors))

    @classmethod
    def check(cls, **values) -> list[str]:
        """Validation messages for ``values`` without raising."""
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(values) - names)
        if unknown:
            return [f"unknown parameter(s): {', '.join(unknown)}"]
        obj = object.__new__(cls)
        for f in dataclasses.fields(cls):
            object.__setattr__(obj, f.name, values.get(f.name, f.default))
        try:
            return obj.problems()
        except TypeError as exc:
            return [f"non-numeric parameter value ({exc})"]

    def problems(self) -> list[str]:
        errs = []
        if not self.f_q > 0:
            errs.append(f"f_q must be positive (got {self.f_q})")
        if not self.f_r > self.f_q:
            errs.append(f"f_r must exceed f_q (got f_r={self.f_r}, f_q={self.f_q})")
        if not self.eta > 0:
            errs.append(f"eta must be positive (got {self.eta})")
        if not self.g > 0:
            errs.append(f"g must be positive (got {self.g})")
        if int(self.n_res) != self.n_res or self.n_res < 2:
            errs.append(f"n_res must be an integer >= 2 (got {self.n_res})")
        if self.n_tr != N_TRANSMON:
            errs.append(f"n_tr is fixed to {N_TRANSMON} (got {self.n_tr})")
        return errs

    @property
    def dim(self) -> int:
        return self.n_res * self.n_tr

    @property
    def omega_r(self) -> float:
        return to_angular(self.f_r)

    @property
    def omega_q(self) -> float:
        return to_angular(self.f_q)

    @property
    def omega_d(self) -> float:
        return to_angular(self.f_d)

    @property
    def eta_ang(self) -> float:
        return to_angular(self.eta)

    @property
    def g_ang(self) -> float:
        return to_angular(self.g)

    @property
    def detuning(self) -> float:
        """Bare resonator-qubit detuning omega_r - omega_q in rad/ns."""
        return self.omega_r - self.omega_q

    def replace(self, **changes) -> "SystemParams":
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


class BareIndex(NamedTuple):
    n: int
    k: int

    @property
    def flat(self) -> int:
        return self.n * N_TRANSMON + self.k

    @classmethod
    def from_flat(cls, flat: int) -> "BareIndex":
        n, k = divmod(int(flat), N_TRANSMON)
        return cls(n, k)


def flat_index(n, k):
    """Row index of |n,k> in the flattened product basis (works on arrays)."""
    return np.asarray(n) * N_TRANSMON + np.asarray(k)


@dataclass(frozen=True)
class DriveEnvelope:
    """Complex drive envelope eps(t); ``eps`` is eps/2pi in GHz.

    kind is one of ``"constant"`` (sudden switch-on at t=0), ``"ramp"``
    (linear rise over ``ramp_ns``, then flat) or ``"table"`` (linear
    interpolation of ``table`` rows ``(t_ns, re, im)``, held constant past
    both ends).
    """

    kind: str = "constant"
    eps: complex = 0.01
    ramp_ns: float = 0.0
    table: tuple = field(default=())

    KINDS = ("constant", "ramp", "table")
    ALIASES = {"sudden-constant": "constant", "linear-ramp": "ramp", "tabulated": "table"}

    def __post_init__(self):
        object.__setattr__(self, "kind", self.ALIASES.get(self.kind, self.kind))
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown envelope kind {self.kind!r}; expected one of {self.KINDS}")
        if self.kind == "ramp" and not self.ramp_ns > 0:
            raise ValueError("ramp envelope needs ramp_ns > 0")
        if self.kind == "table":
            tab = np.asarray(self.table, dtype=float)
            if tab.ndim != 2 or tab.shape[1] not in (2, 3) or len(tab) < 2:
                raise ValueError("table envelope needs >= 2 rows of (t, re[, im])")
            if np.any(np.diff(tab[:, 0]) <= 0):
                raise ValueError("table times must be strictly increasing")

    def amplitude(self, t: float) -> complex:
        """eps(t)/2pi in GHz."""
        if self.kind == "constant":
            return complex(self.eps) if t >= 0 else 0j
        if self.kind == "ramp":
            return complex(self.eps) * min(max(t, 0.0) / self.ramp_ns, 1.0)
        tab = np.asarray(self.table, dtype=float)
        re = np.interp(t, tab[:, 0], tab[:, 1])
        im = np.interp(t, tab[:, 0], tab[:, 2]) if tab.shape[1] == 3 else 0.0
        return complex(re, im)

    def __call__(self, t: float) -> complex:
        """eps(t) in rad/ns."""
        return TWO_PI * self.amplitude(t)

    @property
    def peak(self) -> complex:
        """Largest-magnitude amplitude reached, eps/2pi in GHz."""
        if self.kind == "table":
            tab = np.asarray(self.table, dtype=float)
            vals = tab[:, 1] + 1j * (tab[:, 2] if tab.shape[1] == 3 else 0.0)
            return complex(vals[np.argmax(np.abs(vals))])
        return complex(self.eps)

    def scaled(self, factor: complex) -> "DriveEnvelope":
        if self.kind == "table":
            tab = np.asarray(self.table, dtype=float)
            vals = (tab[:, 1] + 1j * (tab[:, 2] if tab.shape[1] == 3 else 0.0)) * factor
            rows = tuple(zip(tab[:, 0], vals.real, vals.imag))
            return dataclasses.replace(self, table=rows)
        return dataclasses.replace(self, eps=complex(self.eps) * factor)

    def conjugate_reversed(self, t_end: float) -> "DriveEnvelope":
        """Tabulated envelope eps*(t_end - t), sampled finely enough for a ramp."""
        ts = np.linspace(0.0, t_end, 2001)
        vals = np.array([np.conj(self.amplitude(t_end - t)) for t in ts])
        return DriveEnvelope(kind="table", table=tuple(zip(ts, vals.real, vals.imag)))


def bare_energies(params: SystemParams) -> np.ndarray:
    """Transmon level energies E_k in rad/ns (quartic-anharmonic ladder)."""
    k = np.arange(params.n_tr)
    return to_angular(params.e0) + params.omega_q * k - params.eta_ang * k * (k - 1) / 2.0


def diagonal_h0(params: SystemParams) -> np.ndarray:
    """Rotating-frame bare energies n(w_r - w_d) + E_k - k w_d, flat-indexed."""
    n = np.arange(params.n_res)[:, None]
    k = np.arange(params.n_tr)[None, :]
    ek = bare_energies(params)[None, :]
    diag = n * (params.omega_r - params.omega_d) + ek - k * params.omega_d
    return diag.ravel()


def build_h0(params: SystemParams) -> sp.csr_matrix:
    """Drive-free rotating-frame Hamiltonian as a sparse Hermitian matrix.

    Coupling g*sqrt(n(k+1)) links |n,k> and |n-1,k+1>; anharmonic corrections
    to the coupling are ignored.
    """
    if params.n_res < 2:
        raise ValueError("n_res must be >= 2")
    N, T = params.n_res, params.n_tr
    n, k = np.meshgrid(np.arange(1, N), np.arange(T - 1), indexing="ij")
    n, k = n.ravel(), k.ravel()
    src = flat_index(n, k)
    dst = flat_index(n - 1, k + 1)
    vals = params.g_ang * np.sqrt(n * (k + 1.0))
    rows = np.concatenate([np.arange(N * T), dst, src])
    cols = np.concatenate([np.arange(N * T), src, dst])
    data = np.concatenate([diagonal_h0(params), vals, vals]).astype(complex)
    return sp.csr_matrix((data, (rows, cols)), shape=(N * T, N * T))


def lowering_op(params: SystemParams) -> sp.csr_matrix:
    """Bare resonator lowering operator a (identity on the transmon)."""
    N, T = params.n_res, params.n_tr
    n, k = np.meshgrid(np.arange(1, N), np.arange(T), indexing="ij")
    n, k = n.ravel(), k.ravel()
    return sp.csr_matrix(
        (np.sqrt(n).astype(complex), (flat_index(n - 1, k), flat_index(n, k))),
        shape=(N * T, N * T),
    )


def build_drive_op(params: SystemParams) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """(D, D^dagger) with D = a^dagger; the drive term is eps D + eps* D^dagger."""
    a = lowering_op(params)
    return a.conj().T.tocsr(), a


def transmon_number_op(params: SystemParams) -> sp.csr_matrix:
    k = np.tile(np.arange(params.n_tr), params.n_res)
    return sp.diags(k.astype(complex)).tocsr()
