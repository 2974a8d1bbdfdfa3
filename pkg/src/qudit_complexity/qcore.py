"""Value types for multi-qudit registers plus the dense linear algebra shared by
every other module.

Composite basis indices are big-endian: qudit 0 is the most significant digit,
so basis index ``i`` of an n-qudit register has digits ``np.unravel_index(i, (d,) * n)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

NORM_TOL = 1e-12
UNITARY_TOL = 1e-10
DEFAULT_DIM_CAP = 2**20


@dataclass(frozen=True)
class SystemDescriptor:
    """Register of ``n`` qudits with ``d`` levels each."""

    n: int
    d: int
    dim_cap: int = field(default=DEFAULT_DIM_CAP, compare=False, repr=False)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"number of qudits must be a positive integer, got {self.n}")
        if int(self.d) != self.d or self.d < 2:
            raise ValueError(f"qudit dimension must be an integer >= 2, got {self.d}")
        if self.d**self.n > self.dim_cap:
            raise ValueError(f"register dimension {self.d}**{self.n} exceeds cap {self.dim_cap}")

    @property
    def D(self) -> int:
        return self.d**self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.d,) * self.n

    def to_dict(self) -> dict:
        return {"n": self.n, "d": self.d}


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.complex128, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class StateVector:
    """Normalized pure state of a register."""

    amplitudes: np.ndarray
    system: SystemDescriptor

    def __post_init__(self):
        amp = np.asarray(self.amplitudes, dtype=np.complex128).reshape(-1)
        if amp.shape != (self.system.D,):
            raise ValueError(f"expected {self.system.D} amplitudes, got {amp.shape[0]}")
        if not np.all(np.isfinite(amp)):
            raise ValueError("amplitudes must be finite")
        nrm = np.linalg.norm(amp)
        if nrm == 0:
            raise ValueError("zero vector cannot be normalized")
        object.__setattr__(self, "amplitudes", _frozen(amp / nrm))

    @classmethod
    def basis(cls, index: int, system: SystemDescriptor) -> "StateVector":
        v = np.zeros(system.D, dtype=np.complex128)
        v[index] = 1.0
        return cls(v, system)

    def to_json(self) -> list:
        return complex_to_json(self.amplitudes)


@dataclass(frozen=True, eq=False)
class UnitaryMatrix:
    """D x D unitary acting on a register."""

    entries: np.ndarray
    system: SystemDescriptor

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=np.complex128)
        D = self.system.D
        if m.shape != (D, D):
            raise ValueError(f"expected a {D}x{D} matrix, got shape {m.shape}")
        dev = unitarity_deviation(m)
        if not dev <= UNITARY_TOL:
            raise ValueError(f"matrix is not unitary (max |U^dag U - I| = {dev:.3e})")
        object.__setattr__(self, "entries", _frozen(m))

    @classmethod
    def identity(cls, system: SystemDescriptor) -> "UnitaryMatrix":
        return cls(np.eye(system.D), system)

    def __matmul__(self, other: "UnitaryMatrix") -> "UnitaryMatrix":
        _check_same_system(self.system, other.system)
        return UnitaryMatrix(self.entries @ other.entries, self.system)

    def to_json(self) -> list:
        return complex_to_json(self.entries)


def unitarity_deviation(m: np.ndarray) -> float:
    m = np.asarray(m)
    return float(np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0]))))


def _check_same_system(a: SystemDescriptor, b: SystemDescriptor):
    if (a.n, a.d) != (b.n, b.d):
        raise ValueError(f"system mismatch: (n={a.n}, d={a.d}) vs (n={b.n}, d={b.d})")


def complex_to_json(a: np.ndarray) -> list:
    """Nested lists of ``[re, im]`` pairs, row-major."""
    a = np.asarray(a)
    pairs = np.stack([a.real, a.imag], axis=-1)
    return pairs.tolist()


def complex_from_json(obj) -> np.ndarray:
    arr = np.asarray(obj, dtype=float)
    if arr.shape[-1] != 2:
        raise ValueError("expected trailing [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def state_fidelity(a: StateVector, b: StateVector) -> float:
    """|<a|b>|^2."""
    _check_same_system(a.system, b.system)
    return float(min(1.0, abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2))


def unitary_fidelity(U: UnitaryMatrix, V: UnitaryMatrix) -> float:
    """Phase-insensitive gate fidelity |Tr(U^dag V)|^2 / D^2."""
    _check_same_system(U.system, V.system)
    D = U.system.D
    t = np.vdot(U.entries, V.entries)
    return float(min(1.0, abs(t) ** 2 / D**2))


def embed_two_qudit(gate: np.ndarray, pair: tuple[int, int], system: SystemDescriptor) -> UnitaryMatrix:
    """Place a d^2 x d^2 gate on qudits ``pair = (a, b)`` of the register.

    The gate's own basis is ``|k, l>`` with ``k`` on qudit ``a`` and ``l`` on qudit ``b``.
    """
    n, d = system.n, system.d
    a, b = pair
    if not (0 <= a < n and 0 <= b < n):
        raise IndexError(f"qudit pair {pair} out of range for n={n}")
    if a == b:
        raise ValueError("two-qudit gate needs two distinct qudits")
    gate = np.asarray(gate, dtype=np.complex128)
    if gate.shape != (d * d, d * d):
        raise ValueError(f"gate must be {d * d}x{d * d}")
    if unitarity_deviation(gate) > UNITARY_TOL:
        raise ValueError("gate is not unitary")
    eye = np.eye(system.D, dtype=np.complex128).reshape(system.shape + (system.D,))
    out = apply_two_qudit(gate, a, b, eye, n, d)
    return UnitaryMatrix(out.reshape(system.D, system.D), system)


# Tensor-network style application on arrays shaped (d,)*n + (K,), where the
# trailing axis batches columns (K = D for operators, K = 1 for states).

def apply_single_qudit(u: np.ndarray, q: int, x: np.ndarray) -> np.ndarray:
    y = np.tensordot(u, x, axes=([1], [q]))
    return np.moveaxis(y, 0, q)


def apply_two_qudit(gate: np.ndarray, a: int, b: int, x: np.ndarray, n: int, d: int) -> np.ndarray:
    g = gate.reshape(d, d, d, d)
    y = np.tensordot(g, x, axes=([2, 3], [a, b]))
    return np.moveaxis(y, [0, 1], [a, b])


def single_qudit_environment(y: np.ndarray, x: np.ndarray, q: int) -> np.ndarray:
    """Matrix ``R`` with ``<y| (u on qudit q) |x> = sum(u * R)``."""
    yq = np.moveaxis(y, q, 0).reshape(y.shape[q], -1)
    xq = np.moveaxis(x, q, 0).reshape(x.shape[q], -1)
    return yq.conj() @ xq.T


def eigh_exp(H: np.ndarray, scale: complex):
    """exp(scale * H) for Hermitian ``H`` via eigendecomposition.

    Returns ``(expm, exponent_eigenvalues, eigenvectors)`` so callers can reuse the
    decomposition for exact derivatives, see :func:`exp_derivative_kernel`.
    """
    w, V = np.linalg.eigh(H)
    mu = scale * w
    e = np.exp(mu)
    return (V * e) @ V.conj().T, mu, V


def exp_derivative_kernel(mu: np.ndarray) -> np.ndarray:
    """Divided differences of exp over eigenvalues ``mu`` of a normal exponent.

    For ``X = V diag(mu) V^dag`` the derivative of ``exp(X)`` along ``dX`` is
    ``V ((V^dag dX V) * K) V^dag`` with ``K`` returned here.
    """
    e = np.exp(mu)
    diff = mu[:, None] - mu[None, :]
    close = np.abs(diff) < 1e-8
    safe = np.where(close, 1.0, diff)
    # second-order expansion for near-degenerate pairs
    mean = 0.5 * (mu[:, None] + mu[None, :])
    K = np.where(close, np.exp(mean) * (1 + diff**2 / 24), (e[:, None] - e[None, :]) / safe)
    return K


def as_array(x) -> np.ndarray:
    if isinstance(x, StateVector):
        return x.amplitudes
    if isinstance(x, UnitaryMatrix):
        return x.entries
    return np.asarray(x, dtype=np.complex128)


def kron_all(mats: Sequence[np.ndarray]) -> np.ndarray:
    out = np.eye(1, dtype=np.complex128)
    for m in mats:
        out = np.kron(out, m)
    return out


def embed_single_qudit(u: np.ndarray, q: int, system: SystemDescriptor) -> np.ndarray:
    mats = [np.eye(system.d, dtype=np.complex128)] * system.n
    mats = list(mats)
    mats[q] = np.asarray(u, dtype=np.complex128)
    return kron_all(mats)
