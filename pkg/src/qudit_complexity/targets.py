"""Random target states/unitaries and the generalized Gell-Mann basis."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Sequence, Union

import numpy as np

from .qcore import StateVector, SystemDescriptor, UnitaryMatrix, eigh_exp

DEFAULT_RANDOMIZATION_STEPS = 1000


@dataclass(frozen=True, eq=False)
class GeneratorBasis:
    """Hermitian traceless basis of su(m), normalized to Tr(G_i G_j) = 2 delta_ij.

    Order: symmetric off-diagonal, antisymmetric off-diagonal, diagonal.
    """

    dimension: int
    generators: np.ndarray  # (m*m - 1, m, m)

    @property
    def n_offdiagonal(self) -> int:
        return self.dimension * (self.dimension - 1)

    @property
    def offdiagonal(self) -> np.ndarray:
        return self.generators[: self.n_offdiagonal]

    @property
    def diagonal(self) -> np.ndarray:
        return self.generators[self.n_offdiagonal:]

    def __len__(self):
        return len(self.generators)


_BASIS_CACHE: dict[int, GeneratorBasis] = {}


def gellmann_basis(m: int) -> GeneratorBasis:
    if int(m) != m or m < 2:
        raise ValueError(f"Gell-Mann basis needs dimension >= 2, got {m}")
    if m in _BASIS_CACHE:
        return _BASIS_CACHE[m]
    pairs = [(j, k) for j in range(m) for k in range(j + 1, m)]
    gens = []
    for j, k in pairs:
        g = np.zeros((m, m), dtype=np.complex128)
        g[j, k] = g[k, j] = 1.0
        gens.append(g)
    for j, k in pairs:
        g = np.zeros((m, m), dtype=np.complex128)
        g[j, k] = -1j
        g[k, j] = 1j
        gens.append(g)
    for l in range(1, m):
        diag = np.zeros(m)
        diag[:l] = 1.0
        diag[l] = -l
        gens.append(np.diag(np.sqrt(2.0 / (l * (l + 1))) * diag).astype(np.complex128))
    arr = np.array(gens)
    arr.setflags(write=False)
    basis = GeneratorBasis(m, arr)
    _BASIS_CACHE[m] = basis
    return basis


@dataclass(frozen=True)
class RandomTargetSpec:
    system: SystemDescriptor
    kind: Literal["state", "unitary"]
    seed: int
    randomization_steps: int = DEFAULT_RANDOMIZATION_STEPS

    def __post_init__(self):
        if self.kind not in ("state", "unitary"):
            raise ValueError(f"kind must be 'state' or 'unitary', got {self.kind!r}")
        if self.randomization_steps < 0:
            raise ValueError("randomization_steps must be >= 0")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")

    def to_dict(self) -> dict:
        return {
            "system": self.system.to_dict(),
            "kind": self.kind,
            "seed": int(self.seed),
            "randomization_steps": self.randomization_steps,
        }


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Independent PCG64 stream for ``(seed, *stream)``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=tuple(stream))))


def _uniform_complex(rng: np.random.Generator, shape) -> np.ndarray:
    re = rng.uniform(-1.0, 1.0, size=shape)
    im = rng.uniform(-1.0, 1.0, size=shape)
    return re + 1j * im


def gram_schmidt(a: np.ndarray) -> np.ndarray:
    """Orthonormalize the columns of (a batch of) square matrices.

    Classical Gram-Schmidt applied twice per column, which keeps the result
    unitary to machine precision for the small sizes used here.
    """
    q = np.array(a, dtype=np.complex128, copy=True)
    D = q.shape[-1]
    for j in range(D):
        v = q[..., :, j]
        for _ in range(2):
            if j:
                prev = q[..., :, :j]
                coeff = np.einsum("...ik,...i->...k", prev.conj(), v)
                v = v - np.einsum("...ik,...k->...i", prev, coeff)
        v = v / np.linalg.norm(v, axis=-1, keepdims=True)
        q[..., :, j] = v
    return q


def _raw_unitaries(rng: np.random.Generator, count: int, D: int) -> np.ndarray:
    return gram_schmidt(_uniform_complex(rng, (count, D, D)))


def _ordered_product(mats: np.ndarray) -> np.ndarray:
    """mats[-1] @ ... @ mats[0], by pairwise reduction."""
    while len(mats) > 1:
        if len(mats) % 2:
            tail = mats[-1:]
            mats = mats[:-1]
        else:
            tail = None
        mats = mats[1::2] @ mats[0::2]
        if tail is not None:
            mats = np.concatenate([mats, tail])
    return mats[0]


def _randomizer(D: int, steps: int, rng: np.random.Generator) -> np.ndarray:
    if steps == 0:
        return np.eye(D, dtype=np.complex128)
    out = np.eye(D, dtype=np.complex128)
    # chunk to bound memory for larger registers
    chunk = max(1, min(steps, 2**22 // (D * D)))
    done = 0
    while done < steps:
        k = min(chunk, steps - done)
        out = _ordered_product(_raw_unitaries(rng, k, D)) @ out
        done += k
    return out


Target = Union[StateVector, UnitaryMatrix]


def haar_randomize(target: Target, steps: int, seed: int) -> Target:
    """Left-multiply ``target`` by ``steps`` independent random unitaries."""
    if steps < 0:
        raise ValueError("steps must be >= 0")
    if steps == 0:
        return target
    D = target.system.D
    R = _randomizer(D, steps, make_rng(seed, 1))
    if isinstance(target, StateVector):
        return StateVector(R @ target.amplitudes, target.system)
    return UnitaryMatrix(R @ target.entries, target.system)


def random_state(spec: RandomTargetSpec) -> StateVector:
    if spec.kind != "state":
        raise ValueError("spec.kind must be 'state'")
    D = spec.system.D
    rng = make_rng(spec.seed, 0)
    psi = StateVector(_uniform_complex(rng, D), spec.system)
    return haar_randomize(psi, spec.randomization_steps, spec.seed)


def random_unitary(spec: RandomTargetSpec) -> UnitaryMatrix:
    if spec.kind != "unitary":
        raise ValueError("spec.kind must be 'unitary'")
    D = spec.system.D
    rng = make_rng(spec.seed, 0)
    U = UnitaryMatrix(_raw_unitaries(rng, 1, D)[0], spec.system)
    return haar_randomize(U, spec.randomization_steps, spec.seed)


def random_target(spec: RandomTargetSpec) -> Target:
    return random_state(spec) if spec.kind == "state" else random_unitary(spec)


def random_unitary_exp(lambdas: Sequence[float], basis: GeneratorBasis, system: SystemDescriptor | None = None) -> UnitaryMatrix:
    """exp(i sum_j lambda_j G_j) over a Gell-Mann basis of the register space."""
    lam = np.asarray(lambdas, dtype=float)
    m = basis.dimension
    if lam.shape != (m * m - 1,):
        raise ValueError(f"expected {m * m - 1} coefficients, got {lam.size}")
    if system is None:
        system = SystemDescriptor(1, m)
    if system.D != m:
        raise ValueError("basis dimension does not match the register")
    H = np.tensordot(lam, basis.generators, axes=1)
    U, _, _ = eigh_exp(H, 1j)
    return UnitaryMatrix(U, system)
