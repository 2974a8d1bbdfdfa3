"""CZ-entangler circuit ansatz with z-rotation-free single-qudit slots.

A circuit with ``N`` entanglers has ``n + 2N`` single-qudit slots: one per qudit at
the start, then one on each of the two coupled qudits after every CZ. Slots are
``full`` (all d^2 - 1 Gell-Mann generators) or ``reduced`` (the d^2 - d off-diagonal
generators only). Gates are applied left to right in time.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator, Literal, Sequence

import numpy as np

from .bounds import Task
from .qcore import (
    StateVector,
    SystemDescriptor,
    UnitaryMatrix,
    apply_single_qudit,
    eigh_exp,
)
from .targets import gellmann_basis, make_rng

Mode = Literal["full", "reduced"]


def cz_gate(d: int) -> np.ndarray:
    if d < 2:
        raise ValueError("d must be >= 2")
    k = np.arange(d)
    phases = np.exp(2j * np.pi * np.outer(k, k) / d).reshape(-1)
    return np.diag(phases)


def cz_phases(system: SystemDescriptor, pair: tuple[int, int]) -> np.ndarray:
    """Diagonal of the register-embedded CZ, shaped ``(d,)*n`` for broadcasting."""
    n, d = system.n, system.d
    a, b = pair
    digits = np.indices(system.shape)
    return np.exp(2j * np.pi * digits[a] * digits[b] / d)


def slot_generators(d: int, mode: Mode) -> np.ndarray:
    basis = gellmann_basis(d)
    if mode == "full":
        return basis.generators
    if mode == "reduced":
        return basis.offdiagonal
    raise ValueError(f"unknown mode {mode!r}")


def slot_length(d: int, mode: Mode) -> int:
    return d * d - 1 if mode == "full" else d * d - d


def single_qudit_gate(params: Sequence[float], d: int, mode: Mode) -> np.ndarray:
    gens = slot_generators(d, mode)
    p = np.asarray(params, dtype=float)
    if p.shape != (len(gens),):
        raise ValueError(f"{mode} gate on d={d} takes {len(gens)} parameters, got {p.size}")
    U, _, _ = eigh_exp(np.tensordot(p, gens, axes=1), 1j)
    return U


@dataclass(frozen=True)
class CircuitConfig:
    system: SystemDescriptor
    pairs: tuple[tuple[int, int], ...]

    def __post_init__(self):
        pairs = tuple((int(a), int(b)) for a, b in self.pairs)
        for a, b in pairs:
            if not (0 <= a < b < self.system.n):
                raise ValueError(f"invalid qudit pair {(a, b)} for n={self.system.n}")
        object.__setattr__(self, "pairs", pairs)

    @property
    def N(self) -> int:
        return len(self.pairs)

    def to_dict(self) -> dict:
        return {"system": self.system.to_dict(), "pairs": [list(p) for p in self.pairs]}


@dataclass(frozen=True)
class Slot:
    qudit: int
    mode: Mode
    offset: int
    length: int


@dataclass(frozen=True)
class ParamLayout:
    slots: tuple[Slot, ...]

    @property
    def total(self) -> int:
        return sum(s.length for s in self.slots)


def make_layout(config: CircuitConfig, task: Task) -> ParamLayout:
    d = config.system.d
    initial: Mode = "full" if task == "unitary_synth" else "reduced"
    plan = [(q, initial) for q in range(config.system.n)]
    for a, b in config.pairs:
        plan += [(a, "reduced"), (b, "reduced")]
    slots, off = [], 0
    for q, mode in plan:
        L = slot_length(d, mode)
        slots.append(Slot(q, mode, off, L))
        off += L
    return ParamLayout(tuple(slots))


def build_circuit(config: CircuitConfig, layout: ParamLayout, params: Sequence[float],
                  input: Literal["state", "identity"] = "identity"):
    """Evaluate the circuit on |0...0> (``input="state"``) or as an operator."""
    system = config.system
    p = np.asarray(params, dtype=float)
    if p.shape != (layout.total,):
        raise ValueError(f"layout takes {layout.total} parameters, got {p.size}")
    D = system.D
    if input == "state":
        x = np.zeros(D, dtype=np.complex128)
        x[0] = 1.0
        x = x.reshape(system.shape + (1,))
    elif input == "identity":
        x = np.eye(D, dtype=np.complex128).reshape(system.shape + (D,))
    else:
        raise ValueError(f"input must be 'state' or 'identity', got {input!r}")
    slots = iter(layout.slots)

    def apply_slot(x):
        s = next(slots)
        u = single_qudit_gate(p[s.offset:s.offset + s.length], system.d, s.mode)
        return apply_single_qudit(u, s.qudit, x)

    for _ in range(system.n):
        x = apply_slot(x)
    for pair in config.pairs:
        x = x * cz_phases(system, pair)[..., None]
        x = apply_slot(x)
        x = apply_slot(x)
    if input == "state":
        return StateVector(x.reshape(D), system)
    return UnitaryMatrix(x.reshape(D, D), system)


def all_pairs(n: int) -> list[tuple[int, int]]:
    return list(itertools.combinations(range(n), 2))


def count_configs(n: int, N: int) -> int:
    return math.comb(n, 2) ** N


def enumerate_configs(n: int, N: int, d: int = 2) -> Iterator[CircuitConfig]:
    """All ``[n(n-1)/2]^N`` entangler placements in lexicographic order."""
    if n < 2 or N < 0:
        raise ValueError("need n >= 2 and N >= 0")
    system = SystemDescriptor(n, d)
    for pairs in itertools.product(all_pairs(n), repeat=N):
        yield CircuitConfig(system, pairs)


def sample_configs(n: int, N: int, count: int, seed: int, d: int = 2) -> list[CircuitConfig]:
    """``count`` uniformly random placements (duplicates allowed)."""
    if n < 2 or N < 0:
        raise ValueError("need n >= 2 and N >= 0")
    system = SystemDescriptor(n, d)
    choices = all_pairs(n)
    rng = make_rng(seed, 7, N)
    idx = rng.integers(0, len(choices), size=(count, N))
    return [CircuitConfig(system, tuple(choices[i] for i in row)) for row in idx]
