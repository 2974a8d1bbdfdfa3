"""Parameter counting and entangling-gate lower bounds.

Everything here is exact integer arithmetic.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Literal

Task = Literal["state_prep", "unitary_synth"]
Entangler = Literal["cz", "noncommuting"]

TASKS: tuple[str, ...] = ("state_prep", "unitary_synth")
ENTANGLERS: tuple[str, ...] = ("cz", "noncommuting")


def _check(n: int, d: int, task: str | None = None):
    if n < 1 or d < 2:
        raise ValueError(f"need n >= 1 and d >= 2, got n={n}, d={d}")
    if task is not None and task not in TASKS:
        raise ValueError(f"unknown task {task!r}")


@dataclass(frozen=True)
class BoundQuery:
    n: int
    d: int
    task: Task
    entangler: Entangler = "cz"

    def __post_init__(self):
        _check(self.n, self.d, self.task)
        if self.entangler not in ENTANGLERS:
            raise ValueError(f"unknown entangler {self.entangler!r}")


def target_param_count(n: int, d: int, task: Task) -> int:
    """Real dimension of the target manifold (states: 2 d^n - 2, unitaries: d^2n - 1)."""
    _check(n, d, task)
    if task == "state_prep":
        return 2 * d**n - 2
    return d ** (2 * n) - 1


def circuit_param_count(n: int, d: int, N: int, task: Task) -> int:
    """Non-redundant single-qudit parameters of an N-entangler CZ circuit."""
    _check(n, d, task)
    if N < 0:
        raise ValueError("N must be >= 0")
    if task == "state_prep":
        return d * (d - 1) * (n + 2 * N)
    return (d * d - 1) * n + 2 * d * (d - 1) * N


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def lower_bound(query: BoundQuery) -> int:
    n, d = query.n, query.d
    local = (d * d - 1) * n if query.task == "unitary_synth" else d * (d - 1) * n
    deficit = target_param_count(n, d, query.task) - local
    per_gate = 2 * d * (d - 1) if query.entangler == "cz" else 2 * (d * d - 1)
    return max(0, _ceil_div(deficit, per_gate))


def canonical_param_deficit(n: int, d: int) -> int:
    """Parameters left for the interaction generator after 2n local rotations."""
    if n < 2:
        raise ValueError("canonical decomposition needs n >= 2")
    if d < 2:
        raise ValueError("d must be >= 2")
    return d ** (2 * n) - 2 * n * d * d + 2 * n - 1


def bound_grid(n_max: int, d_max: int, n_min: int = 2, d_min: int = 2) -> Iterator[tuple[int, int, str, str, int]]:
    """Rows ``(n, d, task, entangler, bound)`` ordered by d, then n."""
    for d in range(d_min, d_max + 1):
        for n in range(n_min, n_max + 1):
            for task in TASKS:
                for ent in ENTANGLERS:
                    yield n, d, task, ent, lower_bound(BoundQuery(n, d, task, ent))
