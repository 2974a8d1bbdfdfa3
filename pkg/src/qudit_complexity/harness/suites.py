"""Named experiment suites that regenerate the gate-count and pulse-time tables."""
from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class SuiteEntry:
    name: str
    subcommand: str
    delta: dict = field(default_factory=dict)
    slow: bool = False


@dataclass(frozen=True)
class ExperimentSuite:
    name: str
    entries: tuple[SuiteEntry, ...]
    table: str | None = None  # "one" | "two"

    def __post_init__(self):
        names = [e.name for e in self.entries]
        if len(set(names)) != len(names):
            raise ValueError(f"suite {self.name!r} has duplicate entry names")

    def selected(self, include_slow: bool) -> list[SuiteEntry]:
        return [e for e in self.entries if include_slow or not e.slow]


TASK_KIND = {"state_prep": "state", "unitary_synth": "unitary"}


def _synth_entry(n: int, d: int, task: str, slow: bool, seed: int = 0) -> SuiteEntry:
    kind = TASK_KIND[task]
    delta = {"system": {"n": n, "d": d}, "target": {"kind": kind, "seed": seed}}
    if n >= 4:
        # too many placements to enumerate; sampled placements give an upper bound
        delta["synth"] = {"search": "probabilistic", "trials": 100}
    return SuiteEntry(f"n{n}d{d}-{kind}-s{seed}", "synth-search", delta, slow)


def _synth_slow(n: int, d: int, task: str) -> bool:
    if n == 2:
        return task == "unitary_synth" and d >= 4
    return not (n == 3 and d == 2 and task == "state_prep")


def _table1(ns, ds) -> tuple[SuiteEntry, ...]:
    return tuple(_synth_entry(n, d, t, _synth_slow(n, d, t)) for d in ds for n in ns for t in TASK_KIND)


def _min_time_entry(n: int, d: int, kind: str, seed: int, slow: bool) -> SuiteEntry:
    delta = {
        "system": {"n": n, "d": d},
        "target": {"kind": kind, "seed": seed},
        # states never need longer than a CZ; unitaries start above the state range
        "sweep": {"t_start": 0.1 if kind == "state" else 0.5},
    }
    return SuiteEntry(f"n{n}d{d}-{kind}-s{seed}", "min-time", delta, slow)


def _table2(cells) -> tuple[SuiteEntry, ...]:
    return tuple(_min_time_entry(n, d, kind, s, slow)
                 for n, d, slow in cells for kind in ("state", "unitary") for s in range(5))


SUITES: dict[str, ExperimentSuite] = {
    s.name: s
    for s in (
        ExperimentSuite("table1-small", _table1([2], [2, 3, 4]), "one"),
        ExperimentSuite("table1", _table1([2, 3, 4], [2, 3, 4]), "one"),
        ExperimentSuite("table2-n2d2", _table2([(2, 2, False)]), "two"),
        ExperimentSuite("table2", _table2([(2, 2, False), (2, 3, True), (2, 4, True), (3, 2, True)]), "two"),
        ExperimentSuite("bounds", (SuiteEntry("bounds-n2-4-d2-4", "bounds"),)),
    )
}
