"""Rebuild the gate-count table and the minimum-time table from run records."""
from __future__ import annotations

from typing import Iterable, Literal, Optional

from ..bounds import BoundQuery, lower_bound
from .records import RunRecord, csv_text

GRID = [(n, d) for d in (2, 3, 4) for n in (2, 3, 4)]


class TableConflict(ValueError):
    """Two records disagree about the same table cell."""


def _system(rec: RunRecord) -> tuple[int, int]:
    s = rec.config["system"]
    return int(s["n"]), int(s["d"])


def _gate_cell(rec: RunRecord) -> Optional[tuple[int, str]]:
    rep = rec.outputs["report"]
    if rep["N"] is None:
        return None
    return int(rep["N"]), rep["certificate"]


def render_gate_count(cell: Optional[tuple[int, str]]) -> str:
    if cell is None:
        return ""
    N, cert = cell
    return f"≤ {N}" if cert == "upper_bound" else str(N)


def _table_one(records: list[RunRecord]) -> str:
    cells: dict[tuple[int, int, str], tuple[int, str]] = {}
    for rec in records:
        if rec.subcommand != "synth-search":
            continue
        n, d = _system(rec)
        key = (n, d, rec.outputs["task"])
        cell = _gate_cell(rec)
        if cell is None:
            continue
        if key in cells and cells[key] != cell:
            raise TableConflict(f"conflicting results for n={n}, d={d}, {key[2]}: {cells[key]} vs {cell}")
        cells[key] = cell
    extra = sorted({(n, d) for n, d, _ in cells} - set(GRID), key=lambda nd: (nd[1], nd[0]))
    rows = []
    for n, d in GRID + extra:
        row: list = [n, d]
        for task in ("state_prep", "unitary_synth"):
            row += [lower_bound(BoundQuery(n, d, task)), render_gate_count(cells.get((n, d, task)))]
        rows.append(row)
    header = ["n", "d", "state_lower_bound", "state_numerical", "unitary_lower_bound", "unitary_numerical"]
    return csv_text(header, rows)


def _table_two(records: list[RunRecord]) -> str:
    cells: dict[tuple[int, int, str], dict[int, Optional[float]]] = {}
    spacing: dict[tuple[int, int, str], float] = {}
    for rec in records:
        if rec.subcommand != "min-time":
            continue
        n, d = _system(rec)
        kind = rec.config["target"]["kind"]
        seed = int(rec.config["target"]["seed"])
        res = rec.outputs["result"]
        key = (n, d, kind)
        per_seed = cells.setdefault(key, {})
        if seed in per_seed and per_seed[seed] != res["t_min"]:
            raise TableConflict(f"conflicting T_min for n={n}, d={d}, {kind}, seed {seed}")
        per_seed[seed] = res["t_min"]
        spacing[key] = res["spacing"]
    keys = sorted({(n, d) for n, d, _ in cells}, key=lambda nd: (nd[1], nd[0]))
    rows = []
    for n, d in keys:
        row: list = [n, d]
        for kind in ("state", "unitary"):
            per_seed = cells.get((n, d, kind))
            if not per_seed:
                row.append("")
                continue
            vals = ", ".join("-" if v is None else f"{v:.2f}" for _, v in sorted(per_seed.items()))
            row.append(f"{vals} ({spacing[(n, d, kind)]:.0%} grid)")
        rows.append(row)
    return csv_text(["n", "d", "state_t_min", "unitary_t_min"], rows)


def regenerate_table(records: Iterable[RunRecord], table: Literal["one", "two"]) -> str:
    records = list(records)
    if table == "one":
        return _table_one(records)
    if table == "two":
        return _table_two(records)
    raise ValueError(f"table must be 'one' or 'two', got {table!r}")
