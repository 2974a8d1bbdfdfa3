"""Run records and their canonical serialization.

Floats are written with 17 significant digits, which round-trips every double,
and object keys are sorted, so dumping a reloaded record reproduces the bytes.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Optional

import numpy as np

SCHEMA_VERSION = 1


def format_float(x: float) -> str:
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"cannot serialize non-finite float {x!r}")
    s = format(x, ".17g")
    if "e" not in s and "." not in s:
        s += ".0"
    return s


def _plain(obj: Any) -> Any:
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def _dump(obj: Any, indent: int, level: int, out: list[str]):
    obj = _plain(obj)
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None or isinstance(obj, bool):
        out.append(json.dumps(obj))
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        out.append(format_float(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=False))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        keys = sorted(obj)
        if any(not isinstance(k, str) for k in keys):
            raise TypeError("record keys must be strings")
        out.append("{\n")
        for i, k in enumerate(keys):
            out.append(pad + json.dumps(k) + ": ")
            _dump(obj[k], indent, level + 1, out)
            out.append(",\n" if i < len(keys) - 1 else "\n")
        out.append(end + "}")
    elif isinstance(obj, (list, tuple)):
        if not obj:
            out.append("[]")
            return
        # numeric leaves stay on one line
        if all(not isinstance(_plain(v), (dict, list, tuple)) for v in obj):
            parts: list[str] = []
            for v in obj:
                sub: list[str] = []
                _dump(v, indent, level + 1, sub)
                parts.append("".join(sub))
            out.append("[" + ", ".join(parts) + "]")
            return
        out.append("[\n")
        for i, v in enumerate(obj):
            out.append(pad)
            _dump(v, indent, level + 1, out)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(end + "]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def canonical_json(obj: Any, indent: int = 2) -> str:
    out: list[str] = []
    _dump(obj, indent, 0, out)
    return "".join(out) + "\n"


def csv_text(header: list[str], rows: Iterable[Iterable[Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["" if v is None else format_float(v) if isinstance(_plain(v), float) else _plain(v) for v in row])
    return buf.getvalue()


@dataclass
class RunRecord:
    """Everything needed to repeat a run, plus what it produced.

    ``outputs`` holds only deterministic results; wall-clock figures live in
    ``timing`` so that re-runs can be compared byte for byte.
    """

    subcommand: str
    config: dict
    seed: int
    outputs: dict
    started: str = ""
    finished: str = ""
    timing: dict = field(default_factory=dict)
    version: str = ""
    status: str = "ok"
    schema_version: int = SCHEMA_VERSION

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "subcommand": self.subcommand,
            "config": self.config,
            "seed": self.seed,
            "started": self.started,
            "finished": self.finished,
            "timing": self.timing,
            "outputs": self.outputs,
            "status": self.status,
            "version": self.version,
        }

    def to_json(self) -> str:
        return canonical_json(self.to_dict())

    def outputs_json(self) -> str:
        return canonical_json(self.outputs)

    @classmethod
    def from_dict(cls, data: dict) -> "RunRecord":
        missing = {"subcommand", "config", "seed", "outputs"} - set(data)
        if missing:
            raise ValueError(f"record is missing {sorted(missing)}")
        return cls(
            subcommand=data["subcommand"],
            config=data["config"],
            seed=int(data["seed"]),
            outputs=data["outputs"],
            started=data.get("started", ""),
            finished=data.get("finished", ""),
            timing=data.get("timing", {}),
            version=data.get("version", ""),
            status=data.get("status", "ok"),
            schema_version=int(data.get("schema_version", SCHEMA_VERSION)),
        )


def load_record(path: str | Path) -> RunRecord:
    p = Path(path)
    if p.is_dir():
        p = p / "record.json"
    return RunRecord.from_dict(json.loads(p.read_text()))


def is_record(data: Any) -> bool:
    return isinstance(data, dict) and "schema_version" in data and "subcommand" in data and "config" in data


def write_outputs(out_dir: Path, files: dict[str, str]):
    """Write all files at once, after the run has finished."""
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        tmp = out_dir / (name + ".tmp")
        tmp.write_text(text)
        tmp.replace(out_dir / name)


def find_records(paths: Iterable[str | Path]) -> list[RunRecord]:
    """All ``record.json`` files under the given files or directories."""
    found: list[RunRecord] = []
    for path in paths:
        p = Path(path)
        files = [p] if p.is_file() else sorted(p.rglob("record.json"))
        for f in files:
            rec = load_record(f)
            if rec.subcommand == "suite":
                continue
            found.append(rec)
    return found

