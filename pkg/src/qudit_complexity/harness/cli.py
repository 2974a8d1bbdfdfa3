"""``qdc`` command-line entry point.

Exit codes: 0 success, 2 configuration error (nothing written), 3 inconclusive
search or sweep, 64 unknown subcommand.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import os
import sys
import time
from pathlib import Path
from typing import Mapping, Optional, Sequence

from .. import __version__
from .config import ConfigError, check_types, env_overrides, parse_value, read_config_file, resolve, restrict
from .records import RunRecord, canonical_json, csv_text, find_records, write_outputs
from .runners import EXIT_CONFIG, EXIT_INCONCLUSIVE, EXIT_OK, EXIT_USAGE, RUNNERS, Prepared, workers_for
from .suites import SUITES
from .tables import TableConflict, regenerate_table

SUBCOMMANDS = tuple(RUNNERS) + ("suite", "table")

# flag dest -> dotted config key
FLAG_KEYS = {
    "seed": "seed", "workers": "workers",
    "n_max": "bounds.n_max", "d_max": "bounds.d_max", "n_min": "bounds.n_min", "d_min": "bounds.d_min",
    "n": "system.n", "d": "system.d",
    "kind": "target.kind", "target_seed": "target.seed", "target_source": "target.source",
    "target_file": "target.path",
    "search": "synth.search", "trials": "synth.trials", "restarts": "synth.restarts", "n_start": "synth.n_start",
    "T": "grape.T", "slices": "grape.slices", "grape_restarts": "grape.restarts", "a_max": "grape.a_max",
    "t_start": "sweep.t_start", "t_max": "sweep.t_max", "ratio": "sweep.ratio", "threshold": "sweep.threshold",
    "frame": "model.frame", "g": "model.g", "policy": "model.policy", "scale": "model.scale",
    "epsilon": "speed.epsilon", "base": "speed.base", "hbar": "speed.hbar",
}


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file (a record.json also works)")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--out", help="output directory")
    common.add_argument("--workers", type=int, help="worker processes for circuit search")
    common.add_argument("--serial", action="store_true", default=None, help="force one worker (bit-exact)")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any dotted config key, value parsed as JSON")

    system = argparse.ArgumentParser(add_help=False)
    system.add_argument("--n", type=int)
    system.add_argument("--d", type=int)

    target = argparse.ArgumentParser(add_help=False)
    target.add_argument("--kind", choices=["state", "unitary"])
    target.add_argument("--target-seed", type=int)
    target.add_argument("--target-source", choices=["random", "cz", "file"])
    target.add_argument("--target-file")

    model = argparse.ArgumentParser(add_help=False)
    model.add_argument("--frame", choices=["rotating", "lab"])
    model.add_argument("--g", type=float)
    model.add_argument("--policy", choices=["one_step", "all_pairs"])
    model.add_argument("--scale", type=float)

    grape = argparse.ArgumentParser(add_help=False)
    grape.add_argument("--slices", type=int)
    grape.add_argument("--grape-restarts", type=int)
    grape.add_argument("--a-max", type=float)

    p = argparse.ArgumentParser(prog="qdc", description="Gate-count and pulse-time complexity of qudit targets.")
    sub = p.add_subparsers(dest="subcommand", required=True)

    b = sub.add_parser("bounds", parents=[common], help="lower bounds on the number of entangling gates")
    for f in ("--n-max", "--d-max", "--n-min", "--d-min"):
        b.add_argument(f, type=int)

    sub.add_parser("gen-target", parents=[common, system, target], help="generate a random target")

    s = sub.add_parser("synth-search", parents=[common, system, target], help="minimal CZ count search")
    s.add_argument("--search", choices=["exhaustive", "probabilistic"])
    s.add_argument("--trials", type=int)
    s.add_argument("--restarts", type=int)
    s.add_argument("--n-start", type=int)

    g = sub.add_parser("grape", parents=[common, system, target, model, grape], help="optimize a pulse at fixed T")
    g.add_argument("--T", type=float, help="duration in units of T_CZ2")

    m = sub.add_parser("min-time", parents=[common, system, target, model, grape], help="minimum-time sweep")
    m.add_argument("--t-start", type=float)
    m.add_argument("--t-max", type=float)
    m.add_argument("--ratio", type=float)
    m.add_argument("--threshold", type=float)

    e = sub.add_parser("speed-est", parents=[common, system, target, model], help="commutator-hierarchy estimate")
    e.add_argument("--epsilon", type=float)
    e.add_argument("--base", choices=["identity", "target"])
    e.add_argument("--hbar", type=float)

    sub.add_parser("controllability", parents=[common, system, model], help="Lie-algebra rank of the model")

    st = sub.add_parser("suite", parents=[common], help="run a named experiment suite")
    st.add_argument("name", nargs="?", help="suite name")
    st.add_argument("--include-slow", action="store_true", help="also run entries tagged slow")
    st.add_argument("--list", action="store_true", help="list suites and entries")

    t = sub.add_parser("table", help="rebuild a table from run records")
    t.add_argument("which", choices=["one", "two"])
    t.add_argument("paths", nargs="+", help="record files or directories searched recursively")
    t.add_argument("--out", help="write the table here instead of stdout")
    return p


def _flag_overrides(args: argparse.Namespace) -> dict:
    flags = {}
    for dest, key in FLAG_KEYS.items():
        v = getattr(args, dest, None)
        if v is not None:
            flags[key] = v
    if getattr(args, "target_file", None):
        flags["target.source"] = "file"
    if getattr(args, "serial", None):
        flags["serial"] = True
    for item in getattr(args, "set", []) or []:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        flags[k.strip()] = parse_value(v)
    return flags


def _prepare(subcommand: str, file_cfg, env, delta, flags) -> Prepared:
    cfg = restrict(check_types(resolve(file_cfg, env, delta, flags)), subcommand)
    return RUNNERS[subcommand][0](cfg)


def _execute(subcommand: str, prep: Prepared, out_dir: Path) -> tuple[int, RunRecord]:
    started = _now()
    t0 = time.perf_counter()
    res = RUNNERS[subcommand][1](prep, workers_for(prep.config))
    timing = {"elapsed": time.perf_counter() - t0, **res.timing}
    rec = RunRecord(subcommand, prep.config, prep.config["seed"], res.outputs, started, _now(),
                    timing, __version__, res.status)
    write_outputs(out_dir, {"record.json": rec.to_json(), **res.files})
    return (EXIT_OK if res.status == "ok" else EXIT_INCONCLUSIVE), rec


def _run_suite(args, file_cfg, env, flags) -> tuple[int, Optional[RunRecord]]:
    if args.list or not args.name:
        for s in SUITES.values():
            print(s.name)
            for e in s.entries:
                print(f"  {e.name}  [{e.subcommand}]" + ("  slow" if e.slow else ""))
        return (EXIT_OK if args.list else EXIT_CONFIG), None
    if args.name not in SUITES:
        raise ConfigError(f"unknown suite {args.name!r}; choose from {sorted(SUITES)}")
    suite = SUITES[args.name]
    entries = suite.selected(args.include_slow)
    prepared = [(e, _prepare(e.subcommand, file_cfg, env, e.delta, flags)) for e in entries]
    out = Path(args.out or f"runs/suite-{suite.name}")
    started = _now()
    t0 = time.perf_counter()
    code, rows, records = EXIT_OK, [], []
    for e, prep in prepared:
        c, rec = _execute(e.subcommand, prep, out / e.name)
        print(f"{e.name}: {rec.status}", flush=True)
        records.append(rec)
        rows.append([e.name, e.subcommand, rec.status])
        if c == EXIT_INCONCLUSIVE:
            code = EXIT_INCONCLUSIVE
    files = {"summary.csv": csv_text(["entry", "subcommand", "status"], rows)}
    if suite.table:
        files["table.csv"] = regenerate_table(records, suite.table)
    outputs = {
        "suite": suite.name,
        "include_slow": bool(args.include_slow),
        "entries": [{"name": e.name, "subcommand": e.subcommand, "status": r.status, "outputs": r.outputs}
                    for (e, _), r in zip(prepared, records)],
    }
    base = check_types(resolve(file_cfg, env, None, flags))
    rec = RunRecord("suite", base, base["seed"], outputs, started, _now(),
                    {"elapsed": time.perf_counter() - t0}, __version__,
                    "ok" if code == EXIT_OK else "inconclusive")
    write_outputs(out, {"record.json": rec.to_json(), **files})
    return code, rec


def run_subcommand(argv: Sequence[str], environ: Optional[Mapping[str, str]] = None) -> tuple[int, Optional[RunRecord]]:
    """Parse ``argv``, run it, and return ``(exit code, record)``."""
    argv = list(argv)
    if not argv or argv[0] not in SUBCOMMANDS:
        if argv and argv[0] in ("-h", "--help"):
            _parser().print_help()
            return EXIT_OK, None
        print(f"qdc: unknown subcommand {argv[0] if argv else ''!r}; choose from {', '.join(SUBCOMMANDS)}",
              file=sys.stderr)
        return EXIT_USAGE, None
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return (EXIT_CONFIG if exc.code else EXIT_OK), None
    try:
        if args.subcommand == "table":
            text = regenerate_table(find_records(args.paths), args.which)
            if args.out:
                Path(args.out).write_text(text)
            else:
                sys.stdout.write(text)
            return EXIT_OK, None
        file_cfg = read_config_file(args.config) if args.config else None
        env = env_overrides(os.environ if environ is None else environ)
        flags = _flag_overrides(args)
        if args.subcommand == "suite":
            return _run_suite(args, file_cfg, env, flags)
        prep = _prepare(args.subcommand, file_cfg, env, None, flags)
        out = Path(args.out or f"runs/{args.subcommand}-s{prep.config['seed']}")
        return _execute(args.subcommand, prep, out)
    except (ConfigError, TableConflict) as exc:
        print(f"qdc: {exc}", file=sys.stderr)
        return EXIT_CONFIG, None


def main(argv: Optional[Sequence[str]] = None) -> int:
    code, rec = run_subcommand(sys.argv[1:] if argv is None else argv)
    if rec is not None:
        print(canonical_json({"status": rec.status, "subcommand": rec.subcommand}), end="")
    return code


if __name__ == "__main__":
    sys.exit(main())
