"""One runner per subcommand.

Each runner splits into ``prepare`` (validate the resolved config, build every
object, materialize defaults) and ``execute`` (do the work). A run whose
preparation raises never touches the output directory.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional

from ..bounds import BoundQuery, bound_grid, lower_bound
from ..circuits import cz_gate
from ..control import (
    GrapeSettings,
    HamiltonianModel,
    SweepSettings,
    build_hamiltonian,
    commutator_layers,
    default_slices,
    grape_optimize,
    min_time_sweep,
)
from ..qcore import StateVector, SystemDescriptor, UnitaryMatrix, complex_from_json, complex_to_json
from ..speedest import (
    HEURISTIC_NOTE,
    default_hbar,
    deform_unitary,
    hierarchy_decompose,
    k_bounds,
    time_estimate,
)
from ..synth import OptimizerSettings, SynthesisProblem, find_min_gates
from ..targets import RandomTargetSpec, random_target
from .config import ConfigError, optional
from .records import canonical_json, csv_text

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INCONCLUSIVE = 3
EXIT_USAGE = 64

TASK_LABEL = {"state_prep": "state", "unitary_synth": "unitary"}


@dataclass
class Prepared:
    config: dict
    objects: dict = field(default_factory=dict)


@dataclass
class Result:
    outputs: dict
    files: dict[str, str]
    status: str = "ok"  # ok | inconclusive
    timing: dict = field(default_factory=dict)


def _wrap(fn: Callable[[], Any], what: str):
    try:
        return fn()
    except ConfigError:
        raise
    except (ValueError, TypeError, KeyError, OSError) as exc:
        raise ConfigError(f"invalid {what}: {exc}") from exc


# ---- shared builders -------------------------------------------------------

def _system(cfg: dict) -> SystemDescriptor:
    s = cfg["system"]
    return _wrap(lambda: SystemDescriptor(s["n"], s["d"]), "system")


def _target(cfg: dict, system: SystemDescriptor):
    """Build the target and materialize ``target.seed``; returns (target, description)."""
    t = cfg["target"]
    source = t["source"]
    if source == "random":
        if t["seed"] is None:
            t["seed"] = cfg["seed"]
        t["seed"] = optional(t["seed"], int, "target.seed")
        spec = _wrap(lambda: RandomTargetSpec(system, t["kind"], t["seed"], t["randomization_steps"]), "target")
        return random_target(spec), spec.to_dict()
    if source == "cz":
        if system.n != 2:
            raise ConfigError("the cz target needs n = 2")
        t["kind"] = "unitary"
        return UnitaryMatrix(cz_gate(system.d), system), {"source": "cz", "system": system.to_dict()}
    if source == "file":
        if not t["path"]:
            raise ConfigError("target.path is required when target.source is 'file'")
        target = _wrap(lambda: load_target(t["path"]), "target file")
        if (target.system.n, target.system.d) != (system.n, system.d):
            raise ConfigError("target file system does not match system.n / system.d")
        t["kind"] = "state" if isinstance(target, StateVector) else "unitary"
        return target, {"source": "file", "path": str(t["path"]), "system": system.to_dict()}
    raise ConfigError(f"unknown target.source {source!r}")


def target_to_json(target) -> dict:
    if isinstance(target, StateVector):
        return {"kind": "state", "system": target.system.to_dict(), "data": complex_to_json(target.amplitudes)}
    return {"kind": "unitary", "system": target.system.to_dict(), "data": complex_to_json(target.entries)}


def load_target(path: str | Path):
    data = json.loads(Path(path).read_text())
    if "outputs" in data and "target" in data["outputs"]:
        data = data["outputs"]["target"]
    system = SystemDescriptor(int(data["system"]["n"]), int(data["system"]["d"]))
    arr = complex_from_json(data["data"])
    if data["kind"] == "state":
        return StateVector(arr, system)
    if data["kind"] == "unitary":
        return UnitaryMatrix(arr, system)
    raise ValueError(f"unknown target kind {data['kind']!r}")


def _model(cfg: dict, system: SystemDescriptor) -> HamiltonianModel:
    """Build the model and write every resolved parameter back into the config."""
    m = cfg["model"]
    over: dict[str, Any] = {"policy": m["policy"]}
    for key in ("g", "omegas", "etas", "quadratures"):
        if m[key] is not None:
            over[key] = tuple(m[key]) if isinstance(m[key], list) else m[key]
    model = _wrap(lambda: HamiltonianModel.default(system.n, system.d, m["scale"], m["frame"], **over), "model")
    d = model.to_dict()
    for key in ("g", "omegas", "etas", "quadratures", "policy", "frame"):
        m[key] = d[key]
    return model


def _grape_settings(cfg: dict, **extra) -> GrapeSettings:
    g = cfg["grape"]
    if g["seed"] is None:
        g["seed"] = cfg["seed"]
    g["seed"] = optional(g["seed"], int, "grape.seed")
    g["a_max"] = optional(g["a_max"], float, "grape.a_max")
    g["slices"] = optional(g["slices"], int, "grape.slices")
    if g["slices"] is not None and g["slices"] < 1:
        raise ConfigError("grape.slices must be >= 1")
    if g["restarts"] < 1 or g["max_iterations"] < 1:
        raise ConfigError("grape.restarts and grape.max_iterations must be >= 1")
    return GrapeSettings(restarts=g["restarts"], max_iterations=g["max_iterations"],
                         init_scale=g["init_scale"], seed=g["seed"], a_max=g["a_max"], **extra)


def _workers(cfg: dict) -> int:
    return 1 if cfg["serial"] else cfg["workers"]


def _pulses_csv(schedule) -> str:
    header = ["slice", "t"] + list(schedule.channel_labels)
    return csv_text(header, ([r[0], float(r[1])] + [float(v) for v in r[2:]] for r in schedule.to_csv_rows()))


def _files(summary: str, extra: Optional[dict] = None) -> dict:
    files = {"summary.csv": summary}
    files.update(extra or {})
    return files


# ---- bounds -----------------------------------------------------------------

def prepare_bounds(cfg: dict) -> Prepared:
    b = cfg["bounds"]
    if b["n_min"] < 1 or b["d_min"] < 2 or b["n_max"] < b["n_min"] or b["d_max"] < b["d_min"]:
        raise ConfigError("bounds ranges need 1 <= n_min <= n_max and 2 <= d_min <= d_max")
    return Prepared(cfg)


def execute_bounds(p: Prepared, workers: int) -> Result:
    b = p.config["bounds"]
    rows = [(n, d, TASK_LABEL[t], e, v) for n, d, t, e, v in bound_grid(b["n_max"], b["d_max"], b["n_min"], b["d_min"])]
    outputs = {"rows": [{"n": n, "d": d, "task": t, "entangler": e, "bound": v} for n, d, t, e, v in rows]}
    return Result(outputs, _files(csv_text(["n", "d", "task", "entangler", "bound"], rows)))


# ---- gen-target ---------------------------------------------------------------

def prepare_gen_target(cfg: dict) -> Prepared:
    system = _system(cfg)
    target, desc = _target(cfg, system)
    return Prepared(cfg, {"target": target, "desc": desc})


def execute_gen_target(p: Prepared, workers: int) -> Result:
    tj = target_to_json(p.objects["target"])
    outputs = {"target": tj, "spec": p.objects["desc"]}
    s = p.objects["target"].system
    summary = csv_text(["n", "d", "kind", "seed", "dimension"],
                       [[s.n, s.d, tj["kind"], p.config["target"].get("seed"), s.D]])
    return Result(outputs, _files(summary, {"target.json": canonical_json(tj)}))


# ---- synth-search -------------------------------------------------------------

def prepare_synth(cfg: dict) -> Prepared:
    system = _system(cfg)
    target, desc = _target(cfg, system)
    s = cfg["synth"]
    if s["seed"] is None:
        s["seed"] = cfg["seed"]
    s["seed"] = optional(s["seed"], int, "synth.seed")
    task = "state_prep" if isinstance(target, StateVector) else "unitary_synth"
    lb = lower_bound(BoundQuery(system.n, system.d, task))
    if s["n_start"] is None:
        s["n_start"] = lb
    s["n_start"] = optional(s["n_start"], int, "synth.n_start")
    if s["restarts"] < 1 or s["max_iterations"] < 1 or s["n_start"] < 0:
        raise ConfigError("synth.restarts, synth.max_iterations must be >= 1 and synth.n_start >= 0")
    if not 0 < s["success_threshold"] <= 1:
        raise ConfigError("synth.success_threshold must lie in (0, 1]")
    opt = OptimizerSettings(restarts=s["restarts"], max_iterations=s["max_iterations"],
                            success_threshold=s["success_threshold"], init_range=s["init_range"], seed=s["seed"])
    problem = _wrap(lambda: SynthesisProblem(target, s["search"], s["trials"], opt, s["n_start"], s["n_cap"]), "synth")
    return Prepared(cfg, {"problem": problem, "desc": desc, "task": task})


def execute_synth(p: Prepared, workers: int) -> Result:
    report = find_min_gates(p.objects["problem"], workers=workers)
    rep = report.to_dict()
    wall = rep.pop("wall_time")
    sysd = p.objects["problem"].target.system
    outputs = {"task": p.objects["task"], "target": p.objects["desc"], "report": rep}
    fid_at = report.best_fidelity.get(report.N) if report.N is not None else None
    best = max(report.best_fidelity.values()) if report.best_fidelity else None
    summary = csv_text(
        ["n", "d", "task", "N", "certificate", "lower_bound", "fidelity", "optimizations"],
        [[sysd.n, sysd.d, p.objects["task"], report.N, report.certificate, report.lower_bound,
          fid_at if fid_at is not None else best, report.optimizations]],
    )
    status = "ok" if report.N is not None else "inconclusive"
    return Result(outputs, _files(summary), status, {"wall_time": wall})


# ---- grape ----------------------------------------------------------------------

def prepare_grape(cfg: dict) -> Prepared:
    system = _system(cfg)
    target, desc = _target(cfg, system)
    model = _model(cfg, system)
    settings = _grape_settings(cfg)
    T = cfg["grape"]["T"]
    if not T > 0:
        raise ConfigError("grape.T must be positive")
    if cfg["grape"]["slices"] is None:
        cfg["grape"]["slices"] = default_slices(T * model.t_cz2, model.t_cz2)
    return Prepared(cfg, {"target": target, "desc": desc, "model": model, "settings": settings})


def execute_grape(p: Prepared, workers: int) -> Result:
    o, g = p.objects, p.config["grape"]
    model = o["model"]
    res = grape_optimize(o["target"], model, g["T"] * model.t_cz2, g["slices"], o["settings"])
    outputs = {
        "target": o["desc"],
        "T": g["T"],
        "T_absolute": g["T"] * model.t_cz2,
        "t_cz2": model.t_cz2,
        "slices": res.schedule.slices,
        "fidelity": res.fidelity,
        "converged": res.converged,
        "iterations": res.iterations,
    }
    summary = csv_text(["T", "T_absolute", "slices", "fidelity", "converged"],
                       [[g["T"], outputs["T_absolute"], res.schedule.slices, res.fidelity, res.converged]])
    return Result(outputs, _files(summary, {"pulses.csv": _pulses_csv(res.schedule)}))


# ---- min-time -------------------------------------------------------------------

def prepare_min_time(cfg: dict) -> Prepared:
    system = _system(cfg)
    target, desc = _target(cfg, system)
    model = _model(cfg, system)
    grape = _grape_settings(cfg)
    sw = cfg["sweep"]
    sweep = _wrap(lambda: SweepSettings(sw["t_start"], sw["ratio"], sw["t_max"], sw["threshold"],
                                        grape, cfg["grape"]["slices"]), "sweep")
    return Prepared(cfg, {"target": target, "desc": desc, "model": model, "sweep": sweep})


def execute_min_time(p: Prepared, workers: int) -> Result:
    o = p.objects
    res = min_time_sweep(o["target"], o["model"], o["sweep"])
    outputs = {"target": o["desc"], "result": res.to_dict()}
    s = o["model"].system
    summary = csv_text(["n", "d", "kind", "seed", "t_min", "spacing", "threshold"],
                       [[s.n, s.d, p.config["target"]["kind"], p.config["target"].get("seed"),
                         res.t_min, res.spacing, res.threshold]])
    extra = {"pulses.csv": _pulses_csv(res.schedule)} if res.schedule is not None else {}
    return Result(outputs, _files(summary, extra), "ok" if res.conclusive else "inconclusive")


# ---- speed-est ----------------------------------------------------------------

def prepare_speed(cfg: dict) -> Prepared:
    system = _system(cfg)
    sp = cfg["speed"]
    eps = optional(sp["epsilon"], float, "speed.epsilon")
    if eps is not None and eps < 0:
        raise ConfigError("speed.epsilon must be >= 0")
    if sp["base"] == "identity":
        base = UnitaryMatrix.identity(system)
        desc = {"base": "identity", "system": system.to_dict()}
    elif sp["base"] == "target":
        base, desc = _target(cfg, system)
        if isinstance(base, StateVector):
            raise ConfigError("speed-est needs a unitary target")
    else:
        raise ConfigError(f"unknown speed.base {sp['base']!r}")
    if eps:
        seed = cfg["target"]["seed"] if cfg["target"]["seed"] is not None else cfg["seed"]
        cfg["target"]["seed"] = seed
        target = deform_unitary(base, eps, seed)
        desc = {**desc, "epsilon": eps, "deform_seed": seed}
    else:
        target = base
    model = _model(cfg, system)
    hbar = optional(sp["hbar"], float, "speed.hbar")
    H0, controls = build_hamiltonian(model)
    if hbar is None:
        hbar = sp["hbar"] = default_hbar(H0, controls)
    if not hbar > 0:
        raise ConfigError("speed.hbar must be positive")
    return Prepared(cfg, {"target": target, "desc": desc, "model": model, "H": (H0, controls), "hbar": hbar})


def execute_speed(p: Prepared, workers: int) -> Result:
    o = p.objects
    H0, controls = o["H"]
    dec = hierarchy_decompose(o["target"], H0, controls, p.config["speed"]["tol"])
    est = time_estimate(dec, o["hbar"])
    s = o["model"].system
    kl, kh = k_bounds(s.n, s.d, len(controls) + 1)
    outputs = {
        "target": o["desc"],
        "decomposition": dec.to_dict(),
        "hbar": o["hbar"],
        "time_estimate": est,
        "time_estimate_t_cz2": est / o["model"].t_cz2,
        "k_bounds": [kl, kh],
        "note": HEURISTIC_NOTE,
    }
    rows = [[L.k, len(L.basis), L.norm, L.norm ** (1.0 / L.k) / o["hbar"]] for L in dec.layers]
    summary = csv_text(["k", "dimension", "projection_norm", "time_term"], rows)
    return Result(outputs, _files(summary))


# ---- controllability -------------------------------------------------------------

def prepare_controllability(cfg: dict) -> Prepared:
    system = _system(cfg)
    model = _model(cfg, system)
    return Prepared(cfg, {"model": model})


def execute_controllability(p: Prepared, workers: int) -> Result:
    model = p.objects["model"]
    H0, controls = build_hamiltonian(model)
    layers = commutator_layers(H0, controls, p.config["controllability"]["tol"])
    dims = [len(L) for L in layers]
    full = model.system.D ** 2 - 1
    outputs = {"rank": sum(dims), "full_rank": full, "controllable": sum(dims) == full,
               "layer_dimensions": dims, "channels": [c.label for c in model.channels]}
    summary = csv_text(["k", "dimension", "cumulative"], [[k + 1, v, sum(dims[:k + 1])] for k, v in enumerate(dims)])
    return Result(outputs, _files(summary))


RUNNERS: dict[str, tuple[Callable[[dict], Prepared], Callable[[Prepared, int], Result]]] = {
    "bounds": (prepare_bounds, execute_bounds),
    "gen-target": (prepare_gen_target, execute_gen_target),
    "synth-search": (prepare_synth, execute_synth),
    "grape": (prepare_grape, execute_grape),
    "min-time": (prepare_min_time, execute_min_time),
    "speed-est": (prepare_speed, execute_speed),
    "controllability": (prepare_controllability, execute_controllability),
}


def workers_for(cfg: dict) -> int:
    return _workers(cfg)
