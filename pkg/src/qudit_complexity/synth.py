"""Minimum entangling-gate search.

For a fixed entangler placement the single-qudit parameters are fitted by
multi-restart L-BFGS on the infidelity with exact gradients. The outer loop
raises ``N`` from the parameter-counting lower bound until some placement
reaches the success threshold.
"""
from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Literal, Optional, Union

import numpy as np
from scipy.optimize import minimize

from .bounds import BoundQuery, lower_bound
from .circuits import (
    CircuitConfig,
    ParamLayout,
    count_configs,
    cz_phases,
    enumerate_configs,
    make_layout,
    sample_configs,
    slot_generators,
)
from .qcore import (
    StateVector,
    UnitaryMatrix,
    apply_single_qudit,
    exp_derivative_kernel,
    single_qudit_environment,
)
from .targets import make_rng

Target = Union[StateVector, UnitaryMatrix]

SUCCESS_THRESHOLD = 1 - 1e-9


class SynthesisError(RuntimeError):
    pass


@dataclass(frozen=True)
class OptimizerSettings:
    restarts: int = 20
    max_iterations: int = 5000
    success_threshold: float = SUCCESS_THRESHOLD
    init_range: float = np.pi
    seed: int = 0

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if not 0 < self.success_threshold < 1:
            raise ValueError("success_threshold must lie in (0, 1)")


def task_of(target: Target) -> str:
    return "state_prep" if isinstance(target, StateVector) else "unitary_synth"


class CircuitObjective:
    """Fidelity of a fixed-placement circuit against a target, with gradient."""

    def __init__(self, target: Target, config: CircuitConfig, layout: Optional[ParamLayout] = None):
        system = config.system
        if (target.system.n, target.system.d) != (system.n, system.d):
            raise ValueError("target and circuit live on different registers")
        self.system = system
        self.config = config
        self.task = task_of(target)
        self.layout = layout or make_layout(config, self.task)
        D = system.D
        if self.task == "state_prep":
            self.x0 = np.zeros(D, dtype=np.complex128)
            self.x0[0] = 1
            self.x0 = self.x0.reshape(system.shape + (1,))
            self.y_final = target.amplitudes.reshape(system.shape + (1,))
            self.norm = 1.0
        else:
            self.x0 = np.eye(D, dtype=np.complex128).reshape(system.shape + (D,))
            self.y_final = target.entries.reshape(system.shape + (D,))
            self.norm = float(D * D)
        self.phases = [cz_phases(system, p)[..., None] for p in config.pairs]
        self.gens = {m: slot_generators(system.d, m) for m in ("full", "reduced")}
        # op sequence: ("u", slot index) or ("cz", pair index)
        ops = [("u", q) for q in range(system.n)]
        for k in range(config.N):
            ops += [("cz", k), ("u", system.n + 2 * k), ("u", system.n + 2 * k + 1)]
        self.ops = ops

    @property
    def n_params(self) -> int:
        return self.layout.total

    def _slot_unitaries(self, p):
        out = []
        for s in self.layout.slots:
            G = self.gens[s.mode]
            H = np.tensordot(p[s.offset:s.offset + s.length], G, axes=1)
            w, V = np.linalg.eigh(H)
            mu = 1j * w
            U = (V * np.exp(mu)) @ V.conj().T
            out.append((U, mu, V))
        return out

    def overlap(self, params) -> complex:
        p = np.asarray(params, dtype=float)
        us = self._slot_unitaries(p)
        x = self.x0
        for kind, i in self.ops:
            if kind == "u":
                x = apply_single_qudit(us[i][0], self.layout.slots[i].qudit, x)
            else:
                x = x * self.phases[i]
        return complex(np.vdot(self.y_final, x))

    def fidelity(self, params) -> float:
        return abs(self.overlap(params)) ** 2 / self.norm

    def fidelity_and_grad(self, params):
        p = np.asarray(params, dtype=float)
        us = self._slot_unitaries(p)
        slots = self.layout.slots
        xs = []
        x = self.x0
        for kind, i in self.ops:
            xs.append(x)
            if kind == "u":
                x = apply_single_qudit(us[i][0], slots[i].qudit, x)
            else:
                x = x * self.phases[i]
        t = np.vdot(self.y_final, x)
        grad_t = np.zeros(p.size, dtype=np.complex128)
        y = self.y_final
        for (kind, i), x_before in zip(reversed(self.ops), reversed(xs)):
            if kind == "u":
                U, mu, V = us[i]
                s = slots[i]
                R = single_qudit_environment(y, x_before, s.qudit)
                # d<y|U x>/dtheta_a = sum(dU_a * R), dU_a = V ((V^dag iG_a V) * K) V^dag
                G = self.gens[s.mode]
                A = np.einsum("ji,ajk,kl->ail", V.conj(), 1j * G, V)
                C = V.T @ R @ V.conj()  # sum((V M V^dag) * R) == sum(M * C)
                K = exp_derivative_kernel(mu)
                grad_t[s.offset:s.offset + s.length] = np.einsum("aij,ij->a", A * K, C)
                y = apply_single_qudit(U.conj().T, s.qudit, y)
            else:
                y = y * np.conj(self.phases[i])
        F = abs(t) ** 2 / self.norm
        grad = 2 * np.real(np.conj(t) * grad_t) / self.norm
        return F, grad


@dataclass
class RestartResult:
    params: np.ndarray
    fidelity: float
    iterations: int
    ok: bool
    message: str = ""


def _run_restart(obj: CircuitObjective, x0: np.ndarray, settings: OptimizerSettings) -> RestartResult:
    def fun(p):
        F, g = obj.fidelity_and_grad(p)
        return 1.0 - F, -g

    try:
        res = minimize(fun, x0, jac=True, method="L-BFGS-B",
                       options={"maxiter": settings.max_iterations, "ftol": 1e-16, "gtol": 1e-13, "maxcor": 30})
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        return RestartResult(x0, float("nan"), 0, False, str(exc))
    F = obj.fidelity(res.x)
    ok = bool(np.isfinite(F))
    return RestartResult(np.asarray(res.x), F, int(res.nit), ok, str(res.message))


def optimize_config(target: Target, config: CircuitConfig, layout: Optional[ParamLayout] = None,
                    settings: OptimizerSettings = OptimizerSettings(), stream: tuple[int, ...] = (),
                    stop_at_success: bool = True):
    """Best ``(params, fidelity)`` over ``settings.restarts`` random starts."""
    obj = CircuitObjective(target, config, layout)
    best: Optional[RestartResult] = None
    for r in range(settings.restarts):
        res = _restart_task(obj, settings, stream, r)
        if not res.ok:
            continue
        if best is None or res.fidelity > best.fidelity:
            best = res
        if stop_at_success and best.fidelity >= settings.success_threshold:
            break
    if best is None:
        raise SynthesisError("all optimizer restarts failed")
    return best.params, best.fidelity


def _restart_task(obj: CircuitObjective, settings: OptimizerSettings, stream: tuple[int, ...], r: int) -> RestartResult:
    rng = make_rng(settings.seed, 11, *stream, r)
    x0 = rng.uniform(-settings.init_range, settings.init_range, size=obj.n_params)
    if obj.n_params == 0:
        return RestartResult(x0, obj.fidelity(x0), 0, True)
    return _run_restart(obj, x0, settings)


@dataclass(frozen=True)
class SynthesisProblem:
    target: Target
    search: Literal["exhaustive", "probabilistic"] = "exhaustive"
    trials: int = 100
    optimizer: OptimizerSettings = OptimizerSettings()
    n_start: Optional[int] = None
    n_cap: int = 64
    entangler: str = "cz"

    def __post_init__(self):
        if self.search not in ("exhaustive", "probabilistic"):
            raise ValueError(f"unknown search mode {self.search!r}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.entangler != "cz":
            raise ValueError("only the CZ entangler is searched")

    @property
    def task(self) -> str:
        return task_of(self.target)


@dataclass
class SynthesisReport:
    N: Optional[int]
    certificate: Literal["exact", "upper_bound", "inconclusive"]
    lower_bound: int
    best_fidelity: dict[int, float] = field(default_factory=dict)
    config: Optional[CircuitConfig] = None
    params: Optional[np.ndarray] = None
    wall_time: float = 0.0
    optimizations: int = 0
    iterations: int = 0

    def to_dict(self) -> dict:
        return {
            "N": self.N,
            "certificate": self.certificate,
            "lower_bound": self.lower_bound,
            "best_fidelity": {str(k): v for k, v in sorted(self.best_fidelity.items())},
            "config": None if self.config is None else self.config.to_dict(),
            "params": None if self.params is None else [float(v) for v in self.params],
            "wall_time": self.wall_time,
            "optimizations": self.optimizations,
            "iterations": self.iterations,
        }


def _configs_for(problem: SynthesisProblem, N: int) -> list[CircuitConfig]:
    sysd = problem.target.system
    if sysd.n == 1:
        if N:
            return []
        return [CircuitConfig(sysd, ())]
    if problem.search == "exhaustive":
        return [CircuitConfig(sysd, c.pairs) for c in enumerate_configs(sysd.n, N, sysd.d)]
    if count_configs(sysd.n, N) == 1:
        return [CircuitConfig(sysd, ((0, 1),) * N)]
    return [CircuitConfig(sysd, c.pairs) for c in sample_configs(sysd.n, N, problem.trials, problem.optimizer.seed, sysd.d)]


def _evaluate_task(args):
    target, config, settings, N, ci, r = args
    obj = CircuitObjective(target, config)
    return _restart_task(obj, settings, (N, ci), r)


def _search_level(problem: SynthesisProblem, N: int, configs: list[CircuitConfig], workers: int):
    """Best restart at this N, scanning tasks in (config, restart) order.

    Only the prefix up to the first successful task counts, so serial and
    parallel runs pick the same winner.
    """
    settings = problem.optimizer
    tasks = [(ci, r) for ci in range(len(configs)) for r in range(settings.restarts)]
    thr = settings.success_threshold
    results: list[RestartResult] = []
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunk = workers * 2
            for start in range(0, len(tasks), chunk):
                batch = tasks[start:start + chunk]
                outs = list(pool.map(_evaluate_task, [(problem.target, configs[ci], settings, N, ci, r) for ci, r in batch]))
                results.extend(outs)
                if any(o.ok and o.fidelity >= thr for o in outs):
                    break
    else:
        objs: dict[int, CircuitObjective] = {}
        for ci, r in tasks:
            if ci not in objs:
                objs = {ci: CircuitObjective(problem.target, configs[ci])}
            res = _restart_task(objs[ci], settings, (N, ci), r)
            results.append(res)
            if res.ok and res.fidelity >= thr:
                break
    best_i, best = None, None
    for i, res in enumerate(results):
        if not res.ok:
            continue
        if best is None or res.fidelity > best.fidelity:
            best_i, best = i, res
        if res.fidelity >= thr:
            break
    if best is None:
        raise SynthesisError(f"all optimizations failed at N={N}")
    ci = tasks[best_i][0]
    n_used = min(len(results), (best_i + 1) if best.fidelity >= thr else len(results))
    iters = sum(r.iterations for r in results[:n_used])
    return configs[ci], best, n_used, iters


def find_min_gates(problem: SynthesisProblem, workers: int = 1) -> SynthesisReport:
    t0 = time.perf_counter()
    sysd = problem.target.system
    lb = lower_bound(BoundQuery(sysd.n, sysd.d, problem.task, "cz"))
    N = lb if problem.n_start is None else problem.n_start
    report = SynthesisReport(None, "inconclusive", lb)
    running_best = 0.0
    while N <= problem.n_cap:
        configs = _configs_for(problem, N)
        if not configs:
            N += 1
            continue
        cfg, best, used, iters = _search_level(problem, N, configs, workers)
        report.optimizations += used
        report.iterations += iters
        running_best = max(running_best, best.fidelity)
        report.best_fidelity[N] = running_best
        if best.fidelity >= problem.optimizer.success_threshold:
            report.N = N
            report.config = cfg
            report.params = best.params
            exact = problem.search == "exhaustive" or count_configs(sysd.n, N) == 1 or N == lb
            report.certificate = "exact" if exact else "upper_bound"
            break
        N += 1
    report.wall_time = time.perf_counter() - t0
    return report
