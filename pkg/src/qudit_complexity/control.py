"""Pulse-level synthesis: superconducting-style qudit Hamiltonian, piecewise-constant
propagation, GRAPE, minimum-time sweeps and Lie-algebra controllability.

Time unit: ``t_cz2 = pi / (4 g)``, the two-qubit CZ time for the coupling ``g``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Optional, Sequence, Union

import numpy as np
from scipy.optimize import minimize

from .qcore import (
    StateVector,
    SystemDescriptor,
    UnitaryMatrix,
    embed_single_qudit,
    kron_all,
    unitarity_deviation,
)
from .targets import make_rng

Target = Union[StateVector, UnitaryMatrix]
Policy = Literal["one_step", "all_pairs"]
Frame = Literal["rotating", "lab"]

TWO_PI = 2 * np.pi


@dataclass(frozen=True)
class Channel:
    qudit: int
    j: int
    l: int
    quadrature: Literal["x", "y"] = "x"

    @property
    def label(self) -> str:
        return f"q{self.qudit}_{self.j}{self.l}{self.quadrature}"


@dataclass(frozen=True)
class HamiltonianModel:
    """Fixed part, drive channels and frame of an all-to-all coupled qudit array.

    ``frame="rotating"`` drops the qudit frequencies but keeps the full
    ``(a + a^dag)(a + a^dag)`` coupling, and drives each transition with both
    quadratures. ``frame="lab"`` keeps the frequencies and drives only the
    ``|j><l| + |l><j|`` quadrature.
    """

    system: SystemDescriptor
    g: float
    omegas: tuple[float, ...] = ()
    etas: tuple[float, ...] = ()
    policy: Policy = "one_step"
    frame: Frame = "rotating"
    quadratures: tuple[str, ...] = ("x", "y")

    def __post_init__(self):
        n = self.system.n
        if not self.g >= 0:
            raise ValueError("coupling g must be >= 0")
        omegas = tuple(float(w) for w in self.omegas) or (0.0,) * n
        etas = tuple(float(e) for e in self.etas) or (0.0,) * n
        if len(omegas) != n or len(etas) != n:
            raise ValueError("need one frequency and one anharmonicity per qudit")
        if self.policy not in ("one_step", "all_pairs"):
            raise ValueError(f"unknown channel policy {self.policy!r}")
        if self.frame not in ("rotating", "lab"):
            raise ValueError(f"unknown frame {self.frame!r}")
        if not self.quadratures or any(q not in ("x", "y") for q in self.quadratures):
            raise ValueError("quadratures must be a non-empty subset of ('x', 'y')")
        object.__setattr__(self, "omegas", omegas)
        object.__setattr__(self, "etas", etas)
        object.__setattr__(self, "quadratures", tuple(self.quadratures))

    @classmethod
    def default(cls, n: int, d: int, scale: float = 1.0, frame: Frame = "rotating", **overrides) -> "HamiltonianModel":
        g = 0.02 * TWO_PI * scale
        eta = 0.0 if d == 2 else -0.05 * TWO_PI * scale
        kw = dict(system=SystemDescriptor(n, d), g=g, etas=(eta,) * n)
        if frame == "lab":
            kw.update(frame="lab", quadratures=("x",),
                      omegas=tuple(TWO_PI * scale * (0.5 + 0.05 * k) for k in range(n)))
        kw.update(overrides)
        return cls(**kw)

    @property
    def t_cz2(self) -> float:
        if self.g == 0:
            raise ValueError("T_CZ2 is undefined for an uncoupled model")
        return math.pi / (4 * self.g)

    @property
    def channels(self) -> list[Channel]:
        d = self.system.d
        if self.policy == "one_step":
            levels = [(j, j + 1) for j in range(d - 1)]
        else:
            levels = [(j, l) for j in range(d - 1) for l in range(j + 1, d)]
        return [Channel(k, j, l, q) for k in range(self.system.n) for j, l in levels for q in self.quadratures]

    def to_dict(self) -> dict:
        return {
            "system": self.system.to_dict(),
            "g": self.g,
            "omegas": list(self.omegas),
            "etas": list(self.etas),
            "policy": self.policy,
            "frame": self.frame,
            "quadratures": list(self.quadratures),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "HamiltonianModel":
        data = dict(data)
        sysd = data.pop("system")
        system = SystemDescriptor(int(sysd["n"]), int(sysd["d"]))
        for key in ("omegas", "etas", "quadratures"):
            if key in data:
                data[key] = tuple(data[key])
        return cls(system=system, **data)


def ladder(d: int) -> np.ndarray:
    """Annihilation operator truncated to ``d`` levels."""
    return np.diag(np.sqrt(np.arange(1, d)), 1).astype(np.complex128)


def channel_operator(ch: Channel, d: int) -> np.ndarray:
    if not (0 <= ch.j < d and 0 <= ch.l < d and ch.j != ch.l):
        raise ValueError(f"invalid level pair ({ch.j}, {ch.l}) for d={d}")
    op = np.zeros((d, d), dtype=np.complex128)
    if ch.quadrature == "x":
        op[ch.j, ch.l] = op[ch.l, ch.j] = 1.0
    else:
        op[ch.j, ch.l] = -1j
        op[ch.l, ch.j] = 1j
    return op


def build_hamiltonian(model: HamiltonianModel) -> tuple[np.ndarray, list[np.ndarray]]:
    system = model.system
    n, d = system.n, system.d
    j = np.arange(d)
    H0 = np.zeros((system.D, system.D), dtype=np.complex128)
    for k in range(n):
        omega = model.omegas[k] if model.frame == "lab" else 0.0
        local = np.diag(omega * j + model.etas[k] * j * (j - 1) / 2).astype(np.complex128)
        H0 += embed_single_qudit(local, k, system)
    x = ladder(d) + ladder(d).conj().T
    eye = np.eye(d, dtype=np.complex128)
    for k in range(n):
        for m in range(k + 1, n):
            mats = [eye] * n
            mats[k] = x
            mats[m] = x
            H0 += model.g * kron_all(mats)
    controls = [embed_single_qudit(channel_operator(ch, d), ch.qudit, system) for ch in model.channels]
    return H0, controls


@dataclass(frozen=True, eq=False)
class PulseSchedule:
    """Piecewise-constant amplitudes, shape ``(slices, channels)``; slice 0 acts first."""

    T: float
    amplitudes: np.ndarray
    a_max: Optional[float] = None
    time_unit: str = "absolute"
    channel_labels: tuple[str, ...] = ()

    def __post_init__(self):
        amp = np.array(self.amplitudes, dtype=float, copy=True)
        if amp.ndim != 2:
            raise ValueError("amplitudes must be a 2-D (slices, channels) array")
        if not self.T > 0 or amp.shape[0] < 1:
            raise ValueError("need T > 0 and at least one slice")
        if not np.all(np.isfinite(amp)):
            raise ValueError("amplitudes must be finite")
        if self.a_max is not None and np.max(np.abs(amp), initial=0.0) > self.a_max * (1 + 1e-12):
            raise ValueError("amplitude exceeds a_max")
        amp.setflags(write=False)
        object.__setattr__(self, "amplitudes", amp)

    @property
    def slices(self) -> int:
        return self.amplitudes.shape[0]

    @property
    def dt(self) -> float:
        return self.T / self.slices

    def resample(self, T: float, slices: int) -> "PulseSchedule":
        """Same amplitude shape in relative time on a new grid."""
        src = np.minimum((np.arange(slices) + 0.5) * self.slices / slices, self.slices - 1e-9).astype(int)
        return PulseSchedule(T, self.amplitudes[src], self.a_max, self.time_unit, self.channel_labels)

    def to_csv_rows(self) -> list[list]:
        rows = []
        for i, row in enumerate(self.amplitudes):
            rows.append([i, repr(float(i * self.dt))] + [repr(float(v)) for v in row])
        return rows


def _slice_generators(H0: np.ndarray, controls: np.ndarray, u: np.ndarray, dt: float) -> np.ndarray:
    # u is amplitude * dt, shape (S, M)
    return H0[None] * dt + np.tensordot(u, controls, axes=([1], [0]))


def _slice_props(Hs: np.ndarray):
    w, V = np.linalg.eigh(Hs)
    mu = -1j * w
    U = (V * np.exp(mu)[:, None, :]) @ np.conj(np.swapaxes(V, 1, 2))
    return U, mu, V


def _kernels(mu: np.ndarray) -> np.ndarray:
    # batched divided differences of exp, see qcore.exp_derivative_kernel
    diff = mu[:, :, None] - mu[:, None, :]
    mean = 0.5 * (mu[:, :, None] + mu[:, None, :])
    half = 0.5 * diff
    close = np.abs(half) < 1e-6
    safe = np.where(close, 1.0, half)
    sinhc = np.where(close, 1 + half**2 / 6, np.sinh(safe) / safe)
    return np.exp(mean) * sinhc


def propagate(H0: np.ndarray, controls: Sequence[np.ndarray], schedule: PulseSchedule,
              system: Optional[SystemDescriptor] = None) -> UnitaryMatrix:
    H0 = np.asarray(H0, dtype=np.complex128)
    C = np.asarray(controls, dtype=np.complex128).reshape(-1, *H0.shape)
    amp = schedule.amplitudes
    if amp.shape[1] != len(C):
        raise ValueError(f"schedule has {amp.shape[1]} channels, model has {len(C)}")
    if system is None:
        system = SystemDescriptor(1, H0.shape[0])
    props, _, _ = _slice_props(_slice_generators(H0, C, amp * schedule.dt, schedule.dt))
    U = np.eye(H0.shape[0], dtype=np.complex128)
    for P in props:
        U = P @ U
    return UnitaryMatrix(U, system)


class PulseObjective:
    """Fidelity of a pulse against a target with exact GRAPE gradients.

    Variables are per-slice rotation angles ``u = amplitude * dt`` (shape S x M).
    """

    def __init__(self, H0, controls, target: Target, T: float, slices: int):
        self.H0 = np.asarray(H0, dtype=np.complex128)
        self.C = np.asarray(controls, dtype=np.complex128).reshape(-1, *self.H0.shape)
        self.T = float(T)
        self.S = int(slices)
        self.dt = self.T / self.S
        D = self.H0.shape[0]
        if isinstance(target, StateVector):
            self.x0 = np.zeros((D, 1), dtype=np.complex128)
            self.x0[0, 0] = 1
            self.y = target.amplitudes.reshape(D, 1)
            self.norm = 1.0
        else:
            self.x0 = np.eye(D, dtype=np.complex128)
            self.y = np.asarray(target.entries)
            self.norm = float(D * D)
        if self.y.shape[0] != D:
            raise ValueError("target and Hamiltonian dimensions differ")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.S, len(self.C))

    def fidelity(self, u) -> float:
        u = np.asarray(u, dtype=float).reshape(self.shape)
        props, _, _ = _slice_props(_slice_generators(self.H0, self.C, u, self.dt))
        x = self.x0
        for P in props:
            x = P @ x
        return float(abs(np.vdot(self.y, x)) ** 2 / self.norm)

    def fidelity_and_grad(self, u):
        u = np.asarray(u, dtype=float).reshape(self.shape)
        props, mu, V = _slice_props(_slice_generators(self.H0, self.C, u, self.dt))
        S = self.S
        xs = np.empty((S,) + self.x0.shape, dtype=np.complex128)
        x = self.x0
        for s in range(S):
            xs[s] = x
            x = props[s] @ x
        t = np.vdot(self.y, x)
        ys = np.empty_like(xs)
        y = self.y
        for s in range(S - 1, -1, -1):
            ys[s] = y
            y = props[s].conj().T @ y
        Vh = np.conj(np.swapaxes(V, 1, 2))
        # C_s = V^dag X_{s-1} Y_s^dag V
        Cm = Vh @ xs @ np.conj(np.swapaxes(ys, 1, 2)) @ V
        B = _kernels(mu) * np.swapaxes(Cm, 1, 2)
        P = V @ np.swapaxes(B, 1, 2) @ Vh
        # d<y|U_s x>/du_{s,j} = -i Tr(H_j P_s)
        grad_t = -1j * np.einsum("jab,sba->sj", self.C, P)
        F = abs(t) ** 2 / self.norm
        grad = 2 * np.real(np.conj(t) * grad_t) / self.norm
        return float(F), grad


@dataclass(frozen=True)
class GrapeSettings:
    restarts: int = 5
    max_iterations: int = 1000
    init_scale: float = 0.5
    seed: int = 0
    a_max: Optional[float] = None
    stop_fidelity: Optional[float] = None

    def __post_init__(self):
        if self.restarts < 0:
            raise ValueError("restarts must be >= 0")


@dataclass
class GrapeResult:
    schedule: PulseSchedule
    fidelity: float
    converged: bool
    iterations: int
    trace: list[float] = field(default_factory=list)


def default_slices(T: float, t_cz2: float) -> int:
    return max(40, math.ceil(20 * T / t_cz2))


def _optimize(obj: PulseObjective, u0: np.ndarray, settings: GrapeSettings, record: bool):
    trace: list[float] = []

    def fun(v):
        F, g = obj.fidelity_and_grad(v)
        return 1.0 - F, -g.reshape(-1)

    cb = None
    if record:
        trace.append(obj.fidelity(u0))

        def cb(xk):
            trace.append(obj.fidelity(xk))

    bounds = None
    if settings.a_max is not None:
        lim = settings.a_max * obj.dt
        bounds = [(-lim, lim)] * u0.size
        u0 = np.clip(u0, -lim, lim)
    res = minimize(fun, u0.reshape(-1), jac=True, method="L-BFGS-B", bounds=bounds, callback=cb,
                   options={"maxiter": settings.max_iterations, "ftol": 1e-12, "gtol": 1e-10, "maxcor": 20})
    u = res.x.reshape(obj.shape)
    return u, obj.fidelity(u), bool(res.success), int(res.nit), trace


def grape_optimize(target: Target, model: HamiltonianModel, T: float, slices: Optional[int] = None,
                   settings: GrapeSettings = GrapeSettings(), initial: Optional[PulseSchedule] = None,
                   record_trace: bool = False, stream: tuple[int, ...] = ()) -> GrapeResult:
    """Best pulse of duration ``T`` over a warm start (if given) plus random restarts.

    Non-convergence is not an error: the best schedule found is returned.
    """
    if (target.system.n, target.system.d) != (model.system.n, model.system.d):
        raise ValueError("target and model live on different registers")
    S = slices or default_slices(T, model.t_cz2)
    H0, controls = build_hamiltonian(model)
    obj = PulseObjective(H0, controls, target, T, S)
    starts = []
    if initial is not None:
        starts.append(initial.resample(T, S).amplitudes * obj.dt)
    for r in range(settings.restarts):
        rng = make_rng(settings.seed, 23, *stream, r)
        starts.append(rng.uniform(-settings.init_scale, settings.init_scale, size=obj.shape) / math.sqrt(S))
    if not starts:
        raise ValueError("need a warm start or at least one restart")
    best = None
    for u0 in starts:
        u, F, ok, nit, trace = _optimize(obj, u0, settings, record_trace)
        if not np.isfinite(F):
            continue
        if best is None or F > best[1]:
            best = (u, F, ok, nit, trace)
        if settings.stop_fidelity is not None and best[1] >= settings.stop_fidelity:
            break
    if best is None:
        raise RuntimeError("every GRAPE run produced a non-finite fidelity")
    u, F, ok, nit, trace = best
    labels = tuple(ch.label for ch in model.channels)
    sched = PulseSchedule(T, u / obj.dt, settings.a_max, "absolute", labels)
    return GrapeResult(sched, F, ok, nit, trace)


@dataclass(frozen=True)
class SweepSettings:
    t_start: float = 0.2  # units of t_cz2
    ratio: float = 1.10
    t_max: float = 4.0
    threshold: float = 0.999
    grape: GrapeSettings = GrapeSettings()
    slices: Optional[int] = None

    def __post_init__(self):
        if not self.ratio > 1 or not self.t_start > 0 or not 0 < self.threshold < 1:
            raise ValueError("invalid sweep settings")

    def grid(self) -> list[float]:
        out, t = [], self.t_start
        while t <= self.t_max * (1 + 1e-12):
            out.append(t)
            t *= self.ratio
        return out


@dataclass
class MinTimeResult:
    t_min: Optional[float]  # units of t_cz2; None if never reached
    trace: dict[float, float]
    spacing: float
    threshold: float
    t_cz2: float
    schedule: Optional[PulseSchedule] = None

    @property
    def conclusive(self) -> bool:
        return self.t_min is not None

    def to_dict(self) -> dict:
        return {
            "t_min": self.t_min,
            "t_min_absolute": None if self.t_min is None else self.t_min * self.t_cz2,
            "trace": [[t, f] for t, f in self.trace.items()],
            "spacing": self.spacing,
            "threshold": self.threshold,
            "t_cz2": self.t_cz2,
        }


def min_time_sweep(target: Target, model: HamiltonianModel, settings: SweepSettings = SweepSettings()) -> MinTimeResult:
    """Shortest grid time whose optimized fidelity reaches the threshold.

    Each grid point is warm-started from the previous best pulse.
    """
    t_unit = model.t_cz2
    trace: dict[float, float] = {}
    prev: Optional[PulseSchedule] = None
    grape = settings.grape
    if grape.stop_fidelity is None:
        grape = GrapeSettings(**{**grape.__dict__, "stop_fidelity": settings.threshold})
    for k, t in enumerate(settings.grid()):
        T = t * t_unit
        res = grape_optimize(target, model, T, settings.slices, grape, initial=prev, stream=(k,))
        trace[t] = res.fidelity
        prev = res.schedule
        if res.fidelity >= settings.threshold:
            return MinTimeResult(t, trace, settings.ratio - 1, settings.threshold, t_unit, res.schedule)
    return MinTimeResult(None, trace, settings.ratio - 1, settings.threshold, t_unit, prev)


def _hs_vec(A: np.ndarray) -> np.ndarray:
    a = A.reshape(-1)
    return np.concatenate([a.real, a.imag])


def _traceless(A: np.ndarray) -> np.ndarray:
    D = A.shape[0]
    return A - np.trace(A) / D * np.eye(D)


def commutator_layers(H0: np.ndarray, controls: Sequence[np.ndarray], tol: float = 1e-9,
                      max_layers: Optional[int] = None) -> list[list[np.ndarray]]:
    """Orthonormal (Hilbert-Schmidt) bases of the commutator hierarchy.

    Layer 1 spans the traceless parts of ``H0`` and the controls; layer k+1 spans
    ``i[A, G]`` for A in layer k and G a Hamiltonian term, orthogonal to all
    earlier layers. Stops when a layer adds nothing or su(D) is exhausted.
    """
    H0 = np.asarray(H0, dtype=np.complex128)
    D = H0.shape[0]
    full = D * D - 1
    terms = [_traceless(np.asarray(h, dtype=np.complex128)) for h in [H0, *controls]]
    basis_vecs: list[np.ndarray] = []
    basis_ops: list[np.ndarray] = []

    def add(A, layer):
        v = _hs_vec(A)
        nrm = np.linalg.norm(v)
        if nrm < tol:
            return
        v = v / nrm
        A = A / nrm
        for _ in range(2):
            if basis_vecs:
                Q = np.array(basis_vecs)
                coef = Q @ v
                v = v - coef @ Q
                A = A - np.tensordot(coef, np.array(basis_ops), axes=1)
        r = np.linalg.norm(v)
        if r > tol:
            basis_vecs.append(v / r)
            basis_ops.append(A / r)
            layer.append(A / r)

    layers: list[list[np.ndarray]] = []
    first: list[np.ndarray] = []
    layers.append(first)
    for h in terms:
        if len(basis_vecs) >= full:
            break
        add(h, first)
    if not first:
        layers.pop()
        return layers
    gens = [h for h in terms if np.linalg.norm(h) > tol]
    while len(basis_vecs) < full and (max_layers is None or len(layers) < max_layers):
        new: list[np.ndarray] = []
        layers.append(new)
        for A in layers[-2]:
            for G in gens:
                if len(basis_vecs) >= full:
                    break
                add(1j * (A @ G - G @ A), new)
        if not new:
            layers.pop()
            break
    return layers


def controllability_rank(H0: np.ndarray, controls: Sequence[np.ndarray], tol: float = 1e-9) -> int:
    """Dimension of the (traceless) Lie algebra generated by iH0 and the iH_j."""
    return sum(len(layer) for layer in commutator_layers(H0, controls, tol))
