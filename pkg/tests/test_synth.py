import numpy as np
import pytest

from qudit_complexity import synth
from qudit_complexity.circuits import CircuitConfig, build_circuit, make_layout
from qudit_complexity.qcore import StateVector, SystemDescriptor, kron_all
from qudit_complexity.synth import (
    SUCCESS_THRESHOLD,
    CircuitObjective,
    OptimizerSettings,
    RestartResult,
    SynthesisError,
    SynthesisProblem,
    find_min_gates,
    optimize_config,
)
from qudit_complexity.targets import RandomTargetSpec, random_target

Q2 = SystemDescriptor(2, 2)


def _target(n, d, kind, seed):
    return random_target(RandomTargetSpec(SystemDescriptor(n, d), kind, seed))


@pytest.mark.parametrize("seed", range(20))
def test_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    n, d = [(2, 2), (3, 2), (2, 3)][seed % 3]
    kind = "state" if seed % 2 else "unitary"
    tgt = _target(n, d, kind, seed)
    pairs = tuple(tuple(sorted(rng.choice(n, 2, replace=False))) for _ in range(1 + seed % 3))
    obj = CircuitObjective(tgt, CircuitConfig(SystemDescriptor(n, d), pairs))
    p = rng.uniform(-np.pi, np.pi, obj.n_params)
    F, g = obj.fidelity_and_grad(p)
    assert F == pytest.approx(obj.fidelity(p), abs=1e-14)
    h = 1e-6
    fd = np.array([(obj.fidelity(p + h * e) - obj.fidelity(p - h * e)) / (2 * h) for e in np.eye(p.size)])
    assert np.linalg.norm(g - fd) <= 1e-5 * np.linalg.norm(fd)


def test_objective_matches_build_circuit(rng):
    s = SystemDescriptor(3, 2)
    cfg = CircuitConfig(s, ((0, 2), (1, 2)))
    tgt = _target(3, 2, "unitary", 1)
    obj = CircuitObjective(tgt, cfg)
    p = rng.normal(size=obj.n_params)
    U = build_circuit(cfg, make_layout(cfg, "unitary_synth"), p).entries
    assert obj.fidelity(p) == pytest.approx(abs(np.trace(tgt.entries.conj().T @ U)) ** 2 / 64, abs=1e-13)


def test_realizable_target():
    s = SystemDescriptor(3, 2)
    cfg = CircuitConfig(s, ((0, 1), (1, 2)))
    lay = make_layout(cfg, "unitary_synth")
    p = np.random.default_rng(5).uniform(-np.pi, np.pi, lay.total)
    tgt = build_circuit(cfg, lay, p)
    _, F = optimize_config(tgt, cfg, settings=OptimizerSettings(seed=3))
    assert F >= SUCCESS_THRESHOLD


def test_two_qubit_unitary_gap():
    """Few nines at N=2, exact at N=3, on ten random unitaries."""
    for seed in range(10):
        tgt = _target(2, 2, "unitary", 100 + seed)
        _, f2 = optimize_config(tgt, CircuitConfig(Q2, ((0, 1),) * 2), settings=OptimizerSettings(seed=seed))
        _, f3 = optimize_config(tgt, CircuitConfig(Q2, ((0, 1),) * 3), settings=OptimizerSettings(seed=seed))
        assert 0.9 <= f2 <= 1 - 1e-4
        assert f3 >= SUCCESS_THRESHOLD


def test_state_needs_one_gate():
    rep = find_min_gates(SynthesisProblem(_target(2, 2, "state", 4)))
    assert rep.N == 1 and rep.certificate == "exact" and rep.lower_bound == 1


def test_product_state_needs_none():
    s = SystemDescriptor(2, 3)
    rng = np.random.default_rng(2)
    parts = [rng.normal(size=3) + 1j * rng.normal(size=3) for _ in range(2)]
    psi = StateVector(kron_all([p[:, None] for p in parts]).ravel(), s)
    rep = find_min_gates(SynthesisProblem(psi, n_start=0))
    assert rep.N == 0


def test_starts_at_lower_bound_and_is_monotone():
    rep = find_min_gates(SynthesisProblem(_target(2, 2, "unitary", 9), n_start=1))
    assert rep.N == 3 and rep.N >= rep.lower_bound
    vals = [rep.best_fidelity[k] for k in sorted(rep.best_fidelity)]
    assert vals == sorted(vals)
    assert sorted(rep.best_fidelity) == [1, 2, 3]
    default = find_min_gates(SynthesisProblem(_target(2, 2, "unitary", 9)))
    assert sorted(default.best_fidelity) == [3]


def test_reproducible_and_parallel_equals_serial():
    prob = SynthesisProblem(_target(3, 2, "state", 2), optimizer=OptimizerSettings(restarts=4, seed=7))
    a = find_min_gates(prob)
    b = find_min_gates(prob)
    c = find_min_gates(prob, workers=2)
    for other in (b, c):
        assert other.N == a.N == 3
        assert other.config == a.config
        assert np.array_equal(other.params, a.params)
        assert other.best_fidelity == a.best_fidelity


def test_probabilistic_gives_upper_bound():
    prob = SynthesisProblem(_target(3, 2, "state", 0), search="probabilistic", trials=6,
                            optimizer=OptimizerSettings(restarts=3))
    rep = find_min_gates(prob)
    assert rep.N is not None and rep.N >= 3
    assert rep.certificate == "upper_bound"


def test_inconclusive_when_capped():
    rep = find_min_gates(SynthesisProblem(_target(2, 2, "unitary", 0), n_start=1, n_cap=2,
                                          optimizer=OptimizerSettings(restarts=2)))
    assert rep.N is None and rep.certificate == "inconclusive"
    assert set(rep.best_fidelity) == {1, 2}


def test_all_restarts_failing(monkeypatch):
    monkeypatch.setattr(synth, "_run_restart",
                        lambda obj, x0, s: RestartResult(x0, float("nan"), 0, False, "diverged"))
    with pytest.raises(SynthesisError):
        optimize_config(_target(2, 2, "unitary", 0), CircuitConfig(Q2, ((0, 1),)))
    with pytest.raises(SynthesisError):
        find_min_gates(SynthesisProblem(_target(2, 2, "unitary", 0)))


def test_problem_validation():
    t = _target(2, 2, "state", 0)
    with pytest.raises(ValueError):
        SynthesisProblem(t, search="greedy")
    with pytest.raises(ValueError):
        SynthesisProblem(t, trials=0)
    with pytest.raises(ValueError):
        CircuitObjective(_target(2, 3, "state", 0), CircuitConfig(Q2, ()))
