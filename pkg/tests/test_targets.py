import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.linalg import expm

from qudit_complexity.qcore import StateVector, SystemDescriptor, UnitaryMatrix, unitarity_deviation
from qudit_complexity.targets import (
    RandomTargetSpec,
    gellmann_basis,
    gram_schmidt,
    haar_randomize,
    make_rng,
    random_state,
    random_target,
    random_unitary,
    random_unitary_exp,
)

PAULI = [np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]]), np.array([[1, 0], [0, -1]])]


class TestGellMann:
    def test_qubit_is_pauli(self):
        assert np.allclose(gellmann_basis(2).generators, PAULI)

    @pytest.mark.parametrize("m", [2, 3, 4, 5])
    def test_invariants(self, m):
        G = gellmann_basis(m).generators
        assert len(G) == m * m - 1
        for g in G:
            assert np.max(np.abs(g - g.conj().T)) <= 1e-14
            assert abs(np.trace(g)) <= 1e-14
        gram = np.einsum("aij,bji->ab", G, G)
        assert np.max(np.abs(gram - 2 * np.eye(m * m - 1))) <= 1e-12
        diag = [g for g in G if np.allclose(g, np.diag(np.diag(g)))]
        assert len(diag) == m - 1

    def test_family_order(self):
        b = gellmann_basis(3)
        G = b.generators
        pairs = [(0, 1), (0, 2), (1, 2)]
        for i, (j, k) in enumerate(pairs):
            assert G[i][j, k] == 1 and G[i][k, j] == 1
            assert G[3 + i][j, k] == -1j and G[3 + i][k, j] == 1j
        assert b.n_offdiagonal == 6
        assert len(b.diagonal) == 2
        assert np.allclose(G[6], np.diag([1, -1, 0]))

    def test_rejects_small(self):
        with pytest.raises(ValueError):
            gellmann_basis(1)


class TestRandomTargets:
    def test_deterministic(self):
        s = SystemDescriptor(2, 3)
        a = random_state(RandomTargetSpec(s, "state", 7))
        b = random_state(RandomTargetSpec(s, "state", 7))
        assert np.array_equal(a.amplitudes, b.amplitudes)
        U = random_unitary(RandomTargetSpec(s, "unitary", 7))
        V = random_unitary(RandomTargetSpec(s, "unitary", 7))
        assert np.array_equal(U.entries, V.entries)
        W = random_unitary(RandomTargetSpec(s, "unitary", 8))
        assert not np.allclose(U.entries, W.entries)

    def test_invariants_after_full_randomization(self):
        s = SystemDescriptor(2, 4)
        U = random_unitary(RandomTargetSpec(s, "unitary", 3))
        assert unitarity_deviation(U.entries) <= 1e-9
        psi = random_state(RandomTargetSpec(s, "state", 3))
        assert abs(np.linalg.norm(psi.amplitudes) - 1) <= 1e-12

    def test_kind_checks(self):
        s = SystemDescriptor(1, 2)
        with pytest.raises(ValueError):
            random_state(RandomTargetSpec(s, "unitary", 0))
        with pytest.raises(ValueError):
            random_unitary(RandomTargetSpec(s, "state", 0))
        with pytest.raises(ValueError):
            RandomTargetSpec(s, "mixed", 0)
        with pytest.raises(ValueError):
            RandomTargetSpec(s, "state", 0, randomization_steps=-1)
        assert isinstance(random_target(RandomTargetSpec(s, "state", 0)), StateVector)
        assert isinstance(random_target(RandomTargetSpec(s, "unitary", 0)), UnitaryMatrix)


class TestHaarRandomize:
    def test_zero_steps_identity(self):
        s = SystemDescriptor(1, 3)
        psi = StateVector([1, 2, 3j], s)
        assert haar_randomize(psi, 0, 5) is psi

    def test_state_stays_normalized_and_reproducible(self):
        s = SystemDescriptor(2, 2)
        psi = StateVector.basis(0, s)
        a = haar_randomize(psi, 50, 11)
        b = haar_randomize(psi, 50, 11)
        assert abs(np.linalg.norm(a.amplitudes) - 1) <= 1e-12
        assert np.array_equal(a.amplitudes, b.amplitudes)

    def test_left_multiplication(self):
        # the same randomizer applied to U and to I gives R U and R
        s = SystemDescriptor(1, 3)
        U = random_unitary(RandomTargetSpec(s, "unitary", 1, randomization_steps=0))
        R = haar_randomize(UnitaryMatrix.identity(s), 10, 4).entries
        RU = haar_randomize(U, 10, 4).entries
        assert np.allclose(RU, R @ U.entries, atol=1e-13)

    def test_negative_steps(self):
        with pytest.raises(ValueError):
            haar_randomize(StateVector.basis(0, SystemDescriptor(1, 2)), -1, 0)


@given(st.integers(0, 2**40))
def test_gram_schmidt_unitary(seed):
    rng = make_rng(seed)
    a = rng.uniform(-1, 1, (3, 5, 5)) + 1j * rng.uniform(-1, 1, (3, 5, 5))
    q = gram_schmidt(a)
    for m in q:
        assert unitarity_deviation(m) <= 1e-12
    # same column span ordering as QR: q^dag a is upper triangular
    assert np.allclose(np.tril(q[0].conj().T @ a[0], -1), 0, atol=1e-12)


class TestRandomUnitaryExp:
    def test_zero(self):
        U = random_unitary_exp(np.zeros(8), gellmann_basis(3))
        assert np.allclose(U.entries, np.eye(3))

    def test_diagonal(self):
        U = random_unitary_exp([0, 0, np.pi / 2], gellmann_basis(2))
        assert np.allclose(U.entries, np.diag([1j, -1j]), atol=1e-15)

    def test_random_against_expm(self, rng):
        b = gellmann_basis(4)
        lam = rng.normal(size=15)
        U = random_unitary_exp(lam, b, SystemDescriptor(2, 2))
        assert np.allclose(U.entries, expm(1j * np.tensordot(lam, b.generators, axes=1)), atol=1e-12)
        assert unitarity_deviation(U.entries) <= 1e-10

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            random_unitary_exp(np.zeros(7), gellmann_basis(3))


def _within_3se(samples, expected):
    se = samples.std(ddof=1) / np.sqrt(samples.size)
    return abs(samples.mean() - expected) <= 3 * se, samples.mean(), se


def haar_moment_samples(n, d, count=10_000, kind="state", entries=((0, 0),)):
    """|<0|psi>|^2 or |U_jk|^2 over ``count`` seeds."""
    s = SystemDescriptor(n, d)
    out = np.empty((count, len(entries)))
    for seed in range(count):
        if kind == "state":
            amp = random_state(RandomTargetSpec(s, "state", seed)).amplitudes
            out[seed] = [abs(amp[j]) ** 2 for j, _ in entries]
        else:
            U = random_unitary(RandomTargetSpec(s, "unitary", seed)).entries
            out[seed] = [abs(U[j, k]) ** 2 for j, k in entries]
    return out


def test_haar_first_moments_qubit():
    ok, mean, _ = _within_3se(haar_moment_samples(1, 2)[:, 0], 0.5)
    assert ok and abs(mean - 0.5) <= 0.02
    ok, mean, _ = _within_3se(haar_moment_samples(1, 2, kind="unitary")[:, 0], 0.5)
    assert ok and abs(mean - 0.5) <= 0.02


def test_haar_moments_two_qubits():
    D = 4
    pick = np.random.default_rng(99)
    entries = [tuple(pick.integers(0, D, 2)) for _ in range(5)]
    U = haar_moment_samples(2, 2, kind="unitary", entries=entries)
    for col in U.T:
        assert _within_3se(col, 1 / D)[0]
    psi = haar_moment_samples(2, 2)[:, 0]
    assert _within_3se(psi, 1 / D)[0]
    # second moment separates Haar from the raw box fill: E p^2 = 2 / (D (D + 1))
    assert _within_3se(psi**2, 2 / (D * (D + 1)))[0]
