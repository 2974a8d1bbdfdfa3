import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def haar_unitary(D, rng):
    """QR-based Haar sampler, independent of the package's generator."""
    z = (rng.normal(size=(D, D)) + 1j * rng.normal(size=(D, D))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def brute_force_embed(gate, pair, n, d):
    """Embed a two-qudit gate by looping over every basis digit string."""
    D = d**n
    a, b = pair
    out = np.zeros((D, D), dtype=complex)
    for col in range(D):
        digits = list(np.unravel_index(col, (d,) * n))
        for k in range(d):
            for l in range(d):
                amp = gate[k * d + l, digits[a] * d + digits[b]]
                if amp == 0:
                    continue
                new = list(digits)
                new[a], new[b] = k, l
                out[np.ravel_multi_index(new, (d,) * n), col] += amp
    return out


def lie_closure_dim(ops, tol=1e-9, max_rounds=50):
    """Real dimension of the Lie algebra generated by i*ops, by brute force.

    Every round commutes all current basis elements pairwise and recomputes the
    rank of the full set with an SVD; stops when the rank stops growing.
    """
    D = ops[0].shape[0]
    mats = [1j * (o - np.trace(o) / D * np.eye(D)) for o in ops]

    def rank_basis(ms):
        vecs = np.array([np.concatenate([m.real.ravel(), m.imag.ravel()]) for m in ms])
        u, s, vt = np.linalg.svd(vecs, full_matrices=False)
        r = int(np.sum(s > tol * max(1.0, s[0])))
        basis = []
        for row in vt[:r]:
            h = row[: D * D] + 1j * row[D * D:]
            basis.append(h.reshape(D, D))
        return basis

    basis = rank_basis(mats)
    for _ in range(max_rounds):
        new = list(basis)
        for A in basis:
            for B in basis:
                new.append(A @ B - B @ A)
        nb = rank_basis(new)
        if len(nb) == len(basis):
            return len(basis)
        basis = nb
    return len(basis)


# ---- acceptance reporting ------------------------------------------------------

_CRITERIA: list[tuple[str, bool, str]] = []


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL line per acceptance criterion and echo it immediately."""
    tr = request.config.pluginmanager.getplugin("terminalreporter")

    def record(label: str, passed: bool, detail: str = ""):
        line = f"{'PASS' if passed else 'FAIL'}  {label}" + (f"  [{detail}]" if detail else "")
        _CRITERIA.append((label, passed, line))
        if tr is not None:
            tr.write_line("")
            tr.write_line(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for _, _, line in _CRITERIA:
        terminalreporter.write_line(line)
