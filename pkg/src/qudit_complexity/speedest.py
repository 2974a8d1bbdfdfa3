"""Commutator-hierarchy tools for near-identity synthesis.

The synthesis-time figure produced by :func:`time_estimate` is a heuristic
timescale, not a rigorous speed limit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import schur

from .control import commutator_layers
from .qcore import UnitaryMatrix, eigh_exp, unitarity_deviation
from .targets import make_rng

HEURISTIC_NOTE = "heuristic synthesis-time estimate (not a rigorous lower bound)"
BRANCH_GAP = 1e-6


def _hs(A: np.ndarray, B: np.ndarray) -> float:
    return float(np.real(np.vdot(A, B)))


def random_traceless_hermitian(D: int, rng: np.random.Generator) -> np.ndarray:
    """Random traceless Hermitian matrix with unit Hilbert-Schmidt norm."""
    A = rng.normal(size=(D, D)) + 1j * rng.normal(size=(D, D))
    G = (A + A.conj().T) / 2
    G -= np.trace(G) / D * np.eye(D)
    return G / np.linalg.norm(G)


def deform_unitary(U_base: UnitaryMatrix, epsilon: float, seed: int) -> UnitaryMatrix:
    """exp(i * epsilon * G_R) @ U_base for a random unit-norm traceless Hermitian G_R."""
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    if epsilon == 0:
        return U_base
    G = random_traceless_hermitian(U_base.system.D, make_rng(seed, 31))
    E, _, _ = eigh_exp(G, 1j * epsilon)
    return UnitaryMatrix(E @ U_base.entries, U_base.system)


def bch_commutator_sequence(Ha: np.ndarray, Hb: np.ndarray, tau: float) -> np.ndarray:
    """exp(i Hb tau) exp(i Ha tau) exp(-i Hb tau) exp(-i Ha tau) ~ exp([Ha, Hb] tau^2)."""
    Ha = np.asarray(Ha, dtype=np.complex128)
    Hb = np.asarray(Hb, dtype=np.complex128)
    if Ha.shape != Hb.shape:
        raise ValueError("Ha and Hb must have the same shape")
    ea, _, _ = eigh_exp(Ha, 1j * tau)
    eb, _, _ = eigh_exp(Hb, 1j * tau)
    return eb @ ea @ eb.conj().T @ ea.conj().T


def principal_log(U: np.ndarray):
    """Hermitian ``G`` with ``exp(iG) = U`` and eigenphases in (-pi, pi].

    If an eigenphase sits within ``BRANCH_GAP`` of the cut, ``U`` is first
    multiplied by a global phase ``exp(i phi)``; returns ``(G, phi)`` with
    ``exp(iG) = exp(i phi) U``.
    """
    U = np.asarray(U, dtype=np.complex128)
    T, Z = schur(U, output="complex")
    lam = np.diag(T)
    phi = 0.0
    ang = np.angle(lam)
    if np.any(np.pi - np.abs(ang) < BRANCH_GAP):
        # rotate by half of the widest gap between neighbouring eigenphases
        s = np.sort(ang)
        gaps = np.diff(np.concatenate([s, [s[0] + 2 * np.pi]]))
        i = int(np.argmax(gaps))
        mid = s[i] + gaps[i] / 2
        phi = float(np.pi - mid)
        ang = np.angle(lam * np.exp(1j * phi))
    G = (Z * ang) @ Z.conj().T
    return (G + G.conj().T) / 2, phi


@dataclass
class Layer:
    k: int
    basis: list[np.ndarray]
    norm: float


@dataclass
class HierarchyDecomposition:
    """Layer-wise projections of the (traceless) target generator."""

    generator: np.ndarray  # unit-HS-norm traceless Hermitian
    epsilon: float
    layers: list[Layer]
    residual: float
    phase: float = 0.0
    full_span: bool = False
    note: str = field(default=HEURISTIC_NOTE)

    @property
    def depth(self) -> int:
        return len(self.layers)

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "layers": [{"k": L.k, "dimension": len(L.basis), "norm": L.norm} for L in self.layers],
            "residual": self.residual,
            "phase": self.phase,
            "full_span": self.full_span,
            "note": self.note,
        }


def hierarchy_decompose(target: UnitaryMatrix, H0: np.ndarray, controls: Sequence[np.ndarray],
                        tol: float = 1e-9) -> HierarchyDecomposition:
    U = np.asarray(target.entries if isinstance(target, UnitaryMatrix) else target, dtype=np.complex128)
    H0 = np.asarray(H0, dtype=np.complex128)
    D = H0.shape[0]
    if U.shape != (D, D):
        raise ValueError("target and Hamiltonian dimensions differ")
    if unitarity_deviation(U) > 1e-10:
        raise ValueError("target is not unitary")
    G, phi = principal_log(U)
    G = G - np.trace(G).real / D * np.eye(D)
    eps = float(np.linalg.norm(G))
    G_hat = G / eps if eps > 0 else G
    remaining = G.copy()
    layers = []
    full = D * D - 1
    span = 0
    for k, basis in enumerate(commutator_layers(H0, controls), start=1):
        proj = np.zeros_like(G)
        for B in basis:
            proj += _hs(B, remaining) * B
        remaining = remaining - proj
        layers.append(Layer(k, basis, float(np.linalg.norm(proj))))
        span += len(basis)
        if np.linalg.norm(remaining) <= tol * max(eps, 1e-300) or span >= full:
            break
    return HierarchyDecomposition(G_hat, eps, layers, float(np.linalg.norm(remaining)), phi, span >= full)


def default_hbar(H0: np.ndarray, controls: Sequence[np.ndarray]) -> float:
    """Hilbert-Schmidt norm of H0 plus every control at unit amplitude."""
    return float(np.linalg.norm(np.asarray(H0) + sum(np.asarray(c) for c in controls)))


def time_estimate(decomp: HierarchyDecomposition, hbar: float) -> float:
    """sum_k |proj_k|^(1/k) / hbar."""
    if not hbar > 0:
        raise ValueError("hbar must be positive")
    return sum(L.norm ** (1.0 / L.k) for L in decomp.layers) / hbar


def k_bounds(n: int, d: int, M: int) -> tuple[int, int]:
    """Range for the commutator depth needed to span su(d^n) with M controls."""
    if M < 1:
        raise ValueError("M must be >= 1")
    dim = d ** (2 * n) - 1
    # smallest k with log_{M+1}(2 dim / M) + 1 <= k, i.e. M (M+1)^(k-1) >= 2 dim
    k = 1
    while M * (M + 1) ** (k - 1) < 2 * dim:
        k += 1
    return k, dim - M
