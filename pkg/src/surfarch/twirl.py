"""Amplitude/phase damping and its Pauli-twirled approximation.

Convention for the process matrix: each Kraus operator is expanded as
``E = sum_m e_m P_m`` over ``P = (I, X, Y, Z)`` with ``e_m = tr(P_m E) / 2``,
and ``chi[m, n] = sum_k e_km conj(e_kn)`` so that
``E(rho) = sum_mn chi[m, n] P_m rho P_n``.  The identity channel then has
``chi = diag(1, 0, 0, 0)`` and any trace-preserving channel has ``tr chi = 1``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

_TINY = 1e-300

PAULI_LABELS = ("I", "X", "Y", "Z")
PAULIS = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)
TWO_QUBIT_LABELS = tuple(
    a + b for a, b in itertools.product(PAULI_LABELS, repeat=2) if a + b != "II"
)


def _flush(p: float) -> float:
    return 0.0 if abs(p) < _TINY else p


@dataclass(frozen=True)
class DampingParams:
    """Duration ``t`` and coherence times, all in seconds."""

    t: float
    T1: float
    T2: float

    def __post_init__(self):
        if not self.t >= 0:
            raise ValueError(f"t must be >= 0, got {self.t}")
        if not self.T1 > 0:
            raise ValueError(f"T1 must be > 0, got {self.T1}")
        if not self.T2 > 0:
            raise ValueError(f"T2 must be > 0, got {self.T2}")
        if self.T2 > 2 * self.T1 * (1 + 1e-12):
            raise ValueError(
                f"T2={self.T2} exceeds 2*T1={2 * self.T1}; pure dephasing would be negative"
            )


@dataclass(frozen=True)
class PauliChannel1Q:
    px: float
    py: float
    pz: float

    def __post_init__(self):
        for name in ("px", "py", "pz"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")
        if self.p_sigma > 1.0 + 1e-12:
            raise ValueError(f"total error probability {self.p_sigma} > 1")

    @property
    def p_sigma(self) -> float:
        return self.px + self.py + self.pz

    @property
    def p_identity(self) -> float:
        return 1.0 - self.p_sigma

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.px, self.py, self.pz)


@dataclass(frozen=True)
class PauliChannel2Q:
    """Probabilities of the 15 non-identity two-qubit Paulis, keyed ``"IX"`` ... ``"ZZ"``."""

    p: dict

    def __post_init__(self):
        if set(self.p) != set(TWO_QUBIT_LABELS):
            raise ValueError("need exactly the 15 non-identity two-qubit labels")
        for k, v in self.p.items():
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"p[{k}]={v} outside [0, 1]")
        if self.total > 1.0 + 1e-12:
            raise ValueError(f"total error probability {self.total} > 1")

    @property
    def total(self) -> float:
        return math.fsum(self.p.values())

    def __getitem__(self, label: str) -> float:
        return self.p[label]


@dataclass(frozen=True)
class KrausSet:
    matrices: tuple

    def __post_init__(self):
        mats = tuple(np.asarray(m, dtype=complex) for m in self.matrices)
        object.__setattr__(self, "matrices", mats)
        dim = mats[0].shape[0]
        acc = sum(m.conj().T @ m for m in mats)
        if not np.allclose(acc, np.eye(dim), rtol=0, atol=1e-12):
            raise ValueError("Kraus operators are not complete (sum E^dag E != I)")

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return sum(m @ rho @ m.conj().T for m in self.matrices)


def damping_probabilities(p: DampingParams) -> tuple[float, float]:
    """Return ``(gamma, lambda)``: the amplitude-damping probability and the
    effective phase-damping weight ``(1 - gamma) * p_PD``.

    ``p_PD`` follows from ``exp(-t/T2) = sqrt((1 - gamma)(1 - p_PD))``, so
    ``1 - p_PD = exp(-t (2/T2 - 1/T1))``.
    """
    gamma = -math.expm1(-p.t / p.T1)
    rate = max(2.0 / p.T2 - 1.0 / p.T1, 0.0)
    p_pd = -math.expm1(-p.t * rate)
    lam = (1.0 - gamma) * p_pd
    return _flush(gamma), _flush(lam)


def combined_damping_kraus(gamma: float, lam: float) -> KrausSet:
    if not (0.0 <= gamma <= 1.0 and 0.0 <= lam <= 1.0):
        raise ValueError(f"gamma={gamma}, lambda={lam} must lie in [0, 1]")
    if gamma + lam > 1.0 + 1e-15:
        raise ValueError(f"gamma + lambda = {gamma + lam} > 1")
    keep = math.sqrt(max(1.0 - gamma - lam, 0.0))
    e1 = np.array([[1.0, 0.0], [0.0, keep]], dtype=complex)
    e2 = np.array([[0.0, math.sqrt(gamma)], [0.0, 0.0]], dtype=complex)
    e3 = np.array([[0.0, 0.0], [0.0, math.sqrt(lam)]], dtype=complex)
    return KrausSet((e1, e2, e3))


def pta_channel(p: DampingParams) -> PauliChannel1Q:
    """Pauli-twirled damping: ``px = py = (1 - e^{-t/T1})/4`` and
    ``pz = (1 - e^{-t/T2})/2 - (1 - e^{-t/T1})/4``."""
    a = -math.expm1(-p.t / p.T1)
    b = -math.expm1(-p.t / p.T2)
    pxy = a / 4.0
    pz = max(b / 2.0 - a / 4.0, 0.0)
    return PauliChannel1Q(_flush(pxy), _flush(pxy), _flush(pz))


def _check_density_matrix(rho: np.ndarray, dim: int) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (dim, dim):
        raise ValueError(f"expected a {dim}x{dim} density matrix, got shape {rho.shape}")
    if abs(np.trace(rho) - 1.0) > 1e-10:
        raise ValueError(f"density matrix trace {np.trace(rho)} != 1")
    if not np.allclose(rho, rho.conj().T, atol=1e-10):
        raise ValueError("density matrix is not Hermitian")
    return rho


def apply_channel_density_matrix(rho: np.ndarray, p: DampingParams) -> np.ndarray:
    """Exact single-qubit damping: populations relax with ``e^{-t/T1}``,
    coherences decay with ``e^{-t/T2}``."""
    rho = _check_density_matrix(rho, 2)
    d1 = math.exp(-p.t / p.T1)
    d2 = math.exp(-p.t / p.T2)
    out = np.empty((2, 2), dtype=complex)
    out[1, 1] = rho[1, 1] * d1
    out[0, 0] = 1.0 - out[1, 1]
    out[0, 1] = rho[0, 1] * d2
    out[1, 0] = rho[1, 0] * d2
    return out


def apply_pauli_channel(rho: np.ndarray, ch: PauliChannel1Q) -> np.ndarray:
    _, x, y, z = PAULIS
    return (
        ch.p_identity * rho
        + ch.px * (x @ rho @ x)
        + ch.py * (y @ rho @ y)
        + ch.pz * (z @ rho @ z)
    )


def pauli_twirl(channel, rho: np.ndarray) -> np.ndarray:
    """Average ``P channel(P rho P) P`` over the single-qubit Pauli group."""
    acc = np.zeros((2, 2), dtype=complex)
    for pm in PAULIS:
        acc += pm @ channel(pm @ rho @ pm) @ pm
    return acc / 4.0


def chi_matrix(k: KrausSet) -> np.ndarray:
    coeffs = np.array(
        [[np.trace(pm @ e) / 2.0 for pm in PAULIS] for e in k.matrices]
    )
    return coeffs.T @ coeffs.conj()


def two_qubit_channel(a: PauliChannel1Q, b: PauliChannel1Q) -> PauliChannel2Q:
    """Independent errors on two qubits, as the exact tensor product."""
    pa = dict(zip(PAULI_LABELS, (a.p_identity, a.px, a.py, a.pz)))
    pb = dict(zip(PAULI_LABELS, (b.p_identity, b.px, b.py, b.pz)))
    return PauliChannel2Q({lab: pa[lab[0]] * pb[lab[1]] for lab in TWO_QUBIT_LABELS})
