"""SLH network algebra and the Kerr coherent-feedback circuit.

An :class:`SlhTriple` ``(S, L, H)`` describes an open component driven by
``n`` bosonic input fields: ``S`` is an ``n x n`` unitary of complex numbers,
``L`` a length-``n`` vector of coupling operators and ``H`` the internal
Hamiltonian. Components cascade with :func:`series` and close a loop onto
themselves with :func:`direct_feedback`.

The feedback circuit built here is the cascade

    (1, sqrt(gamma) a, delta_s a^+a) -> (1, sqrt(kappa) c, H_c) -> (1, sqrt(gamma_f) a, 0)

written in the frame rotating at the drive frequency. The controlled cavity
``a`` is touched twice by the field, so its Hamiltonian is counted once.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .fock import FockOperator, ModeSpace, SpaceMismatchError, annihilator, zero

UNITARY_TOL = 1e-12
VALIDITY_RATIO = 0.1

MODE_A = 0
MODE_C = 1


@dataclass(frozen=True)
class SlhTriple:
    S: np.ndarray
    L: tuple[FockOperator, ...]
    H: FockOperator

    def __post_init__(self):
        S = np.atleast_2d(np.array(self.S, dtype=complex))
        L = tuple(self.L)
        if S.shape != (len(L), len(L)):
            raise ValueError(f"scattering matrix {S.shape} does not match {len(L)} channels")
        for op in L:
            if op.space != self.H.space:
                raise SpaceMismatchError("all L entries must share the Hamiltonian's mode space")
        eye = np.eye(len(L))
        if not (np.allclose(S.conj().T @ S, eye, atol=UNITARY_TOL, rtol=0)
                and np.allclose(S @ S.conj().T, eye, atol=UNITARY_TOL, rtol=0)):
            raise ValueError("scattering matrix is not unitary")
        scale = max(1.0, float(np.max(np.abs(self.H.matrix), initial=0.0)))
        if not self.H.is_hermitian(atol=UNITARY_TOL * scale):
            raise ValueError("Hamiltonian is not Hermitian")
        S.setflags(write=False)
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "L", L)

    @property
    def space(self) -> ModeSpace:
        return self.H.space

    @property
    def channels(self) -> int:
        return len(self.L)

    @classmethod
    def single(cls, L: FockOperator, H: Optional[FockOperator] = None, S: complex = 1.0) -> "SlhTriple":
        """One-channel component ``(S, L, H)``; ``H`` defaults to zero."""
        if H is None:
            H = zero(L.space)
        return cls(np.array([[S]]), (L,), H)


def _rotate(S: np.ndarray, L: Sequence[FockOperator], space: ModeSpace) -> list[FockOperator]:
    out = []
    for i in range(S.shape[0]):
        acc = zero(space)
        for j, op in enumerate(L):
            if S[i, j] != 0:
                acc = acc + S[i, j] * op
        out.append(acc)
    return out


def _dot_dag(X: Sequence[FockOperator], Y: Sequence[FockOperator], space: ModeSpace) -> FockOperator:
    """sum_i X_i^+ Y_i."""
    acc = zero(space)
    for x, y in zip(X, Y):
        acc = acc + x.dag() @ y
    return acc


def series(G1: SlhTriple, G2: SlhTriple) -> SlhTriple:
    """Cascade: the output of ``G1`` feeds the input of ``G2``."""
    if G1.channels != G2.channels:
        raise ValueError(f"channel count mismatch: {G1.channels} vs {G2.channels}")
    if G1.space != G2.space:
        raise SpaceMismatchError(f"{G1.space.dims} vs {G2.space.dims}")
    space = G1.space
    S2L1 = _rotate(G2.S, G1.L, space)
    L = tuple(l2 + s2l1 for l2, s2l1 in zip(G2.L, S2L1))
    # L1^+ S2^+ L2 - L2^+ S2 L1
    cross = _dot_dag(S2L1, G2.L, space) - _dot_dag(G2.L, S2L1, space)
    H = G1.H + G2.H + 0.5j * cross
    return SlhTriple(G2.S @ G1.S, L, H)


def direct_feedback(G: SlhTriple) -> SlhTriple:
    """Feed the output of ``G`` back into its own input."""
    space = G.space
    SL = _rotate(G.S, G.L, space)
    L = tuple(l + sl for l, sl in zip(G.L, SL))
    D = G.S.conj().T - G.S
    H = G.H + 0.5j * _dot_dag(G.L, _rotate(D, G.L, space), space)
    return SlhTriple(G.S @ G.S, L, H)


@dataclass(frozen=True)
class KerrEstimate:
    """Dispersive Kerr coefficient with the ratios that control its validity."""

    chi: float
    rabi_ratio: float        # g^2 / (delta_qT * Omega), must be << 1
    dispersive_ratio: float  # g / delta_qT, must be << 1
    threshold: float = VALIDITY_RATIO

    @property
    def valid(self) -> bool:
        return self.rabi_ratio <= self.threshold and self.dispersive_ratio <= self.threshold


def kerr_from_qubit(g: float, Omega: float, delta_qT: float, warn: bool = True) -> KerrEstimate:
    """Kerr coefficient chi = g^4 / (2 Omega delta_qT^2) induced by a strongly driven,
    far-detuned qubit sitting in its ground state."""
    if Omega <= 0 or delta_qT <= 0:
        raise ValueError("Omega and delta_qT must be positive")
    est = KerrEstimate(
        chi=g**4 / (2.0 * Omega * delta_qT**2),
        rabi_ratio=g**2 / (delta_qT * Omega),
        dispersive_ratio=abs(g) / delta_qT,
    )
    if warn and not est.valid:
        warnings.warn(
            f"dispersive Kerr approximation questionable: g^2/(delta_qT*Omega)={est.rabi_ratio:.3g}, "
            f"g/delta_qT={est.dispersive_ratio:.3g} (threshold {VALIDITY_RATIO})",
            stacklevel=2,
        )
    return est


@dataclass(frozen=True)
class QubitParams:
    g: float
    Omega: float
    delta_qT: float


@dataclass(frozen=True)
class CircuitParams:
    """Rates and detunings of the feedback circuit, all in one angular-frequency unit.

    ``delta_s`` is the controlled cavity's detuning from the drive and ``delta``
    the controller's. ``epsilon`` is the (real, non-negative) drive amplitude on
    the controller.
    """

    gamma: float
    gamma_f: float
    kappa: float
    chi: float = 0.0
    delta_s: float = 0.0
    delta: float = 0.0
    epsilon: float = 0.0
    qubit: Optional[QubitParams] = field(default=None, compare=True)

    def __post_init__(self):
        for name in ("gamma", "gamma_f", "kappa", "chi", "delta_s", "delta", "epsilon"):
            value = getattr(self, name)
            if isinstance(value, complex) or not math.isfinite(float(value)):
                raise ValueError(f"{name} must be a finite real number, got {value!r}")
            object.__setattr__(self, name, float(value))
        for name in ("gamma", "gamma_f", "kappa", "epsilon"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")

    @classmethod
    def from_qubit(cls, qubit: QubitParams, **kwargs) -> "CircuitParams":
        if "chi" in kwargs:
            raise TypeError("chi is derived from the qubit block")
        chi = kerr_from_qubit(qubit.g, qubit.Omega, qubit.delta_qT).chi
        return cls(chi=chi, qubit=qubit, **kwargs)

    @property
    def kerr_validity(self) -> Optional[KerrEstimate]:
        if self.qubit is None:
            return None
        q = self.qubit
        return kerr_from_qubit(q.g, q.Omega, q.delta_qT, warn=False)

    @property
    def K(self) -> float:
        """Detuning in Kerr units, K = delta/chi + 1 (K=1: one-photon, K=2: two-photon resonance)."""
        if self.chi == 0:
            raise ZeroDivisionError("K is undefined for chi = 0")
        return self.delta / self.chi + 1.0

    def with_K(self, K: float) -> "CircuitParams":
        if self.chi == 0:
            raise ZeroDivisionError("K is undefined for chi = 0")
        return replace(self, delta=(K - 1.0) * self.chi)

    def replace(self, **changes) -> "CircuitParams":
        return replace(self, **changes)

    @property
    def loss_a(self) -> float:
        """Total field loss of the controlled cavity, (sqrt(gamma) + sqrt(gamma_f))^2."""
        return (math.sqrt(self.gamma) + math.sqrt(self.gamma_f)) ** 2

    @property
    def feedback_coupling(self) -> float:
        """Coefficient of i/2 (a^+c - c^+a) in the closed-loop Hamiltonian."""
        return math.sqrt(self.kappa * self.gamma) - math.sqrt(self.kappa * self.gamma_f)

    def as_dict(self) -> dict:
        d = {k: getattr(self, k) for k in ("gamma", "gamma_f", "kappa", "chi", "delta_s", "delta", "epsilon")}
        if self.qubit is not None:
            d["qubit"] = {"g": self.qubit.g, "Omega": self.qubit.Omega, "delta_qT": self.qubit.delta_qT}
        return d


def _require_two_modes(space: ModeSpace):
    if space.n_modes != 2:
        raise ValueError(f"the feedback circuit needs exactly 2 modes, got {space.n_modes}")


def controller_hamiltonian(p: CircuitParams, space: ModeSpace) -> FockOperator:
    """Driven Kerr controller in the rotating frame: delta c^+c - chi c^+^2 c^2 - eps (c^+ + c)."""
    c = annihilator(space, MODE_C)
    cd = c.dag()
    return p.delta * (cd @ c) - p.chi * (cd @ cd @ c @ c) - p.epsilon * (cd + c)


def build_circuit(p: CircuitParams, space: ModeSpace) -> SlhTriple:
    """Flatten the cavity -> controller -> cavity loop into one triple by two series products."""
    _require_two_modes(space)
    a = annihilator(space, MODE_A)
    c = annihilator(space, MODE_C)
    into_cavity = SlhTriple.single(math.sqrt(p.gamma) * a, p.delta_s * (a.dag() @ a))
    controller = SlhTriple.single(math.sqrt(p.kappa) * c, controller_hamiltonian(p, space))
    back_to_cavity = SlhTriple.single(math.sqrt(p.gamma_f) * a)
    return series(series(into_cavity, controller), back_to_cavity)


def rotating_frame_hamiltonian(p: CircuitParams, space: ModeSpace) -> FockOperator:
    """Closed-form total Hamiltonian of the loop in the drive frame."""
    _require_two_modes(space)
    a = annihilator(space, MODE_A)
    c = annihilator(space, MODE_C)
    ad, cd = a.dag(), c.dag()
    H = (p.delta_s * (ad @ a) + p.delta * (cd @ c) - p.chi * (cd @ cd @ c @ c)
         - p.epsilon * (cd + c)
         + 0.5j * p.feedback_coupling * (ad @ c - cd @ a))
    return H


def collective_lindblad(p: CircuitParams, space: ModeSpace) -> FockOperator:
    """The single output channel (sqrt(gamma) + sqrt(gamma_f)) a + sqrt(kappa) c."""
    _require_two_modes(space)
    a = annihilator(space, MODE_A)
    c = annihilator(space, MODE_C)
    return (math.sqrt(p.gamma) + math.sqrt(p.gamma_f)) * a + math.sqrt(p.kappa) * c


__all__ = [
    "SlhTriple", "series", "direct_feedback", "KerrEstimate", "kerr_from_qubit",
    "QubitParams", "CircuitParams", "controller_hamiltonian", "build_circuit",
    "rotating_frame_hamiltonian", "collective_lindblad", "MODE_A", "MODE_C",
]
