"""Few-photon amplitude solution of the weakly driven feedback loop.

The state is expanded as ``|psi> = sum C[n_a, n_c] |n_a, n_c>`` with at most
two photons per mode and ``C[0, 0] = 1``. Losses enter through a
non-Hermitian Hamiltonian and the eight remaining amplitudes follow from
``H_eff |psi> = 0`` projected on every basis state except ``|00>``. The
``|00>`` row only fixes an O(eps^2) energy shift, which is dropped at this
order.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .fock import ModeSpace, annihilator
from .slh import MODE_A, MODE_C, CircuitParams, collective_lindblad, rotating_frame_hamiltonian

WEAK_DRIVE_LIMIT = 0.3  # eps / kappa above which the expansion is flagged
SPACE = ModeSpace((3, 3))
DISSIPATION_MODES = ("detunings", "collective")


class SingularAmplitudeSystem(ValueError):
    pass


@dataclass(frozen=True)
class ComplexDetunings:
    delta_s_c: complex
    delta_c: complex
    gamma_a: float

    @classmethod
    def from_params(cls, p: CircuitParams) -> "ComplexDetunings":
        return cls(p.delta_s - 0.5j * p.loss_a, p.delta - 0.5j * p.kappa, p.loss_a + p.kappa)


@dataclass(frozen=True)
class AmplitudeTable:
    """Amplitudes ``C[n_a, n_c]``, n_a for the controlled cavity and n_c for the controller."""

    C: np.ndarray

    def __post_init__(self):
        C = np.array(self.C, dtype=complex)
        if C.shape != (3, 3):
            raise ValueError(f"amplitude table must be 3x3, got {C.shape}")
        if not np.all(np.isfinite(C)):
            raise ValueError("amplitude table has non-finite entries")
        C.setflags(write=False)
        object.__setattr__(self, "C", C)

    def __getitem__(self, idx):
        return self.C[idx]


def effective_hamiltonian(p: CircuitParams, dissipation: str = "detunings") -> np.ndarray:
    """Non-Hermitian Hamiltonian on the two-photon space.

    ``"detunings"`` gives each cavity its own decay, delta_s -> delta_s - i(sqrt(gamma)+sqrt(gamma_f))^2/2
    and delta -> delta - i kappa/2. ``"collective"`` uses H - (i/2) L^+L with the single output
    operator of the loop, which is the exact weak-drive limit of the master equation: it also
    carries the interference term between the two cavities' emission.
    """
    H = rotating_frame_hamiltonian(p, SPACE).matrix
    if dissipation == "detunings":
        a = annihilator(SPACE, MODE_A)
        c = annihilator(SPACE, MODE_C)
        loss = p.loss_a * (a.dag() @ a).matrix + p.kappa * (c.dag() @ c).matrix
    elif dissipation == "collective":
        L = collective_lindblad(p, SPACE)
        loss = (L.dag() @ L).matrix
    else:
        raise ValueError(f"dissipation must be one of {DISSIPATION_MODES}, got {dissipation!r}")
    return H - 0.5j * loss


def solve_amplitudes(p: CircuitParams, dissipation: str = "detunings") -> AmplitudeTable:
    if p.epsilon <= 0:
        raise ValueError("the amplitude expansion needs eps > 0")
    if p.kappa > 0 and p.epsilon > WEAK_DRIVE_LIMIT * p.kappa:
        warnings.warn(f"eps/kappa = {p.epsilon / p.kappa:.3g} is outside the weak-drive regime", stacklevel=2)
    Heff = effective_hamiltonian(p, dissipation)
    A, b = Heff[1:, 1:], -Heff[1:, 0]
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > 1e14:
        raise SingularAmplitudeSystem(f"amplitude equations are singular (condition number {cond:.3g})")
    x = np.linalg.solve(A, b)
    return AmplitudeTable(np.concatenate([[1.0], x]).reshape(3, 3))


def occupations(t: AmplitudeTable) -> tuple[float, float]:
    """(P1, P2) of the controlled cavity, summed over the controller's photon number."""
    P = np.sum(np.abs(t.C) ** 2, axis=1)
    return float(P[1]), float(P[2])


def g2_from_occupations(P1: float, P2: float) -> float:
    """2 P2 / (P1 + 2 P2)^2, the zero-delay correlation with at most two photons."""
    if P1 <= 0:
        raise ValueError("P1 must be positive")
    return 2.0 * P2 / (P1 + 2.0 * P2) ** 2


def g2_closed_form(p: CircuitParams, K: float | None = None) -> float:
    """Weak-drive zero-delay correlation of the controlled cavity as a function of K."""
    if p.chi == 0:
        raise ValueError("the closed form needs chi != 0")
    K = p.K if K is None else float(K)
    chi, ka, ds = p.chi, p.kappa, p.delta_s
    ga = ComplexDetunings.from_params(p).gamma_a
    den = abs(((K - 2) * chi - 0.5j * ka) * (ds + (K - 1) * chi - 0.5j * ga)) ** 2
    if den == 0:
        raise ZeroDivisionError("closed form is singular at these parameters")
    num = abs(ds + (K - 2) * chi - 0.5j * ga) ** 2 * abs((K - 1) * chi - 0.5j * ka) ** 2
    return num / den


def g2_closed_form_k1(p: CircuitParams) -> float:
    """The K = 1 specialization, written out as a ratio of polynomials."""
    chi, ka, ds = p.chi, p.kappa, p.delta_s
    ga = ComplexDetunings.from_params(p).gamma_a
    num = 4 * ka**2 * (ds - chi) ** 2 + ka**2 * ga**2
    den = 4 * ka**2 * ds**2 + 16 * chi**2 * ds**2 + (4 * chi**2 + ka**2) * ga**2
    return num / den


def _coupling(p: CircuitParams) -> float:
    return math.sqrt(p.kappa * p.gamma) - math.sqrt(p.kappa * p.gamma_f)


def skeleton_leading_order(p: CircuitParams) -> tuple[float, float]:
    """(P1, P2) in the zero-loss skeleton form, evaluated with complex detunings.

    Kept for comparison only: it carries the controller's one-photon pole at
    delta - chi and has no factor 1/4 in P1, so it differs from the actual
    leading order of the amplitude solution (see :func:`leading_order_p1`).
    """
    cd = ComplexDetunings.from_params(p)
    ds, d, chi = cd.delta_s_c, cd.delta_c, p.chi
    ge = abs(_coupling(p) * p.epsilon)
    P1 = ge**2 / abs((d - chi) * ds) ** 2
    P2 = ge**4 * abs(ds - 2 * chi + d) ** 2 / (2 * abs((d - chi) * (d - 2 * chi) * (ds + d - chi) * ds**2) ** 2)
    return float(P1), float(P2)


def leading_order_p1(p: CircuitParams) -> float:
    """O(eps^2) term of P1 for the detunings route: |C10|^2 = |G eps|^2 / (4 |delta~ delta_s~|^2)."""
    cd = ComplexDetunings.from_params(p)
    return float(abs(_coupling(p) * p.epsilon) ** 2 / (4 * abs(cd.delta_c * cd.delta_s_c) ** 2))


def weak_drive_g2(p: CircuitParams, dissipation: str = "detunings") -> float:
    return g2_from_occupations(*occupations(solve_amplitudes(p, dissipation)))
