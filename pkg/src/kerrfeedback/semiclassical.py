"""Mean-field dynamics of the feedback loop: steady cubic, stability, hysteresis.

In the strong-drive regime the cavity amplitudes ``A = <a>`` and ``C = <c>``
obey

    dA/dt = -i delta_s A - (loss_a / 2) A - sqrt(kappa gamma_f) C
    dC/dt = -i delta C + 2 i chi |C|^2 C - (kappa / 2) C - sqrt(kappa gamma) A + i eps

with ``loss_a = (sqrt(gamma) + sqrt(gamma_f))^2``. Eliminating ``A`` gives a
real cubic for the controller intensity ``X = |C|^2``:

    4 chi^2 X^3 - 4 p2 chi X^2 + (p1^2 + p2^2) X = |eps|^2

``p1`` is an effective damping and ``p2`` an effective detuning. Two forms of
``p1`` are available. ``"asymmetric"`` (the default) carries the loss factor
``(4 sqrt(gamma) + sqrt(gamma_f))^2``. ``"symmetric"`` carries
``(sqrt(gamma) + sqrt(gamma_f))^2``, which is what elimination of ``A`` from
the equations above actually produces, so only its roots are exact fixed
points of :func:`mean_field_rhs`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .fock import annihilator, commutator
from .slh import MODE_A, MODE_C, CircuitParams, SlhTriple

P1Form = Literal["asymmetric", "symmetric"]

REAL_ROOT_TOL = 1e-9
STEADY_RHS_TOL = 1e-9


class HysteresisError(RuntimeError):
    def __init__(self, epsilon: float, message: str):
        super().__init__(f"eps={epsilon!r}: {message}")
        self.epsilon = epsilon


@dataclass(frozen=True)
class MeanFieldState:
    A: complex
    C: complex

    def __post_init__(self):
        A, C = complex(self.A), complex(self.C)
        if not (np.isfinite(A) and np.isfinite(C)):
            raise ValueError("mean-field amplitudes must be finite")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "C", C)

    def to_real(self) -> np.ndarray:
        return np.array([self.A.real, self.A.imag, self.C.real, self.C.imag])

    @classmethod
    def from_real(cls, v) -> "MeanFieldState":
        return cls(complex(v[0], v[1]), complex(v[2], v[3]))

    def norm(self) -> float:
        return math.hypot(abs(self.A), abs(self.C))


def _drive(p: CircuitParams, drive_phase: float) -> complex:
    return p.epsilon * np.exp(1j * drive_phase)


def mean_field_rhs(s: MeanFieldState, p: CircuitParams, drive_phase: float = 0.0) -> MeanFieldState:
    """Time derivative of the amplitudes ``(A, C)``.

    ``drive_phase`` rotates the drive, eps -> eps e^{i phase}; it only rotates
    the steady amplitudes.
    """
    A, C = s.A, s.C
    dA = -1j * p.delta_s * A - 0.5 * p.loss_a * A - math.sqrt(p.kappa * p.gamma_f) * C
    dC = (-1j * p.delta * C + 2j * p.chi * abs(C) ** 2 * C - 0.5 * p.kappa * C
          - math.sqrt(p.kappa * p.gamma) * A + 1j * _drive(p, drive_phase))
    return MeanFieldState(dA, dC)


def _rhs_real(p: CircuitParams, drive_phase: float):
    # hot loop for the integrator: plain complex arithmetic, no dataclass round-trips
    ka = complex(-0.5 * p.loss_a, -p.delta_s)
    kc = complex(-0.5 * p.kappa, -p.delta)
    ac = -math.sqrt(p.kappa * p.gamma_f)
    ca = -math.sqrt(p.kappa * p.gamma)
    kerr = 2j * p.chi
    drive = 1j * _drive(p, drive_phase)

    def f(_t, v):
        A = complex(v[0], v[1])
        C = complex(v[2], v[3])
        dA = ka * A + ac * C
        dC = (kc + kerr * (C.real * C.real + C.imag * C.imag)) * C + ca * A + drive
        return np.array([dA.real, dA.imag, dC.real, dC.imag])
    return f


def jacobian(s: MeanFieldState, p: CircuitParams) -> np.ndarray:
    """4x4 real Jacobian of the mean-field flow in (Re A, Im A, Re C, Im C)."""
    C = s.C
    # Wirtinger derivatives: f_z (holomorphic part) and f_zbar
    fz = np.array([
        [-1j * p.delta_s - 0.5 * p.loss_a, -math.sqrt(p.kappa * p.gamma_f)],
        [-math.sqrt(p.kappa * p.gamma), -1j * p.delta - 0.5 * p.kappa + 4j * p.chi * abs(C) ** 2],
    ])
    fzb = np.array([[0.0, 0.0], [0.0, 2j * p.chi * C**2]])
    J = np.empty((4, 4))
    for i in range(2):
        for j in range(2):
            dx = fz[i, j] + fzb[i, j]
            dy = 1j * (fz[i, j] - fzb[i, j])
            J[2 * i:2 * i + 2, 2 * j:2 * j + 2] = [[dx.real, dy.real], [dx.imag, dy.imag]]
    return J


def loss_denominator(p: CircuitParams) -> float:
    """4 delta_s^2 + loss_a^2, the squared modulus of the controlled cavity's response."""
    return 4.0 * p.delta_s**2 + p.loss_a**2


def effective_rates(p: CircuitParams, p1_form: P1Form = "asymmetric") -> tuple[float, float]:
    """Effective damping ``p1`` and detuning ``p2`` seen by the controller."""
    D = loss_denominator(p)
    sg, sgf = math.sqrt(p.gamma), math.sqrt(p.gamma_f)
    if p1_form == "asymmetric":
        loss = (4.0 * sg + sgf) ** 2
    elif p1_form == "symmetric":
        loss = (sg + sgf) ** 2
    else:
        raise ValueError(f"unknown p1_form {p1_form!r}")
    if D == 0:
        raise ZeroDivisionError("controlled cavity is lossless and resonant")
    p1 = 0.5 * p.kappa - 2.0 * p.kappa * sg * sgf * loss / D
    p2 = p.delta + 4.0 * p.kappa * sg * sgf * p.delta_s / D
    return p1, p2


def cavity_transfer(p: CircuitParams) -> float:
    """|A0|^2 / |C0|^2 at any steady state."""
    return 4.0 * p.kappa * p.gamma_f / loss_denominator(p)


def cubic_coefficients(p: CircuitParams, p1_form: P1Form = "asymmetric") -> np.ndarray:
    """Coefficients (highest power first) of the steady-state cubic in X = |C0|^2."""
    p1, p2 = effective_rates(p, p1_form)
    return np.array([4.0 * p.chi**2, -4.0 * p2 * p.chi, p1**2 + p2**2, -p.epsilon**2])


def bistability_threshold(p: CircuitParams, p1_form: P1Form = "asymmetric") -> float:
    """Drive intensity sqrt(3) p1^3 / chi above which bistability is possible."""
    p1, _ = effective_rates(p, p1_form)
    return math.sqrt(3.0) * p1**3 / p.chi


def is_bistable_capable(p1: float, p2: float, chi: float) -> bool:
    """True when the cubic folds over: two positive turning points exist.

    For chi > 0 and p1 > 0 this is p2 > sqrt(3) p1.
    """
    return chi != 0 and p2 * np.sign(chi) > math.sqrt(3.0) * abs(p1)


@dataclass(frozen=True)
class SteadyRoot:
    X: float          # |C0|^2
    A0_sq: float      # |A0|^2
    stable: bool
    A0: complex
    C0: complex
    eigenvalues: tuple[complex, ...] = field(repr=False, default=())


@dataclass(frozen=True)
class BistabilityResult:
    p1: float
    p2: float
    roots: tuple[SteadyRoot, ...]
    regime: str
    threshold_eps_sq: float
    p1_form: str = "asymmetric"
    linear: bool = False

    @property
    def bistable_capable(self) -> bool:
        return self.regime != "monostable"

    @property
    def n_roots(self) -> int:
        return len(self.roots)

    @property
    def n_stable(self) -> int:
        return sum(r.stable for r in self.roots)


def _steady_amplitudes(X: float, p: CircuitParams, p1: float, p2: float, drive_phase: float):
    # C0 solves 0 = -(p1 + i (p2 - 2 chi X)) C0 + i eps
    denom = p1 + 1j * (p2 - 2.0 * p.chi * X)
    if denom == 0:
        return 0j, 0j
    C0 = 1j * _drive(p, drive_phase) / denom
    A0 = -math.sqrt(p.kappa * p.gamma_f) * C0 / (1j * p.delta_s + 0.5 * p.loss_a)
    return A0, C0


def _real_positive_roots(coeffs: np.ndarray) -> list[float]:
    raw = np.roots(coeffs)  # companion-matrix eigenvalues
    scale = max(1.0, float(np.max(np.abs(raw), initial=0.0)))
    out = []
    for z in raw:
        if abs(z.imag) > REAL_ROOT_TOL * scale:
            continue
        x = z.real
        if x < -REAL_ROOT_TOL * scale:
            continue
        out.append(_polish(coeffs, max(x, 0.0)))
    return sorted(out)


def _polish(coeffs: np.ndarray, x: float, steps: int = 3) -> float:
    dcoeffs = np.polyder(coeffs)
    for _ in range(steps):
        fp = np.polyval(dcoeffs, x)
        if fp == 0:
            break
        x_new = x - np.polyval(coeffs, x) / fp
        if not np.isfinite(x_new) or x_new < 0 or abs(np.polyval(coeffs, x_new)) >= abs(np.polyval(coeffs, x)):
            break
        x = x_new
    return float(x)


def steady_roots(p: CircuitParams, p1_form: P1Form = "asymmetric", drive_phase: float = 0.0) -> BistabilityResult:
    """All physical steady states of the mean-field loop with their stability.

    Stability is read off the eigenvalues of :func:`jacobian` at the
    reconstructed ``(A0, C0)``: all real parts negative means stable.
    """
    p1, p2 = effective_rates(p, p1_form)
    rate_scale = max(abs(p1), abs(p2), p.kappa, p.gamma, p.gamma_f, abs(p.delta_s), 1e-300)
    linear = abs(p.chi) <= 1e-12 * rate_scale
    if linear:
        if p1 == 0 and p2 == 0:
            raise ZeroDivisionError("linear response is singular (p1 = p2 = 0)")
        xs = [p.epsilon**2 / (p1**2 + p2**2)]
        threshold = math.inf
    else:
        xs = _real_positive_roots(cubic_coefficients(p, p1_form))
        threshold = bistability_threshold(p, p1_form)

    transfer = cavity_transfer(p)
    roots = []
    for X in xs:
        A0, C0 = _steady_amplitudes(X, p, p1, p2, drive_phase)
        eig = np.linalg.eigvals(jacobian(MeanFieldState(A0, C0), p))
        roots.append(SteadyRoot(X=X, A0_sq=transfer * X, stable=bool(np.all(eig.real < 0)),
                                A0=A0, C0=C0, eigenvalues=tuple(eig)))

    if linear or not is_bistable_capable(p1, p2, p.chi):
        regime = "monostable"
    elif len(roots) == 3:
        regime = "bistable-at-this-drive"
    else:
        regime = "bistable-capable"
    return BistabilityResult(p1=p1, p2=p2, roots=tuple(roots), regime=regime,
                             threshold_eps_sq=threshold, p1_form=p1_form, linear=linear)


def bistable_window(p: CircuitParams, p1_form: P1Form = "asymmetric") -> Optional[tuple[float, float]]:
    """Exact drive range (eps_low, eps_high) with three steady states, from the cubic's turning points."""
    p1, p2 = effective_rates(p, p1_form)
    if not is_bistable_capable(p1, p2, p.chi):
        return None
    root = math.sqrt(p2**2 - 3.0 * p1**2)
    turning = sorted([(2.0 * p2 - s * root) / (6.0 * p.chi) for s in (1.0, -1.0)])
    lhs = lambda X: X * (p1**2 + (p2 - 2.0 * p.chi * X) ** 2)  # noqa: E731
    lo, hi = sorted(lhs(X) for X in turning)
    return math.sqrt(lo), math.sqrt(hi)


@dataclass
class DriveSweep:
    epsilon: np.ndarray
    results: list[BistabilityResult]
    p1: float
    p2: float
    threshold_eps_sq: float
    window: Optional[tuple[float, float]]  # grid points bounding the 3-root region

    @property
    def threshold_eps(self) -> float:
        return math.sqrt(self.threshold_eps_sq) if self.threshold_eps_sq >= 0 else 0.0

    @property
    def root_counts(self) -> np.ndarray:
        return np.array([r.n_roots for r in self.results])

    @property
    def window_consistent(self) -> bool:
        """A 3-root window was found exactly when the fold exists and the grid reaches past threshold."""
        capable = self.results[0].regime != "monostable"
        expected = capable and bool(np.any(self.epsilon**2 > self.threshold_eps_sq))
        return (self.window is not None) == expected

    def rows(self):
        """Flat table: (epsilon, root_index, C0_sq, A0_sq, stable)."""
        for eps, res in zip(self.epsilon, self.results):
            for k, r in enumerate(res.roots):
                yield float(eps), k, r.X, r.A0_sq, r.stable


def drive_sweep(p: CircuitParams, eps_range: Sequence[float], p1_form: P1Form = "asymmetric") -> DriveSweep:
    eps = np.asarray(eps_range, dtype=float)
    if eps.size == 0:
        raise ValueError("eps_range is empty")
    if np.any(np.diff(eps) <= 0):
        raise ValueError("eps_range must be strictly ascending")
    results = [steady_roots(p.replace(epsilon=e), p1_form) for e in eps]
    three = [e for e, r in zip(eps, results) if r.n_roots == 3]
    window = (float(min(three)), float(max(three))) if three else None
    p1, p2 = results[0].p1, results[0].p2
    return DriveSweep(eps, results, p1, p2, results[0].threshold_eps_sq, window)


def relaxation_time_cap(p: CircuitParams, p1_form: P1Form = "symmetric") -> float:
    p1, _ = effective_rates(p, p1_form)
    rates = [r for r in (p.kappa, p.gamma, p.gamma_f, abs(p1)) if r > 0]
    if not rates:
        raise ValueError("no damping: the loop never relaxes")
    return 1e4 / min(rates)


def relax(state: MeanFieldState, p: CircuitParams, tol: float = STEADY_RHS_TOL,
          t_max: Optional[float] = None, drive_phase: float = 0.0) -> MeanFieldState:
    """Integrate the mean-field flow from ``state`` until ||rhs|| < ``tol``."""
    if t_max is None:
        t_max = relaxation_time_cap(p)
    f = _rhs_real(p, drive_phase)

    def jac(_t, v):
        return jacobian(MeanFieldState.from_real(v), p)

    rates = [r for r in (p.kappa, p.gamma, p.gamma_f) if r > 0]
    chunk = 20.0 / min(rates)
    v = state.to_real()
    t = 0.0
    while True:
        if np.linalg.norm(f(t, v)) < tol:
            return MeanFieldState.from_real(v)
        if t >= t_max:
            raise HysteresisError(p.epsilon, f"no steady state within t={t_max:g} (|rhs|={np.linalg.norm(f(t, v)):.3g})")
        # LSODA: the slaved cavity mode makes explicit steps stability-limited
        sol = solve_ivp(f, (t, t + chunk), v, method="LSODA", jac=jac, rtol=1e-8, atol=1e-10)
        if not sol.success:
            raise HysteresisError(p.epsilon, sol.message)
        v = sol.y[:, -1]
        t += chunk


@dataclass
class HysteresisResult:
    epsilon: np.ndarray         # ascending grid
    up: np.ndarray              # |A0|^2 on the up-sweep
    down: np.ndarray            # |A0|^2 on the down-sweep, aligned with ``epsilon``
    up_states: list[MeanFieldState]
    down_states: list[MeanFieldState]

    @property
    def split(self) -> np.ndarray:
        return np.abs(self.up - self.down)


def hysteresis(p: CircuitParams, eps_grid: Sequence[float], tol: float = STEADY_RHS_TOL) -> HysteresisResult:
    """Sweep the drive up then down, each point relaxed from the previous steady state."""
    eps = np.asarray(eps_grid, dtype=float)
    if eps.size == 0 or np.any(np.diff(eps) <= 0):
        raise ValueError("eps_grid must be nonempty and strictly ascending")
    state = MeanFieldState(0j, 0j)
    up = []
    for e in eps:
        state = relax(state, p.replace(epsilon=e), tol)
        up.append(state)
    down = []
    for e in eps[::-1]:
        state = relax(state, p.replace(epsilon=e), tol)
        down.append(state)
    down.reverse()
    return HysteresisResult(
        epsilon=eps,
        up=np.array([abs(s.A) ** 2 for s in up]),
        down=np.array([abs(s.A) ** 2 for s in down]),
        up_states=up,
        down_states=down,
    )


# --- drift read off an SLH description -------------------------------------

@dataclass(frozen=True)
class DriftCoefficients:
    """Mean-field drift d<x>/dt = const + k_a <a> + k_c <c> (+ k_kerr <c^+ c c> for x = c)."""

    a: dict
    c: dict
    residual: float


def _drift_operator(x, triple: SlhTriple):
    out = -1j * commutator(x, triple.H)
    for L in triple.L:
        out = out + 0.5 * (L.dag() @ commutator(x, L) + commutator(L.dag(), x) @ L)
    return out


def drift_coefficients(triple: SlhTriple) -> DriftCoefficients:
    """Extract the Heisenberg drift of ``a`` and ``c`` from an SLH triple.

    The drift operator -i[x, H] + sum (L^+ [x, L] + [L^+, x] L) / 2 is projected
    onto {1, a, c, c^+ c c} through low-lying matrix elements; ``residual`` is
    the largest mismatch of that fit on states away from the truncation edge.
    """
    space = triple.space
    if space.n_modes != 2 or min(space.dims) < 4:
        raise ValueError("drift extraction needs a two-mode space with dims >= 4")
    a = annihilator(space, MODE_A)
    c = annihilator(space, MODE_C)
    kerr_op = c.dag() @ c @ c
    idx = space.basis_index

    out = {}
    residual = 0.0
    for name, x in (("a", a), ("c", c)):
        D = _drift_operator(x, triple).matrix
        coeffs = {
            "1": D[idx((0, 0)), idx((0, 0))],
            "a": D[idx((0, 0)), idx((1, 0))],
            "c": D[idx((0, 0)), idx((0, 1))],
        }
        coeffs["c+cc"] = (D[idx((0, 1)), idx((0, 2))] - math.sqrt(2) * coeffs["c"]) / math.sqrt(2)
        model = (coeffs["1"] * np.eye(space.total_dim) + coeffs["a"] * a.matrix
                 + coeffs["c"] * c.matrix + coeffs["c+cc"] * kerr_op.matrix)
        occ = space.occupations()
        inner = np.all(occ <= np.array(space.dims) - 3, axis=1)
        residual = max(residual, float(np.max(np.abs((D - model)[:, inner]))))
        out[name] = {k: complex(v) for k, v in coeffs.items()}
    return DriftCoefficients(a=out["a"], c=out["c"], residual=residual)


def mean_field_coefficients(p: CircuitParams) -> DriftCoefficients:
    """The same coefficient table read from :func:`mean_field_rhs`."""
    a = {"1": 0j, "a": -1j * p.delta_s - 0.5 * p.loss_a, "c": -math.sqrt(p.kappa * p.gamma_f) + 0j, "c+cc": 0j}
    c = {"1": 1j * p.epsilon, "a": -math.sqrt(p.kappa * p.gamma) + 0j,
         "c": -1j * p.delta - 0.5 * p.kappa, "c+cc": 2j * p.chi}
    return DriftCoefficients(a=a, c=c, residual=0.0)
