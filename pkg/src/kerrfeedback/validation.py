"""Cross-checks between the mean-field, master-equation and amplitude solutions.

:func:`run_validation` collects named checks. A check with ``passed=None`` is
a reported comparison with no pass/fail threshold attached.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import quantum, weak_drive
from .fock import ModeSpace
from .semiclassical import (bistable_window, cavity_transfer, drift_coefficients, drive_sweep,
                            effective_rates, mean_field_coefficients)
from .slh import CircuitParams, build_circuit, kerr_from_qubit, rotating_frame_hamiltonian

FIG3 = CircuitParams(gamma=6.0, gamma_f=8.0, kappa=3.0, chi=10.0, delta_s=100.0, delta=4.9)
FIG4 = CircuitParams(gamma=2.0, gamma_f=2.5, kappa=1.0, chi=10.0, delta_s=50.0, epsilon=0.1)


@dataclass(frozen=True)
class Check:
    name: str
    passed: Optional[bool]
    value: float
    detail: str = ""

    @property
    def status(self) -> str:
        return {True: "PASS", False: "FAIL", None: "REPORT"}[self.passed]


@dataclass
class ValidationReport:
    checks: list[Check]

    @property
    def failures(self) -> list[Check]:
        return [c for c in self.checks if c.passed is False]

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_text(self) -> str:
        width = max(len(c.name) for c in self.checks)
        lines = [f"{c.status:6s} {c.name:<{width}s}  {c.value:.6g}  {c.detail}".rstrip() for c in self.checks]
        lines.append(f"{len(self.checks)} checks, {len(self.failures)} failed")
        return "\n".join(lines)


# --- individual comparisons -------------------------------------------------

def drift_table(p: CircuitParams = FIG3.replace(epsilon=1.0)) -> list[tuple[str, str, complex, complex]]:
    """(variable, term, from SLH triple, from mean-field equations) for every drift coefficient."""
    d = drift_coefficients(build_circuit(p, ModeSpace((5, 5))))
    m = mean_field_coefficients(p)
    rows = []
    for var in ("a", "c"):
        for term in ("1", "a", "c", "c+cc"):
            rows.append((var, term, getattr(d, var)[term], getattr(m, var)[term]))
    return rows


# Reference amplitude equations in the hand-derived layout, as {row: {column: coefficient}} with G = sqrt(kappa gamma) - sqrt(kappa gamma_f).
# The first row appears twice in that list and no row for |00> is given.
def reference_amplitude_rows(p: CircuitParams) -> list[tuple[tuple[int, int], dict]]:
    G = math.sqrt(p.kappa * p.gamma) - math.sqrt(p.kappa * p.gamma_f)
    ds, d, chi, e, r2 = p.delta_s, p.delta, p.chi, p.epsilon, math.sqrt(2)
    row10 = ((1, 0), {(1, 0): ds, (1, 1): -e, (0, 1): 0.5j * G})
    return [
        row10,
        row10,
        ((1, 1), {(1, 1): ds + d, (1, 0): -e, (1, 2): -r2 * e, (0, 2): 1j / r2 * G, (2, 0): -1j / r2 * G}),
        ((1, 2), {(1, 2): ds + 2 * d - 2 * chi, (1, 1): -r2 * e, (2, 1): -1j * G}),
        ((0, 1), {(0, 0): -e, (0, 2): -r2 * e, (1, 0): -0.5j * G, (0, 1): d}),
        ((0, 2), {(0, 2): 2 * d - 2 * chi, (0, 1): -r2 * e, (1, 1): -1j / r2 * G}),
        ((2, 1), {(2, 1): 2 * ds + d, (2, 0): -e, (2, 2): -r2 * e, (1, 2): 1j * G}),
        ((2, 0), {(2, 0): 2 * ds, (2, 1): -e, (1, 1): 1j / r2 * G}),
        ((2, 2), {(2, 2): 2 * ds + 2 * d - 2 * chi, (2, 1): -r2 * e}),
    ]


def reference_rows_mismatch(p: CircuitParams) -> tuple[float, list[tuple[int, int]]]:
    """Largest |reference - H_tot| over the reference rows, and the basis rows the list never covers."""
    space = ModeSpace((3, 3))
    H = rotating_frame_hamiltonian(p, space).matrix
    worst = 0.0
    covered = set()
    for row, coeffs in reference_amplitude_rows(p):
        covered.add(row)
        ref = np.zeros(space.total_dim, dtype=complex)
        for col, v in coeffs.items():
            ref[space.basis_index(col)] = v
        worst = max(worst, float(np.max(np.abs(H[space.basis_index(row)] - ref))))
    missing = [tuple(int(v) for v in occ) for occ in space.occupations() if tuple(occ) not in covered]
    return worst, missing


def triangle(p: CircuitParams, K_grid, dims=(4, 4)) -> dict:
    """Pairwise relative deviations between master-equation, amplitude and closed-form g2 over K."""
    rows = []
    for K in K_grid:
        q = p.with_K(K)
        gq = quantum.circuit_g2(q, "a", dims, check_convergence=False).g2
        gw = weak_drive.weak_drive_g2(q)
        gc = weak_drive.g2_closed_form(q)
        rows.append((K, gq, gw, gc))
    arr = np.array(rows)

    def rel(i, j):
        return float(np.max(np.abs(arr[:, i] - arr[:, j]) / np.minimum(np.abs(arr[:, i]), np.abs(arr[:, j]))))

    return {"rows": arr, "quantum_vs_amplitudes": rel(1, 2), "quantum_vs_closed": rel(1, 3),
            "amplitudes_vs_closed": rel(2, 3)}


# --- the report ------------------------------------------------------------

def _liouvillian_draws(n: int, seed: int = 7) -> tuple[float, float]:
    """Worst trace-preservation defect and worst steady-state invariant margin over random circuits."""
    rng = np.random.default_rng(seed)
    worst_trace, failures = 0.0, 0
    for _ in range(n):
        p = CircuitParams(gamma=rng.uniform(0.1, 3), gamma_f=rng.uniform(0.1, 3), kappa=rng.uniform(0.2, 3),
                          chi=rng.uniform(-10, 10), delta_s=rng.uniform(-20, 20), delta=rng.uniform(-20, 20),
                          epsilon=rng.uniform(0.05, 1.0))
        L = quantum.circuit_liouvillian(p, (3, 3))
        ones = quantum.vec(np.eye(9))
        worst_trace = max(worst_trace, float(np.max(np.abs(ones @ L.dense()))))
        try:
            quantum.steady_state(L)
        except quantum.SteadyStateError:
            failures += 1
    return worst_trace, failures


def run_validation(quick: bool = False, progress: Optional[Callable[[str], None]] = None) -> ValidationReport:
    checks: list[Check] = []

    def add(*args, **kw):
        checks.append(Check(*args, **kw))
        if progress is not None:
            progress(checks[-1].name)

    # drift read off the network description vs the mean-field equations
    worst = max(abs(s - m) for _, _, s, m in drift_table())
    add("drift: SLH triple vs mean-field equations", worst < 1e-10, worst, "max coefficient difference")

    # effective damping, both forms
    for form in ("asymmetric", "symmetric"):
        p1, p2 = effective_rates(FIG3, form)
        window = bistable_window(FIG3, form)
        add(f"rates[{form}]: p1", None, p1, f"p2={p2:.6g}")
        add(f"rates[{form}]: three-root window", None, window[1] - window[0] if window else 0.0,
            f"eps in {window}" if window else "no window")
    transfer = cavity_transfer(FIG3)
    add("|A0|^2 / |C0|^2 prefactor (kappa gamma_f)", None, transfer, "consistent with the a-equation drift")

    # hand-derived few-photon equations vs the Hamiltonian
    mismatch, missing = reference_rows_mismatch(FIG4.with_K(1.0))
    add("amplitude rows: reference vs H_tot", mismatch < 1e-12, mismatch, f"rows never listed: {missing}")

    # leading-order occupations
    q = FIG4.replace(epsilon=0.01).with_K(1.0)
    P1, P2 = weak_drive.occupations(weak_drive.solve_amplitudes(q))
    tP1, tP2 = weak_drive.skeleton_leading_order(q)
    lP1 = weak_drive.leading_order_p1(q)
    add("P1 leading order |G eps|^2/(4|d d_s|^2) vs full sum", abs(lP1 / P1 - 1) < 0.05, lP1 / P1 - 1, "relative")
    add("P1 zero-loss skeleton vs full sum", None, tP1 / P1, "ratio")
    add("P2 zero-loss skeleton vs full sum", None, tP2 / P2, "ratio")

    # closed form internal consistency
    k1 = abs(weak_drive.g2_closed_form(FIG4, 1.0) - weak_drive.g2_closed_form_k1(FIG4))
    add("closed form: K=1 reduction", k1 < 1e-12, k1)

    # three-way agreement
    K_grid = np.linspace(0.5, 1.5, 5 if quick else 21)
    for eps, tol in ((0.1, 0.20), (0.01, 0.05)):
        tri = triangle(FIG4.replace(epsilon=eps), K_grid)
        for key in ("quantum_vs_amplitudes", "quantum_vs_closed", "amplitudes_vs_closed"):
            add(f"triangle eps={eps}: {key}", tri[key] < tol, tri[key], f"tolerance {tol}")
        coll = np.array([weak_drive.weak_drive_g2(FIG4.replace(epsilon=eps).with_K(K), "collective")
                         for K in K_grid])
        dev = float(np.max(np.abs(coll / tri["rows"][:, 1] - 1)))
        add(f"eps={eps}: collective-loss amplitudes vs master equation", None, dev,
            "weak-drive limit including the emission cross term")

    # the two-photon point, reported only
    for ds in (50.0, 10.0):
        q = FIG4.replace(delta_s=ds).with_K(2.0)
        gq = quantum.circuit_g2(q, "a", check_convergence=False).g2
        gc = weak_drive.g2_closed_form(q)
        add(f"K=2, delta_s={ds:g}: master equation vs closed form", None, gq / gc - 1,
            f"g2={gq:.4g}, closed form {gc:.4g}")

    # mean-field bistability
    sweep = drive_sweep(FIG3, np.linspace(0.05, 2.0, 40))
    add("bistability: 3-root window on drive grid", sweep.window is not None, float(np.max(sweep.root_counts)),
        f"window {sweep.window}, threshold eps {sweep.threshold_eps:.5g}")

    # generator invariants
    trace_def, fails = _liouvillian_draws(10 if quick else 50)
    add("Liouvillian: trace preservation", trace_def < 1e-12, trace_def)
    add("steady state: invariants over random draws", fails == 0, float(fails), "failed draws")

    # no Kerr, no antibunching
    g_lin = quantum.g2(quantum.solve_circuit(FIG4.replace(chi=0.0), (6, 6))).g2
    add("chi=0: coherent statistics", abs(g_lin - 1) < 1e-4, g_lin - 1)

    est = kerr_from_qubit(2000.0, 4000.0, 25000.0, warn=False)
    add("Kerr estimate validity (strongest point of the qubit sweep)", est.valid, max(est.rabi_ratio, est.dispersive_ratio))
    return ValidationReport(checks)
