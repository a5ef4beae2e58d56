"""Lindblad steady states of the feedback loop and zero-delay photon statistics.

Vectorization is column-stacking, ``vec(A X B) = (B^T kron A) vec(X)``, so a
density matrix ``rho`` maps to ``rho.ravel(order="F")``.

Weakly driven steady states span many orders of magnitude (the two-photon
populations scale like eps^4), which a plain null-space solve cannot resolve.
:func:`steady_state` therefore accepts per-basis-state amplitude weights
``w`` and solves for ``rho_ij / (w_i w_j)`` instead. That diagonal similarity
transform is exact; it only changes which entries carry the rounding error.
"""

from __future__ import annotations

import math
from concurrent.futures import Executor
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fock import HERMITIAN_TOL, FockOperator, ModeSpace, SpaceMismatchError, annihilator, expectation
from .slh import MODE_A, MODE_C, CircuitParams, build_circuit

# dense SVD up to this Liouvillian size, sparse LU beyond
SVD_MAX_DIM = 400
UNIQUENESS_RATIO = 1e-6
RESIDUAL_TOL = 1e-9
POSITIVITY_FLOOR = -1e-8
CONVERGENCE_RTOL = 0.01
TRUNCATION_CAP = 12

Mode = Union[str, int]


class SteadyStateError(RuntimeError):
    pass


class DegenerateSteadyStateError(SteadyStateError):
    def __init__(self, smallest: float, second: float):
        super().__init__(f"steady state is not unique: two smallest singular values {smallest:.3e}, {second:.3e}")
        self.singular_values = (smallest, second)


class VacuumStateError(ValueError):
    """g2 is undefined because the mode holds no photons."""


def vec(m: np.ndarray) -> np.ndarray:
    return np.asarray(m).ravel(order="F")


def unvec(v: np.ndarray, dim: int) -> np.ndarray:
    return np.asarray(v).reshape(dim, dim, order="F")


@dataclass(frozen=True)
class Liouvillian:
    matrix: Union[np.ndarray, sp.csr_matrix]
    space: ModeSpace

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.matrix)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def dense(self) -> np.ndarray:
        return self.matrix.toarray() if self.is_sparse else np.asarray(self.matrix)

    def norm(self) -> float:
        """Frobenius norm."""
        if self.is_sparse:
            return float(spla.norm(self.matrix))
        return float(np.linalg.norm(self.matrix))

    def apply(self, rho: FockOperator) -> FockOperator:
        if rho.space != self.space:
            raise SpaceMismatchError(f"{rho.space.dims} vs {self.space.dims}")
        return FockOperator(self.space, unvec(self.matrix @ vec(rho.matrix), self.space.total_dim))


def build_liouvillian(H: FockOperator, L_ops: Sequence[FockOperator], sparse: bool = False,
                      herm_tol: float = HERMITIAN_TOL) -> Liouvillian:
    """Matrix of rho -> -i[H, rho] + sum_k (L rho L^+ - {L^+ L, rho}/2)."""
    scale = max(1.0, float(np.max(np.abs(H.matrix), initial=0.0)))
    if not H.is_hermitian(atol=herm_tol * scale):
        raise ValueError("Hamiltonian is not Hermitian")
    for L in L_ops:
        if L.space != H.space:
            raise SpaceMismatchError(f"{L.space.dims} vs {H.space.dims}")
    d = H.space.total_dim
    if sparse:
        kron, eye, conv = sp.kron, sp.identity(d, dtype=complex, format="csr"), sp.csr_matrix
    else:
        kron, eye, conv = np.kron, np.eye(d), np.asarray
    h = conv(H.matrix)
    out = -1j * (kron(eye, h) - kron(h.T, eye))
    for L in L_ops:
        l = conv(L.matrix)
        ldl = conv(L.matrix.conj().T @ L.matrix)
        out = out + kron(l.conj(), l) - 0.5 * kron(eye, ldl) - 0.5 * kron(ldl.T, eye)
    if sparse:
        out = sp.csr_matrix(out)
        out.eliminate_zeros()
    return Liouvillian(out, H.space)


@dataclass(frozen=True)
class SteadyDensityMatrix:
    rho: FockOperator
    residual: float            # ||L vec(rho)||_2
    trace_error: float
    min_eigenvalue: float
    hermiticity_error: float   # ||rho - rho^+||_max before symmetrizing
    liouvillian_norm: float
    singular_values: Optional[tuple[float, float]] = None  # two smallest, dense path only

    @property
    def space(self) -> ModeSpace:
        return self.rho.space

    def check(self) -> list[str]:
        problems = []
        if self.trace_error >= 1e-10:
            problems.append(f"trace error {self.trace_error:.3g}")
        if self.hermiticity_error >= 1e-10:
            problems.append(f"hermiticity error {self.hermiticity_error:.3g}")
        if self.min_eigenvalue <= POSITIVITY_FLOOR:
            problems.append(f"negative eigenvalue {self.min_eigenvalue:.3g}")
        if self.residual >= RESIDUAL_TOL * self.liouvillian_norm:
            problems.append(f"residual {self.residual:.3g} vs norm {self.liouvillian_norm:.3g}")
        return problems


def _trace_row(d: int, T: np.ndarray) -> np.ndarray:
    row = np.zeros(d * d, dtype=complex)
    diag = np.arange(d) * (d + 1)
    row[diag] = T[diag]
    return row


def steady_state(liouvillian: Liouvillian, weights: Optional[np.ndarray] = None) -> SteadyDensityMatrix:
    """Unique trace-one null vector of ``liouvillian``.

    Small problems take the smallest right singular vector (and check the
    next singular value for uniqueness); large sparse ones solve the system
    with one equation replaced by the trace condition. Either way one step of
    iterative refinement on the trace-bordered system follows.
    """
    space = liouvillian.space
    d = space.total_dim
    n = d * d
    w = np.ones(d) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (d,) or np.any(w <= 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be positive, one per basis state")
    T = np.kron(w, w)
    trace_row = _trace_row(d, T)
    rhs = np.zeros(n, dtype=complex)
    rhs[0] = 1.0

    sv = None
    use_svd = n <= SVD_MAX_DIM
    if use_svd:
        dense = liouvillian.dense()
        # uniqueness is judged on the unscaled generator; the grading distorts its spectrum
        s = la.svd(dense, compute_uv=False)
        sv = (float(s[-1]), float(s[-2]))
        if s[-2] <= UNIQUENESS_RATIO * s[0]:
            raise DegenerateSteadyStateError(*sv)
        B = dense * (T[None, :] / T[:, None])
        _, _, vh = la.svd(B)
        x = vh[-1].conj()
        x = x / (trace_row @ x)
        Bb = B.copy()
        Bb[0, :] = trace_row
        lu = la.lu_factor(Bb)
        x = x + la.lu_solve(lu, rhs - Bb @ x)
    else:
        M = sp.csr_matrix(liouvillian.matrix)
        B = sp.diags(1.0 / T) @ M @ sp.diags(T)
        keep = np.ones(n)
        keep[0] = 0.0
        cols = np.flatnonzero(trace_row)
        border = sp.csr_matrix((trace_row[cols], (np.zeros(cols.size, dtype=int), cols)), shape=(n, n))
        Bb = sp.csr_matrix(sp.diags(keep) @ B + border)
        try:
            lu = spla.splu(sp.csc_matrix(Bb))
        except RuntimeError as exc:
            raise DegenerateSteadyStateError(0.0, 0.0) from exc
        x = lu.solve(rhs)
        x = x + lu.solve(rhs - Bb @ x)
        if not np.all(np.isfinite(x)):
            raise DegenerateSteadyStateError(0.0, 0.0)

    raw = unvec(x * T, d)
    herm_err = float(np.max(np.abs(raw - raw.conj().T)))
    rho = 0.5 * (raw + raw.conj().T)
    rho = rho / np.trace(rho).real
    residual = float(np.linalg.norm(liouvillian.matrix @ vec(rho)))
    result = SteadyDensityMatrix(
        rho=FockOperator(space, rho),
        residual=residual,
        trace_error=float(abs(np.trace(rho) - 1.0)),
        min_eigenvalue=float(np.min(np.linalg.eigvalsh(rho))),
        hermiticity_error=herm_err,
        liouvillian_norm=liouvillian.norm(),
        singular_values=sv,
    )
    problems = result.check()
    if problems:
        raise SteadyStateError("steady state failed invariants: " + "; ".join(problems))
    return result


def mode_index(mode: Mode) -> int:
    if isinstance(mode, str):
        try:
            return {"a": MODE_A, "c": MODE_C}[mode]
        except KeyError:
            raise ValueError(f"mode must be 'a', 'c' or an index, got {mode!r}") from None
    return int(mode)


@dataclass(frozen=True)
class G2Result:
    g2: float
    mean_photon: float
    mode: Mode
    truncation_used: tuple[int, ...]
    converged: Optional[bool] = None   # None when no dims+2 comparison was made
    relative_change: Optional[float] = None
    residual: Optional[float] = None


def g2(state: SteadyDensityMatrix, mode: Mode = "a", min_photon: float = 1e-12) -> G2Result:
    """Zero-delay second-order correlation <x^+x^+xx> / <x^+x>^2."""
    x = annihilator(state.space, mode_index(mode))
    xd = x.dag()
    n = expectation(state.rho, xd @ x).real
    if n <= min_photon:
        raise VacuumStateError(f"mean photon number {n:.3g} in mode {mode!r}: g2 undefined")
    num = expectation(state.rho, xd @ xd @ x @ x).real
    return G2Result(g2=num / n**2, mean_photon=n, mode=mode,
                    truncation_used=state.space.dims, residual=state.residual)


# --- the feedback circuit -------------------------------------------------

def default_dims(p: CircuitParams) -> tuple[int, int]:
    return (4, 4) if p.epsilon <= 0.3 * p.kappa else (8, 8)


def circuit_weights(p: CircuitParams, space: ModeSpace) -> np.ndarray:
    """Per-basis-state weights s_a^n_a * s_c^n_c from the linear (chi = 0) steady amplitudes."""
    M = np.array([
        [-1j * p.delta_s - 0.5 * p.loss_a, -math.sqrt(p.kappa * p.gamma_f)],
        [-math.sqrt(p.kappa * p.gamma), -1j * p.delta - 0.5 * p.kappa],
    ])
    try:
        amps = np.linalg.solve(M, np.array([0.0, -1j * p.epsilon]))
    except np.linalg.LinAlgError:
        return np.ones(space.total_dim)
    scales = np.clip(np.abs(amps), 1e-12, 1.0)
    if not np.all(np.isfinite(scales)) or np.all(scales <= 1e-12):
        return np.ones(space.total_dim)
    occ = space.occupations()
    return np.prod(scales[None, :] ** occ, axis=1)


def circuit_liouvillian(p: CircuitParams, dims: Sequence[int]) -> Liouvillian:
    space = ModeSpace(tuple(dims))
    triple = build_circuit(p, space)
    return build_liouvillian(triple.H, triple.L, sparse=space.total_dim**2 > SVD_MAX_DIM)


def solve_circuit(p: CircuitParams, dims: Optional[Sequence[int]] = None) -> SteadyDensityMatrix:
    dims = tuple(dims) if dims is not None else default_dims(p)
    liouv = circuit_liouvillian(p, dims)
    return steady_state(liouv, circuit_weights(p, liouv.space))


def circuit_g2(p: CircuitParams, mode: Mode = "a", dims: Optional[Sequence[int]] = None,
               check_convergence: bool = True) -> G2Result:
    """g2 of the circuit's steady state; with ``check_convergence`` also re-solved at dims + 2."""
    dims = tuple(dims) if dims is not None else default_dims(p)
    res = g2(solve_circuit(p, dims), mode)
    if not check_convergence:
        return res
    bigger = g2(solve_circuit(p, tuple(d + 2 for d in dims)), mode)
    change = abs(bigger.g2 - res.g2) / abs(bigger.g2) if bigger.g2 != 0 else abs(res.g2)
    return G2Result(res.g2, res.mean_photon, mode, dims, change < CONVERGENCE_RTOL, change, res.residual)


def converged_g2(p: CircuitParams, mode: Mode = "a", dims: Optional[Sequence[int]] = None,
                 cap: int = TRUNCATION_CAP) -> G2Result:
    """Raise the truncation in steps of 2 until g2 moves by < 1%, or the cap is reached.

    The returned result has ``converged=False`` when the cap stopped the search.
    """
    dims = tuple(dims) if dims is not None else default_dims(p)
    current = g2(solve_circuit(p, dims), mode)
    while True:
        nxt_dims = tuple(d + 2 for d in dims)
        if max(nxt_dims) > cap:
            return G2Result(current.g2, current.mean_photon, mode, dims, False, None, current.residual)
        nxt = g2(solve_circuit(p, nxt_dims), mode)
        change = abs(nxt.g2 - current.g2) / abs(nxt.g2) if nxt.g2 != 0 else abs(current.g2)
        if change < CONVERGENCE_RTOL:
            return G2Result(current.g2, current.mean_photon, mode, dims, True, change, current.residual)
        dims, current = nxt_dims, nxt


@dataclass(frozen=True)
class KSweepRow:
    K: float
    delta_s: float
    result: G2Result


def _map(fn, items, executor: Optional[Executor]):
    return list(executor.map(fn, items)) if executor is not None else [fn(i) for i in items]


class _KPoint:
    def __init__(self, p, mode, dims, check):
        self.p, self.mode, self.dims, self.check = p, mode, dims, check

    def __call__(self, item):
        K, ds = item
        q = self.p.replace(delta_s=ds).with_K(K)
        return KSweepRow(K, ds, circuit_g2(q, self.mode, self.dims, self.check))


def k_sweep(p: CircuitParams, K_grid: Sequence[float], mode: Mode = "a",
            delta_s_grid: Optional[Sequence[float]] = None, dims: Optional[Sequence[int]] = None,
            check_convergence: bool = True, executor: Optional[Executor] = None) -> list[KSweepRow]:
    """g2 versus K = delta/chi + 1, optionally over a grid of delta_s as well.

    Rows come back ordered by delta_s (outer) then K (inner) regardless of ``executor``.
    """
    if p.chi == 0:
        raise ValueError("K sweeps need chi != 0")
    ds_grid = [p.delta_s] if delta_s_grid is None else list(delta_s_grid)
    items = [(float(K), float(ds)) for ds in ds_grid for K in K_grid]
    return _map(_KPoint(p, mode, dims, check_convergence), items, executor)


@dataclass(frozen=True)
class DriveRow:
    eps_over_kappa: float
    result: G2Result

    @property
    def flagged(self) -> bool:
        return not self.result.converged


class _DrivePoint:
    def __init__(self, p, mode, cap):
        self.p, self.mode, self.cap = p, mode, cap

    def __call__(self, x):
        q = self.p.replace(epsilon=x * self.p.kappa)
        return DriveRow(x, converged_g2(q, self.mode, cap=self.cap))


def drive_strength_sweep(p: CircuitParams, eps_grid: Sequence[float], K: float, mode: Mode = "a",
                         cap: int = TRUNCATION_CAP, executor: Optional[Executor] = None) -> list[DriveRow]:
    """g2 versus eps/kappa at fixed K; ``eps_grid`` is in units of kappa."""
    grid = [float(x) for x in eps_grid]
    if any(x <= 0 for x in grid):
        raise VacuumStateError("eps = 0 leaves the circuit in vacuum: g2 undefined")
    base = p.with_K(K)
    return _map(_DrivePoint(base, mode, cap), grid, executor)
