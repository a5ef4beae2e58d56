"""Dense operator algebra on truncated multi-mode Fock spaces.

Tensor layout is mode-0-major: for dims ``(n0, n1)`` the basis state
``|i, j>`` sits at flat index ``i * n1 + j``. In the feedback circuit mode 0
is the controlled cavity ``a`` and mode 1 the controller cavity ``c``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np

HERMITIAN_TOL = 1e-10


class SpaceMismatchError(ValueError):
    """Raised when operators on different mode spaces are combined."""


@dataclass(frozen=True)
class ModeSpace:
    """Ordered collection of truncated bosonic modes."""

    dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not dims:
            raise ValueError("a mode space needs at least one mode")
        if any(d < 2 for d in dims):
            raise ValueError(f"every truncation dimension must be >= 2, got {dims}")
        object.__setattr__(self, "dims", dims)

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims))

    @property
    def n_modes(self) -> int:
        return len(self.dims)

    def basis_index(self, occupations: Sequence[int]) -> int:
        """Flat index of the number state with the given per-mode occupations."""
        if len(occupations) != self.n_modes:
            raise ValueError("one occupation per mode required")
        return int(np.ravel_multi_index(tuple(occupations), self.dims))

    def occupations(self) -> np.ndarray:
        """Array of shape (total_dim, n_modes) listing each basis state's photon numbers."""
        grids = np.indices(self.dims).reshape(self.n_modes, -1)
        return grids.T.copy()

    def grown(self, step: int = 2) -> "ModeSpace":
        return ModeSpace(tuple(d + step for d in self.dims))


class FockOperator:
    """Immutable complex matrix tagged with the ModeSpace it acts on.

    ``@`` is the operator product, ``*`` scales by a number, ``+``/``-`` add
    operators. Combining operators from different spaces raises
    :class:`SpaceMismatchError`.
    """

    __slots__ = ("space", "matrix")
    __array_priority__ = 100

    def __init__(self, space: ModeSpace, matrix):
        m = np.array(matrix, dtype=complex)
        n = space.total_dim
        if m.shape != (n, n):
            raise ValueError(f"matrix shape {m.shape} does not match space dimension {n}")
        m.setflags(write=False)
        object.__setattr__(self, "space", space)
        object.__setattr__(self, "matrix", m)

    def __setattr__(self, name, value):
        raise AttributeError("FockOperator is immutable")

    def __repr__(self):
        return f"FockOperator(dims={self.space.dims})"

    def _check(self, other: "FockOperator"):
        if not isinstance(other, FockOperator):
            return NotImplemented
        if other.space != self.space:
            raise SpaceMismatchError(f"{self.space.dims} vs {other.space.dims}")
        return other

    def dag(self) -> "FockOperator":
        return FockOperator(self.space, self.matrix.conj().T)

    def __matmul__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return FockOperator(self.space, self.matrix @ other.matrix)

    def __add__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return FockOperator(self.space, self.matrix + other.matrix)

    def __sub__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return FockOperator(self.space, self.matrix - other.matrix)

    def __neg__(self):
        return FockOperator(self.space, -self.matrix)

    def __mul__(self, scalar):
        if isinstance(scalar, FockOperator) or not np.isscalar(scalar):
            return NotImplemented
        return FockOperator(self.space, complex(scalar) * self.matrix)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        return FockOperator(self.space, self.matrix / complex(scalar))

    def __eq__(self, other):
        if not isinstance(other, FockOperator):
            return NotImplemented
        return self.space == other.space and np.array_equal(self.matrix, other.matrix)

    __hash__ = None

    def allclose(self, other: "FockOperator", atol: float = 1e-12) -> bool:
        self._check(other)
        return bool(np.allclose(self.matrix, other.matrix, rtol=0.0, atol=atol))

    def is_hermitian(self, atol: float = HERMITIAN_TOL) -> bool:
        return bool(np.max(np.abs(self.matrix - self.matrix.conj().T), initial=0.0) <= atol)

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))


def commutator(x: FockOperator, y: FockOperator) -> FockOperator:
    return x @ y - y @ x


def identity(space: ModeSpace) -> FockOperator:
    return FockOperator(space, np.eye(space.total_dim))


def zero(space: ModeSpace) -> FockOperator:
    return FockOperator(space, np.zeros((space.total_dim, space.total_dim)))


def ladder_matrix(dim: int) -> np.ndarray:
    """Single-mode truncated annihilation operator: sqrt(n) on the superdiagonal."""
    return np.diag(np.sqrt(np.arange(1, dim)), 1).astype(complex)


def embed(space: ModeSpace, mode: int, local) -> FockOperator:
    """Place a single-mode matrix on ``mode`` with identities on every other mode."""
    if not 0 <= mode < space.n_modes:
        raise IndexError(f"mode {mode} out of range for {space.n_modes} modes")
    local = np.asarray(local, dtype=complex)
    d = space.dims[mode]
    if local.shape != (d, d):
        raise ValueError(f"local operator must be {d}x{d}, got {local.shape}")
    factors = [local if k == mode else np.eye(n) for k, n in enumerate(space.dims)]
    return FockOperator(space, reduce(np.kron, factors))


def annihilator(space: ModeSpace, mode: int) -> FockOperator:
    if not 0 <= mode < space.n_modes:
        raise IndexError(f"mode {mode} out of range for {space.n_modes} modes")
    return embed(space, mode, ladder_matrix(space.dims[mode]))


def number(space: ModeSpace, mode: int) -> FockOperator:
    x = annihilator(space, mode)
    return x.dag() @ x


def basis_projector(space: ModeSpace, occupations: Sequence[int]) -> FockOperator:
    m = np.zeros((space.total_dim, space.total_dim))
    k = space.basis_index(occupations)
    m[k, k] = 1.0
    return FockOperator(space, m)


def expectation(rho: FockOperator, obs: FockOperator, trace_tol: float = 1e-8) -> complex:
    """Tr(rho @ obs) for a density matrix ``rho``."""
    if rho.space != obs.space:
        raise SpaceMismatchError(f"{rho.space.dims} vs {obs.space.dims}")
    tr = np.trace(rho.matrix)
    if abs(tr - 1.0) > trace_tol:
        raise ValueError(f"density matrix trace is {tr}, expected 1")
    # Tr(AB) = sum_ij A_ij B_ji
    return complex(np.sum(rho.matrix * obs.matrix.T))
