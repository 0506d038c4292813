"""Frequency-domain Helmholtz operators on a regular grid.

Each frequency block is

    A(m, w) = w^2 diag(b) diag(m) - 1j * w diag(1 - b) diag(sqrt(m)) + L

with ``b`` the interior mask (0 on the outer ring of cells) and ``L`` the
5-point Laplacian scaled by ``1/h^2`` with Neumann closure.  The boundary
term carries the imaginary unit so the operator absorbs outgoing waves;
``literal_boundary=True`` drops it (real symmetric operator, used in tests).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .grid import Grid, ModelField

__all__ = [
    "HelmholtzOperator",
    "Factorization",
    "boundary_mask",
    "laplacian",
    "assemble",
    "factorize",
    "solve_forward",
    "solve_adjoint",
    "jacobian_diag",
    "jacobian_scalar",
]

_LAPLACIAN_CACHE: dict = {}


def boundary_mask(grid: Grid) -> np.ndarray:
    b = np.zeros(grid.shape)
    b[1:-1, 1:-1] = 1.0
    return b.ravel(order="F")


def laplacian(grid: Grid) -> sp.csr_matrix:
    """5-point Laplacian with zero-normal-difference closure, scaled 1/h^2."""
    key = (grid.nz, grid.nx, grid.h)
    if key not in _LAPLACIAN_CACHE:
        def lap1d(n):
            main = -2.0 * np.ones(n)
            main[0] = main[-1] = -1.0
            off = np.ones(n - 1)
            return sp.diags([off, main, off], [-1, 0, 1])

        # depth-fastest ordering: kron(I_x, T_z) + kron(T_x, I_z)
        L = sp.kron(sp.identity(grid.nx), lap1d(grid.nz)) + sp.kron(lap1d(grid.nx), sp.identity(grid.nz))
        _LAPLACIAN_CACHE[key] = (L / grid.h**2).tocsr()
    return _LAPLACIAN_CACHE[key]


@dataclass(frozen=True, eq=False)
class HelmholtzOperator:
    omega: float
    grid: Grid
    boundary_mask: np.ndarray = field(repr=False)
    matrix: sp.csc_matrix = field(repr=False)
    m_snapshot: np.ndarray = field(repr=False)
    literal_boundary: bool = False

    def __matmul__(self, x):
        return self.matrix @ x


@dataclass(frozen=True, eq=False)
class Factorization:
    """LU factors of one frequency block; also solves with the adjoint."""

    omega: float
    operator: HelmholtzOperator = field(repr=False)
    lu: object = field(repr=False)

    def solve(self, rhs):
        return solve_forward(self, rhs)

    def solve_adjoint(self, rhs):
        return solve_adjoint(self, rhs)


def _check_m(m):
    m = np.asarray(getattr(m, "values", m), dtype=np.float64)
    if np.any(~(m > 0)):
        raise ValueError("slowness squared must be strictly positive")
    return m


def assemble(m: ModelField, omega: float, literal_boundary: bool = False) -> HelmholtzOperator:
    """Assemble the Helmholtz block for one angular frequency."""
    if not omega > 0:
        raise ValueError("angular frequency must be positive")
    grid = m.grid
    mv = _check_m(m)
    b = boundary_mask(grid)
    damp = omega * (1.0 - b) * np.sqrt(mv)
    diag = omega**2 * b * mv - (damp if literal_boundary else 1j * damp)
    A = (laplacian(grid) + sp.diags(diag)).astype(np.complex128).tocsc()
    return HelmholtzOperator(omega, grid, b, A, mv.copy(), literal_boundary)


def factorize(A: HelmholtzOperator) -> Factorization:
    try:
        lu = splu(A.matrix, permc_spec="MMD_AT_PLUS_A")
    except RuntimeError as exc:  # "Factor is exactly singular"
        raise np.linalg.LinAlgError(f"Helmholtz factorization failed at omega={A.omega}: {exc}") from exc
    return Factorization(A.omega, A, lu)


def solve_forward(F: Factorization, q) -> np.ndarray:
    """Solve ``A u = q``; ``q`` may hold several right-hand sides as columns."""
    q = np.asarray(q, dtype=np.complex128)
    return F.lu.solve(q)


def solve_adjoint(F: Factorization, r) -> np.ndarray:
    """Solve ``A^H v = r``."""
    r = np.asarray(r, dtype=np.complex128)
    return F.lu.solve(r, trans="H")


def jacobian_diag(m, omega: float, grid: Grid, literal_boundary: bool = False) -> np.ndarray:
    """Diagonal of ``G_k = dA/dm_k`` evaluated at cell k, for all k.

    Interior cells give ``w^2``; boundary cells give
    ``-1j * w / (2 sqrt(m_k))``.
    """
    mv = _check_m(m)
    b = boundary_mask(grid)
    bnd = 0.5 * omega * (1.0 - b) / np.sqrt(mv)
    return omega**2 * b - (bnd if literal_boundary else 1j * bnd)


def jacobian_scalar(m: ModelField, omega: float, k: int, u_value: complex,
                    literal_boundary: bool = False) -> complex:
    """The single nonzero of ``G_k u``: entry k."""
    mk = float(m.values[k])
    if not mk > 0:
        raise ValueError("slowness squared must be strictly positive")
    kz, kx = m.grid.unflatten_index(k)
    interior = 0 < kz < m.grid.nz - 1 and 0 < kx < m.grid.nx - 1
    if interior:
        return complex(omega**2 * u_value)
    g = 0.5 * omega / np.sqrt(mk)
    return complex((-g if literal_boundary else -1j * g) * u_value)
