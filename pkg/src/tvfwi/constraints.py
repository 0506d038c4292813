"""Difference operators, TV norms and the elementary projections.

All fields are flat depth-fastest vectors (see :mod:`tvfwi.grid`).  A dual
pair field ``p`` has shape ``(M, 2)`` with columns (horizontal, vertical).
"""
from __future__ import annotations

import numpy as np

from .grid import Bounds, Grid

__all__ = [
    "apply_D",
    "apply_Dt",
    "apply_Dz",
    "apply_Dzt",
    "tv_norm",
    "asym_tv_norm",
    "project_box",
    "project_simplex",
    "project_l12_ball",
    "project_hinge_ball",
]

SIMPLEX_TOL = 1e-12
SIMPLEX_MAXITER = 200


def _as_array(grid: Grid, m):
    m = getattr(m, "values", m)
    return np.reshape(m, grid.shape, order="F")


def apply_D(grid: Grid, m) -> np.ndarray:
    """Forward-difference gradient, zero across the last row/column."""
    a = _as_array(grid, m)
    dx = np.zeros(grid.shape)
    dz = np.zeros(grid.shape)
    dx[:, :-1] = a[:, 1:] - a[:, :-1]
    dz[:-1, :] = a[1:, :] - a[:-1, :]
    p = np.empty((grid.size, 2))
    p[:, 0] = dx.ravel(order="F")
    p[:, 1] = dz.ravel(order="F")
    return p / grid.h


def apply_Dt(grid: Grid, p: np.ndarray) -> np.ndarray:
    """Adjoint of :func:`apply_D` (a negative divergence)."""
    px = np.reshape(p[:, 0], grid.shape, order="F")
    pz = np.reshape(p[:, 1], grid.shape, order="F")
    out = np.zeros(grid.shape)
    out[:, :-1] -= px[:, :-1]
    out[:, 1:] += px[:, :-1]
    out[:-1, :] -= pz[:-1, :]
    out[1:, :] += pz[:-1, :]
    return out.ravel(order="F") / grid.h


def apply_Dz(grid: Grid, m) -> np.ndarray:
    """Depth differences ``(m[k+1,l] - m[k,l]) / h``; zero on the last row."""
    a = _as_array(grid, m)
    dz = np.zeros(grid.shape)
    dz[:-1, :] = a[1:, :] - a[:-1, :]
    return dz.ravel(order="F") / grid.h


def apply_Dzt(grid: Grid, q: np.ndarray) -> np.ndarray:
    qz = np.reshape(q, grid.shape, order="F")
    out = np.zeros(grid.shape)
    out[:-1, :] -= qz[:-1, :]
    out[1:, :] += qz[:-1, :]
    return out.ravel(order="F") / grid.h


def tv_norm(grid: Grid, m) -> float:
    """Isotropic TV: sum over cells of the 2-norm of the forward gradient."""
    return float(np.sum(np.hypot(*apply_D(grid, m).T)))


def asym_tv_norm(grid: Grid, m) -> float:
    """One-sided TV: total positive depth increase of slowness squared."""
    return float(np.sum(np.maximum(0.0, apply_Dz(grid, m))))


def project_box(m, bounds: Bounds) -> np.ndarray:
    m = getattr(m, "values", m)
    return np.minimum(np.maximum(m, bounds.lower), bounds.upper)


def _simplex_threshold_bisection(z, s):
    # sum(max(0, z - a)) is continuous and decreasing in a
    lo = np.min(z) - s / z.size
    hi = np.max(z)
    a = 0.5 * (lo + hi)
    tol = SIMPLEX_TOL * max(1.0, s)
    for _ in range(SIMPLEX_MAXITER):
        a = 0.5 * (lo + hi)
        excess = np.sum(np.maximum(0.0, z - a)) - s
        if abs(excess) <= tol:
            break
        if excess > 0:
            lo = a
        else:
            hi = a
    # the active set is known now; solve for the threshold exactly
    active = z > a
    if np.any(active):
        a = (np.sum(z[active]) - s) / np.count_nonzero(active)
    return a


def _simplex_threshold_sort(z, s):
    u = np.sort(z)[::-1]
    css = np.cumsum(u) - s
    ind = np.arange(1, z.size + 1)
    rho = np.nonzero(u - css / ind > 0)[0][-1]
    return css[rho] / (rho + 1)


def project_simplex(z, s: float = 1.0, method: str = "bisection") -> np.ndarray:
    """Euclidean projection onto ``{x >= 0, sum(x) = s}``.

    Parameters
    ----------
    z : array_like
        Point to project (1-D).
    s : float
        Simplex radius, ``s > 0``.
    method : {"bisection", "sort"}
        Bisection on the threshold ``a`` with ``sum(max(0, z - a)) = s``,
        or the sort-based closed form (faster for long vectors).
    """
    z = np.asarray(z, dtype=np.float64).reshape(-1)
    if z.size == 0:
        raise ValueError("cannot project an empty vector")
    if not s > 0:
        raise ValueError(f"simplex radius must be positive, got {s}")
    if method == "bisection":
        a = _simplex_threshold_bisection(z, s)
    elif method == "sort":
        a = _simplex_threshold_sort(z, s)
    else:
        raise ValueError(f"unknown method {method!r}")
    return np.maximum(0.0, z - a)


def project_l12_ball(p: np.ndarray, r: float, method: str = "bisection") -> np.ndarray:
    """Project a pair field onto ``{p : sum_i ||p_i||_2 <= r}``."""
    if r < 0:
        raise ValueError("ball radius must be non-negative")
    norms = np.hypot(p[:, 0], p[:, 1])
    if np.sum(norms) <= r:
        return p
    if r == 0:
        return np.zeros_like(p)
    t = project_simplex(norms, r, method=method)
    scale = np.divide(t, norms, out=np.zeros_like(t), where=norms > 0)
    return p * scale[:, None]


def project_hinge_ball(z: np.ndarray, r: float, method: str = "bisection") -> np.ndarray:
    """Project onto ``{x : ||max(0, x)||_1 <= r}``.

    Non-positive entries are left alone; the positive part is projected
    onto the simplex of radius ``r``.
    """
    if r < 0:
        raise ValueError("ball radius must be non-negative")
    z = np.asarray(z, dtype=np.float64)
    pos = np.maximum(0.0, z)
    if np.sum(pos) <= r:
        return z
    out = z.copy()
    mask = z > 0
    if r == 0:
        out[mask] = 0.0
    else:
        out[mask] = project_simplex(pos[mask], r, method=method)
    return out
