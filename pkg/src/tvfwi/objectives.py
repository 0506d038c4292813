"""Data-misfit objectives: reduced (FWI) and penalty/extended (WRI).

Both return the value, the gradient with respect to slowness squared and a
non-negative diagonal Gauss-Newton type Hessian approximation.  With
``u = A^{-1} q`` and ``G_k = dA/dm_k`` diagonal,

* FWI:  ``f = 1/2 sum_j ||P u_j - d_j||^2``,
  ``grad_k = -Re sum_j conj(v_jk) (G_k u_j)_k`` with ``v_j = A^{-H} P^T (P u_j - d_j)``,
  ``H_kk = sum_j |(G_k u_j)_k|^2``.
* WRI:  ``f = min_u 1/2 ||P u - d||^2 + lam^2/2 ||A u - q||^2``,
  ``grad_k = Re sum_j conj(v_jk) (G_k u_j)_k`` with ``v_j = lam^2 (A u_j - q_j)``,
  ``H_kk = lam^2 sum_j |(G_k u_j)_k|^2``.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .acquisition import DataSet, EncodingWeights, SamplingOperator, encode
from .grid import Grid, ModelField
from .helmholtz import assemble, factorize, jacobian_diag

__all__ = [
    "ObjectiveEval",
    "WriConfig",
    "fwi_eval",
    "wri_eval",
    "wri_augmented_solve",
    "BatchObjective",
]


@dataclass(frozen=True, eq=False)
class ObjectiveEval:
    value: float
    gradient: np.ndarray
    hessian_diag: np.ndarray


@dataclass(frozen=True)
class WriConfig:
    lam: float = 1.0

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("WRI penalty weight must be positive")


def n_threads() -> int:
    """Worker count from ``TVFWI_THREADS`` (0 or unset means all cores)."""
    try:
        n = int(os.environ.get("TVFWI_THREADS", "0"))
    except ValueError:
        n = 0
    return n if n > 0 else (os.cpu_count() or 1)


def _map(func, items):
    items = list(items)
    workers = min(n_threads(), len(items))
    if workers <= 1:
        return [func(it) for it in items]
    with ThreadPoolExecutor(workers) as pool:
        return list(pool.map(func, items))


def _values(m):
    return np.asarray(getattr(m, "values", m), dtype=np.float64)


class _FreqState:
    """Model-dependent work for one frequency, reusable across sources."""

    def __init__(self, grid, m, freq, P, lam=None, literal_boundary=False):
        self.omega = 2 * np.pi * freq
        self.F = factorize(assemble(ModelField(grid, m), self.omega, literal_boundary))
        self.J = jacobian_diag(m, self.omega, grid, literal_boundary)
        self.P = P
        self.lam = lam
        if lam is not None:
            # receiver-space form of (A^H A + lam^-2 P^T P)^{-1}
            Pt = P.adjoint(np.eye(P.n_rec, dtype=np.complex128))
            self.W = self.F.solve_adjoint(Pt)
            K = self.W.conj().T @ self.W
            K[np.diag_indices_from(K)] += lam**2
            self.K = sla.cho_factor(K)


def _fwi_freq(state, q, d, need_grad=True):
    P = state.P
    U = state.F.solve(q)
    R = P.sample(U) - d
    value = 0.5 * float(np.vdot(R, R).real)
    if not need_grad:
        return value, None, None
    V = state.F.solve_adjoint(P.adjoint(R))
    GU = state.J[:, None] * U
    grad = -np.sum(np.real(np.conj(V) * GU), axis=1)
    hdiag = np.sum(np.abs(GU) ** 2, axis=1)
    return value, grad, hdiag


def _wri_fields(state, q, d):
    """Return ``(u_lambda, A u_lambda - q)`` for every source column."""
    U0 = state.F.solve(q)
    R0 = d - state.P.sample(U0)
    E = state.W @ sla.cho_solve(state.K, R0)
    return U0 + state.F.solve(E), E


def _wri_freq(state, q, d, need_grad=True):
    lam2 = state.lam**2
    U, E = _wri_fields(state, q, d)
    R = state.P.sample(U) - d
    value = 0.5 * float(np.vdot(R, R).real) + 0.5 * lam2 * float(np.vdot(E, E).real)
    if not need_grad:
        return value, None, None
    V = lam2 * E
    GU = state.J[:, None] * U
    grad = np.sum(np.real(np.conj(V) * GU), axis=1)
    hdiag = lam2 * np.sum(np.abs(GU) ** 2, axis=1)
    return value, grad, hdiag


def _reduce(results, M):
    value = 0.0
    grad = np.zeros(M)
    hdiag = np.zeros(M)
    for v, g, h in results:  # fixed order
        value += v
        if g is not None:
            grad += g
            hdiag += h
    return ObjectiveEval(value, grad, hdiag)


def _check_inputs(m, data, P):
    if data.source_terms is None:
        raise ValueError("data set carries no source terms")
    if P.n_rec != data.n_rec:
        raise ValueError("sampling operator and data disagree on receiver count")
    mv = _values(m)
    if np.any(~(mv > 0)):
        raise ValueError("slowness squared must be strictly positive")
    return mv


def fwi_eval(m: ModelField, data: DataSet, P: SamplingOperator, literal_boundary=False) -> ObjectiveEval:
    """Reduced adjoint-state objective, summed over all frequencies and sources."""
    mv = _check_inputs(m, data, P)
    grid = m.grid

    def one(i):
        st = _FreqState(grid, mv, data.frequencies[i], P, None, literal_boundary)
        return _fwi_freq(st, data.source_terms[i], data.values[i].T)

    return _reduce(_map(one, range(data.frequencies.size)), grid.size)


def wri_eval(m: ModelField, data: DataSet, P: SamplingOperator, cfg: WriConfig,
             literal_boundary=False) -> ObjectiveEval:
    """Penalty objective with the wavefield eliminated in closed form."""
    mv = _check_inputs(m, data, P)
    grid = m.grid

    def one(i):
        st = _FreqState(grid, mv, data.frequencies[i], P, cfg.lam, literal_boundary)
        return _wri_freq(st, data.source_terms[i], data.values[i].T)

    return _reduce(_map(one, range(data.frequencies.size)), grid.size)


def wri_augmented_solve(m: ModelField, omega: float, q, d, lam: float, P: SamplingOperator,
                        method: str = "receiver", literal_boundary=False) -> np.ndarray:
    """Wavefield minimizing ``1/2 ||P u - d||^2 + lam^2/2 ||A u - q||^2``.

    ``method="receiver"`` reuses the LU of ``A`` and solves a small dense
    system in receiver space; ``method="normal"`` factorizes
    ``A^H A + lam^-2 P^T P`` directly.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    q = np.asarray(q, dtype=np.complex128)
    d = np.asarray(d, dtype=np.complex128)
    if method == "receiver":
        st = _FreqState(m.grid, _values(m), omega / (2 * np.pi), P, lam, literal_boundary)
        return _wri_fields(st, q, d)[0]
    if method == "normal":
        A = assemble(m, omega, literal_boundary).matrix
        PtP = sp.csc_matrix(
            (np.ones(P.n_rec), (P.receiver_cells, P.receiver_cells)), shape=A.shape
        )
        N = (A.conj().T @ A + PtP / lam**2).tocsc()
        rhs = A.conj().T @ q + P.adjoint(d) / lam**2
        return splu(N).solve(rhs)
    raise ValueError(f"unknown method {method!r}")


class BatchObjective:
    """Objective over a frequency batch, with optional source encoding.

    Factorizations are cached for the most recent model, so re-evaluating
    the same model under new encoding weights costs no new factorization.

    Parameters
    ----------
    grid : Grid
    data : DataSet
        Data restricted to the batch, with source terms.
    P : SamplingOperator
    mode : {"wri", "fwi"}
    lam : float
        WRI penalty weight (ignored for FWI).
    """

    def __init__(self, grid: Grid, data: DataSet, P: SamplingOperator, mode: str = "wri",
                 lam: float = 1.0, literal_boundary: bool = False):
        mode = mode.lower()
        if mode not in ("wri", "fwi"):
            raise ValueError(f"unknown objective mode {mode!r}")
        if data.source_terms is None:
            raise ValueError("data set carries no source terms")
        self.grid = grid
        self.data = data
        self.P = P
        self.mode = mode
        self.lam = float(lam) if mode == "wri" else None
        self.literal_boundary = literal_boundary
        self.weights = None
        self._active = data
        self._cache_m = None
        self._cache_states = None
        self.n_evals = 0

    def set_weights(self, weights: EncodingWeights | None):
        self.weights = weights
        self._active = self.data if weights is None else encode(self.data, weights)

    def _states(self, mv):
        if self._cache_m is not None and np.array_equal(self._cache_m, mv):
            return self._cache_states
        freqs = self.data.frequencies
        states = _map(lambda f: _FreqState(self.grid, mv, f, self.P, self.lam, self.literal_boundary), freqs)
        self._cache_m = mv.copy()
        self._cache_states = states
        return states

    def _run(self, m, need_grad):
        mv = _values(m)
        if np.any(~(mv > 0)):
            raise ValueError("slowness squared must be strictly positive")
        self.n_evals += 1
        states = self._states(mv)
        kernel = _wri_freq if self.mode == "wri" else _fwi_freq
        data = self._active
        results = [kernel(st, data.source_terms[i], data.values[i].T, need_grad)
                   for i, st in enumerate(states)]
        return _reduce(results, self.grid.size)

    def evaluate(self, m) -> ObjectiveEval:
        return self._run(m, True)

    def value(self, m) -> float:
        return self._run(m, False).value

    def __call__(self, m) -> ObjectiveEval:
        return self.evaluate(m)
