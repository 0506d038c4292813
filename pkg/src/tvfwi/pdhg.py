"""Primal-dual hybrid gradient solver for the convex model-update subproblem

    min_dm  g.dm + 1/2 dm.Heff.dm
    s.t.    lower <= m_n + dm <= upper
            ||m_n + dm||_TV <= tau
            ||max(0, Dz (m_n + dm))||_1 <= xi

with a diagonal positive curvature ``Heff``.  The TV and one-sided TV
constraints are dualized; the box is handled exactly in the primal step.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .constraints import asym_tv_norm, project_hinge_ball, project_l12_ball, tv_norm
from .grid import Bounds, Grid, ModelField

__all__ = [
    "SubproblemSpec",
    "PdhgParams",
    "SubproblemResult",
    "effective_curvature",
    "default_steps",
    "solve_subproblem",
    "project_intersection",
    "quadratic_value",
]


def effective_curvature(hdiag, c, damping_mode="additive", nu=None):
    """``H + c`` (additive) or ``c (H + nu)`` (multiplicative)."""
    hdiag = np.asarray(hdiag, dtype=np.float64)
    if damping_mode == "additive":
        return hdiag + c
    if damping_mode == "multiplicative":
        if nu is None:
            nu = 1e-3 * float(np.max(hdiag))
        return c * (hdiag + nu)
    raise ValueError(f"unknown damping mode {damping_mode!r}")


@dataclass(eq=False)
class SubproblemSpec:
    """Data of one model-update subproblem; ``tau``/``xi`` of ``None`` (or
    ``inf``) switch the corresponding constraint off."""

    g: np.ndarray
    hdiag: np.ndarray
    c: float
    m_n: np.ndarray
    bounds: Bounds
    grid: Grid
    tau: float | None = None
    xi: float | None = None
    damping_mode: str = "additive"
    nu: float | None = None

    def __post_init__(self):
        self.g = np.asarray(self.g, dtype=np.float64)
        self.hdiag = np.asarray(self.hdiag, dtype=np.float64)
        self.m_n = np.asarray(getattr(self.m_n, "values", self.m_n), dtype=np.float64)
        if np.any(self.hdiag < 0):
            raise ValueError("Hessian diagonal must be non-negative")
        if self.tau is not None and math.isinf(self.tau):
            self.tau = None
        if self.xi is not None and math.isinf(self.xi):
            self.xi = None
        if (self.tau is not None and self.tau < 0) or (self.xi is not None and self.xi < 0):
            raise ValueError("constraint radii must be non-negative")
        if np.any(self.heff <= 0):
            raise ValueError("effective curvature must be strictly positive")

    @property
    def heff(self) -> np.ndarray:
        return effective_curvature(self.hdiag, self.c, self.damping_mode, self.nu)


@dataclass
class PdhgParams:
    alpha: float
    delta: float
    tol: float = 1e-4
    max_iters: int = 20000

    def __post_init__(self):
        if not (self.alpha > 0 and self.delta > 0):
            raise ValueError("PDHG step sizes must be positive")


@dataclass(eq=False)
class SubproblemResult:
    delta_m: np.ndarray
    p1: np.ndarray | None
    p2: np.ndarray | None
    iters: int
    converged: bool
    final_relative_changes: tuple
    objective: float = math.nan
    #: distance moved by the feasibility restoration, relative to the step
    polish: float = 0.0
    history: list = field(default_factory=list, repr=False)


def default_steps(hdiag, c, h, damping_mode="additive", nu=None, asym=False, step_ratio=1.0,
                  **kw) -> PdhgParams:
    """Fixed steps ``alpha = 1/max(Heff)``, ``delta = h^2 max(Heff) / 8``.

    With the one-sided TV block present (``asym=True``) the stacked
    operator ``[D; Dz]`` has ``||K^T K|| <= 12/h^2``, so the constant 8
    becomes 12.  ``step_ratio`` rescales ``alpha`` by r and ``delta`` by
    1/r, leaving the product unchanged.
    """
    if not step_ratio > 0:
        raise ValueError("step ratio must be positive")
    hmax = float(np.max(effective_curvature(hdiag, c, damping_mode, nu)))
    if not hmax > 0:
        raise ValueError("maximum effective curvature must be positive")
    bound = 12.0 if asym else 8.0
    return PdhgParams(alpha=step_ratio / hmax, delta=h * h * hmax / (bound * step_ratio), **kw)


def quadratic_value(g, heff, dm) -> float:
    return float(g @ dm + 0.5 * dm @ (heff * dm))


def _grad2d(x, h):
    dx = np.zeros_like(x)
    dz = np.zeros_like(x)
    np.subtract(x[:, 1:], x[:, :-1], out=dx[:, :-1])
    np.subtract(x[1:, :], x[:-1, :], out=dz[:-1, :])
    dx /= h
    dz /= h
    return dx, dz


def _div2d(px, pz, h, out):
    # out = D^T p  (pairs zero on the last column/row are assumed)
    out.fill(0.0)
    out[:, :-1] -= px[:, :-1]
    out[:, 1:] += px[:, :-1]
    out[:-1, :] -= pz[:-1, :]
    out[1:, :] += pz[:-1, :]
    out /= h
    return out


def _dzt2d(q, h, out):
    out.fill(0.0)
    out[:-1, :] -= q[:-1, :]
    out[1:, :] += q[:-1, :]
    out /= h
    return out


def _rel(diff_norm, new_norm):
    if new_norm == 0.0:
        return 0.0 if diff_norm == 0.0 else math.inf
    return diff_norm / new_norm


def solve_subproblem(spec: SubproblemSpec, params: PdhgParams | None = None, warm=None,
                     record_every: int = 0, backend: str = "compiled") -> SubproblemResult:
    """Run the PDHG iteration until both relative changes drop below ``tol``.

    Parameters
    ----------
    spec : SubproblemSpec
    params : PdhgParams, optional
        Defaults to :func:`default_steps`.
    warm : tuple, optional
        ``(p1, p2)`` dual starting points from an earlier solve.
    record_every : int
        If positive, record the quadratic objective every that many
        iterations in ``result.history``.
    backend : {"compiled", "numpy"}
        The compiled loop and the vectorized loop compute the same
        iterates; the latter is kept as a readable reference.

    Returns
    -------
    SubproblemResult
        ``converged`` is False if ``max_iters`` was hit; the last iterate
        is returned either way.
    """
    grid = spec.grid
    h = grid.h
    heff = spec.heff
    if params is None:
        params = default_steps(spec.hdiag, spec.c, h, spec.damping_mode, spec.nu, asym=spec.xi is not None)
    alpha, delta = params.alpha, params.delta
    use_tv, use_asym = spec.tau is not None, spec.xi is not None

    def A2(v):
        return np.reshape(v, grid.shape, order="F")

    m_n = A2(spec.m_n)
    lo = A2(spec.bounds.lower) - m_n
    hi = A2(spec.bounds.upper) - m_n
    g = A2(spec.g)
    denom = A2(heff) + 1.0 / alpha

    if backend not in ("compiled", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    dm = np.zeros(grid.shape, order="F")
    # the TV duals for the last column/row stay identically zero
    px = np.zeros(grid.shape, order="F")
    pz = np.zeros(grid.shape, order="F")
    q2 = np.zeros(grid.shape, order="F")
    if warm is not None:
        w1, w2 = warm
        if use_tv and w1 is not None:
            px = A2(w1[:, 0]).copy()
            pz = A2(w1[:, 1]).copy()
        if use_asym and w2 is not None:
            q2 = A2(w2).copy()
    back = np.zeros(grid.shape)
    tmp = np.zeros(grid.shape)
    pairs = np.empty((grid.size, 2))

    history = []
    converged = False
    rel = (math.inf, math.inf)
    r_tv = delta * spec.tau if use_tv else 0.0
    r_asym = delta * spec.xi if use_asym else 0.0
    it = 0
    if backend == "compiled":
        args = [np.asfortranarray(a, dtype=np.float64) for a in (g, denom, lo, hi, m_n)]
        px, pz, q2 = (np.asfortranarray(a) for a in (px, pz, q2))
        chunk = record_every if record_every else params.max_iters
        while it < params.max_iters:
            n = min(chunk, params.max_iters - it)
            it, converged, rp, rm = _kernels.pdhg_loop(
                *args, dm, px, pz, q2, alpha, delta, h, r_tv, r_asym, use_tv, use_asym,
                params.tol, it, n)
            rel = (rp, rm)
            if record_every and it % record_every == 0:
                history.append(quadratic_value(spec.g, heff, dm.ravel(order="F")))
            if converged:
                break
    for it in range(it + 1, params.max_iters + 1) if backend == "numpy" else ():
        x = m_n + dm
        back.fill(0.0)
        dual_diff2 = 0.0
        dual_norm2 = 0.0
        gx, gz = _grad2d(x, h)
        if use_tv:
            zx = px + delta * gx
            zz = pz + delta * gz
            pairs[:, 0] = zx.ravel()
            pairs[:, 1] = zz.ravel()
            proj = project_l12_ball(pairs, r_tv, method="sort")
            nx_ = zx - proj[:, 0].reshape(grid.shape)
            nz_ = zz - proj[:, 1].reshape(grid.shape)
            back += _div2d(2 * nx_ - px, 2 * nz_ - pz, h, tmp)
            dual_diff2 += float(np.sum((nx_ - px) ** 2) + np.sum((nz_ - pz) ** 2))
            dual_norm2 += float(np.sum(nx_**2) + np.sum(nz_**2))
            px, pz = nx_, nz_
        if use_asym:
            z2 = q2 + delta * gz
            proj2 = project_hinge_ball(z2.ravel(), r_asym, method="sort").reshape(grid.shape)
            n2 = z2 - proj2
            back += _dzt2d(2 * n2 - q2, h, tmp)
            dual_diff2 += float(np.sum((n2 - q2) ** 2))
            dual_norm2 += float(np.sum(n2**2))
            q2 = n2
        trial = (-g + dm / alpha - back) / denom
        new = np.minimum(np.maximum(trial, lo), hi)
        rel_p = _rel(math.sqrt(dual_diff2), math.sqrt(dual_norm2))
        rel_m = _rel(float(np.linalg.norm(new - dm)), float(np.linalg.norm(new)))
        dm = new
        rel = (rel_p, rel_m)
        if record_every and it % record_every == 0:
            history.append(quadratic_value(spec.g, heff, dm.ravel(order="F")))
        if max(rel) <= params.tol and it > 1:
            converged = True
            break

    delta_m = dm.ravel(order="F")
    delta_m, polish = _restore_feasibility(spec, delta_m)
    p1 = np.column_stack([px.ravel(order="F"), pz.ravel(order="F")]) if use_tv else None
    p2 = q2.ravel(order="F") if use_asym else None
    return SubproblemResult(
        delta_m=delta_m,
        p1=p1,
        p2=p2,
        iters=it,
        converged=converged,
        final_relative_changes=rel,
        objective=quadratic_value(spec.g, heff, delta_m),
        polish=polish,
        history=history,
    )


def _restore_feasibility(spec, delta_m):
    """Pull a slightly infeasible PDHG iterate back into the TV balls.

    The iterate is moved toward a feasible anchor by bisection on the
    segment between them; both TV norms are convex along it and the box is
    preserved because both ends lie in it.  Candidate anchors are

    1. the current model ``m_n``, which merely shortens the step;
    2. the column-wise running minimum down depth (only with the one-sided
       ball), which has no depth increase of slowness squared;
    3. a constant, box-feasible field, which has zero TV of both kinds.

    Among the feasible anchors the one whose restored point lies closest to
    the iterate wins.  Returns the new step and the distance moved relative
    to the length of the unrestored step.
    """
    grid = spec.grid
    lower, upper = spec.bounds.lower, spec.bounds.upper

    def feasible(x):
        if np.any(x < lower) or np.any(x > upper):
            return False
        if spec.tau is not None and tv_norm(grid, x) > spec.tau:
            return False
        return spec.xi is None or asym_tv_norm(grid, x) <= spec.xi

    x = spec.m_n + delta_m
    if feasible(x):
        return delta_m, 0.0
    anchors = [spec.m_n]
    if spec.xi is not None:
        env = np.minimum.accumulate(grid.to_array(x), axis=0).ravel(order="F")
        anchors.append(np.minimum(np.maximum(env, lower), upper))
    lo_c, hi_c = float(np.max(lower)), float(np.min(upper))
    if lo_c <= hi_c:
        anchors.append(np.full_like(x, min(max(float(np.mean(x)), lo_c), hi_c)))
    best, best_dist = None, math.inf
    for a in anchors:
        if not feasible(a):
            continue
        lo, hi = 0.0, 1.0
        for _ in range(50):
            mid = 0.5 * (lo + hi)
            if feasible(a + mid * (x - a)):
                lo = mid
            else:
                hi = mid
        cand = a + lo * (x - a)
        dist = float(np.linalg.norm(cand - x))
        if dist < best_dist:
            best, best_dist = cand, dist
    if best is None:
        return delta_m, 0.0
    scale = float(np.linalg.norm(delta_m))
    return best - spec.m_n, (best_dist / scale if scale > 0 else math.inf)


def project_intersection(m0: ModelField, bounds: Bounds, tau=None, xi=None,
                         params: PdhgParams | None = None, warm=None) -> tuple[ModelField, SubproblemResult]:
    """Euclidean projection of ``m0`` onto box, TV ball and one-sided TV ball.

    Solves the subproblem with zero gradient, unit curvature and no damping.
    """
    grid = m0.grid
    M = grid.size
    spec = SubproblemSpec(
        g=np.zeros(M), hdiag=np.ones(M), c=0.0, m_n=m0.values, bounds=bounds,
        grid=grid, tau=tau, xi=xi,
    )
    res = solve_subproblem(spec, params, warm)
    return m0.with_values(m0.values + res.delta_m), res
