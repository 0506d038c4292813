"""Scaled gradient projection with implicit trust-region damping.

Each outer iteration minimizes the damped quadratic model of the objective
over the constraint set (see :mod:`tvfwi.pdhg`) and accepts the step only if

    f(m + dm) - f(m) <= sigma * (dm.g + 1/2 dm.Heff.dm).

Rejected steps multiply the damping by ``xi2`` and retry with the same
gradient and Hessian; accepted steps divide it by ``xi1``.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .constraints import asym_tv_norm, tv_norm
from .grid import Bounds, Grid, ModelField
from .pdhg import PdhgParams, SubproblemSpec, default_steps, solve_subproblem

__all__ = [
    "ConstraintSet",
    "SgpParams",
    "SgpStep",
    "SgpTrace",
    "SgpResult",
    "SgpStagnation",
    "minimize",
    "clamp_hessian",
]

FEAS_SLACK = 1e-6
ROUNDOFF = 100 * np.finfo(np.float64).eps


class SgpStagnation(RuntimeError):
    """Damping grew without bound: no acceptable step could be found."""


@dataclass
class ConstraintSet:
    bounds: Bounds
    tau: float | None = None
    xi: float | None = None

    def __post_init__(self):
        if self.tau is not None and math.isinf(self.tau):
            self.tau = None
        if self.xi is not None and math.isinf(self.xi):
            self.xi = None

    def violation(self, grid: Grid, m) -> dict:
        m = getattr(m, "values", m)
        out = {
            "box": float(max(np.max(self.bounds.lower - m), np.max(m - self.bounds.upper), 0.0)),
        }
        if self.tau is not None:
            out["tv"] = max(tv_norm(grid, m) - self.tau, 0.0) / max(self.tau, 1e-300)
        if self.xi is not None:
            out["asym_tv"] = max(asym_tv_norm(grid, m) - self.xi, 0.0) / max(self.xi, 1e-300)
        return out

    def is_feasible(self, grid: Grid, m, slack: float = FEAS_SLACK) -> bool:
        v = self.violation(grid, m)
        return v["box"] == 0.0 and all(v.get(k, 0.0) <= slack for k in ("tv", "asym_tv"))


@dataclass
class SgpParams:
    """Outer-loop settings.  ``c0=None`` picks ``1e-2 max(H)`` for additive
    damping and 1 for multiplicative damping.

    ``hessian_floor`` is a relative water level: Hessian diagonal entries
    below ``hessian_floor * max(H)`` are raised to it, which keeps poorly
    illuminated cells from receiving huge scaled steps once the damping
    has decayed.  Zero disables it.

    ``max_polish`` bounds how far the feasibility restoration after a
    PDHG solve may move the step, relative to the step length.  A solve that needs more is treated like a failed one: the step is
    rejected and the damping raised, which makes the next subproblem
    easier to solve accurately."""

    sigma: float = 0.1
    xi1: float = 2.0
    xi2: float = 2.0
    rho: float = 1e-12
    eps: float = 1e-4
    c0: float | None = None
    max_outer: int = 25
    lambda_h_min: float | None = None
    lambda_h_max: float | None = None
    damping_mode: str = "additive"
    nu: float | None = None
    pdhg_tol: float = 1e-4
    pdhg_max_iters: int = 20000
    pdhg_step_ratio: float = 0.3
    max_rejections: int = 60
    stagnation_factor: float = 1e12
    hessian_floor: float = 0.0
    max_polish: float = 0.5

    def __post_init__(self):
        if not (0 < self.sigma <= 1):
            raise ValueError("sigma must lie in (0, 1]")
        if not (self.xi1 > 1 and self.xi2 > 1):
            raise ValueError("damping factors must exceed 1")
        if not (self.rho > 0 and self.eps > 0):
            raise ValueError("rho and eps must be positive")
        if not 0.0 <= self.hessian_floor < 1.0:
            raise ValueError("hessian_floor must lie in [0, 1)")
        if not self.max_polish >= 0.0:
            raise ValueError("max_polish must be nonnegative")
        if self.damping_mode not in ("additive", "multiplicative"):
            raise ValueError(f"unknown damping mode {self.damping_mode!r}")


@dataclass
class SgpStep:
    outer: int
    objective: float
    objective_prev: float
    predicted: float
    c: float
    step_norm: float
    inner_iters: int
    inner_converged: bool
    accepted: bool
    seconds: float


@dataclass
class SgpTrace:
    steps: list = field(default_factory=list)

    def append(self, step: SgpStep):
        self.steps.append(step)

    @property
    def accepted(self) -> list:
        return [s for s in self.steps if s.accepted]

    @property
    def accepted_values(self) -> np.ndarray:
        return np.array([s.objective for s in self.accepted])

    def max_consecutive_rejections(self) -> int:
        best = run = 0
        for s in self.steps:
            run = 0 if s.accepted else run + 1
            best = max(best, run)
        return best


@dataclass(eq=False)
class SgpResult:
    m: ModelField
    trace: SgpTrace
    duals: tuple
    c: float
    value: float


def clamp_hessian(hdiag, rho, lam_min=None, lam_max=None, floor_rel=0.0):
    """Clamp the Hessian diagonal into ``[max(rho, lam_min, floor_rel * max), lam_max]``;
    ``lam_max`` defaults to ``1e12 * median``."""
    hdiag = np.asarray(hdiag, dtype=np.float64)
    lo = max(rho, lam_min or 0.0, floor_rel * float(np.max(hdiag)))
    med = float(np.median(hdiag))
    if med <= 0:
        med = float(np.max(hdiag))
    hi = lam_max if lam_max is not None else 1e12 * med
    return np.clip(hdiag, lo, max(hi, lo))


def _value(objective, m):
    fn = getattr(objective, "value", None)
    return fn(m) if fn is not None else objective.evaluate(m).value


def minimize(objective, constraints: ConstraintSet, m0: ModelField, params: SgpParams | None = None,
             warm_duals=None, on_accept=None, callback=None) -> SgpResult:
    """Minimize ``objective`` over ``constraints`` starting at feasible ``m0``.

    Parameters
    ----------
    objective
        Object with ``evaluate(m) -> ObjectiveEval`` and optionally a
        cheaper ``value(m) -> float``.
    constraints : ConstraintSet
    m0 : ModelField
        Feasible starting model.
    params : SgpParams
    warm_duals : tuple, optional
        Starting PDHG duals ``(p1, p2)``.
    on_accept : callable, optional
        Called as ``on_accept(n)`` after the n-th accepted step and before
        the objective is re-evaluated at the new model (used to redraw
        source-encoding weights).
    callback : callable, optional
        Called with every :class:`SgpStep` and the current model values.

    Raises
    ------
    SgpStagnation
        If the damping exceeds ``stagnation_factor * c0`` or more than
        ``max_rejections`` consecutive steps are rejected.
    """
    params = params or SgpParams()
    grid = m0.grid
    if not constraints.is_feasible(grid, m0.values):
        raise ValueError(f"starting model is infeasible: {constraints.violation(grid, m0.values)}")
    m = m0.values.copy()
    ev = objective.evaluate(m)
    f = ev.value
    g = ev.gradient
    H = clamp_hessian(ev.hessian_diag, params.rho, params.lambda_h_min, params.lambda_h_max, params.hessian_floor)
    if params.c0 is not None:
        c = float(params.c0)
    elif params.damping_mode == "additive":
        c = 1e-2 * float(np.max(H))
    else:
        c = 1.0
    c_start = c
    lam_min = float(np.min(H)) if params.lambda_h_min is None else params.lambda_h_min
    c_floor = max(0.0, params.rho - lam_min)
    if not c > c_floor:
        raise ValueError("initial damping must exceed max(0, rho - lambda_min)")

    trace = SgpTrace()
    duals = warm_duals
    n = 0
    rejections = 0
    t_last = time.perf_counter()
    while n < params.max_outer:
        spec = SubproblemSpec(g, H, c, m, constraints.bounds, grid, constraints.tau, constraints.xi,
                              params.damping_mode, params.nu)
        steps = default_steps(H, c, grid.h, params.damping_mode, params.nu, asym=constraints.xi is not None,
                              step_ratio=params.pdhg_step_ratio, tol=params.pdhg_tol, max_iters=params.pdhg_max_iters)
        res = solve_subproblem(spec, steps, warm=duals)
        dm = res.delta_m
        predicted = float(g @ dm + 0.5 * dm @ (spec.heff * dm))
        solved = res.converged and res.polish <= params.max_polish
        f_new = _value(objective, m + dm) if solved else math.nan
        accepted = solved and (f_new - f <= params.sigma * predicted)
        now = time.perf_counter()
        step = SgpStep(n, f_new, f, predicted, c, float(np.linalg.norm(dm)), res.iters,
                       res.converged, accepted, now - t_last)
        t_last = now
        trace.append(step)
        if not accepted:
            if solved and abs(f_new - f) <= ROUNDOFF * abs(f):
                # the decrease test failed only at rounding level: stationary
                if callback is not None:
                    callback(step, m)
                break
            rejections += 1
            c *= params.xi2
            if callback is not None:
                callback(step, m)
            if rejections > params.max_rejections or c > params.stagnation_factor * c_start:
                raise SgpStagnation(
                    f"{rejections} consecutive rejections, damping {c:.3e} (start {c_start:.3e})"
                )
            continue
        rejections = 0
        m_new = m + dm
        duals = (res.p1, res.p2)
        if c / params.xi1 > c_floor:
            c = c / params.xi1
        n += 1
        rel_change = float(np.linalg.norm(m_new - m) / np.linalg.norm(m_new))
        m = m_new
        if callback is not None:
            callback(step, m)
        if rel_change <= params.eps or n >= params.max_outer:
            f = f_new
            break
        if on_accept is not None:
            on_accept(n)
        ev = objective.evaluate(m)
        f = ev.value
        g = ev.gradient
        H = clamp_hessian(ev.hessian_diag, params.rho, params.lambda_h_min, params.lambda_h_max, params.hessian_floor)
    return SgpResult(m0.with_values(m), trace, duals, c, f)
