"""Ready-made desk-scale experiments.

The salt scenario reproduces, at laptop scale, the protocol used to show
that relaxing a one-sided TV constraint pass by pass recovers a salt body
and the slow sediments beneath it from a poor starting model.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

from .acquisition import DataSet, Wavelet, default_geometry, generate_data
from .grid import Grid, ModelField, linear_gradient, make_synthetic
from .sgp import SgpParams
from .workflow import EncodingSpec, InversionPlan, PassSpec, continuation_passes

__all__ = ["XI_SCHEDULE", "TAU_FRAC", "DESK_HESSIAN_FLOOR", "DeskScenario", "salt_desk", "desk_plan"]

#: Fractions of the true one-sided TV used by the eight continuation passes.
XI_SCHEDULE = (0.01, 0.05, 0.10, 0.15, 0.20, 0.25, 0.40, 0.90)
#: Fraction of the true TV used whenever a TV constraint is active.
TAU_FRAC = 0.9
#: Relative water level on the pseudo-Hessian for the desk runs.  Without
#: it the deep, weakly illuminated cells take very large scaled steps once
#: the damping has decayed, and the model error jitters from pass to pass.
DESK_HESSIAN_FLOOR = 0.1


@dataclass(frozen=True)
class DeskScenario:
    grid: Grid
    m_true: ModelField
    m_start: ModelField
    data: DataSet
    frequencies: tuple


def salt_desk(nz: int = 60, nx: int = 120, h: float = 20.0, frequencies=tuple(range(3, 11)),
              peak_frequency: float = 15.0) -> DeskScenario:
    """Salt model on a 60 x 120 grid at 20 m, inverse-crime data at 3 to 10 Hz,
    and a linear 1500 to 3000 m/s starting model that knows nothing about the salt."""
    grid = Grid(nz, nx, h)
    m_true = make_synthetic("salt_toy", grid)
    freqs = tuple(float(f) for f in frequencies)
    data = generate_data(m_true, default_geometry(grid), Wavelet(peak_frequency), list(freqs))
    m_start = linear_gradient(grid, 1500.0, 3000.0)
    return DeskScenario(grid, m_true, m_start, data, freqs)


def desk_plan(run: str, scenario: DeskScenario, mode: str = "wri", lam: float = 300.0, seed: int = 1,
              passes: int | None = None, sgp: SgpParams | None = None) -> InversionPlan:
    """Inversion plan for one of the three desk runs.

    Parameters
    ----------
    run : {"A", "B", "C"}
        ``A``: bounds only.  ``B``: bounds and TV at ``TAU_FRAC`` of the
        true TV.  ``C``: as ``B`` plus the one-sided TV continuation
        ``XI_SCHEDULE``.
    passes : int, optional
        Number of passes; defaults to the length of the continuation
        schedule.  For run C a shorter count truncates the schedule.
    """
    n = len(XI_SCHEDULE) if passes is None else int(passes)
    run = run.upper()
    if run == "A":
        specs = [PassSpec()] * n
    elif run == "B":
        specs = [PassSpec(tau_frac=TAU_FRAC)] * n
    elif run == "C":
        specs = continuation_passes(XI_SCHEDULE[:n], TAU_FRAC)
    else:
        raise ValueError(f"unknown desk run {run!r}")
    params = sgp or SgpParams(hessian_floor=DESK_HESSIAN_FLOOR)
    if mode == "fwi":
        params = replace(params, damping_mode="multiplicative")
    return InversionPlan(mode=mode, lam=lam, frequencies=list(scenario.frequencies), passes=specs,
                         encoding=EncodingSpec(True, 2, seed), sgp=params)
