"""Frequency continuation, multi-pass inversion and constraint schedules."""
from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .acquisition import DataSet, EncodingWeights, Geometry
from .constraints import asym_tv_norm, tv_norm
from .grid import Bounds, ModelField, model_error
from .objectives import BatchObjective
from .pdhg import PdhgParams, project_intersection
from .sgp import ConstraintSet, SgpParams, SgpStagnation, minimize

__all__ = [
    "PassSpec",
    "EncodingSpec",
    "InversionPlan",
    "RunLog",
    "InversionAborted",
    "make_batches",
    "continuation_passes",
    "run_pass",
    "run_inversion",
]

RUNLOG_COLUMNS = ["pass", "batch", "outer", "objective", "c_n", "inner_iters", "model_error", "seconds",
                  "accepted", "objective_prev", "predicted", "freqs"]


class InversionAborted(RuntimeError):
    """An inversion stopped early; ``log`` and ``model`` hold what was done."""

    def __init__(self, message, log, model):
        super().__init__(message)
        self.log = log
        self.model = model


@dataclass
class PassSpec:
    """Constraint radii for one pass.  Absolute values take precedence
    over fractions of a reference model; all ``None`` disables the
    constraint."""

    tau: float | None = None
    tau_frac: float | None = None
    xi: float | None = None
    xi_frac: float | None = None

    def __post_init__(self):
        for name in ("tau_frac", "xi_frac"):
            v = getattr(self, name)
            if v is not None and not (0 < v < math.inf):
                raise ValueError(f"{name} must lie in (0, inf), got {v}")
        if self.tau is not None and not self.tau > 0:
            raise ValueError("tau must be positive")
        if self.xi is not None and not self.xi >= 0:
            raise ValueError("xi must be non-negative")

    @property
    def needs_reference(self) -> bool:
        return (self.tau is None and self.tau_frac is not None) or (self.xi is None and self.xi_frac is not None)

    def radii(self, reference: ModelField | None = None) -> tuple:
        if self.needs_reference and reference is None:
            raise ValueError("fractional radii need a reference model")
        tau, xi = self.tau, self.xi
        if tau is None and self.tau_frac is not None:
            tau = self.tau_frac * tv_norm(reference.grid, reference)
        if xi is None and self.xi_frac is not None:
            xi = self.xi_frac * asym_tv_norm(reference.grid, reference)
        return tau, xi


@dataclass
class EncodingSpec:
    enabled: bool = False
    n_super: int = 2
    seed: int = 0


@dataclass
class InversionPlan:
    mode: str = "wri"
    lam: float = 1.0
    frequencies: list = field(default_factory=lambda: [3.0, 4.0])
    passes: list = field(default_factory=lambda: [PassSpec()])
    encoding: EncodingSpec = field(default_factory=EncodingSpec)
    vmin: float = 1400.0
    vmax: float = 5000.0
    sgp: SgpParams = field(default_factory=SgpParams)
    literal_boundary: bool = False

    def __post_init__(self):
        self.mode = self.mode.lower()
        if self.mode not in ("wri", "fwi"):
            raise ValueError(f"unknown mode {self.mode!r}")
        f = np.asarray(self.frequencies, dtype=float)
        if f.size < 2 or np.any(np.diff(f) <= 0):
            raise ValueError("need at least two strictly increasing frequencies")
        if not self.passes:
            raise ValueError("plan has no passes")
        if self.mode == "fwi" and self.sgp.damping_mode == "additive":
            self.sgp = replace(self.sgp, damping_mode="multiplicative")

    def bounds(self, grid) -> Bounds:
        return Bounds.from_velocity(grid, self.vmin, self.vmax)


@dataclass
class RunLog:
    rows: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    pass_errors: list = field(default_factory=list)
    pass_models: list = field(default_factory=list)
    #: final damping of the last batch, carried forward in multiplicative mode
    damping: float | None = None

    def column(self, name: str, accepted_only: bool = False) -> np.ndarray:
        rows = [r for r in self.rows if r["accepted"] or not accepted_only]
        return np.array([r[name] for r in rows])

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(RUNLOG_COLUMNS)
            for r in self.rows:
                writer.writerow([_fmt(r[c]) for c in RUNLOG_COLUMNS])

    @staticmethod
    def read_csv(path) -> list:
        with open(path, newline="") as fh:
            return list(csv.DictReader(fh))


def _fmt(v):
    if isinstance(v, bool):
        return int(v)
    if isinstance(v, float):
        return repr(v)
    return v


def make_batches(freqs) -> list:
    """Overlapping pairs ``[(f1, f2), (f2, f3), ...]``."""
    freqs = list(freqs)
    if len(freqs) < 2:
        raise ValueError("need at least two frequencies")
    return [(freqs[i], freqs[i + 1]) for i in range(len(freqs) - 1)]


def continuation_passes(xi_fracs, tau_frac=None) -> list:
    """One pass per one-sided TV fraction, TV fraction fixed."""
    return [PassSpec(tau_frac=tau_frac, xi_frac=x) for x in xi_fracs]


def _weights(plan, n_src, pass_index, batch_index, outer):
    return EncodingWeights.draw(plan.encoding.n_super, n_src, plan.encoding.seed, (pass_index, batch_index, outer))


def run_pass(plan: InversionPlan, pass_index: int, data: DataSet, m_in: ModelField,
             m_true: ModelField | None = None, reference: ModelField | None = None,
             log: RunLog | None = None, geometry: Geometry | None = None) -> tuple:
    """One sweep through all frequency batches, warm-starting each batch
    from the previous one.

    Returns ``(m_out, log)``.  Raises :class:`InversionAborted` if a batch
    stagnates; the log keeps the rows written so far.
    """
    log = log if log is not None else RunLog()
    geometry = geometry or data.geometry
    if geometry is None:
        raise ValueError("data set has no geometry")
    grid = m_in.grid
    P = geometry.sampling
    spec = plan.passes[pass_index]
    tau, xi = spec.radii(reference if reference is not None else m_true)
    constraints = ConstraintSet(plan.bounds(grid), tau, xi)
    m = m_in
    if not constraints.is_feasible(grid, m.values):
        m, _ = project_intersection(m, constraints.bounds, constraints.tau, constraints.xi,
                                    PdhgParams(1.0, grid.h**2 / 12, tol=1e-6, max_iters=100000))

    for b, batch in enumerate(make_batches(plan.frequencies)):
        obj = BatchObjective(grid, data.select(batch), P, plan.mode, plan.lam, plan.literal_boundary)
        if plan.encoding.enabled:
            obj.set_weights(_weights(plan, data.n_src, pass_index, b, 0))

        def on_accept(n, obj=obj, b=b):
            obj.set_weights(_weights(plan, data.n_src, pass_index, b, n))

        freq_label = "/".join(f"{f:g}" for f in batch)

        def record(step, mv, b=b, freq_label=freq_label):
            err = math.nan if m_true is None else model_error(m_true.with_values(mv), m_true)
            log.rows.append({
                "pass": pass_index, "batch": b, "outer": step.outer, "objective": step.objective,
                "c_n": step.c, "inner_iters": step.inner_iters, "model_error": err,
                "seconds": step.seconds, "accepted": step.accepted,
                "objective_prev": step.objective_prev, "predicted": step.predicted, "freqs": freq_label,
            })

        params = plan.sgp
        if params.damping_mode == "multiplicative" and params.c0 is None and log.damping is not None:
            # the scale of the multiplicative damping is unknown a priori and
            # changes little between neighbouring batches
            params = replace(params, c0=log.damping)
        try:
            res = minimize(obj, constraints, m, params,
                           on_accept=on_accept if plan.encoding.enabled else None, callback=record)
        except SgpStagnation as exc:
            raise InversionAborted(f"pass {pass_index} batch {b} ({freq_label} Hz): {exc}", log, m) from exc
        m = res.m
        log.damping = res.c
        log.snapshots.append((pass_index, b, m))
    return m, log


def run_inversion(plan: InversionPlan, data: DataSet, m0: ModelField, m_true: ModelField | None = None,
                  reference: ModelField | None = None, geometry: Geometry | None = None,
                  progress=None) -> tuple:
    """All passes in order, each warm-started from the previous one.

    Fractional radii are taken relative to ``reference`` or, failing that,
    to ``m_true``.
    """
    log = RunLog()
    m = m0
    for p in range(len(plan.passes)):
        t0 = time.perf_counter()
        m, log = run_pass(plan, p, data, m, m_true, reference, log, geometry)
        log.pass_models.append(m)
        if m_true is not None:
            log.pass_errors.append(model_error(m, m_true))
        if progress is not None:
            progress(p, m, log, time.perf_counter() - t0)
    return m, log
