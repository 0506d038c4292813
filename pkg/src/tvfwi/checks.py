"""Finite-difference check of the objective gradients on a tiny instance."""
from __future__ import annotations

import numpy as np

from .acquisition import Geometry, Wavelet, generate_data
from .grid import Grid, ModelField
from .objectives import WriConfig, fwi_eval, wri_eval

__all__ = ["small_instance", "finite_difference_gradient", "gradient_error", "gradcheck"]


def small_instance(seed: int = 0, h: float = 20.0, freqs=(3.0, 4.0)):
    """6 x 6 grid, two sources, four receivers, a perturbed model.

    Returns ``(m, data, P)`` where ``data`` is generated from a random
    true model and ``m`` is a 10% perturbation of it.
    """
    rng = np.random.default_rng(seed)
    grid = Grid(6, 6, h)
    vel = 2000.0 + 500.0 * rng.random(grid.size)
    m_true = ModelField(grid, 1.0 / vel**2)
    geom = Geometry(grid, [[h, h], [4 * h, h]], [[0.0, 2 * h], [2 * h, 2 * h], [3 * h, 4 * h], [5 * h, 3 * h]])
    data = generate_data(m_true, geom, Wavelet(15.0), list(freqs))
    m = ModelField(grid, 1.0 / (vel * (1.0 + 0.1 * rng.standard_normal(grid.size))) ** 2)
    return m, data, geom.sampling


def finite_difference_gradient(fn, m: ModelField, rel_step: float = 1e-6) -> np.ndarray:
    """Central differences of the scalar ``fn(ModelField)`` in every cell."""
    out = np.zeros(m.grid.size)
    for k in range(m.grid.size):
        t = rel_step * abs(m.values[k])
        up = m.values.copy()
        up[k] += t
        dn = m.values.copy()
        dn[k] -= t
        out[k] = (fn(m.with_values(up)) - fn(m.with_values(dn))) / (2 * t)
    return out


def gradient_error(gradient, reference) -> float:
    """``max|g - g_ref| / max|g_ref|``."""
    return float(np.max(np.abs(gradient - reference)) / np.max(np.abs(reference)))


def gradcheck(mode: str, lam: float = 1.0, sabotage_sign: bool = False, seed: int = 0,
              literal_boundary: bool = False) -> float:
    """Maximum relative error between the adjoint gradient and finite
    differences for ``mode`` in {"fwi", "wri"}.

    ``sabotage_sign`` flips the adjoint gradient before comparing, which
    must make the check fail.
    """
    m, data, P = small_instance(seed)
    if mode == "fwi":
        def ev(mm):
            return fwi_eval(mm, data, P, literal_boundary)
    elif mode == "wri":
        cfg = WriConfig(lam)

        def ev(mm):
            return wri_eval(mm, data, P, cfg, literal_boundary)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    g = ev(m).gradient
    if sabotage_sign:
        g = -g
    fd = finite_difference_gradient(lambda mm: ev(mm).value, m)
    return gradient_error(g, fd)
