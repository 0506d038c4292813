"""Regular 2D grids, slowness-squared model fields and unit conversions.

Models are stored as flat vectors in depth-fastest order: the cell with
depth index ``k`` and lateral index ``l`` (both 0-based here) lives at
``i = k + l * nz``.  This is numpy's Fortran order for an ``(nz, nx)``
array, so the depth difference has unit stride.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter

__all__ = [
    "Grid",
    "ModelField",
    "Bounds",
    "velocity_to_slowness_sq",
    "slowness_sq_to_velocity",
    "model_error",
    "make_synthetic",
    "smooth",
    "linear_gradient",
]


@dataclass(frozen=True)
class Grid:
    """Uniform 2D grid with ``nz`` depth samples, ``nx`` lateral samples
    and spacing ``h`` in meters."""

    nz: int
    nx: int
    h: float

    def __post_init__(self):
        if int(self.nz) < 2 or int(self.nx) < 2:
            raise ValueError(f"grid needs nz, nx >= 2, got {self.nz}x{self.nx}")
        if not self.h > 0:
            raise ValueError(f"grid spacing must be positive, got {self.h}")
        object.__setattr__(self, "nz", int(self.nz))
        object.__setattr__(self, "nx", int(self.nx))
        object.__setattr__(self, "h", float(self.h))

    @property
    def size(self) -> int:
        return self.nz * self.nx

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nz, self.nx)

    @property
    def extent(self) -> tuple[float, float]:
        """Physical ``(x_max, z_max)`` in meters; nodes start at 0."""
        return ((self.nx - 1) * self.h, (self.nz - 1) * self.h)

    def flatten_index(self, k, l):
        return np.asarray(k) + np.asarray(l) * self.nz

    def unflatten_index(self, i):
        i = np.asarray(i)
        return i % self.nz, i // self.nz

    def to_array(self, values: np.ndarray) -> np.ndarray:
        """View a flat depth-fastest vector as an ``(nz, nx)`` array."""
        return np.reshape(values, self.shape, order="F")

    def to_vector(self, array: np.ndarray) -> np.ndarray:
        return np.ravel(np.asarray(array), order="F")

    def node_index(self, x: float, z: float) -> int:
        """Flat index of the grid node nearest to the point ``(x, z)``."""
        x_max, z_max = self.extent
        if not (0 <= x <= x_max and 0 <= z <= z_max):
            raise ValueError(f"position ({x}, {z}) outside grid extent {self.extent}")
        l = int(np.clip(np.rint(x / self.h), 0, self.nx - 1))
        k = int(np.clip(np.rint(z / self.h), 0, self.nz - 1))
        return k + l * self.nz


@dataclass(frozen=True, eq=False)
class ModelField:
    """Slowness squared (s^2/m^2) on a grid, depth-fastest."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64).reshape(-1)
        if v.size != self.grid.size:
            raise ValueError(f"expected {self.grid.size} values, got {v.size}")
        if not np.all(np.isfinite(v)) or np.any(v <= 0):
            raise ValueError("slowness squared must be finite and strictly positive")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_velocity(cls, grid: Grid, velocity) -> "ModelField":
        velocity = np.asarray(velocity, dtype=np.float64)
        if velocity.ndim == 2:
            velocity = grid.to_vector(velocity)
        return cls(grid, velocity_to_slowness_sq(velocity))

    @classmethod
    def from_array(cls, grid: Grid, array) -> "ModelField":
        return cls(grid, grid.to_vector(array))

    @property
    def velocity(self) -> np.ndarray:
        return slowness_sq_to_velocity(self.values)

    def as_array(self) -> np.ndarray:
        return self.grid.to_array(self.values)

    def with_values(self, values) -> "ModelField":
        return ModelField(self.grid, values)


@dataclass(frozen=True, eq=False)
class Bounds:
    """Elementwise bounds ``lower <= m <= upper`` on slowness squared."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.array(self.lower, dtype=np.float64).reshape(-1)
        hi = np.array(self.upper, dtype=np.float64).reshape(-1)
        if lo.shape != hi.shape:
            raise ValueError("lower and upper bounds differ in length")
        if np.any(lo <= 0) or np.any(lo > hi):
            raise ValueError("bounds must satisfy 0 < lower <= upper")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def from_velocity(cls, grid: Grid, vmin, vmax) -> "Bounds":
        """Velocity limits map to reversed slowness-squared limits."""
        n = grid.size
        lower = velocity_to_slowness_sq(np.broadcast_to(np.asarray(vmax, float), (n,)))
        upper = velocity_to_slowness_sq(np.broadcast_to(np.asarray(vmin, float), (n,)))
        return cls(lower, upper)

    def contains(self, m: np.ndarray) -> bool:
        return bool(np.all(m >= self.lower) and np.all(m <= self.upper))


def velocity_to_slowness_sq(v):
    v = np.asarray(v, dtype=np.float64)
    if np.any(~(v > 0)):
        raise ValueError("velocity must be strictly positive")
    out = 1.0 / (v * v)
    return out if out.ndim else float(out)


def slowness_sq_to_velocity(m):
    m = np.asarray(m, dtype=np.float64)
    if np.any(~(m > 0)):
        raise ValueError("slowness squared must be strictly positive")
    out = 1.0 / np.sqrt(m)
    return out if out.ndim else float(out)


def model_error(m: ModelField, m_true: ModelField, domain: str = "velocity") -> float:
    """Normalized RMS error ``||x - x_true|| / ||x_true||``.

    ``domain`` selects velocity (default) or ``"slowness_sq"``.
    """
    if m.grid != m_true.grid:
        raise ValueError(f"grid mismatch: {m.grid} vs {m_true.grid}")
    if domain == "velocity":
        x, x_true = m.velocity, m_true.velocity
    elif domain == "slowness_sq":
        x, x_true = m.values, m_true.values
    else:
        raise ValueError(f"unknown domain {domain!r}")
    return float(np.linalg.norm(x - x_true) / np.linalg.norm(x_true))


VMIN_SYNTH, VMAX_SYNTH = 1400.0, 5000.0


def _layered(grid, velocities=(1500.0, 2500.0, 3500.0), interfaces=None):
    velocities = np.asarray(velocities, dtype=float)
    z = np.arange(grid.nz) * grid.h
    if interfaces is None:
        # equal thickness layers
        interfaces = np.linspace(0, grid.nz * grid.h, len(velocities) + 1)[1:-1]
    layer = np.searchsorted(np.asarray(interfaces, dtype=float), z, side="right")
    return np.repeat(velocities[layer][:, None], grid.nx, axis=1)


def _salt_toy(grid, v_top=1500.0, v_bottom=3500.0, v_salt=4500.0, v_low=None,
              water_depth=None, salt_top=0.25, salt_base=0.55, half_width_top=0.18,
              half_width_base=0.30, pocket_depth=0.15, pocket_half_width=0.15):
    """Depth-increasing sediments with a salt body and a slow pocket below it.

    Geometry parameters are fractions of the model depth (``salt_top``,
    ``salt_base``, ``pocket_depth``) and of the model width (half widths,
    measured from the center).
    """
    nz, nx, h = grid.nz, grid.nx, grid.h
    zz, xx = np.meshgrid(np.arange(nz) / (nz - 1), np.arange(nx) / (nx - 1), indexing="ij")
    vel = v_top + (v_bottom - v_top) * zz
    if water_depth is not None:
        vel[np.arange(nz) * h < water_depth, :] = v_top
    # salt: flat-topped trapezoid widening downward
    top, base = salt_top, salt_base
    half_width = half_width_top + (half_width_base - half_width_top) * np.clip((zz - top) / (base - top), 0, 1)
    salt = (zz >= top) & (zz <= base) & (np.abs(xx - 0.5) <= half_width)
    vel[salt] = v_salt
    # slow pocket just beneath the salt base
    if v_low is None:
        v_low = v_top + (v_bottom - v_top) * (base + 0.1) - 500.0
    pocket = (zz > base) & (zz <= base + pocket_depth) & (np.abs(xx - 0.5) <= pocket_half_width)
    vel[pocket] = v_low
    return vel


def make_synthetic(kind: str, grid: Grid, **params) -> ModelField:
    """Construct a synthetic velocity model and return it as slowness squared.

    Parameters
    ----------
    kind : {"layered", "salt_toy"}
    grid : Grid
    **params
        ``layered``: ``velocities`` (top to bottom), optional ``interfaces``
        (depths in meters).  ``salt_toy``: ``v_top``, ``v_bottom``,
        ``v_salt``, ``v_low``, ``water_depth`` and the geometry fractions
        ``salt_top``, ``salt_base``, ``half_width_top``, ``half_width_base``,
        ``pocket_depth``, ``pocket_half_width``.

    Velocities are clamped into [1400, 5000] m/s.
    """
    if kind == "layered":
        vel = _layered(grid, **params)
    elif kind == "salt_toy":
        vel = _salt_toy(grid, **params)
    else:
        raise ValueError(f"unknown synthetic model kind {kind!r}")
    vel = np.clip(vel, VMIN_SYNTH, VMAX_SYNTH)
    return ModelField.from_velocity(grid, vel)


def linear_gradient(grid: Grid, v_top: float, v_bottom: float) -> ModelField:
    """Laterally invariant model with velocity linear in depth."""
    z = np.linspace(0.0, 1.0, grid.nz)
    vel = np.repeat((v_top + (v_bottom - v_top) * z)[:, None], grid.nx, axis=1)
    return ModelField.from_velocity(grid, vel)


def smooth(m: ModelField, radius: float) -> ModelField:
    """Gaussian smoothing of slowness squared with reflective boundaries.

    ``radius`` is the kernel standard deviation in meters; the kernel is
    truncated at four standard deviations.  Radius 0 returns ``m``.
    """
    if radius < 0:
        raise ValueError("smoothing radius must be non-negative")
    if radius == 0:
        return m
    sigma = radius / m.grid.h
    out = gaussian_filter(m.as_array(), sigma=sigma, mode="reflect", truncate=4.0)
    return ModelField.from_array(m.grid, out)
