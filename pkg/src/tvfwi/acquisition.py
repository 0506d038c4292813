"""Acquisition geometry, Ricker spectrum, sampling and source encoding."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import Grid, ModelField
from .helmholtz import assemble, factorize

__all__ = [
    "Geometry",
    "SamplingOperator",
    "Wavelet",
    "DataSet",
    "EncodingWeights",
    "ricker_amplitude",
    "default_geometry",
    "source_terms",
    "generate_data",
    "encode",
]


@dataclass(frozen=True, eq=False)
class Geometry:
    """Source and receiver positions as ``(x, z)`` pairs in meters."""

    grid: Grid
    source_positions: np.ndarray
    receiver_positions: np.ndarray

    def __post_init__(self):
        for name in ("source_positions", "receiver_positions"):
            pos = np.array(getattr(self, name), dtype=np.float64).reshape(-1, 2)
            x_max, z_max = self.grid.extent
            if np.any(pos < 0) or np.any(pos[:, 0] > x_max) or np.any(pos[:, 1] > z_max):
                raise ValueError(f"{name} outside grid extent {self.grid.extent}")
            pos.setflags(write=False)
            object.__setattr__(self, name, pos)

    @property
    def n_src(self) -> int:
        return len(self.source_positions)

    @property
    def n_rec(self) -> int:
        return len(self.receiver_positions)

    @property
    def source_cells(self) -> np.ndarray:
        return np.array([self.grid.node_index(x, z) for x, z in self.source_positions], dtype=np.int64)

    @property
    def sampling(self) -> "SamplingOperator":
        cells = [self.grid.node_index(x, z) for x, z in self.receiver_positions]
        return SamplingOperator(self.grid.size, np.array(cells, dtype=np.int64))


def default_geometry(grid: Grid, src_step=4, src_depth=2, rec_step=2, rec_depth=3) -> Geometry:
    """Surface acquisition in cell units: sources every ``src_step`` cells
    at ``src_depth`` cells, receivers every ``rec_step`` cells at
    ``rec_depth`` cells.  The outer ring of cells is avoided."""
    h = grid.h
    src_cols = np.arange(2, grid.nx - 2, src_step)
    rec_cols = np.arange(1, grid.nx - 1, rec_step)
    src = np.column_stack([src_cols * h, np.full(src_cols.size, src_depth * h)])
    rec = np.column_stack([rec_cols * h, np.full(rec_cols.size, rec_depth * h)])
    return Geometry(grid, src, rec)


@dataclass(frozen=True, eq=False)
class SamplingOperator:
    """Restriction ``P`` of a grid vector to the receiver cells."""

    n_cells: int
    receiver_cells: np.ndarray

    def __post_init__(self):
        cells = np.asarray(self.receiver_cells, dtype=np.int64)
        if np.any(cells < 0) or np.any(cells >= self.n_cells):
            raise ValueError("receiver cell index out of range")
        object.__setattr__(self, "receiver_cells", cells)

    @property
    def n_rec(self) -> int:
        return self.receiver_cells.size

    def sample(self, u: np.ndarray) -> np.ndarray:
        return u[self.receiver_cells]

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        """Scatter-add receiver values back onto the grid (``P^T y``)."""
        y = np.asarray(y)
        out = np.zeros((self.n_cells,) + y.shape[1:], dtype=np.result_type(y, np.float64))
        np.add.at(out, self.receiver_cells, y)
        return out


def sample(P: SamplingOperator, u: np.ndarray) -> np.ndarray:
    return P.sample(u)


@dataclass(frozen=True)
class Wavelet:
    peak_frequency: float = 15.0
    amplitude: float = 1.0

    def __post_init__(self):
        if not self.peak_frequency > 0:
            raise ValueError("peak frequency must be positive")

    def __call__(self, f):
        return self.amplitude * ricker_amplitude(f, self.peak_frequency)


def ricker_amplitude(f, f_p):
    """Magnitude spectrum of a Ricker wavelet with peak frequency ``f_p``:
    ``2/sqrt(pi) * f^2 / f_p^3 * exp(-f^2 / f_p^2)``."""
    f = np.asarray(f, dtype=np.float64)
    out = 2.0 / np.sqrt(np.pi) * f**2 / f_p**3 * np.exp(-(f**2) / f_p**2)
    return out if out.ndim else float(out)


def source_terms(geom: Geometry, wavelet: Wavelet, freq: float) -> np.ndarray:
    """Point sources at the nearest nodes, one column per source."""
    q = np.zeros((geom.grid.size, geom.n_src), dtype=np.complex128)
    q[geom.source_cells, np.arange(geom.n_src)] = wavelet(freq)
    return q


@dataclass(frozen=True, eq=False)
class DataSet:
    """Receiver data ``values[f, s, r]`` with the frequencies in Hz.

    ``source_terms`` is a list with one ``(M, n_src)`` matrix per frequency.
    """

    frequencies: np.ndarray
    values: np.ndarray = field(repr=False)
    source_terms: list = field(default=None, repr=False)
    geometry: Geometry | None = field(default=None, repr=False)

    def __post_init__(self):
        f = np.array(self.frequencies, dtype=np.float64).reshape(-1)
        d = np.array(self.values, dtype=np.complex128)
        if d.ndim != 3 or d.shape[0] != f.size:
            raise ValueError(f"data shape {d.shape} does not match {f.size} frequencies")
        if self.source_terms is not None:
            if len(self.source_terms) != f.size:
                raise ValueError("need one source matrix per frequency")
            for q in self.source_terms:
                if q.shape[1] != d.shape[1]:
                    raise ValueError("source matrix columns do not match data sources")
        if self.geometry is not None and (self.geometry.n_src, self.geometry.n_rec) != d.shape[1:]:
            raise ValueError("data dimensions do not match geometry")
        f.setflags(write=False)
        d.setflags(write=False)
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "values", d)

    @property
    def n_src(self) -> int:
        return self.values.shape[1]

    @property
    def n_rec(self) -> int:
        return self.values.shape[2]

    def index(self, freq: float) -> int:
        hits = np.nonzero(np.isclose(self.frequencies, freq, rtol=0, atol=1e-9))[0]
        if hits.size == 0:
            raise KeyError(f"frequency {freq} Hz not in data set")
        return int(hits[0])

    def select(self, freqs) -> "DataSet":
        idx = [self.index(f) for f in freqs]
        q = None if self.source_terms is None else [self.source_terms[i] for i in idx]
        return DataSet(self.frequencies[idx], self.values[idx], q, self.geometry)

    def with_sources(self, geom: Geometry, wavelet: Wavelet) -> "DataSet":
        q = [source_terms(geom, wavelet, f) for f in self.frequencies]
        return DataSet(self.frequencies, self.values, q, geom)


def generate_data(m_true: ModelField, geom: Geometry, wavelet: Wavelet, freqs) -> DataSet:
    """Model ``d[f][j] = P A(m, 2 pi f)^{-1} q_j(f)`` for every frequency."""
    freqs = np.asarray(freqs, dtype=np.float64).reshape(-1)
    P = geom.sampling
    values = np.empty((freqs.size, geom.n_src, geom.n_rec), dtype=np.complex128)
    qs = []
    for i, f in enumerate(freqs):
        q = source_terms(geom, wavelet, f)
        F = factorize(assemble(m_true, 2 * np.pi * f))
        u = F.solve(q)
        values[i] = P.sample(u).T
        qs.append(q)
    return DataSet(freqs, values, qs, geom)


@dataclass(frozen=True, eq=False)
class EncodingWeights:
    """Gaussian supershot weights ``w`` of shape ``(n_super, n_src)``.

    The draw is a pure function of ``(seed, draw_index)``; ``draw_index``
    may be an integer or a tuple of integers such as
    ``(pass, batch, outer_iteration)``.
    """

    w: np.ndarray = field(repr=False)
    seed: int
    draw_index: tuple

    @classmethod
    def draw(cls, n_super: int, n_src: int, seed: int, draw_index=0) -> "EncodingWeights":
        idx = tuple(np.atleast_1d(np.asarray(draw_index, dtype=np.int64)).tolist())
        rng = np.random.default_rng([int(seed), *idx])
        return cls(rng.standard_normal((n_super, n_src)), int(seed), idx)

    @classmethod
    def identity(cls, n_src: int) -> "EncodingWeights":
        return cls(np.eye(n_src), 0, (-1,))


def encode(data: DataSet, weights) -> DataSet:
    """Form supershots: ``d~_i = sum_j w_ij d_j`` and ``q~_i = sum_j w_ij q_j``."""
    w = np.asarray(getattr(weights, "w", weights), dtype=np.float64)
    if w.ndim != 2 or w.shape[1] != data.n_src:
        raise ValueError(f"weights of shape {w.shape} do not match {data.n_src} sources")
    values = np.einsum("ij,fjr->fir", w, data.values)
    q = None if data.source_terms is None else [qf @ w.T for qf in data.source_terms]
    return DataSet(data.frequencies, values, q, None)
