"""Binary model and data files.

Model file (little-endian)::

    16 bytes  magic  b"TVFWI-MODEL" + 5 NUL
    u32 nz, u32 nx, f64 h, u8 unit (0 = s^2/m^2, 1 = m/s), 7 pad bytes
    nz*nx f64 values, depth-fastest

Data file (little-endian)::

    16 bytes  magic  b"TVFWI-DATA" + 6 NUL
    u32 n_freq, u32 n_src, u32 n_rec
    n_freq f64 frequencies (Hz)
    n_src (x, z) f64 pairs, then n_rec (x, z) f64 pairs
    n_freq*n_src*n_rec complex128 values ordered [freq][src][rec]
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .acquisition import DataSet, Geometry
from .grid import Grid, ModelField, slowness_sq_to_velocity, velocity_to_slowness_sq

__all__ = [
    "FormatError",
    "MODEL_MAGIC",
    "DATA_MAGIC",
    "model_to_bytes",
    "model_from_bytes",
    "write_model",
    "read_model",
    "data_to_bytes",
    "data_from_bytes",
    "write_data",
    "read_data",
]

MODEL_MAGIC = b"TVFWI-MODEL".ljust(16, b"\0")
DATA_MAGIC = b"TVFWI-DATA".ljust(16, b"\0")
_MODEL_HEADER = struct.Struct("<IIdB7x")
_DATA_COUNTS = struct.Struct("<III")
UNIT_SLOWNESS_SQ, UNIT_VELOCITY = 0, 1


class FormatError(ValueError):
    """Malformed, truncated or oversized file."""


def model_to_bytes(m: ModelField, unit: int = UNIT_SLOWNESS_SQ) -> bytes:
    if unit == UNIT_SLOWNESS_SQ:
        values = m.values
    elif unit == UNIT_VELOCITY:
        values = slowness_sq_to_velocity(m.values)
    else:
        raise ValueError(f"unknown unit tag {unit}")
    g = m.grid
    header = MODEL_MAGIC + _MODEL_HEADER.pack(g.nz, g.nx, g.h, unit)
    return header + np.asarray(values, dtype="<f8").tobytes()


def model_from_bytes(buf: bytes) -> ModelField:
    head = len(MODEL_MAGIC) + _MODEL_HEADER.size
    if len(buf) < head or buf[:16] != MODEL_MAGIC:
        raise FormatError("not a model file (bad magic or short header)")
    nz, nx, h, unit = _MODEL_HEADER.unpack_from(buf, 16)
    expected = head + 8 * nz * nx
    if len(buf) != expected:
        raise FormatError(f"model file has {len(buf)} bytes, expected {expected}")
    if unit not in (UNIT_SLOWNESS_SQ, UNIT_VELOCITY):
        raise FormatError(f"unknown unit tag {unit}")
    try:
        grid = Grid(nz, nx, h)
        values = np.frombuffer(buf, dtype="<f8", offset=head).astype(np.float64)
        if unit == UNIT_VELOCITY:
            values = velocity_to_slowness_sq(values)
        return ModelField(grid, values)
    except ValueError as exc:
        raise FormatError(str(exc)) from exc


def write_model(path, m: ModelField, unit: int = UNIT_SLOWNESS_SQ):
    Path(path).write_bytes(model_to_bytes(m, unit))


def read_model(path) -> ModelField:
    return model_from_bytes(Path(path).read_bytes())


def data_to_bytes(data: DataSet, geometry: Geometry | None = None) -> bytes:
    geometry = geometry or data.geometry
    if geometry is None:
        raise ValueError("data set has no geometry to write")
    nf, ns, nr = data.values.shape
    parts = [
        DATA_MAGIC,
        _DATA_COUNTS.pack(nf, ns, nr),
        np.asarray(data.frequencies, dtype="<f8").tobytes(),
        np.asarray(geometry.source_positions, dtype="<f8").tobytes(),
        np.asarray(geometry.receiver_positions, dtype="<f8").tobytes(),
        np.asarray(data.values, dtype="<c16").tobytes(),
    ]
    return b"".join(parts)


def data_from_bytes(buf: bytes, grid: Grid | None = None):
    """Decode a data file.

    Returns a :class:`DataSet` (with geometry) when ``grid`` is given,
    otherwise the raw tuple ``(freqs, src_pos, rec_pos, values)``.
    """
    head = len(DATA_MAGIC) + _DATA_COUNTS.size
    if len(buf) < head or buf[:16] != DATA_MAGIC:
        raise FormatError("not a data file (bad magic or short header)")
    nf, ns, nr = _DATA_COUNTS.unpack_from(buf, 16)
    expected = head + 8 * nf + 16 * (ns + nr) + 16 * nf * ns * nr
    if len(buf) != expected:
        raise FormatError(f"data file has {len(buf)} bytes, expected {expected}")
    off = head
    freqs = np.frombuffer(buf, "<f8", nf, off).astype(np.float64)
    off += 8 * nf
    src = np.frombuffer(buf, "<f8", 2 * ns, off).reshape(ns, 2).astype(np.float64)
    off += 16 * ns
    rec = np.frombuffer(buf, "<f8", 2 * nr, off).reshape(nr, 2).astype(np.float64)
    off += 16 * nr
    values = np.frombuffer(buf, "<c16", nf * ns * nr, off).reshape(nf, ns, nr).astype(np.complex128)
    if grid is None:
        return freqs, src, rec, values
    try:
        geom = Geometry(grid, src, rec)
        return DataSet(freqs, values, None, geom)
    except ValueError as exc:
        raise FormatError(str(exc)) from exc


def write_data(path, data: DataSet, geometry: Geometry | None = None):
    Path(path).write_bytes(data_to_bytes(data, geometry))


def read_data(path, grid: Grid | None = None):
    return data_from_bytes(Path(path).read_bytes(), grid)
