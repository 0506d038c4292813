import struct

import numpy as np
import pytest

from tvfwi.acquisition import Wavelet, default_geometry, generate_data
from tvfwi.grid import Grid, ModelField, make_synthetic
from tvfwi.io import (DATA_MAGIC, MODEL_MAGIC, FormatError, data_from_bytes, data_to_bytes, model_from_bytes,
                      model_to_bytes, read_data, read_model, write_data, write_model)


@pytest.fixture(scope="module")
def model():
    return make_synthetic("salt_toy", Grid(10, 14, 20.0))


@pytest.fixture(scope="module")
def data(model):
    return generate_data(model, default_geometry(model.grid), Wavelet(), [3.0, 4.0])


def test_model_layout(model):
    buf = model_to_bytes(model)
    g = model.grid
    assert len(buf) == 16 + 24 + 8 * g.size
    assert buf[:16] == b"TVFWI-MODEL\0\0\0\0\0" == MODEL_MAGIC
    nz, nx, h, unit = struct.unpack_from("<IIdB", buf, 16)
    assert (nz, nx, h, unit) == (g.nz, g.nx, g.h, 0)
    assert buf[33:40] == b"\0" * 7
    np.testing.assert_array_equal(np.frombuffer(buf, "<f8", offset=40), model.values)


def test_model_round_trip_bit_exact(model, tmp_path):
    p = tmp_path / "m.model"
    write_model(p, model)
    back = read_model(p)
    assert back.grid == model.grid
    assert back.values.tobytes() == model.values.tobytes()
    assert model_to_bytes(back) == p.read_bytes()


def test_model_velocity_unit(model):
    buf = model_to_bytes(model, unit=1)
    back = model_from_bytes(buf)
    np.testing.assert_allclose(back.values, model.values, rtol=1e-14)
    np.testing.assert_allclose(np.frombuffer(buf, "<f8", offset=40), model.velocity)


def test_data_layout_and_round_trip(data, model, tmp_path):
    buf = data_to_bytes(data)
    nf, ns, nr = data.values.shape
    assert buf[:16] == b"TVFWI-DATA\0\0\0\0\0\0" == DATA_MAGIC
    assert struct.unpack_from("<III", buf, 16) == (nf, ns, nr)
    assert len(buf) == 16 + 12 + 8 * nf + 16 * (ns + nr) + 16 * nf * ns * nr
    p = tmp_path / "d.data"
    write_data(p, data)
    back = read_data(p, model.grid)
    assert back.values.tobytes() == data.values.tobytes()
    assert back.frequencies.tobytes() == data.frequencies.tobytes()
    np.testing.assert_array_equal(back.geometry.source_positions, data.geometry.source_positions)
    np.testing.assert_array_equal(back.geometry.receiver_positions, data.geometry.receiver_positions)
    assert data_to_bytes(back) == buf
    freqs, src, rec, vals = data_from_bytes(buf)
    assert vals.shape == (nf, ns, nr)


@pytest.mark.parametrize("which", ["model", "data"])
def test_truncation_and_padding_detected(which, model, data, rng):
    buf = model_to_bytes(model) if which == "model" else data_to_bytes(data)
    decode = model_from_bytes if which == "model" else (lambda b: data_from_bytes(b, model.grid))
    for cut in sorted(set(rng.integers(0, len(buf), 40).tolist()) | {0, 1, 15, 16, 39, len(buf) - 1}):
        with pytest.raises(FormatError):
            decode(buf[:cut])
    with pytest.raises(FormatError):
        decode(buf + b"\0")


def test_bad_magic_and_unit(model):
    buf = bytearray(model_to_bytes(model))
    buf[0:1] = b"X"
    with pytest.raises(FormatError):
        model_from_bytes(bytes(buf))
    buf = bytearray(model_to_bytes(model))
    buf[32] = 9
    with pytest.raises(FormatError):
        model_from_bytes(bytes(buf))
    g = Grid(2, 2, 1.0)
    neg = MODEL_MAGIC + struct.pack("<IIdB7x", 2, 2, 1.0, 0) + np.array([1.0, -1, 1, 1]).astype("<f8").tobytes()
    with pytest.raises(FormatError):
        model_from_bytes(neg)
    assert ModelField(g, np.ones(4)).grid == g
