import numpy as np
import pytest
from scipy import ndimage

from tvfwi.grid import (Bounds, Grid, ModelField, linear_gradient, make_synthetic, model_error,
                        slowness_sq_to_velocity, smooth, velocity_to_slowness_sq)


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid(1, 5, 1.0)
    with pytest.raises(ValueError):
        Grid(5, 5, 0.0)
    g = Grid(3, 4, 2.0)
    assert g.size == 12
    assert g.shape == (3, 4)


def test_index_layout_is_bijective_and_depth_fastest():
    g = Grid(5, 7, 1.0)
    seen = set()
    for k in range(g.nz):
        for l in range(g.nx):
            i = g.flatten_index(k, l)
            assert i == k + l * g.nz
            assert g.unflatten_index(i) == (k, l)
            seen.add(i)
    assert seen == set(range(g.size))
    a = np.arange(g.size, dtype=float).reshape(g.shape, order="F")
    np.testing.assert_array_equal(g.to_vector(a), np.arange(g.size))
    np.testing.assert_array_equal(g.to_array(g.to_vector(a)), a)


@pytest.mark.parametrize("v, m", [(1500.0, 4.4444e-7), (5500.0, 3.3058e-8), (1.0, 1.0)])
def test_velocity_to_slowness_sq(v, m):
    assert velocity_to_slowness_sq(v) == pytest.approx(m, rel=1e-4)


def test_slowness_sq_to_velocity():
    assert slowness_sq_to_velocity(4.4444e-7) == pytest.approx(1500.0, abs=0.01)
    assert slowness_sq_to_velocity(1.0) == 1.0
    for v in (1400.0, 5000.0):
        assert slowness_sq_to_velocity(velocity_to_slowness_sq(v)) == pytest.approx(v, rel=1e-12)
    v = np.linspace(1000, 10000, 1001)
    np.testing.assert_allclose(slowness_sq_to_velocity(velocity_to_slowness_sq(v)), v, rtol=1e-12)


@pytest.mark.parametrize("bad", [0.0, -3.0])
def test_conversions_reject_non_positive(bad):
    with pytest.raises(ValueError):
        velocity_to_slowness_sq(bad)
    with pytest.raises(ValueError):
        slowness_sq_to_velocity(bad)


def test_model_field_rejects_non_positive_and_is_immutable():
    g = Grid(2, 2, 1.0)
    with pytest.raises(ValueError):
        ModelField(g, [1.0, 1.0, 0.0, 1.0])
    with pytest.raises(ValueError):
        ModelField(g, [1.0, 1.0, np.nan, 1.0])
    with pytest.raises(ValueError):
        ModelField(g, [1.0, 1.0, 1.0])
    m = ModelField(g, np.ones(4))
    with pytest.raises(ValueError):
        m.values[0] = 2.0


def test_bounds_from_velocity_reverse_order():
    g = Grid(2, 3, 1.0)
    b = Bounds.from_velocity(g, 1400.0, 5000.0)
    np.testing.assert_allclose(b.lower, 1 / 5000.0**2)
    np.testing.assert_allclose(b.upper, 1 / 1400.0**2)
    with pytest.raises(ValueError):
        Bounds(np.ones(2), np.zeros(2) + 0.5)


def test_model_error_cases(rng):
    g = Grid(4, 4, 1.0)
    vt = rng.uniform(1500, 4000, g.size)
    mt = ModelField.from_velocity(g, vt)
    assert model_error(mt, mt) == 0.0
    assert model_error(ModelField.from_velocity(g, 2 * vt), mt) == pytest.approx(1.0, rel=1e-12)
    v = rng.uniform(1500, 4000, g.size)
    num = 0.0
    den = 0.0
    for i in range(g.size):
        num += (v[i] - vt[i]) ** 2
        den += vt[i] ** 2
    assert model_error(ModelField.from_velocity(g, v), mt) == pytest.approx(np.sqrt(num / den), rel=1e-12)
    s = model_error(ModelField.from_velocity(g, v), mt, domain="slowness_sq")
    assert s == pytest.approx(np.linalg.norm(1 / v**2 - 1 / vt**2) / np.linalg.norm(1 / vt**2), rel=1e-12)
    with pytest.raises(ValueError):
        model_error(mt, ModelField(Grid(2, 8, 1.0), mt.values))


def test_layered_model():
    g = Grid(30, 10, 10.0)
    v = g.to_array(make_synthetic("layered", g, velocities=(1500, 2500, 3500)).velocity)
    np.testing.assert_allclose(v, np.repeat(v[:, :1], g.nx, axis=1))  # laterally constant
    assert sorted(np.unique(np.round(v))) == [1500, 2500, 3500]
    assert np.all(np.diff(v[:, 0]) >= 0)


def test_salt_toy_structure():
    g = Grid(60, 120, 20.0)
    v = g.to_array(make_synthetic("salt_toy", g).velocity)
    assert v.min() >= 1400 and v.max() <= 5000
    salt = np.isclose(v, 4500.0)
    labels, n = ndimage.label(salt)
    assert n == 1
    ks, ls = np.nonzero(salt)
    below = v[ks.max() + 2, int(np.mean(ls))]
    left = v[ks.max() + 2, 2]
    assert below < left  # slow pocket under the salt


def test_synthetic_clamped():
    g = Grid(10, 10, 10.0)
    v = make_synthetic("layered", g, velocities=(500, 9000)).velocity
    assert v.min() >= 1400 - 1e-9 and v.max() <= 5000 + 1e-9
    with pytest.raises(ValueError):
        make_synthetic("marmousi", g)


def test_smooth_properties():
    g = Grid(20, 20, 10.0)
    m = linear_gradient(g, 2000, 2000)
    assert smooth(m, 0) is m
    np.testing.assert_allclose(smooth(m, 50.0).values, m.values, rtol=1e-14)
    step = make_synthetic("layered", g, velocities=(1500, 3500))
    s = smooth(step, 60.0)
    assert np.ptp(s.values) < np.ptp(step.values)
    with pytest.raises(ValueError):
        smooth(m, -1.0)


def test_linear_gradient_end_values():
    g = Grid(11, 3, 5.0)
    v = g.to_array(linear_gradient(g, 1500, 3000).velocity)
    assert v[0, 0] == pytest.approx(1500) and v[-1, 2] == pytest.approx(3000)
