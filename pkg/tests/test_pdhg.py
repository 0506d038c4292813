import numpy as np
import pytest

from oracles import box_closed_form
from tvfwi.constraints import asym_tv_norm, tv_norm
from tvfwi.grid import Bounds, Grid, ModelField, make_synthetic
from tvfwi.pdhg import (PdhgParams, SubproblemSpec, default_steps, effective_curvature, project_intersection,
                        quadratic_value, solve_subproblem)


def _random_spec(rng, grid, tau_frac=0.5, xi=None, c=0.0):
    m_n = rng.uniform(1.0, 2.0, grid.size)
    b = Bounds(np.full(grid.size, 0.5), np.full(grid.size, 3.0))
    tau = None if tau_frac is None else tau_frac * tv_norm(grid, m_n)
    return SubproblemSpec(rng.standard_normal(grid.size), rng.uniform(0.5, 2.0, grid.size), c, m_n, b, grid,
                          tau=tau, xi=xi)


def test_default_steps_formulas(rng):
    p = default_steps(np.ones(4), 0.0, 1.0)
    assert p.alpha == 1.0 and p.delta == pytest.approx(1 / 8)
    h = rng.uniform(0.5, 2, 9)
    a, b = default_steps(h, 0.0, 2.0), default_steps(10 * h, 0.0, 2.0)
    assert b.alpha == pytest.approx(a.alpha / 10) and b.delta == pytest.approx(a.delta * 10)
    for _ in range(20):
        hh = rng.uniform(0.1, 10, 5)
        step_h = rng.uniform(0.5, 20)
        for asym in (False, True):
            for r in (0.1, 1.0, 3.0):
                p = default_steps(hh, rng.uniform(0, 2), step_h, asym=asym, step_ratio=r)
                assert p.alpha * p.delta <= step_h**2 / 8 * (1 + 1e-12)
    with pytest.raises(ValueError):
        PdhgParams(0.0, 1.0)


def test_effective_curvature_modes():
    h = np.array([1.0, 3.0])
    np.testing.assert_allclose(effective_curvature(h, 2.0), [3.0, 5.0])
    np.testing.assert_allclose(effective_curvature(h, 2.0, "multiplicative", 0.5), [3.0, 7.0])
    np.testing.assert_allclose(effective_curvature(h, 1.0, "multiplicative"), h + 3e-3)
    with pytest.raises(ValueError):
        effective_curvature(h, 1.0, "other")


def test_feasible_point_is_fixed_point():
    g = Grid(4, 5, 1.0)
    m = np.linspace(1, 2, g.size)
    spec = SubproblemSpec(np.zeros(g.size), np.ones(g.size), 0.0, m, Bounds(np.full(g.size, 0.5), np.full(g.size, 3.0)),
                          g, tau=2 * tv_norm(g, m), xi=2 * asym_tv_norm(g, m) + 1)
    res = solve_subproblem(spec)
    assert res.converged
    np.testing.assert_array_equal(res.delta_m, 0.0)


@pytest.mark.parametrize("backend", ["compiled", "numpy"])
def test_box_only_matches_closed_form(rng, backend):
    g = Grid(5, 6, 1.0)
    for _ in range(5):
        spec = _random_spec(rng, g, tau_frac=None, c=0.3)
        spec.g = spec.g * 3
        res = solve_subproblem(spec, default_steps(spec.hdiag, spec.c, g.h, tol=1e-12, max_iters=100000), backend=backend)
        ref = box_closed_form(spec.g, spec.heff, spec.m_n, spec.bounds.lower, spec.bounds.upper)
        np.testing.assert_allclose(res.delta_m, ref, atol=1e-8)


def test_backends_agree(rng):
    g = Grid(7, 9, 2.0)
    spec = _random_spec(rng, g, tau_frac=0.4, xi=0.05)
    p = default_steps(spec.hdiag, 0.0, g.h, asym=True, step_ratio=0.3)
    a = solve_subproblem(spec, p, backend="numpy")
    b = solve_subproblem(spec, p, backend="compiled")
    assert a.iters == b.iters
    np.testing.assert_allclose(a.delta_m, b.delta_m, rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(a.p1, b.p1, rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(a.p2, b.p2, rtol=1e-9, atol=1e-12)
    with pytest.raises(ValueError):
        solve_subproblem(spec, p, backend="gpu")


def test_result_feasibility_invariants(rng):
    g = Grid(8, 8, 1.0)
    for _ in range(10):
        spec = _random_spec(rng, g, tau_frac=rng.uniform(0.1, 0.9))
        spec.xi = 0.3 * asym_tv_norm(g, spec.m_n)
        res = solve_subproblem(spec, default_steps(spec.hdiag, 0.0, g.h, asym=True))
        x = spec.m_n + res.delta_m
        assert np.all(x >= spec.bounds.lower) and np.all(x <= spec.bounds.upper)
        assert tv_norm(g, x) <= spec.tau * (1 + 1e-6)
        assert asym_tv_norm(g, x) <= spec.xi * (1 + 1e-6)


def test_variational_inequality_at_solution(rng):
    g = Grid(3, 3, 1.0)
    for _ in range(5):
        spec = _random_spec(rng, g, tau_frac=rng.uniform(0.1, 0.9))
        res = solve_subproblem(spec, default_steps(spec.hdiag, 0.0, g.h, tol=1e-12, max_iters=1000000))
        x_star = spec.m_n + res.delta_m
        grad_q = spec.g + spec.heff * res.delta_m
        for _ in range(100):
            y = rng.uniform(spec.bounds.lower, spec.bounds.upper)
            mean = np.mean(y)
            s = min(1.0, spec.tau / max(tv_norm(g, y), 1e-300))
            y = mean + s * (y - mean)
            assert (y - x_star) @ grad_q >= -1e-6


def test_inactive_constraint_has_vanishing_multiplier(rng):
    g = Grid(5, 5, 1.0)
    checked = 0
    for _ in range(20):
        spec = _random_spec(rng, g, tau_frac=2.0)
        spec.g = 0.01 * spec.g
        res = solve_subproblem(spec, default_steps(spec.hdiag, 0.0, g.h, tol=1e-10, max_iters=200000))
        x = spec.m_n + res.delta_m
        if tv_norm(g, x) < spec.tau * (1 - 1e-6):
            checked += 1
            assert np.linalg.norm(res.p1) <= 1e-6 * np.linalg.norm(spec.g)
    assert checked > 0


def test_warm_start_does_not_increase_iterations(rng):
    g = Grid(10, 12, 1.0)
    for _ in range(3):
        spec = _random_spec(rng, g, tau_frac=0.5, xi=0.5)
        p = default_steps(spec.hdiag, 0.0, g.h, asym=True)
        cold = solve_subproblem(spec, p)
        warm = solve_subproblem(spec, p, warm=(cold.p1, cold.p2))
        assert warm.iters <= cold.iters


def test_objective_sampled_every_hundred_iterations_non_increasing_when_box_binds(rng):
    # with only the box active the iteration is a projected gradient
    # method on the quadratic, whose values decrease monotonically
    g = Grid(6, 6, 1.0)
    spec = _random_spec(rng, g, tau_frac=None)
    spec.g = 5 * spec.g
    res = solve_subproblem(spec, default_steps(spec.hdiag, 0.0, g.h, step_ratio=0.01, tol=1e-14, max_iters=3000),
                           record_every=100)
    h = np.array(res.history)
    assert len(h) >= 2
    assert np.all(np.diff(h) <= 1e-12 * np.abs(h[:-1]).max())


def test_history_recorded_for_tv_case(rng):
    g = Grid(6, 6, 1.0)
    spec = _random_spec(rng, g, tau_frac=0.3)
    res = solve_subproblem(spec, default_steps(spec.hdiag, 0.0, g.h, tol=1e-9, max_iters=20000), record_every=100)
    assert len(res.history) == res.iters // 100
    assert res.history[-1] == pytest.approx(quadratic_value(spec.g, spec.heff, res.delta_m), rel=1e-3)


def test_non_convergence_is_flagged(rng):
    g = Grid(6, 6, 1.0)
    spec = _random_spec(rng, g, tau_frac=0.2)
    res = solve_subproblem(spec, default_steps(spec.hdiag, 0.0, g.h, tol=1e-14, max_iters=5))
    assert not res.converged and res.iters == 5


def test_spec_validation():
    g = Grid(2, 2, 1.0)
    b = Bounds(np.full(4, 0.5), np.full(4, 3.0))
    with pytest.raises(ValueError):
        SubproblemSpec(np.zeros(4), -np.ones(4), 0.0, np.ones(4), b, g)
    with pytest.raises(ValueError):
        SubproblemSpec(np.zeros(4), np.zeros(4), 0.0, np.ones(4), b, g)
    with pytest.raises(ValueError):
        SubproblemSpec(np.zeros(4), np.ones(4), 0.0, np.ones(4), b, g, tau=-1.0)
    s = SubproblemSpec(np.zeros(4), np.ones(4), 0.0, np.ones(4), b, g, tau=np.inf, xi=np.inf)
    assert s.tau is None and s.xi is None


class TestProjectIntersection:
    grid = Grid(20, 30, 10.0)

    def _bounds(self):
        return Bounds.from_velocity(self.grid, 1400.0, 5000.0)

    def test_feasible_input_returned(self):
        m0 = make_synthetic("layered", self.grid)
        out, res = project_intersection(m0, self._bounds(), tau=tv_norm(self.grid, m0.values) * 1.01)
        np.testing.assert_allclose(out.values, m0.values, rtol=1e-8)

    def test_zero_radius_gives_constant(self):
        m0 = make_synthetic("salt_toy", self.grid)
        out, res = project_intersection(m0, self._bounds(), tau=0.0)
        assert np.ptp(out.values) <= 1e-12 * out.values.max()

    def test_distances_increase_as_radius_shrinks(self):
        m0 = make_synthetic("salt_toy", self.grid)
        tau0 = tv_norm(self.grid, m0.values)
        dists = []
        for frac in (0.6, 0.3):
            p = default_steps(np.ones(self.grid.size), 0.0, self.grid.h, step_ratio=0.3, tol=1e-6, max_iters=50000)
            out, res = project_intersection(m0, self._bounds(), tau=frac * tau0, params=p)
            assert res.converged
            assert tv_norm(self.grid, out.values) <= frac * tau0 * (1 + 1e-6)
            dists.append(np.linalg.norm(out.values - m0.values))
        assert dists[1] > dists[0] > 0
        assert isinstance(out, ModelField)


def test_feasibility_restoration_picks_nearest_feasible_point(rng):
    from tvfwi.pdhg import _restore_feasibility

    g = Grid(6, 7, 1.0)
    spec = _random_spec(rng, g, tau_frac=1.0)
    spec.xi = asym_tv_norm(g, spec.m_n)
    step = 0.3 * rng.standard_normal(g.size)
    fixed, moved = _restore_feasibility(spec, step)
    x = spec.m_n + fixed
    assert tv_norm(g, x) <= spec.tau and asym_tv_norm(g, x) <= spec.xi
    assert np.all(x >= spec.bounds.lower) and np.all(x <= spec.bounds.upper)
    assert moved == pytest.approx(np.linalg.norm(fixed - step) / np.linalg.norm(step))
    # never further away than simply shortening the step
    t = max(t for t in np.linspace(0, 1, 2001)
            if tv_norm(g, spec.m_n + t * step) <= spec.tau and asym_tv_norm(g, spec.m_n + t * step) <= spec.xi)
    assert moved <= (1.0 - t) + 1e-6
    assert 0.0 < moved


def test_feasibility_restoration_leaves_feasible_steps_alone(rng):
    from tvfwi.pdhg import _restore_feasibility

    g = Grid(6, 7, 1.0)
    spec = _random_spec(rng, g, tau_frac=1.0)
    step = np.zeros(g.size)
    assert _restore_feasibility(spec, step) == (step, 0.0)
