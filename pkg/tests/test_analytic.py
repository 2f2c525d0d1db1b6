import numpy as np
import pytest
import sympy as sp

from thermoray.analytic import AnalyticSpace, chart_expr, w, x, y
from thermoray.frame import TorusGrid
from thermoray.geometry import ChartFunction, ConformalSurface, ThermostatParams, gaussian_curvature

SURF = ConformalSurface("torus", ChartFunction.cos_product(0.2))


def test_chart_expression_matches_function():
    fn = ChartFunction.trig([(1, 2, 0.3, -0.4)]) + ChartFunction(log_y=0.5, log_r=-1.0)
    f = sp.lambdify((x, y), chart_expr(fn))
    assert f(0.3, 1.4) == pytest.approx(fn(0.3, 1.4), abs=1e-14)


def test_symbolic_and_spectral_frames_agree():
    space = AnalyticSpace(SURF)
    grid = TorusGrid(SURF, 48)
    expr = sp.sin(x) * sp.cos(2 * w) + sp.cos(x + y) * sp.sin(w) + sp.cos(y)
    a = space.field(expr)
    fn = sp.lambdify((x, y, w), expr, "numpy")
    g = grid.from_function(fn, 2)
    rng = np.random.default_rng(0)
    pts = space.sample_points(rng, 20)
    for op in ("X", "H", "V"):
        assert np.allclose(getattr(a, op)()(*pts), getattr(g, op)()(*pts), atol=1e-11), op


def test_curvature_and_thermostat_fields():
    space = AnalyticSpace(ConformalSurface.hyperbolic())
    pts = space.sample_points(np.random.default_rng(1), 10)
    assert np.allclose(space.curvature()(*pts), -1.0)
    params = ThermostatParams(SURF, ChartFunction.trig([(1, 0, 0.3, 0)]), ChartFunction.trig([(0, 1, 0, 0.2)]))
    sp_t = AnalyticSpace(SURF)
    pts = sp_t.sample_points(np.random.default_rng(2), 10)
    assert np.allclose(sp_t.lam(params)(*pts), params.lam(*pts), atol=1e-13)
    assert np.allclose(sp_t.theta(params)(*pts), params.theta(*pts), atol=1e-13)
    assert np.allclose(sp_t.curvature()(*pts), gaussian_curvature(SURF, pts[0], pts[1]), atol=1e-13)


def test_field_arithmetic():
    space = AnalyticSpace(ConformalSurface.sphere_chart())
    a = space.field(sp.cos(w) * x)
    b = space.constant(2.0)
    c = (a * b - a) ** 2 + 1 - b
    pts = (np.array([0.3]), np.array([0.2]), np.array([0.5]))
    assert c(*pts)[0] == pytest.approx((0.3 * np.cos(0.5)) ** 2 - 1.0)
