import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from thermoray.geometry import (ChartFunction, ConformalSurface, GeometryError, ThermostatParams,
                                divergence_free_field, function_from_config, gaussian_curvature,
                                homogeneous_thermostat, metric_divergence_spectral, metric_inner,
                                rotate90, surface_from_config, unit_vector)

coords = st.floats(-2.0, 2.0)


def fd_curvature(surface, x, y, h=1e-3):
    """Five-point Laplacian of phi: independent of the analytic jet."""
    p = surface.phi
    lap = (p(x + h, y) + p(x - h, y) + p(x, y + h) + p(x, y - h) - 4 * p(x, y)) / h**2
    return -np.exp(-2 * p(x, y)) * lap


@pytest.mark.parametrize("surface,K", [
    (ConformalSurface.hyperbolic(), -1.0),
    (ConformalSurface.sphere_chart(), 1.0),
    (ConformalSurface.flat_torus(), 0.0),
])
def test_constant_curvature_models(surface, K):
    rng = np.random.default_rng(0)
    x = rng.uniform(-1, 1, 50)
    y = rng.uniform(0.5, 2, 50)
    assert np.max(np.abs(gaussian_curvature(surface, x, y) - K)) < 1e-12


def test_curvature_matches_finite_differences():
    phi = ChartFunction.trig([(1, 0, 0.3, 0.1), (1, 2, 0.0, 0.2), (0, 1, 0.15, 0)])
    s = ConformalSurface("torus", phi)
    rng = np.random.default_rng(1)
    x, y = rng.uniform(0, 2 * np.pi, (2, 40))
    assert np.max(np.abs(gaussian_curvature(s, x, y) - fd_curvature(s, x, y))) < 1e-5


@given(coords, st.floats(0.3, 3.0), st.floats(0, 2 * math.pi))
def test_rotation_is_an_isometry_and_orthogonal(x, y, w):
    s = ConformalSurface.hyperbolic()
    v = unit_vector(s, x, y, w)
    iv = rotate90(s, x, y, v)
    assert metric_inner(s, x, y, v, v) == pytest.approx(1.0, abs=1e-12)
    assert metric_inner(s, x, y, iv, iv) == pytest.approx(1.0, abs=1e-12)
    assert metric_inner(s, x, y, v, iv) == pytest.approx(0.0, abs=1e-12)
    assert np.allclose(rotate90(s, x, y, iv), -v)


def test_stream_function_field_is_divergence_free():
    s = ConformalSurface("torus", ChartFunction.cos_product(0.3))
    g = ChartFunction.trig([(1, 1, 0.4, 0.0), (0, 2, 0.0, 0.3)])
    N = 48
    xs = np.arange(N) * 2 * np.pi / N
    X, Y = np.meshgrid(xs, xs)
    e = divergence_free_field(s, g)(X, Y)
    div = metric_divergence_spectral(s, e, 2 * np.pi, 2 * np.pi)
    assert np.max(np.abs(div)) < 1e-12
    # a generic field is not
    assert np.max(np.abs(metric_divergence_spectral(s, np.stack([np.cos(X), 0 * X], -1), 2 * np.pi, 2 * np.pi))) > 0.1


def test_derivatives_match_finite_differences():
    fn = ChartFunction.trig([(2, 1, 0.5, -0.2)]) + ChartFunction(log_y=0.7, log_r=-0.3)
    x, y, h = 0.4, 1.3, 1e-5
    assert fn.derivative(x, y, 1, 0) == pytest.approx((fn(x + h, y) - fn(x - h, y)) / (2 * h), abs=1e-8)
    assert fn.derivative(x, y, 0, 1) == pytest.approx((fn(x, y + h) - fn(x, y - h)) / (2 * h), abs=1e-8)
    d = fn.derivative
    assert d(x, y, 1, 1) == pytest.approx((d(x, y + h, 1, 0) - d(x, y - h, 1, 0)) / (2 * h), abs=1e-7)


def test_config_round_trip():
    fn = ChartFunction.trig([(1, 0, 0.3, 0.1)]) + ChartFunction(log_y=2.0)
    back = function_from_config(fn.to_config())
    x, y = np.array([0.1, 0.7]), np.array([0.9, 1.8])
    assert np.allclose(back(x, y), fn(x, y), atol=1e-15)


def test_grid_interpolant_is_exact():
    N = 16
    xs = np.arange(N) * 2 * np.pi / N
    X, Y = np.meshgrid(xs, xs)
    vals = np.cos(X) * np.sin(2 * Y) + 0.3
    fn = ChartFunction.from_grid(vals, 2 * np.pi, 2 * np.pi)
    assert np.max(np.abs(fn(X + 0.1, Y - 0.2) - (np.cos(X + 0.1) * np.sin(2 * Y - 0.4) + 0.3))) < 1e-13


def test_torus_rejects_non_periodic_data():
    with pytest.raises(GeometryError):
        ConformalSurface("torus", ChartFunction.trig([(0.5, 0, 1.0, 0)]))
    with pytest.raises(GeometryError):
        ConformalSurface("torus", ChartFunction(log_y=-1.0))
    with pytest.raises(GeometryError):
        ConformalSurface("cylinder")


def test_homogeneous_thermostat_formulas():
    p = homogeneous_thermostat(0.5, 0.2)
    w = np.linspace(0, 2 * np.pi, 7)
    assert np.allclose(p.theta(0.3, 1.7, w), -0.5 * np.cos(w))
    assert np.allclose(p.lam(-0.4, 0.6, w), 0.2 + 0.5 * np.sin(w))
    assert p.surface.chart == "halfplane" and not p.is_pure


def test_lambda_is_f_plus_e_dot_iv():
    s = ConformalSurface("torus", ChartFunction.cos_product(0.2))
    params = ThermostatParams(s, ChartFunction.trig([(1, 0, 0.3, 0)]), ChartFunction.trig([(0, 1, 0.0, 0.4)]))
    x, y, w = 0.7, 2.1, 1.1
    v = unit_vector(s, x, y, w)
    e = params.e(x, y)
    assert params.lam(x, y, w) == pytest.approx(params.f(x, y) + metric_inner(s, x, y, e, rotate90(s, x, y, v)))
    assert params.theta(x, y, w) == pytest.approx(metric_inner(s, x, y, e, v))


def test_surface_from_config_defaults():
    assert surface_from_config({"chart": "halfplane"}).phi.log_y == -1.0
    assert surface_from_config({}).compact
