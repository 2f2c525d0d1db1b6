import math

import numpy as np
import pytest

from thermoray import flow as fl
from thermoray import riccati as rc
from thermoray.geometry import ChartFunction, ConformalSurface, ThermostatParams, homogeneous_thermostat

HYP = homogeneous_thermostat(0.0)


@pytest.mark.parametrize("c0", [-0.9, 0.0, 0.4, 0.95])
def test_hyperbolic_tanh_solution(c0):
    # K = -1, lambda = 0: c' = 1 - c^2
    traj = fl.integrate_flow(HYP, (0.0, 1.0, 0.3), 3.0)
    sol = rc.riccati_integrate(traj, c0)
    assert np.max(np.abs(sol.c - np.tanh(traj.t + math.atanh(c0)))) < 1e-12


@pytest.mark.parametrize("c0", [0.0, 0.5, -1.0])
def test_sphere_blow_up_time(c0):
    # K = +1: c' = -(1 + c^2), c = tan(arctan c0 - t), pole at pi/2 + arctan c0
    params = ThermostatParams(ConformalSurface.sphere_chart())
    traj = fl.integrate_flow(params, (0.0, 0.0, 0.2), 2.9)
    with pytest.raises(rc.RiccatiBlowUp) as info:
        rc.riccati_integrate(traj, c0)
    assert info.value.time == pytest.approx(math.pi / 2 + math.atan(c0), abs=1e-7)


def test_backward_direction_matches_reversed_orbit():
    traj = fl.integrate_flow(HYP, (0.0, 1.0, 0.3), 2.0)
    sol = rc.riccati_integrate(traj, -0.2, "backward")
    # same ODE c' = 1 - c^2, pinned at the final time
    expect = np.tanh(traj.t - traj.t[-1] + math.atanh(-0.2))
    assert np.max(np.abs(sol.c - expect)) < 1e-12


def test_geodesic_fixed_points():
    b = rc.orbit_bundles(HYP, (0.0, 1.0, 0.3), 2.0)
    assert np.max(np.abs(b.cu - 1)) < 1e-8 and np.max(np.abs(b.cs + 1)) < 1e-8
    assert rc.weak_bundle_c(HYP, (0.2, 0.7, 1.0), "unstable") == pytest.approx(1.0, abs=1e-8)
    assert rc.weak_bundle_c(HYP, (0.2, 0.7, 1.0), "stable") == pytest.approx(-1.0, abs=1e-8)


@pytest.mark.parametrize("e", [0.1, 0.5, 1.0])
def test_bundles_on_homogeneous_thermostat(e):
    params = homogeneous_thermostat(e)
    b = rc.orbit_bundles(params, (0.0, 1.0, 0.3), 3.0)
    assert b.seed_gap < 1e-8
    chk = rc.midpoint_curvature_check(b)
    assert chk["residual"] < 1e-6
    assert chk["max_product"] < 0
    assert np.all(b.cu > b.cs)
    # each bundle solves the Riccati ODE and matches the Jacobi cross-check
    assert rc.RiccatiSolution(b.traj, b.cu).rhs_residual() < 1e-8
    assert rc.RiccatiSolution(b.traj, b.cs).rhs_residual() < 1e-8
    assert rc.dphi_unstable_crosscheck(params, (0.0, 1.0, 0.3), T=15.0) == pytest.approx(b.cu[0], abs=1e-8)


def test_homogeneous_bundles_depend_on_angle_only():
    params = homogeneous_thermostat(0.5)
    a = rc.weak_bundle_c(params, (0.0, 1.0, 0.7))
    b = rc.weak_bundle_c(params, (3.0, 0.2, 0.7))
    assert a == pytest.approx(b, abs=1e-8)


def test_riccati_and_jacobi_agree():
    traj = fl.integrate_flow(homogeneous_thermostat(0.6, 0.1), (0.0, 1.0, 0.3), 4.0)
    assert rc.riccati_jacobi_consistency(traj, 0.4) < 1e-10
    assert rc.graph_map_residual(traj, 0.4) < 1e-10


def test_generic_torus_thermostat_rhs():
    s = ConformalSurface("torus", ChartFunction.cos_product(0.2))
    params = ThermostatParams(s, ChartFunction.trig([(1, 0, 0.3, 0)]), ChartFunction.trig([(0, 1, 0, 0.2)]))
    traj = fl.integrate_flow(params, (0.1, 0.2, 0.3), 1.0)
    assert rc.riccati_integrate(traj, 0.1).rhs_residual() < 1e-8


def test_seed_disagreement_raises():
    with pytest.raises(rc.NonConvergenceError):
        rc.orbit_bundles(homogeneous_thermostat(0.5), (0.0, 1.0, 0.3), 1.0, warmup=0.5)


def test_bad_arguments():
    traj = fl.integrate_flow(HYP, (0.0, 1.0, 0.3), 0.1)
    with pytest.raises(ValueError):
        rc.riccati_integrate(traj, float("nan"))
    with pytest.raises(ValueError):
        rc.riccati_integrate(traj, 0.0, "sideways")
    with pytest.raises(ValueError):
        rc.weak_bundle_c(HYP, (0, 1, 0), "neutral")


def test_csv_dump(tmp_path):
    b = rc.orbit_bundles(HYP, (0.0, 1.0, 0.3), 0.5)
    b.to_csv(tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "t,c_s,c_u,theta,R,product"
    assert len(lines) == len(b.cs) + 1
