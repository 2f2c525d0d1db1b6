import json
import math

import numpy as np
import pytest

from thermoray import flow as fl
from thermoray import tomography as tm
from thermoray.frame import F, TorusGrid
from thermoray.geometry import ChartFunction, ConformalSurface, ThermostatParams

SURF = ConformalSurface("torus", ChartFunction.cos_product(0.2))
MIXED = ThermostatParams(SURF, ChartFunction.trig([(1, 0, 0.3, 0), (0, 0, 0.2, 0)]),
                         ChartFunction.trig([(0, 1, 0, 0.2), (1, 1, 0.1, 0)]))


@pytest.fixture(scope="module")
def grid():
    return TorusGrid(SURF, 32)


def test_restriction_round_trip_and_modes(grid):
    rng = np.random.default_rng(0)
    f = tm.random_tensor_pair(grid, rng)
    p = f.restriction()
    assert set(p.support()) <= {-2, -1, 0, 1, 2}
    back = tm.unrestrict(p)
    assert np.allclose(back.q, f.q, atol=1e-13) and np.allclose(back.sigma, f.sigma, atol=1e-13)
    x, y, w = 0.3, 1.2, 0.7
    v = np.exp(-SURF.phi(x, y)) * np.array([math.cos(w), math.sin(w)])
    qv = [grid.interpolate(a, np.array([x]), np.array([y]))[0] for a in f.q]
    sv = [grid.interpolate(a, np.array([x]), np.array([y]))[0] for a in f.sigma]
    direct = qv[0] * v[0] ** 2 + 2 * qv[1] * v[0] * v[1] + qv[2] * v[1] ** 2 + sv[0] * v[0] + sv[1] * v[1]
    assert p(x, y, w)[0] == pytest.approx(direct, abs=1e-12)
    with pytest.raises(ValueError):
        tm.unrestrict(grid.random_field(rng, K=3))


def test_d_op_restricts_to_F(grid):
    rng = np.random.default_rng(1)
    w = tm.random_potential_pair(grid, rng)
    lhs = tm.d_op(w, MIXED).restriction()
    rhs = F(w.restriction(), grid.lam(MIXED))
    assert np.max(np.abs((lhs - rhs).modes)) < 1e-9
    assert set(lhs.support()) <= {-2, -1, 0, 1, 2}


@pytest.mark.parametrize("seed", range(5))
def test_adjointness(grid, seed):
    rng = np.random.default_rng(seed)
    d = tm.adjointness_defect(tm.random_potential_pair(grid, rng), tm.random_tensor_pair(grid, rng), MIXED)
    assert d["defect"] < 1e-8
    assert abs(d["<dw,f>"]) > 1e-2


def test_opposite_interior_sign_breaks_adjointness(grid):
    rng = np.random.default_rng(9)
    w, f = tm.random_potential_pair(grid, rng), tm.random_tensor_pair(grid, rng)
    pg = tm._pg(grid, MIXED)
    psi = tm.divergence_2tensor(grid, f.q) + tm.rot_form(tm.interior_ie(grid, pg, f.q)) \
        + pg.f * tm.rot_form(f.sigma)
    alt = tm.PotentialPair(grid, psi, tm.divergence_1form(grid, f.sigma))
    a, b = tm.d_op(w, MIXED).dot(f), w.dot(alt)
    assert abs(a + b) / (abs(a) + abs(b)) > 1e-3


def test_divergence_identities(grid):
    f = tm.random_tensor_pair(grid, np.random.default_rng(2))
    res = tm.divergence_identities_check(f.sigma, f.q, grid)
    assert max(res.values()) < 1e-9


def test_decomposition_of_potential_pair():
    g = TorusGrid(SURF, 32)
    w0 = tm.random_potential_pair(g, np.random.default_rng(3))
    w, fs, diag = tm.solenoidal_decompose(tm.d_op(w0, MIXED), MIXED)
    assert diag["norm_fs"] / diag["norm_f"] < 1e-6
    # w is recovered up to the constant-function kernel
    diff = w - w0
    assert np.max(np.abs(diff.psi)) < 1e-6
    assert np.ptp(diff.h) < 1e-6


def test_decomposition_properties(grid):
    rng = np.random.default_rng(4)
    f = tm.random_tensor_pair(grid, rng)
    w, fs, diag = tm.solenoidal_decompose(f, MIXED)
    assert diag["delta_fs_rel"] < 1e-8
    assert tm.orthogonality_probe(fs, MIXED, rng) < 1e-7
    assert ((tm.d_op(w, MIXED) + fs) - f).norm() < 1e-12 * f.norm()
    _w2, fs2, d2 = tm.solenoidal_decompose(fs, MIXED)
    assert (fs2 - fs).norm() < 1e-9 * f.norm() and d2["iterations"] <= 1
    # preconditioning helps
    _w3, _fs3, d3 = tm.solenoidal_decompose(f, MIXED, precondition=False, maxiter=5000)
    assert diag["iterations"] < d3["iterations"]


def test_solver_reports_divergence(grid):
    f = tm.random_tensor_pair(grid, np.random.default_rng(5))
    with pytest.raises(tm.SolverDivergence) as info:
        tm.solenoidal_decompose(f, MIXED, maxiter=2)
    assert info.value.diagnostics["iterations"] == 2


def test_norm_equivalence(grid):
    rng = np.random.default_rng(6)
    for _ in range(10):
        r = tm.norm_equivalence(tm.random_tensor_pair(grid, rng))
        assert math.pi / 2 - 1e-12 <= r <= math.pi + 1e-12
    # extremes: pure trace and pure 1-form give pi, trace-free 2-tensor gives pi/2
    sh = grid.X.shape
    one = np.ones(sh)
    E2 = grid.conf
    tf = tm.TensorPair(grid, np.stack([E2, 0 * one, -E2]), np.zeros((2,) + sh))
    assert tm.norm_equivalence(tf) == pytest.approx(math.pi / 2)
    s = tm.TensorPair(grid, np.zeros((3,) + sh), np.stack([one, 0 * one]))
    assert tm.norm_equivalence(s) == pytest.approx(math.pi)


def test_fibre_bounds(grid):
    rng = np.random.default_rng(7)
    for _ in range(10):
        p = tm.random_tensor_pair(grid, rng).restriction()
        fp, fvp, fv2p = tm.fibre_norms(p)
        assert np.all(fvp <= 2 * fp + 1e-12) and np.all(fv2p <= 4 * fp + 1e-12)
    u = tm.random_potential_pair(grid, rng)
    rep = tm.key_inequality_probe(u, MIXED, c_s=-1.0, c_u=1.0)
    assert rep["ratio_Vp"] <= 2 and rep["ratio_V2p"] <= 4
    assert rep["recovery_condition"] == pytest.approx(0.5)


def test_even_odd_split(grid):
    u = grid.random_field(np.random.default_rng(8), K=3)
    ev, od = tm.even_odd_split(u)
    assert np.allclose((ev + od).modes, u.modes)
    x, y, w = 0.1, 0.2, 0.3
    assert ev(x, y, w + math.pi)[0] == pytest.approx(ev(x, y, w)[0])
    assert od(x, y, w + math.pi)[0] == pytest.approx(-od(x, y, w)[0])


def test_xray_of_potential_on_circle(grid):
    params = ThermostatParams(SURF.__class__.flat_torus(), ChartFunction.constant(0.9))
    g = TorusGrid(params.surface, 32)
    traj = tm.closed_orbit_exact(params, (0.3, 0.5, 1.0), 2 * math.pi / 0.9)
    w = tm.random_potential_pair(g, np.random.default_rng(10))
    I, defect = tm.xray_transform(tm.d_op(w, params), traj)
    assert defect < 1e-9 and abs(I) < 1e-6
    # and a non-potential pair is seen
    f = tm.random_tensor_pair(g, np.random.default_rng(11))
    assert abs(tm.xray_transform(f, traj)[0]) > 1e-3


def test_coboundary_segment(grid):
    u = grid.random_field(np.random.default_rng(12), K=1)
    seg = fl.integrate_flow(MIXED, (0.3, 0.2, 0.4), 2.7)
    I, _ = tm.xray_transform(F(u, grid.lam(MIXED)), seg)
    assert I == pytest.approx((u(*seg.states[-1]) - u(*seg.states[0]))[0], abs=1e-7)


def test_simpson_odd_intervals():
    h = 0.1
    t = np.arange(8) * h  # 7 intervals
    assert tm._simpson(t**3, h) == pytest.approx(t[-1] ** 4 / 4, rel=1e-13)
    t = np.arange(9) * h
    assert tm._simpson(t**3, h) == pytest.approx(t[-1] ** 4 / 4, rel=1e-13)


def test_closed_orbit_finder():
    flat = ThermostatParams(ConformalSurface.flat_torus())
    # slope 1/2 geodesic closes after length sqrt(5) 2 pi
    traj, T, rep = tm.find_closed_orbit(flat, (0.1, 0.2, math.atan2(1, 2) + 1e-3), T_guess=math.sqrt(5) * 2 * math.pi)
    assert T == pytest.approx(math.sqrt(5) * 2 * math.pi, abs=1e-8)
    assert rep["defect"] < 1e-9
    circle = ThermostatParams(ConformalSurface.flat_torus(), ChartFunction.constant(1.2))
    _traj, T, _ = tm.find_closed_orbit(circle, (0.5, 0.5, 0.0))
    assert T == pytest.approx(2 * math.pi / 1.2, abs=1e-8)


def test_closed_orbit_generic_thermostat():
    params = ThermostatParams(ConformalSurface.flat_torus(), ChartFunction.trig([(0, 0, 1.5, 0), (1, 0, 0.1, 0)]))
    traj, T, rep = tm.find_closed_orbit(params, (0.5, 0.5, 0.0))
    assert rep["defect"] < 1e-9
    assert fl.sm_distance(params, traj.start, traj.end) < 1e-8


def test_pair_json(grid, tmp_path):
    f = tm.random_tensor_pair(grid, np.random.default_rng(13))
    (tmp_path / "f.json").write_text(json.dumps(f.to_json()))
    d = json.loads((tmp_path / "f.json").read_text())
    assert np.array_equal(np.asarray(d["q"]), f.q) and d["N"] == grid.N
