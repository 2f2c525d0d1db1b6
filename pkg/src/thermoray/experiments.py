"""The checks behind each CLI subcommand.

Each runner takes a validated config dict plus run options and returns
(checks, extra, files). Everything random is drawn from one seeded
Generator so reruns are bit-identical.
"""
from __future__ import annotations

import json
import os

import numpy as np

from . import flow as fl
from . import pestov as ps
from . import riccati as rc
from . import tomography as tm
from .config import IncompatibleError, build_params, build_surface, canonical_identity
from .frame import TorusGrid, verify_commutators, verify_modified_commutators
from .geometry import ChartFunction, ConformalSurface, ThermostatParams
from .reports import Check, write_csv

TOL = {
    "commutators": 1e-9, "modified": 1e-9, "pestov": 1e-8, "pestov-int": 1e-8, "vanishing": 1e-9,
    "pestov-modified": 1e-8, "pestov-theta": 1e-8, "jacobi": 1e-5, "xdot": 1e-8, "riccati": 1e-8,
    "midpoint": 1e-6, "decompose": 1e-6, "orthogonality": 1e-7, "adjoint": 1e-8,
    "xray": 1e-6, "coboundary": 1e-7, "order": 0.3, "spectral": 1e-10, "flow": 1e-8,
}


class Options:
    def __init__(self, seed=0, tol=None, out=".", dump_orbit=False):
        self.seed = seed
        self.tol = tol
        self.out = out
        self.dump_orbit = dump_orbit

    def tolerance(self, key):
        return self.tol if self.tol is not None else TOL[key]


def _grid(cfg, surface, default_N=64):
    return TorusGrid(surface, cfg.get("grid", {}).get("N", default_N))


def _point(cfg, default):
    return tuple(cfg.get("point", default))


def _need_torus(surface, what):
    if not surface.compact:
        raise IncompatibleError(f"{what} needs a compact torus chart, got {surface.chart!r}")


# -- verify ---------------------------------------------------------------------

def run_verify(cfg, opt, identity=None):
    identity = canonical_identity(identity or cfg.get("identity", "pestov"))
    surface = build_surface(cfg)
    params = build_params(cfg, surface)
    rng = np.random.default_rng(opt.seed)
    kmax = cfg.get("grid", {}).get("kmax", 8)
    tol = opt.tolerance(identity)
    info = {"chart": surface.chart, "identity": identity}
    if identity in ("pestov-int", "pestov-modified", "pestov-theta"):
        _need_torus(surface, f"the integrated identity {identity!r}")
    if identity in ("pestov-modified", "pestov-theta") and not params.is_pure:
        raise IncompatibleError(f"{identity!r} needs a pure thermostat (f = 0)")

    if identity == "commutators":
        N = cfg.get("grid", {}).get("N", 64)
        res = verify_commutators(surface, cfg.get("samples", 200), N, kmax, opt.seed)
        return [Check(f"commutator {k}", v, tol, {**info, "N": N, "kmax": kmax}) for k, v in res.items()], {}, []

    if identity == "modified":
        _need_torus(surface, "the modified-frame battery")
        grid = _grid(cfg, surface)
        c = grid.random_field(rng, K=2, kh=2, amp=0.5)
        res = verify_modified_commutators(surface, params, c, N=grid.N, seed=opt.seed)
        return [Check(f"modified {k}", v, tol, info) for k, v in res.items()], {}, []

    if identity == "pestov":
        n = cfg.get("samples", 100)
        if surface.compact:
            grid = _grid(cfg, surface, default_N=24)
            worst = 0.0
            for _ in range(n):
                u, lam, c = ps.random_battery_draw(grid, rng)
                if not (params.f.is_zero and params.stream.is_zero):
                    lam = grid.lam(params)
                worst = max(worst, ps.pointwise_pestov(u, lam, c).residual)
            return [Check("pestov pointwise", worst, tol, {**info, "draws": n, "N": grid.N})], {}, []
        from .analytic import AnalyticSpace, x, y, w
        import sympy as sp

        space = AnalyticSpace(surface)
        u = space.field(sp.sin(x) * y * sp.cos(2 * w) + sp.exp(-y) * sp.sin(w))
        lam = space.lam(params) + space.field(0.2 * sp.cos(x))
        c = space.field(0.3 * sp.cos(w) + 0.1 * x)
        pts = space.sample_points(rng, n)
        rep = ps.pointwise_pestov(u, lam, c, points=pts)
        return [Check("pestov pointwise (symbolic)", rep.residual, tol, {**info, "points": n})], {}, []

    grid = _grid(cfg, surface)
    if identity == "pestov-int":
        u = grid.random_field(rng, K=3, kh=2)
        c = grid.random_field(rng, K=1, kh=1, amp=0.3)
        rep = ps.integrated_pestov(u, grid.lam(params), c)
        return [Check("pestov integrated (relative)", rep.relative, tol, {**info, "N": grid.N}),
                Check("pestov vanishing terms", rep.breakdown["max_vanishing"], TOL["vanishing"]
                      if opt.tol is None else opt.tol, info)], {"report": rep.as_dict()}, []

    theta = grid.theta(params)
    u = grid.random_field(rng, K=3, kh=2)
    if identity == "pestov-modified":
        c = grid.random_field(rng, K=1, kh=1, amp=0.3)
        rep = ps.modified_pestov(u, theta, c, strict=False)
        return [Check("modified identity integrated (relative)", rep.relative, tol, info),
                Check("modified identity relation VF phi", rep.breakdown["relation residual"], tol, info)], \
            {"report": rep.as_dict()}, []
    rep = ps.minus_theta_identity(u, theta, strict=False)
    return [Check("c = -theta identity integrated (relative)", rep.relative, tol, info),
            Check("c = -theta curvature term", ps.minus_theta_curvature_residual(theta), 1e-9, info)], \
        {"report": rep.as_dict()}, []


# -- flow and jacobi ----------------------------------------------------------

def run_flow(cfg, opt):
    surface = build_surface(cfg)
    params = build_params(cfg, surface)
    dt = cfg.get("dt", fl.DEFAULT_DT)
    T = cfg.get("T", 5.0)
    p0 = _point(cfg, (0.3, 1.0, 0.4))
    traj = fl.integrate_flow(params, p0, T, dt)
    res = traj.equation_residual()
    info = {"chart": surface.chart, "T": T, "dt": traj.dt, "point": list(p0)}
    checks = [Check("flow unit speed", res["speed"], opt.tolerance("flow"), info),
              Check("flow geodesic curvature = lambda", res["curvature"], 1e-7 if opt.tol is None else opt.tol, info)]
    if params.is_pure:
        checks.append(Check("flow reversibility", fl.reversibility_defect(params, p0, T, dt),
                            1e-7 if opt.tol is None else opt.tol, info))
    files = []
    if opt.dump_orbit:
        files += _dump(traj, opt.out, "orbit")
    end = traj.end
    return checks, {"end": [end.x, end.y, end.omega]}, files


def _dump(traj, out, stem):
    os.makedirs(out, exist_ok=True)
    a, b = os.path.join(out, f"{stem}.csv"), os.path.join(out, f"{stem}.json")
    traj.to_csv(a)
    traj.dump(b)
    return [a, b]


def run_jacobi(cfg, opt):
    surface = build_surface(cfg)
    params = build_params(cfg, surface)
    rng = np.random.default_rng(opt.seed)
    T = cfg.get("T", 3.0)
    dt = cfg.get("dt", fl.DEFAULT_DT)
    n = cfg.get("samples", 20)
    worst, worst_x = 0.0, 0.0
    for _ in range(n):
        if surface.compact:
            p0 = (rng.uniform(0, surface.Lx), rng.uniform(0, surface.Ly), rng.uniform(0, 2 * np.pi))
        else:
            p0 = (rng.uniform(-0.5, 0.5), rng.uniform(0.8, 1.5), rng.uniform(0, 2 * np.pi))
        xi = rng.standard_normal(3)
        worst = max(worst, fl.check_linearized_flow(params, p0, xi, T, dt)["residual"])
        traj = fl.integrate_flow(params, p0, T, dt)
        jd = fl.integrate_jacobi(traj, *fl.jacobi_initial_data(params, p0, xi))
        worst_x = max(worst_x, jd.xdot_residual() / max(1.0, float(np.max(np.abs(jd.jy)))))
    info = {"chart": surface.chart, "T": T, "pairs": n}
    files = _dump(traj, opt.out, "jacobi_orbit") if opt.dump_orbit else []
    return [Check("linearized flow vs Jacobi (Richardson FD)", worst, opt.tolerance("jacobi"), info),
            Check("jacobi xdot = lambda y", worst_x, opt.tolerance("xdot"), info)], {}, files


# -- riccati -----------------------------------------------------------------------

def run_riccati(cfg, opt, chart=None, e_scale=None):
    cfg = dict(cfg)
    if chart is not None:
        cfg["surface"] = {**cfg.get("surface", {}), "chart": chart}
    if e_scale is not None:
        cfg["thermostat"] = {**cfg.get("thermostat", {}), "e_scale": float(e_scale)}
    surface = build_surface(cfg, default_chart="halfplane")
    params = build_params(cfg, surface)
    T = cfg.get("T", 10.0)
    Tw = cfg.get("warmup", rc.DEFAULT_WARMUP)
    dt = cfg.get("dt", fl.DEFAULT_DT)
    p0 = _point(cfg, (0.0, 1.0, 0.3))
    tol = opt.tolerance("riccati")
    hyperbolic_pure = params.is_pure and surface.chart == "halfplane" and surface.phi.log_y == -1.0 \
        and not surface.phi.modes.shape[0]
    info = {"chart": surface.chart, "warmup": Tw, "T": T, "point": list(p0)}
    b = rc.orbit_bundles(params, p0, T, Tw, dt, tol)
    cu0, cs0 = float(b.cu[0]), float(b.cs[0])
    checks = [Check("riccati seed independence", b.seed_gap, tol, info),
              Check("c^u(p)", cu0, None, info), Check("c^s(p)", cs0, None, info)]
    if params.is_pure and params.is_magnetic:
        checks += [Check("c^u = 1", abs(cu0 - 1.0), tol, info), Check("c^s = -1", abs(cs0 + 1.0), tol, info)]
    mid_chk = rc.midpoint_curvature_check(b)
    mid = 0.5 * (b.cs + b.cu)
    Rc = rc.curvature_function_Rc(params, mid, b.traj)
    if hyperbolic_pure:
        checks += [Check("R_mid = (theta+c^s)(theta+c^u)", mid_chk["residual"], opt.tolerance("midpoint"), info),
                   Check("max (theta+c^s)(theta+c^u) < 0", mid_chk["max_product"], 0.0, info)]
    else:
        checks.append(Check("R_mid = (theta+c^s)(theta+c^u)", mid_chk["residual"], None, info))
    path = os.path.join(opt.out, "riccati.csv")
    os.makedirs(opt.out, exist_ok=True)
    full = np.full(len(b.cs), np.nan)
    full[2:-2] = Rc
    b.to_csv(path, full)
    files = [path] + (_dump(b.traj, opt.out, "riccati_orbit") if opt.dump_orbit else [])
    return checks, {"c_u": cu0, "c_s": cs0, "negative_fraction": mid_chk["negative_fraction"]}, files


# -- tomography -----------------------------------------------------------------------

def _torus_setup(cfg):
    surface = build_surface(cfg)
    _need_torus(surface, "tomography on grids")
    params = build_params(cfg, surface)
    return surface, params, _grid(cfg, surface)


def run_decompose(cfg, opt):
    surface, params, grid = _torus_setup(cfg)
    rng = np.random.default_rng(opt.seed)
    tol = opt.tolerance("decompose")
    w0 = tm.random_potential_pair(grid, rng)
    _w, fs, dpot = tm.solenoidal_decompose(tm.d_op(w0, params), params)
    f = tm.random_tensor_pair(grid, rng)
    _w, fs2, dgen = tm.solenoidal_decompose(f, params)
    _w3, fs3, _d3 = tm.solenoidal_decompose(fs2, params)
    info = {"N": grid.N}
    checks = [
        Check("potential input |f_s|/|f|", dpot["norm_fs"] / dpot["norm_f"], tol, info),
        Check("random input |delta f_s|/|f|", dgen["delta_fs_rel"], tol, info),
        Check("orthogonality <f_s, d w>", tm.orthogonality_probe(fs2, params, rng), opt.tolerance("orthogonality"), info),
        Check("projection |f_s' - f_s|/|f|", (fs3 - fs2).norm() / f.norm(), 1e-9, info),
        Check("CG iterations", float(max(dpot["iterations"], dgen["iterations"])), float(tm.CG_MAXITER), info),
    ]
    path = os.path.join(opt.out, "decompose_fs.json")
    os.makedirs(opt.out, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(fs2.to_json(), fh, sort_keys=True)
    return checks, {"potential": dpot, "random": dgen}, [path]


def run_adjoint(cfg, opt):
    _surface, params, grid = _torus_setup(cfg)
    rng = np.random.default_rng(opt.seed)
    n = cfg.get("samples", 100)
    worst = 0.0
    for _ in range(n):
        w = tm.random_potential_pair(grid, rng)
        f = tm.random_tensor_pair(grid, rng)
        worst = max(worst, tm.adjointness_defect(w, f, params)["defect"])
    return [Check("<dw,f> + <w,delta f>", worst, opt.tolerance("adjoint"), {"draws": n, "N": grid.N})], {}, []


def run_xray(cfg, opt):
    surface = build_surface(cfg)
    _need_torus(surface, "the X-ray kernel check")
    kappa = cfg.get("kappa", 0.8)
    params = ThermostatParams(surface, ChartFunction.constant(kappa)) if "thermostat" not in cfg \
        else build_params(cfg, surface)
    grid = _grid(cfg, surface, default_N=32)
    rng = np.random.default_rng(opt.seed)
    p0 = _point(cfg, (0.3, 0.2, 0.4))
    dt = cfg.get("dt", fl.DEFAULT_DT)
    info = {"kappa": kappa, "N": grid.N}
    checks = []
    w = tm.random_potential_pair(grid, rng)
    if params.is_magnetic and params.f.modes.shape[0] == 1 and not np.any(params.f.modes[:, :2]) \
            and surface.phi.is_zero:
        k = float(params.f.modes[0, 2])
        traj = tm.closed_orbit_exact(params, p0, 2 * np.pi / abs(k), dt=dt)
    else:
        traj, _T, _rep = tm.find_closed_orbit(params, p0, cfg.get("T"), dt=dt)
    I, defect = tm.xray_transform(tm.d_op(w, params), traj)
    checks.append(Check("I(potential pair) on closed orbit", abs(I), opt.tolerance("xray"),
                        {**info, "defect": defect, "period": traj.T}))
    seg = fl.integrate_flow(params, p0, cfg.get("T", 3.1), dt)
    u = w.restriction()
    Iu, _ = tm.xray_transform(tm.F(u, grid.lam(params)), seg)
    diff = abs(Iu - (u(*seg.states[-1]) - u(*seg.states[0]))[0])
    checks.append(Check("coboundary integral = endpoint difference", diff, opt.tolerance("coboundary"), info))
    files = _dump(traj, opt.out, "xray_orbit") if opt.dump_orbit else []
    return checks, {"I": I, "defect": defect}, files


# -- sweeps -------------------------------------------------------------------------------

def convergence_sweep(cfg, opt, kind=None, levels=None):
    """Residual against resolution. Returns (checks, rows, fitted order)."""
    kind = kind or cfg.get("sweep", "flow")
    levels = list(levels or cfg.get("levels") or {"flow": [0.1, 0.05, 0.025, 0.0125],
                                                   "spectral": [16, 24, 32, 48, 64],
                                                   "constant": [16, 32, 64]}[kind])
    if len(levels) < 3:
        raise ValueError("a sweep needs at least 3 levels")
    surface = build_surface(cfg) if "surface" in cfg else ConformalSurface("torus", ChartFunction.cos_product(0.2))
    if kind == "flow":
        params = build_params(cfg, surface) if "thermostat" in cfg else ThermostatParams(
            surface, ChartFunction.trig([(1, 0, 0.3, 0)]), ChartFunction.trig([(0, 1, 0, 0.2)]))
        p0 = _point(cfg, (0.1, 0.5, 1.0))
        T = cfg.get("T", 3.0)
        ref = fl.integrate_flow(params, p0, T, min(levels) / 8).states[-1]
        rows = [(h, float(np.linalg.norm(fl.integrate_flow(params, p0, T, h).states[-1] - ref))) for h in levels]
        order = fl.fitted_order([r[0] for r in rows], [r[1] for r in rows])
        checks = [Check("flow fitted order - 4", abs(order - 4.0), opt.tolerance("order"), {"order": order})]
        return checks, rows, order
    rows = []
    for N in levels:
        grid = TorusGrid(surface, int(N))
        rng = np.random.default_rng(opt.seed)
        if kind == "constant":
            u = grid.constant(1.7)
            lam = grid.constant(0.0)
            c = grid.constant(0.4)
            res = max(max(r.max_abs() for r in _comm(u, grid).values()), ps.pointwise_pestov(u, lam, c).residual)
        else:
            res = max(r.max_abs() for r in _comm(_analytic_test_field(grid), grid).values())
        rows.append((int(N), float(res)))
    if kind == "constant":
        # exact zeros expected: the tolerance only guards against any rounding at all
        return [Check("constant-field residuals", max(r[1] for r in rows), 1e-300, {})], rows, float("nan")
    final = [r for r in rows if r[0] >= 64]
    floor = final[0][1] if final else rows[-1][1]
    checks = [Check("spectral residual by N=64", floor, opt.tolerance("spectral"), {"levels": levels})]
    return checks, rows, float("nan")


def _comm(u, grid):
    from .frame import commutator_residuals

    return commutator_residuals(u, grid.curvature())


def _analytic_test_field(grid):
    return grid.from_function(lambda x, y, w: np.exp(0.3 * np.cos(x)) * np.sin(w)
                              + np.sin(x + y) * np.cos(2 * w) + 0.2 * np.cos(2 * y) * np.sin(3 * w), 3)


def run_sweep(cfg, opt, kind=None, levels=None):
    kind = kind or cfg.get("sweep", "flow")
    checks, rows, order = convergence_sweep(cfg, opt, kind, levels)
    header = ["dt" if kind == "flow" else "N", "residual"]
    path = write_csv(os.path.join(opt.out, f"sweep_{kind}.csv"), header, rows)
    return checks, {"kind": kind, "rows": rows, "order": order}, [path]


RUNNERS = {
    "verify": run_verify, "flow": run_flow, "jacobi": run_jacobi, "riccati": run_riccati,
    "decompose": run_decompose, "xray": run_xray, "sweep": run_sweep, "adjoint-test": run_adjoint,
}
__all__ = ["Options", "RUNNERS", "convergence_sweep", "TOL"]
