"""Riccati solutions along orbits, the weak-bundle functions c^s, c^u and R_c.

Along an orbit the Riccati equation F(c) + c^2 + K - H_c(lambda) + lambda^2 = 0
reads c' = V(lambda) c - c^2 - (K - H(lambda) + lambda^2). Forward solutions
are attracted to c^u and backward ones to c^s, so both are computed by
integrating from generic data over a warmup window.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .flow import DEFAULT_DT, SMPoint, Trajectory, integrate_flow, integrate_steps

C_CAP = 1e6
DEFAULT_WARMUP = 20.0
SEED_TOL = 1e-8


class RiccatiBlowUp(RuntimeError):
    """|c| passed the cap; ``time`` is the (interpolated) blow-up time."""

    def __init__(self, msg, time, partial=None):
        super().__init__(msg)
        self.time = time
        self.partial = partial


class NonConvergenceError(RuntimeError):
    def __init__(self, msg, values=None):
        super().__init__(msg)
        self.values = values


@dataclass(frozen=True)
class RiccatiSolution:
    traj: Trajectory
    c: np.ndarray
    bundle: str = "custom"
    warmup: float = 0.0

    def rhs_residual(self):
        """max |c' - (V(lambda) c - c^2 - K + H(lambda) - lambda^2)| with a 4th-order stencil."""
        q = self.traj.quantities()
        h = self.traj.dt
        c = self.c
        d = (c[:-4] - 8 * c[1:-3] + 8 * c[3:-1] - c[4:]) / (12 * h)
        lam, vl, hl, K = (q[2:-2, j] for j in (kernels.Q_LAM, kernels.Q_VLAM, kernels.Q_HLAM, kernels.Q_K))
        cc = c[2:-2]
        return float(np.max(np.abs(d - (vl * cc - cc * cc - (K - hl + lam * lam)))))


def _solve_along(traj, c0, cap=C_CAP):
    states = np.ascontiguousarray(traj.states)
    c, status, last = kernels.riccati_along(states, traj.dt, float(c0), cap, *traj.params.packed())
    return c, int(status), int(last)


def _pole_time(path, c, last):
    """Elapsed time to the pole of c, from w = 1/c.

    Writing c' = -c^2 + a c + b, w solves the regular equation
    w' = 1 - a w - b w^2. It is marched with RK4 steps of 2h from the last
    well-resolved sample (odd samples serve as midpoints) and the zero of w
    is located by cubic Hermite interpolation.
    """
    h = path.dt
    ok = np.nonzero(np.abs(c[:last + 1]) * abs(h) <= 0.05)[0]
    j = int(ok[-1]) if ok.size else 0
    q = path.quantities()
    lam, vl, hl, K = (q[:, k] for k in (kernels.Q_LAM, kernels.Q_VLAM, kernels.Q_HLAM, kernels.Q_K))
    a, b = vl, -(K - hl + lam * lam)

    def dw(i, w):
        return 1.0 - a[i] * w - b[i] * w * w

    w = 1.0 / c[j]
    i = j
    while i + 2 < len(c):
        H = 2 * h
        k1 = dw(i, w)
        k2 = dw(i + 1, w + 0.5 * H * k1)
        k3 = dw(i + 1, w + 0.5 * H * k2)
        k4 = dw(i + 2, w + H * k3)
        w2 = w + H * (k1 + 2 * k2 + 2 * k3 + k4) / 6
        if w2 * w <= 0.0:
            # Hermite cubic on [0, 1] in s = (t - t_i) / H
            d0, d1 = H * dw(i, w), H * dw(i + 2, w2)
            poly = np.array([2 * w - 2 * w2 + d0 + d1, -3 * w + 3 * w2 - 2 * d0 - d1, d0, w])
            roots = [r.real for r in np.roots(poly) if abs(r.imag) < 1e-12 and -1e-9 <= r.real <= 1 + 1e-9]
            s = min(roots) if roots else w / (w - w2)
            return abs(path.t[i] - path.t[0]) + s * abs(H)
        w, i = w2, i + 2
    return abs(path.t[last] - path.t[0]) + abs(1.0 / c[last])


def riccati_integrate(traj, c0, direction="forward", bundle="custom", cap=C_CAP):
    """RK4 Riccati solution along ``traj``.

    ``forward`` starts at the first sample, ``backward`` at the last one and
    runs against the flow. The returned samples are in the trajectory's order.
    """
    if not math.isfinite(c0):
        raise ValueError("c0 must be finite")
    if direction not in ("forward", "backward"):
        raise ValueError("direction must be 'forward' or 'backward'")
    path = traj if direction == "forward" else traj.reversed()
    c, status, last = _solve_along(path, c0, cap)
    if status == kernels.STATUS_BLOWUP:
        t_star = _pole_time(path, c, last)
        raise RiccatiBlowUp(f"Riccati solution blew up near t={t_star:.6g}", t_star,
                            c[:last + 1].copy())
    if status != kernels.STATUS_OK:
        raise RiccatiBlowUp("Riccati solution became non-finite", abs(path.t[last] - path.t[0]))
    if direction == "backward":
        c = c[::-1].copy()
    return RiccatiSolution(traj, c, bundle)


def _theta_at(params, states):
    return kernels.sample_quantities(np.ascontiguousarray(states), *params.packed())[:, kernels.Q_THETA]


def seeds_for(bundle, theta0):
    """Two initial values inside the attracting region of the requested bundle.

    When K < 0 the set {theta + c > 0} is forward invariant and
    {theta + c < 0} backward invariant, so these seeds never blow up there.
    """
    sgn = 1.0 if bundle == "unstable" else -1.0
    return (-theta0 + sgn * 1.0, -theta0 + sgn * 3.0)


@dataclass(frozen=True)
class BundleSamples:
    """c^s and c^u on one orbit window, with the frame data at the same samples."""

    traj: Trajectory
    cs: np.ndarray
    cu: np.ndarray
    seed_gap: float
    warmup: float

    def quantities(self):
        return self.traj.quantities()

    @property
    def theta(self):
        return self.quantities()[:, kernels.Q_THETA]

    def to_csv(self, path, rc=None):
        th = self.theta
        prod = (th + self.cs) * (th + self.cu)
        n = len(self.cs)
        rc = np.full(n, np.nan) if rc is None else rc
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["t", "c_s", "c_u", "theta", "R", "product"])
            for i in range(n):
                wr.writerow([repr(float(v)) for v in (self.traj.t[i], self.cs[i], self.cu[i], th[i], rc[i], prod[i])])


def orbit_bundles(params, p0, T, warmup=DEFAULT_WARMUP, dt=DEFAULT_DT, tol=SEED_TOL):
    """c^u and c^s along the orbit of p0 on [0, T].

    The orbit is integrated from p0 in both directions (so the window is
    exactly p0's orbit), c^u is solved forward from time -warmup and c^s
    backward from T + warmup, each from two seeds that must agree to ``tol``.
    """
    p0 = SMPoint.of(p0)
    nb = int(math.ceil(warmup / dt - 1e-9)) if warmup > 0 else 0
    h = warmup / nb if nb else dt
    nw = max(4, int(round(T / h)))
    fwd = integrate_steps(params, p0, nw + nb, h)
    if nb:
        back = integrate_steps(params, p0, nb, -h)
        states = np.concatenate([back.states[::-1], fwd.states[1:]])
        t = np.concatenate([back.t[::-1], fwd.t[1:]])
    else:
        states, t = fwd.states, fwd.t
    full = Trajectory(params, t, states, h)
    th_start = _theta_at(params, states[:1])[0]
    th_end = _theta_at(params, states[-1:])[0]
    us = [riccati_integrate(full, s0, "forward").c for s0 in seeds_for("unstable", th_start)]
    ss = [riccati_integrate(full, s0, "backward").c for s0 in seeds_for("stable", th_end)]
    win = slice(nb, nb + nw + 1)
    gap = max(float(np.max(np.abs(us[0][win] - us[1][win]))),
              float(np.max(np.abs(ss[0][win] - ss[1][win]))))
    if not gap <= 10 * tol:
        raise NonConvergenceError(f"seed disagreement {gap:.3g} > {10 * tol:.3g}", gap)
    return BundleSamples(full.segment(win.start, win.stop), ss[0][win].copy(), us[0][win].copy(),
                         gap, warmup)


def weak_bundle_c(params, p, bundle="unstable", warmup=DEFAULT_WARMUP, dt=DEFAULT_DT, tol=SEED_TOL):
    """c^u(p) (forward from time -warmup) or c^s(p) (backward from +warmup)."""
    if bundle not in ("stable", "unstable"):
        raise ValueError("bundle must be 'stable' or 'unstable'")
    p = SMPoint.of(p)
    T = -warmup if bundle == "unstable" else warmup
    orbit = integrate_flow(params, p, T, dt).reversed()
    # orbit now runs toward p (first sample far away, last sample p) in either case
    th0 = _theta_at(params, orbit.states[:1])[0]
    vals = []
    for s0 in seeds_for(bundle, th0):
        direction = "forward" if bundle == "unstable" else "backward"
        path = orbit if bundle == "unstable" else orbit.reversed()
        sol = riccati_integrate(path, s0, direction)
        vals.append(float(sol.c[-1] if bundle == "unstable" else sol.c[0]))
    if abs(vals[0] - vals[1]) > 10 * tol:
        raise NonConvergenceError(f"seeds disagree by {abs(vals[0] - vals[1]):.3g}", vals)
    return vals[0]


def _d_dt(a, h):
    """4th-order central derivative on interior samples (drops two at each end)."""
    return (a[:-4] - 8 * a[1:-3] + 8 * a[3:-1] - a[4:]) / (12 * h)


def curvature_function_Rc(params, c, traj):
    """R_c = F(theta + c) + (theta + 2c)(theta + c) + K along ``traj``.

    F(theta) comes from the frame formulas, F(c) = dc/dt by a 4th-order
    stencil; the result covers samples 2..n-2.
    """
    c = np.asarray(c, dtype=float)
    q = traj.quantities()
    th, fth, K = q[:, kernels.Q_THETA], q[:, kernels.Q_FTHETA], q[:, kernels.Q_K]
    Fc = _d_dt(c, traj.dt)
    inner = slice(2, len(c) - 2)
    thi, ci = th[inner], c[inner]
    return fth[inner] + Fc + (thi + 2 * ci) * (thi + ci) + K[inner]


def midpoint_curvature_check(bundles):
    """R at the midpoint (c^s + c^u)/2 against (theta + c^s)(theta + c^u)."""
    mid = 0.5 * (bundles.cs + bundles.cu)
    rc = curvature_function_Rc(bundles.traj.params, mid, bundles.traj)
    th = bundles.theta[2:-2]
    prod = (th + bundles.cs[2:-2]) * (th + bundles.cu[2:-2])
    return {"residual": float(np.max(np.abs(rc - prod))),
            "max_product": float(np.max(prod)),
            "negative_fraction": float(np.mean(prod < 0)),
            "n": int(prod.size)}


def riccati_jacobi_consistency(traj, c0, ylim=(1e-6, 1e6)):
    """max |jy'/jy - c| for the Jacobi field started at (0, 1, c0), while |jy| stays in ylim."""
    from .flow import integrate_jacobi

    sol = riccati_integrate(traj, c0, "forward")
    jd = integrate_jacobi(traj, 0.0, 1.0, c0)
    ok = (np.abs(jd.jy) > ylim[0]) & (np.abs(jd.jy) < ylim[1])
    if not np.all(ok):
        stop = int(np.argmin(ok))
        ok[stop:] = False
    ratio = jd.jydot[ok] / jd.jy[ok]
    return float(np.max(np.abs(ratio - sol.c[ok])))


def graph_map_residual(traj, c0, x0=0.7):
    """Along the Jacobi field with jy'/jy = c: S(J) = (lambda jx + c jy) i gdot must equal J'."""
    from .flow import integrate_jacobi

    sol = riccati_integrate(traj, c0, "forward")
    jd = integrate_jacobi(traj, x0, 1.0, c0)
    lhs = jd.lam * jd.jx + sol.c * jd.jy
    scale = np.maximum(1.0, np.abs(jd.jdot_vertical))
    return float(np.max(np.abs(lhs - jd.jdot_vertical) / scale))


def dphi_unstable_crosscheck(params, p, T=8.0, dt=DEFAULT_DT):
    """Secondary oracle for c^u(p): push a generic Jacobi field forward from
    phi_{-T}(p) and read jy'/jy at p (the field aligns with the weak unstable
    bundle)."""
    from .flow import integrate_jacobi

    orbit = integrate_flow(params, p, -T, dt).reversed()
    jd = integrate_jacobi(orbit, 0.0, 1.0, 0.0)
    return float(jd.jydot[-1] / jd.jy[-1])
