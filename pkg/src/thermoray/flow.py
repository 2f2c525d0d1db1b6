"""Thermostat orbits on SM and the scalar Jacobi system along them.

The flow of F = X + lambda V in chart coordinates (x, y, w) is

    x' = e^{-phi} cos w,   y' = e^{-phi} sin w,
    w' = e^{-phi}(phi_y cos w - phi_x sin w) + lambda(x, y, w).

A Jacobi field is stored by its components in the moving frame,
J = a gdot + b i gdot, with a' = lambda b and
b'' - V(lambda) b' + (K - H(lambda) + lambda^2) b = 0.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .geometry import GeometryError, ThermostatParams

DEFAULT_DT = 1e-3


class FlowError(RuntimeError):
    pass


class StepSizeError(FlowError, ValueError):
    pass


class ChartExitError(FlowError):
    """The orbit left the chart box; ``partial`` holds the samples up to exit."""

    def __init__(self, msg, partial=None):
        super().__init__(msg)
        self.partial = partial


@dataclass(frozen=True)
class SMPoint:
    x: float
    y: float
    omega: float

    def as_array(self):
        return np.array([self.x, self.y, self.omega], dtype=float)

    @classmethod
    def of(cls, p):
        if isinstance(p, SMPoint):
            return p
        x, y, w = (float(v) for v in p)
        return cls(x, y, w)


def _steps(T, dt):
    n = max(1, int(math.ceil(abs(T) / dt - 1e-9)))
    return n, (T / n if T else 0.0)


def _check_dt(params, dt):
    if not dt > 0:
        raise StepSizeError(f"dt must be positive, got {dt}")
    dmax = params.dt_max()
    if dt > dmax:
        raise StepSizeError(f"dt={dt:g} exceeds dt_max={dmax:g} for these parameters")


def _run(params, state7, n, dt, mode, cap=1e6):
    state7 = np.ascontiguousarray(state7, dtype=float)
    box = np.asarray(params.surface.box, dtype=float)
    out, status, last = kernels.integrate(state7, n, dt, mode, box, cap, *params.packed())
    return out, int(status), int(last)


@dataclass(frozen=True)
class Trajectory:
    """Time-sampled orbit; coordinates are unwrapped (torus wrapping via ``wrapped``)."""

    params: ThermostatParams
    t: np.ndarray
    states: np.ndarray          # (n+1, 3): x, y, omega
    dt: float
    order: int = 4

    def __post_init__(self):
        for a in (self.t, self.states):
            a.flags.writeable = False

    @property
    def T(self):
        return float(self.t[-1] - self.t[0])

    @property
    def start(self):
        return SMPoint.of(self.states[0])

    @property
    def end(self):
        return SMPoint.of(self.states[-1])

    def __len__(self):
        return self.states.shape[0]

    def wrapped(self):
        s = self.states.copy()
        surf = self.params.surface
        if surf.compact:
            s[:, 0] = np.mod(s[:, 0], surf.Lx)
            s[:, 1] = np.mod(s[:, 1], surf.Ly)
        s[:, 2] = np.mod(s[:, 2], 2 * np.pi)
        return s

    def quantities(self):
        """(n+1, 7) array: lambda, V lambda, H lambda, K, theta, F theta, e^{-phi}."""
        return kernels.sample_quantities(np.ascontiguousarray(self.states), *self.params.packed())

    def reversed(self):
        """Same samples traversed backward in time (t runs from end to start)."""
        return Trajectory(self.params, self.t[::-1].copy(), self.states[::-1].copy(), -self.dt, self.order)

    def segment(self, i0, i1):
        return Trajectory(self.params, self.t[i0:i1].copy(), self.states[i0:i1].copy(), self.dt, self.order)

    def equation_residual(self):
        """Max deviation from unit speed and from geodesic curvature lambda.

        Both are measured from finite differences of the positions alone, so
        the angle variable is not used: speed e^{phi}|(x', y')| should be 1 and
        kappa_g = psi' - e^{-phi}(phi_y cos psi - phi_x sin psi) should equal
        lambda, where psi is the direction angle of (x', y').
        """
        h = self.dt
        s = self.states
        if s.shape[0] < 7:
            raise FlowError("need at least 7 samples")

        def d1(a):
            return (a[:-4] - 8 * a[1:-3] + 8 * a[3:-1] - a[4:]) / (12 * h)

        xd, yd = d1(s[:, 0]), d1(s[:, 1])
        inner = s[2:-2]
        jet = self.params.surface.phi.jet(inner[:, 0], inner[:, 1])
        p, px, py = jet[0], jet[1], jet[2]
        speed = np.exp(p) * np.hypot(xd, yd)
        psi = np.unwrap(np.arctan2(yd, xd))
        psid = d1(psi)
        E = np.exp(-p[2:-2])
        kappa = psid - E * (py[2:-2] * np.cos(psi[2:-2]) - px[2:-2] * np.sin(psi[2:-2]))
        lam = self.quantities()[4:-4, kernels.Q_LAM]
        return {"speed": float(np.max(np.abs(speed - 1))),
                "curvature": float(np.max(np.abs(kappa - lam)))}

    # -- export ---------------------------------------------------------
    def to_rows(self):
        w = self.wrapped()
        return [(float(t), float(a), float(b), float(c)) for t, (a, b, c) in zip(self.t, w)]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["t", "x", "y", "omega"])
            for row in self.to_rows():
                wr.writerow([repr(v) for v in row])

    def to_json(self):
        return {"dt": self.dt, "order": self.order,
                "t": self.t.tolist(), "x": self.states[:, 0].tolist(),
                "y": self.states[:, 1].tolist(), "omega": self.states[:, 2].tolist()}

    def dump(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)


def integrate_flow(params, p0, T, dt=DEFAULT_DT):
    """RK4 orbit of F from p0 over time T (negative T integrates backward).

    The step is shrunk to T/ceil(|T|/dt) so the final sample lands on T.
    """
    _check_dt(params, dt)
    n, h = _steps(T, dt)
    return integrate_steps(params, p0, n, h)


def integrate_steps(params, p0, n, h):
    """``n`` RK4 steps of signed size ``h`` from p0."""
    _check_dt(params, abs(h))
    p0 = SMPoint.of(p0)
    st = np.zeros(7)
    st[:3] = p0.as_array()
    out, status, last = _run(params, st, n, h, kernels.MODE_FLOW)
    t = h * np.arange(n + 1)
    if status == kernels.STATUS_CHART_EXIT:
        partial = Trajectory(params, t[:last + 1], out[:last + 1, :3].copy(), h)
        raise ChartExitError(f"orbit left the chart box at t={t[last]:.6g}", partial)
    if status != kernels.STATUS_OK:
        raise FlowError(f"non-finite state at t={t[last]:.6g}")
    return Trajectory(params, t, out[:, :3].copy(), h)


@dataclass(frozen=True)
class JacobiData:
    """Jacobi components along a trajectory: J = jx gdot + jy i gdot."""

    traj: Trajectory
    jx: np.ndarray
    jy: np.ndarray
    jydot: np.ndarray
    lam: np.ndarray = field(repr=False)

    @property
    def jdot_vertical(self):
        """Coefficient of i gdot in J' (the only nonzero one): jydot + lambda jx."""
        return self.jydot + self.lam * self.jx

    def xdot_residual(self):
        """max |jx' - lambda jy| with jx' from a 4th-order central stencil."""
        h = self.traj.dt
        a = self.jx
        d = (a[:-4] - 8 * a[1:-3] + 8 * a[3:-1] - a[4:]) / (12 * h)
        return float(np.max(np.abs(d - self.lam[2:-2] * self.jy[2:-2])))

    def final(self):
        """(J, J') at the last sample in frame components (jx, jy, vertical part of J')."""
        return np.array([self.jx[-1], self.jy[-1], self.jdot_vertical[-1]])


def integrate_jacobi(traj, x0, y0, ydot0):
    """Solve the reduced Jacobi system along ``traj`` from (jx, jy, jy') = (x0, y0, ydot0)."""
    st = np.zeros(7)
    st[:3] = traj.states[0]
    st[3:6] = (x0, y0, ydot0)
    n = len(traj) - 1
    out, status, last = _run(traj.params, st, n, traj.dt, kernels.MODE_JACOBI)
    if status != kernels.STATUS_OK:
        raise FlowError(f"Jacobi integration stopped (status {status}) at sample {last}")
    lam = traj.quantities()[:, kernels.Q_LAM]
    return JacobiData(traj, out[:, 3].copy(), out[:, 4].copy(), out[:, 5].copy(), lam)


# -- coordinates <-> Jacobi data ------------------------------------------

def _lam_at(params, p):
    q = kernels.sample_quantities(np.asarray([p.as_array()]), *params.packed())
    return float(q[0, kernels.Q_LAM])


def jacobi_initial_data(params, p0, xi):
    """Frame data (jx, jy, jy') at p0 of a coordinate tangent vector xi = (dx, dy, dw).

    J(0) = d pi(xi) and J'(0) = K(xi) = (dw + alpha(dx, dy)) iv with the
    connection form alpha = -phi_y dx + phi_x dy; the reduced variables need
    jy' = <J', iv> - lambda jx.
    """
    p0 = SMPoint.of(p0)
    dx, dy, dw = (float(v) for v in xi)
    phi = params.surface.phi
    p, px, py = phi(p0.x, p0.y), phi.derivative(p0.x, p0.y, 1, 0), phi.derivative(p0.x, p0.y, 0, 1)
    c, s = math.cos(p0.omega), math.sin(p0.omega)
    eP = math.exp(float(p))
    a = eP * (c * dx + s * dy)
    b = eP * (-s * dx + c * dy)
    vert = dw + (-float(py) * dx + float(px) * dy)
    return np.array([a, b, vert - _lam_at(params, p0) * a])


def frame_to_coordinates(params, p, jx, jy, jdot_vertical):
    """Inverse of the splitting: frame data at p back to (dx, dy, dw)."""
    p = SMPoint.of(p)
    phi = params.surface.phi
    E = math.exp(-float(phi(p.x, p.y)))
    px, py = float(phi.derivative(p.x, p.y, 1, 0)), float(phi.derivative(p.x, p.y, 0, 1))
    c, s = math.cos(p.omega), math.sin(p.omega)
    dx = E * (c * jx - s * jy)
    dy = E * (s * jx + c * jy)
    dw = jdot_vertical - (-py * dx + px * dy)
    return np.array([dx, dy, dw])


def coordinates_to_frame(params, p, d):
    """Coordinate displacement at p to (jx, jy, vertical part of J')."""
    p = SMPoint.of(p)
    ini = jacobi_initial_data(params, p, d)
    return np.array([ini[0], ini[1], ini[2] + _lam_at(params, p) * ini[0]])


def linearized_map(params, p0, T, dt=DEFAULT_DT):
    """3x3 derivative of the time-T map in chart coordinates, via Jacobi fields.

    Returns (M, trajectory).
    """
    traj = integrate_flow(params, p0, T, dt)
    M = np.zeros((3, 3))
    for j in range(3):
        e = np.zeros(3)
        e[j] = 1.0
        ini = jacobi_initial_data(params, traj.start, e)
        jd = integrate_jacobi(traj, *ini)
        M[:, j] = frame_to_coordinates(params, traj.end, *jd.final())
    return M, traj


def flow_vector(params, p):
    """F at p in chart coordinates."""
    st = np.zeros(7)
    st[:3] = SMPoint.of(p).as_array()
    out = np.zeros(7)
    kernels.rhs(st, out, kernels.MODE_FLOW, *params.packed())
    return out[:3]


def check_linearized_flow(params, p0, xi, T, dt=DEFAULT_DT, h=1e-6):
    """Compare a Richardson-extrapolated central difference of the time-T map
    along xi with the Jacobi pair (J(T), J'(T)) started from matching data.

    Residual is measured in frame components at the endpoint, relative to
    max(1, |(J, J')|).
    """
    p0 = SMPoint.of(p0)
    xi = np.asarray(xi, dtype=float)
    base = p0.as_array()

    def endpoint(offset):
        return integrate_flow(params, base + offset * xi, T, dt).states[-1]

    def central(step):
        return (endpoint(step) - endpoint(-step)) / (2 * step)

    fd = (4 * central(h / 2) - central(h)) / 3
    traj = integrate_flow(params, p0, T, dt)
    ini = jacobi_initial_data(params, p0, xi)
    jd = integrate_jacobi(traj, *ini)
    jac = jd.final()
    fd_frame = coordinates_to_frame(params, traj.end, fd)
    res = float(np.linalg.norm(fd_frame - jac) / max(1.0, np.linalg.norm(jac)))
    return {"residual": res, "jacobi": jac.tolist(), "finite_difference": fd_frame.tolist(),
            "T": float(T), "h": h}


def sm_distance(params, p, q):
    """Chart distance plus angle distance, with torus and fibre wrapping."""
    p, q = SMPoint.of(p).as_array(), SMPoint.of(q).as_array()
    d = q - p
    surf = params.surface
    if surf.compact:
        d[0] -= surf.Lx * np.round(d[0] / surf.Lx)
        d[1] -= surf.Ly * np.round(d[1] / surf.Ly)
    d[2] -= 2 * np.pi * np.round(d[2] / (2 * np.pi))
    return float(np.hypot(d[0], d[1]) + abs(d[2]))


def reversibility_defect(params, p0, T, dt=DEFAULT_DT):
    """|phi_T(x', -v') - (x, -v)| with (x', v') = phi_T(x, v)."""
    p0 = SMPoint.of(p0)
    end = integrate_flow(params, p0, T, dt).end
    back = integrate_flow(params, (end.x, end.y, end.omega + np.pi), T, dt).end
    return sm_distance(params, back, (p0.x, p0.y, p0.omega + np.pi))


def self_convergence(params, p0, T, dts):
    """Endpoint differences between successive step sizes and their ratios."""
    ends = [integrate_flow(params, p0, T, dt).states[-1] for dt in dts]
    errs = [float(np.linalg.norm(ends[i] - ends[i + 1])) for i in range(len(ends) - 1)]
    ratios = [errs[i] / errs[i + 1] for i in range(len(errs) - 1) if errs[i + 1] > 0]
    return errs, ratios


def fitted_order(hs, errs):
    """Least-squares slope of log err against log h."""
    hs, errs = np.asarray(hs, float), np.asarray(errs, float)
    keep = errs > 0
    return float(np.polyfit(np.log(hs[keep]), np.log(errs[keep]), 1)[0])


__all__ = [
    "SMPoint", "Trajectory", "JacobiData", "FlowError", "StepSizeError", "ChartExitError",
    "integrate_flow", "integrate_steps", "integrate_jacobi", "jacobi_initial_data", "frame_to_coordinates",
    "coordinates_to_frame", "linearized_map", "flow_vector", "check_linearized_flow",
    "sm_distance", "reversibility_defect", "self_convergence", "fitted_order", "GeometryError",
]
