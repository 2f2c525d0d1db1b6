"""Hot loops: chart-function jets, frame scalars and fixed-step RK4 on SM.

Every function here is written in the numba-compatible subset so the same
source runs compiled (default) or as plain Python (``THERMORAY_NO_JIT=1``).

A chart function is packed as ``modes`` (n, 4) with rows ``(kx, ky, a, b)``
meaning ``a cos(kx x + ky y) + b sin(kx x + ky y)`` and ``logs`` (2,) with
coefficients of ``ln y`` and ``ln(1 + x^2 + y^2)``.

State layout (7,): x, y, omega, jx, jy, jydot, c
  jx, jy   tangential / normal Jacobi components (J = jx*gdot + jy*i gdot)
  jydot    d/dt of jy
  c        Riccati variable
"""
import math

import numpy as np

from ._jit import njit

MODE_FLOW = 0
MODE_JACOBI = 1
MODE_RICCATI = 2

STATUS_OK = 0
STATUS_CHART_EXIT = 1
STATUS_BLOWUP = 2
STATUS_NONFINITE = 3

# columns of sample_quantities
Q_LAM, Q_VLAM, Q_HLAM, Q_K, Q_THETA, Q_FTHETA, Q_E = range(7)
N_QUANTITIES = 7


@njit(cache=True)
def jet2(modes, logs, x, y):
    """Value and derivatives up to order 2: (v, vx, vy, vxx, vxy, vyy)."""
    v = 0.0
    vx = 0.0
    vy = 0.0
    vxx = 0.0
    vxy = 0.0
    vyy = 0.0
    for j in range(modes.shape[0]):
        kx = modes[j, 0]
        ky = modes[j, 1]
        a = modes[j, 2]
        b = modes[j, 3]
        arg = kx * x + ky * y
        C = math.cos(arg)
        S = math.sin(arg)
        w = a * C + b * S
        dw = b * C - a * S
        v += w
        vx += kx * dw
        vy += ky * dw
        vxx -= kx * kx * w
        vxy -= kx * ky * w
        vyy -= ky * ky * w
    ly = logs[0]
    if ly != 0.0:
        v += ly * math.log(y)
        vy += ly / y
        vyy -= ly / (y * y)
    lr = logs[1]
    if lr != 0.0:
        rho = 1.0 + x * x + y * y
        v += lr * math.log(rho)
        vx += 2.0 * lr * x / rho
        vy += 2.0 * lr * y / rho
        vxx += lr * (2.0 / rho - 4.0 * x * x / (rho * rho))
        vxy -= lr * 4.0 * x * y / (rho * rho)
        vyy += lr * (2.0 / rho - 4.0 * y * y / (rho * rho))
    return v, vx, vy, vxx, vxy, vyy


@njit(cache=True)
def frame_scalars(phi_m, phi_l, f_m, f_l, g_m, g_l, x, y, w):
    """Thermostat data at (x, y, omega) for lambda = f + X(g).

    Returns (E, cos, sin, lam, V lam, H lam, K, theta, F theta, omega-rate of X)
    where E = exp(-phi) and theta = -H(g) is the 1-form <e, v>.
    """
    p, px, py, pxx, pxy, pyy = jet2(phi_m, phi_l, x, y)
    f, fx, fy, _fxx, _fxy, _fyy = jet2(f_m, f_l, x, y)
    _g, gx, gy, gxx, gxy, gyy = jet2(g_m, g_l, x, y)
    E = math.exp(-p)
    c = math.cos(w)
    s = math.sin(w)
    xg = E * (c * gx + s * gy)
    hg = E * (-s * gx + c * gy)
    lam = f + xg
    vlam = hg
    dx_xg = E * (-px * (c * gx + s * gy) + c * gxx + s * gxy)
    dy_xg = E * (-py * (c * gx + s * gy) + c * gxy + s * gyy)
    hxg = E * (-s * dx_xg + c * dy_xg - (px * c + py * s) * hg)
    hf = E * (-s * fx + c * fy)
    hlam = hf + hxg
    dx_hg = -px * hg + E * (-s * gxx + c * gxy)
    dy_hg = -py * hg + E * (-s * gxy + c * gyy)
    xhg = E * (c * dx_hg + s * dy_hg - (py * c - px * s) * xg)
    theta = -hg
    ftheta = -xhg + lam * xg
    K = -E * E * (pxx + pyy)
    wgeo = E * (py * c - px * s)
    return E, c, s, lam, vlam, hlam, K, theta, ftheta, wgeo


@njit(cache=True)
def rhs(st, out, mode, phi_m, phi_l, f_m, f_l, g_m, g_l):
    E, c, s, lam, vlam, hlam, K, _th, _fth, wgeo = frame_scalars(
        phi_m, phi_l, f_m, f_l, g_m, g_l, st[0], st[1], st[2])
    out[0] = E * c
    out[1] = E * s
    out[2] = wgeo + lam
    kcheck = K - hlam + lam * lam
    if mode & MODE_JACOBI:
        out[3] = lam * st[4]
        out[4] = st[5]
        out[5] = vlam * st[5] - kcheck * st[4]
    else:
        out[3] = 0.0
        out[4] = 0.0
        out[5] = 0.0
    if mode & MODE_RICCATI:
        out[6] = vlam * st[6] - st[6] * st[6] - kcheck
    else:
        out[6] = 0.0


@njit(cache=True)
def integrate(state0, nsteps, dt, mode, box, cap, phi_m, phi_l, f_m, f_l, g_m, g_l):
    """Classical RK4 with ``nsteps`` steps of size ``dt`` (negative = backward).

    Returns (samples (nsteps+1, 7), status, last valid index). Integration
    stops early on chart exit, Riccati blow-up (|c| > cap) or non-finite state.
    """
    out = np.empty((nsteps + 1, 7))
    for j in range(7):
        out[0, j] = state0[j]
    k1 = np.empty(7)
    k2 = np.empty(7)
    k3 = np.empty(7)
    k4 = np.empty(7)
    tmp = np.empty(7)
    cur = state0.copy()
    status = STATUS_OK
    last = nsteps
    for i in range(nsteps):
        rhs(cur, k1, mode, phi_m, phi_l, f_m, f_l, g_m, g_l)
        for j in range(7):
            tmp[j] = cur[j] + 0.5 * dt * k1[j]
        rhs(tmp, k2, mode, phi_m, phi_l, f_m, f_l, g_m, g_l)
        for j in range(7):
            tmp[j] = cur[j] + 0.5 * dt * k2[j]
        rhs(tmp, k3, mode, phi_m, phi_l, f_m, f_l, g_m, g_l)
        for j in range(7):
            tmp[j] = cur[j] + dt * k3[j]
        rhs(tmp, k4, mode, phi_m, phi_l, f_m, f_l, g_m, g_l)
        for j in range(7):
            cur[j] = cur[j] + dt * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]) / 6.0
            out[i + 1, j] = cur[j]
        finite = True
        for j in range(7):
            if not math.isfinite(cur[j]):
                finite = False
        if not finite:
            status = STATUS_NONFINITE
            last = i
            break
        if cur[0] < box[0] or cur[0] > box[1] or cur[1] < box[2] or cur[1] > box[3]:
            status = STATUS_CHART_EXIT
            last = i + 1
            break
        if (mode & MODE_RICCATI) and abs(cur[6]) > cap:
            status = STATUS_BLOWUP
            last = i + 1
            break
    return out, status, last


@njit(cache=True)
def sample_quantities(states, phi_m, phi_l, f_m, f_l, g_m, g_l):
    """Per-sample (lam, V lam, H lam, K, theta, F theta, E) along an orbit."""
    n = states.shape[0]
    q = np.empty((n, N_QUANTITIES))
    for i in range(n):
        E, _c, _s, lam, vlam, hlam, K, th, fth, _w = frame_scalars(
            phi_m, phi_l, f_m, f_l, g_m, g_l, states[i, 0], states[i, 1], states[i, 2])
        q[i, Q_LAM] = lam
        q[i, Q_VLAM] = vlam
        q[i, Q_HLAM] = hlam
        q[i, Q_K] = K
        q[i, Q_THETA] = th
        q[i, Q_FTHETA] = fth
        q[i, Q_E] = E
    return q


@njit(cache=True)
def phi_jet_batch(modes, logs, xs, ys):
    """jet2 over arrays of points; returns (n, 6)."""
    n = xs.shape[0]
    out = np.empty((n, 6))
    for i in range(n):
        r = jet2(modes, logs, xs[i], ys[i])
        for j in range(6):
            out[i, j] = r[j]
    return out


@njit(cache=True)
def riccati_along(states, dt, c0, cap, phi_m, phi_l, f_m, f_l, g_m, g_l):
    """Riccati solution pinned to stored orbit samples.

    Each RK4 step restarts the flow part from ``states[i]`` so the c-values
    belong to exactly those samples (re-integrating the orbit from a far-away
    start would amplify position errors along unstable directions).
    Returns (c (n,), status, last valid index).
    """
    n = states.shape[0]
    c = np.full(n, np.nan)
    c[0] = c0
    cur = np.zeros(7)
    k1 = np.empty(7)
    k2 = np.empty(7)
    k3 = np.empty(7)
    k4 = np.empty(7)
    tmp = np.empty(7)
    status = STATUS_OK
    last = n - 1
    for i in range(n - 1):
        for j in range(3):
            cur[j] = states[i, j]
        cur[6] = c[i]
        rhs(cur, k1, MODE_RICCATI, phi_m, phi_l, f_m, f_l, g_m, g_l)
        for j in range(7):
            tmp[j] = cur[j] + 0.5 * dt * k1[j]
        rhs(tmp, k2, MODE_RICCATI, phi_m, phi_l, f_m, f_l, g_m, g_l)
        for j in range(7):
            tmp[j] = cur[j] + 0.5 * dt * k2[j]
        rhs(tmp, k3, MODE_RICCATI, phi_m, phi_l, f_m, f_l, g_m, g_l)
        for j in range(7):
            tmp[j] = cur[j] + dt * k3[j]
        rhs(tmp, k4, MODE_RICCATI, phi_m, phi_l, f_m, f_l, g_m, g_l)
        nxt = cur[6] + dt * (k1[6] + 2.0 * k2[6] + 2.0 * k3[6] + k4[6]) / 6.0
        if not math.isfinite(nxt):
            status = STATUS_NONFINITE
            last = i
            break
        c[i + 1] = nxt
        if abs(nxt) > cap:
            status = STATUS_BLOWUP
            last = i + 1
            break
    return c, status, last
