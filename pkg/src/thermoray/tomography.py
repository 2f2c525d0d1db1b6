"""Pairs, the operators d and delta, solenoidal decomposition and the X-ray transform.

Tensor fields live on a TorusGrid as coordinate components in the isothermal
chart. A pair [q, sigma] restricts to p(x, v) = q(v, v) + sigma(v) with
v = e^{-phi}(cos w, sin w), which has vertical modes

    p_0 = e^{-2phi}(q11 + q22)/2,
    p_1 = e^{-phi}(s1 - i s2)/2,
    p_2 = e^{-2phi}((q11 - q22)/4 - i q12/2).

Inner products are the Riemannian ones:
    <[q, s], [q', s']> = int e^{-2phi}(q11 q11' + 2 q12 q12' + q22 q22') + s.s' dx dy
    <[psi, h], [psi', h']> = int psi.psi' + e^{2phi} h h' dx dy
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .frame import SMScalarField, TorusGrid, F
from .flow import (DEFAULT_DT, SMPoint, Trajectory, flow_vector, integrate_flow,
                   integrate_steps, linearized_map, sm_distance)

CG_TOL = 1e-10
CG_MAXITER = 10_000


class SolverDivergence(RuntimeError):
    def __init__(self, msg, diagnostics=None):
        super().__init__(msg)
        self.diagnostics = diagnostics


class OrbitNotFound(RuntimeError):
    def __init__(self, msg, best=None):
        super().__init__(msg)
        self.best = best


# -- pairs ---------------------------------------------------------------

@dataclass(frozen=True)
class TensorPair:
    """[q, sigma]: q as (q11, q12, q22), sigma as (s1, s2), each (Ny, Nx)."""

    grid: TorusGrid
    q: np.ndarray
    sigma: np.ndarray

    @classmethod
    def zeros(cls, grid):
        sh = grid.X.shape
        return cls(grid, np.zeros((3,) + sh), np.zeros((2,) + sh))

    def __add__(self, o):
        return TensorPair(self.grid, self.q + o.q, self.sigma + o.sigma)

    def __sub__(self, o):
        return TensorPair(self.grid, self.q - o.q, self.sigma - o.sigma)

    def scaled(self, s):
        return TensorPair(self.grid, s * self.q, s * self.sigma)

    def dot(self, o):
        g = self.grid
        w = np.exp(-2 * g.phi)
        qq = self.q[0] * o.q[0] + 2 * self.q[1] * o.q[1] + self.q[2] * o.q[2]
        return float(g.quad(w * qq + np.sum(self.sigma * o.sigma, axis=0)))

    def norm(self):
        return math.sqrt(max(0.0, self.dot(self)))

    def restriction(self):
        g = self.grid
        q11, q12, q22 = self.q
        s1, s2 = self.sigma
        E2 = g.E**2
        return g.from_modes({0: E2 * (q11 + q22) / 2,
                             1: g.E * (s1 - 1j * s2) / 2,
                             2: E2 * ((q11 - q22) / 4 - 0.5j * q12)})

    @property
    def even(self):
        return TensorPair(self.grid, self.q, np.zeros_like(self.sigma))

    @property
    def odd(self):
        return TensorPair(self.grid, np.zeros_like(self.q), self.sigma)

    def to_json(self):
        return {"N": self.grid.N, "q": self.q.tolist(), "sigma": self.sigma.tolist()}


@dataclass(frozen=True)
class PotentialPair:
    """[psi, h]: psi as (psi1, psi2), h a function, each (Ny, Nx)."""

    grid: TorusGrid
    psi: np.ndarray
    h: np.ndarray

    @classmethod
    def zeros(cls, grid):
        sh = grid.X.shape
        return cls(grid, np.zeros((2,) + sh), np.zeros(sh))

    def __add__(self, o):
        return PotentialPair(self.grid, self.psi + o.psi, self.h + o.h)

    def __sub__(self, o):
        return PotentialPair(self.grid, self.psi - o.psi, self.h - o.h)

    def scaled(self, s):
        return PotentialPair(self.grid, s * self.psi, s * self.h)

    def dot(self, o):
        g = self.grid
        return float(g.quad(np.sum(self.psi * o.psi, axis=0) + g.conf * self.h * o.h))

    def norm(self):
        return math.sqrt(max(0.0, self.dot(self)))

    def restriction(self):
        """h + psi(v) on SM (vertical modes 0, +-1)."""
        g = self.grid
        return g.from_modes({0: self.h, 1: g.E * (self.psi[0] - 1j * self.psi[1]) / 2})

    def to_json(self):
        return {"N": self.grid.N, "psi": self.psi.tolist(), "h": self.h.tolist()}


def unrestrict(p):
    """Pair [q, sigma] from a field with vertical modes in {0, +-1, +-2}."""
    g = p.grid
    extra = [k for k in p.support() if abs(k) > 2]
    if extra:
        raise ValueError(f"field has vertical modes {extra} beyond degree 2")
    p0, p1, p2 = (p.mode(k) for k in (0, 1, 2))
    e2 = g.conf
    tr = 2 * e2 * p0.real
    dif = 4 * e2 * p2.real
    q11, q22 = (tr + dif) / 2, (tr - dif) / 2
    q12 = -2 * e2 * p2.imag
    eP = 1 / g.E
    s1, s2 = 2 * eP * p1.real, -2 * eP * p1.imag
    return TensorPair(g, np.stack([q11, q12, q22]), np.stack([s1, s2]))


def random_tensor_pair(grid, rng, kh=3, amp=1.0, even=True, odd=True):
    comps = [_random_grid(grid, rng, kh, amp) for _ in range(5)]
    q = np.stack(comps[:3]) if even else np.zeros((3,) + grid.X.shape)
    s = np.stack(comps[3:]) if odd else np.zeros((2,) + grid.X.shape)
    return TensorPair(grid, q, s)


def random_potential_pair(grid, rng, kh=3, amp=1.0):
    return PotentialPair(grid, np.stack([_random_grid(grid, rng, kh, amp) for _ in range(2)]),
                         _random_grid(grid, rng, kh, amp))


def _random_grid(grid, rng, kh, amp):
    m = np.arange(-kh, kh + 1)
    c = rng.standard_normal((m.size, m.size)) + 1j * rng.standard_normal((m.size, m.size))
    c *= amp / m.size
    ex = np.exp(1j * np.multiply.outer(m, 2 * np.pi * grid.X / grid.Lx))
    ey = np.exp(1j * np.multiply.outer(m, 2 * np.pi * grid.Y / grid.Ly))
    return np.einsum("ab,a...,b...->...", c, ey, ex).real


def even_odd_split(u):
    """(even, odd) parts: even vertical modes are invariant under v -> -v."""
    return u.even(), u.odd()


# -- operators ------------------------------------------------------------

class _ParamGrid:
    """Thermostat data sampled on a grid: f, dg and e."""

    def __init__(self, grid, params):
        self.f = params.f(grid.X, grid.Y)
        self.gx = params.stream.derivative(grid.X, grid.Y, 1, 0)
        self.gy = params.stream.derivative(grid.X, grid.Y, 0, 1)


def _pg(grid, params):
    cache = getattr(grid, "_param_cache", None)
    if cache is None:
        cache = {}
        grid._param_cache = cache
    key = id(params)
    if key not in cache or cache[key][0] is not params:
        cache[key] = (params, _ParamGrid(grid, params))
    return cache[key][1]


def symmetric_derivative(grid, psi):
    """d^s psi: symmetrized covariant derivative for the conformal metric."""
    p1, p2 = psi
    px, py = grid.phi_x, grid.phi_y
    s11 = grid.rdx(p1) - px * p1 + py * p2
    s22 = grid.rdy(p2) + px * p1 - py * p2
    s12 = 0.5 * (grid.rdx(p2) + grid.rdy(p1)) - py * p1 - px * p2
    return np.stack([s11, s12, s22])


def rot_form(a):
    """V acting on 1-forms: (V a)(v) = a(iv), components (a2, -a1)."""
    return np.stack([a[1], -a[0]])


def d_op(w, params):
    """The pair [q, sigma] whose restriction is F(h + psi).

    q = d^s psi + dg (.) V(psi),  sigma = dh + f V(psi)
    where (.) is the symmetric product (a (.) b)_ij = (a_i b_j + a_j b_i)/2.
    """
    g = w.grid
    pg = _pg(g, params)
    vpsi = rot_form(w.psi)
    q = symmetric_derivative(g, w.psi)
    q = q + np.stack([pg.gx * vpsi[0],
                      0.5 * (pg.gx * vpsi[1] + pg.gy * vpsi[0]),
                      pg.gy * vpsi[1]])
    sigma = np.stack([g.rdx(w.h), g.rdy(w.h)]) + pg.f * vpsi
    return TensorPair(g, q, sigma)


def divergence_1form(grid, s):
    return np.exp(-2 * grid.phi) * (grid.rdx(s[0]) + grid.rdy(s[1]))


def divergence_2tensor(grid, q):
    q11, q12, q22 = q
    w = np.exp(-2 * grid.phi)
    tr = q11 + q22
    return np.stack([w * (grid.rdx(q11) + grid.rdy(q12) - grid.phi_x * tr),
                     w * (grid.rdx(q12) + grid.rdy(q22) - grid.phi_y * tr)])


def interior_ie(grid, pg, q):
    """(iota_{ie} q)_j = q(ie, d_j) with ie = -grad g."""
    q11, q12, q22 = q
    w = -np.exp(-2 * grid.phi)
    return np.stack([w * (pg.gx * q11 + pg.gy * q12), w * (pg.gx * q12 + pg.gy * q22)])


def delta_op(fpair, params):
    """(delta q - V(iota_{ie} q) + f V(sigma), delta sigma): the negative adjoint of d_op."""
    g = fpair.grid
    pg = _pg(g, params)
    psi = divergence_2tensor(g, fpair.q) - rot_form(interior_ie(g, pg, fpair.q)) + pg.f * rot_form(fpair.sigma)
    h = divergence_1form(g, fpair.sigma)
    return PotentialPair(g, psi, h)


def adjointness_defect(w, fpair, params):
    """<d w, f> + <w, delta f>, normalized by |dw||f| + |w||delta f|."""
    dw = d_op(w, params)
    df = delta_op(fpair, params)
    a, b = dw.dot(fpair), w.dot(df)
    scale = dw.norm() * fpair.norm() + w.norm() * df.norm()
    return {"defect": abs(a + b), "relative": abs(a + b) / scale if scale else 0.0,
            "<dw,f>": a, "<w,delta f>": b}


# -- decomposition --------------------------------------------------------

def _filter(grid, a):
    """Drop Nyquist Fourier modes (invisible to the differentiation matrices)."""
    hat = np.fft.fft2(a)
    if grid.Nx % 2 == 0:
        hat[..., :, grid.Nx // 2] = 0.0
    if grid.Ny % 2 == 0:
        hat[..., grid.Ny // 2, :] = 0.0
    return np.fft.ifft2(hat).real


def _deflate(w):
    """Project onto the complement of the constant-h kernel and the Nyquist modes."""
    g = w.grid
    h = _filter(g, w.h)
    mean = g.quad(g.conf * h) / g.quad(g.conf)
    return PotentialPair(g, _filter(g, w.psi), h - mean)


class _Preconditioner:
    """Symmetric positive approximation of (-delta d)^{-1}.

    With L = 1 - Laplacian (flat, spectral): psi -> c^{1/2} L^{-1} c^{1/2} psi
    and h -> L^{-1}(c h), c = e^{2 phi}; both are symmetric for the
    potential inner product.
    """

    def __init__(self, grid):
        self.grid = grid
        k2 = grid.kx[None, :] ** 2 + grid.ky[:, None] ** 2
        self.inv = 1.0 / (1.0 + k2)
        self.sq = np.sqrt(grid.conf)

    def _solve(self, a):
        return np.fft.ifft2(self.inv * np.fft.fft2(a)).real

    def __call__(self, w):
        g = self.grid
        psi = self.sq * self._solve(self.sq * w.psi)
        h = self._solve(g.conf * w.h)
        return _deflate(PotentialPair(g, psi, h))


def solenoidal_decompose(fpair, params, tol=CG_TOL, maxiter=CG_MAXITER, precondition=True):
    """f = d w + f_s with delta f_s = 0, by preconditioned CG on -delta d w = -delta f.

    -delta d = d* d is symmetric positive semidefinite for the potential
    inner product; the constant [0, h] kernel is projected out each step.
    The residual r = delta f_s, so iteration stops once |r| < tol |delta f|
    or |r| < tol |f| (f already solenoidal to the target accuracy).
    """
    A = lambda w: _deflate(delta_op(d_op(w, params), params)).scaled(-1.0)
    M = _Preconditioner(fpair.grid) if precondition else _deflate
    b = _deflate(delta_op(fpair, params)).scaled(-1.0)
    x = PotentialPair.zeros(fpair.grid)
    bn = b.norm()
    fn = fpair.norm()
    target = tol * max(bn, fn) if max(bn, fn) > 0 else 0.0
    history = []
    r = b
    res = bn
    it = 0
    if res > target:
        z = M(r)
        p = z
        rz = r.dot(z)
        for it in range(1, maxiter + 1):
            Ap = A(p)
            pAp = p.dot(Ap)
            if pAp <= 0:
                raise SolverDivergence(f"non-positive curvature p.Ap={pAp:.3g} at iteration {it}",
                                       {"iterations": it, "history": history})
            alpha = rz / pAp
            x = x + p.scaled(alpha)
            r = r - Ap.scaled(alpha)
            res = r.norm()
            history.append(res / bn)
            if res <= target:
                break
            z = M(r)
            rz_new = r.dot(z)
            p = z + p.scaled(rz_new / rz)
            rz = rz_new
        else:
            raise SolverDivergence(f"CG did not reach {tol:g} in {maxiter} iterations "
                                   f"(residual {res / bn:.3g})", {"iterations": maxiter, "history": history})
    x = _deflate(x)
    fs = fpair - d_op(x, params)
    diag = {"iterations": it, "residual": res / bn if bn else 0.0,
            "delta_fs_rel": delta_op(fs, params).norm() / fn if fn else 0.0,
            "norm_f": fn, "norm_fs": fs.norm(), "norm_w": x.norm()}
    return x, fs, diag


def orthogonality_probe(fs, params, rng, n=5, kh=3):
    """max over random w of |<f_s, d w>| / (|f_s| |d w|)."""
    worst = 0.0
    for _ in range(n):
        dw = d_op(random_potential_pair(fs.grid, rng, kh), params)
        den = fs.norm() * dw.norm()
        if den:
            worst = max(worst, abs(fs.dot(dw)) / den)
    return worst


# -- divergence identities ---------------------------------------------------

def divergence_identities_check(sigma, q, grid):
    """max |X(sigma) + H V(sigma) - delta sigma| and |X(q) + H V(q)/2 - (delta q)(v)|.

    sigma, q are coordinate components on ``grid``; q(v, v) and sigma(v) are
    their restrictions and delta q is restricted as a 1-form.
    """
    zero_q = np.zeros((3,) + grid.X.shape)
    zero_s = np.zeros((2,) + grid.X.shape)
    s_f = TensorPair(grid, zero_q, np.asarray(sigma, dtype=float)).restriction()
    q_f = TensorPair(grid, np.asarray(q, dtype=float), zero_s).restriction()
    ds = grid.field(divergence_1form(grid, np.asarray(sigma, dtype=float)))
    dq = TensorPair(grid, zero_q, divergence_2tensor(grid, np.asarray(q, dtype=float))).restriction()
    r1 = s_f.X() + s_f.V().H() - ds
    r2 = q_f.X() + 0.5 * q_f.V().H() - dq
    return {"sigma": r1.max_abs(), "q": r2.max_abs()}


# -- X-ray transform ----------------------------------------------------------

def _simpson(vals, h):
    n = len(vals) - 1
    if n % 2 == 0:
        return h / 3 * (vals[0] + vals[-1] + 4 * np.sum(vals[1:-1:2]) + 2 * np.sum(vals[2:-1:2]))
    # odd number of intervals: Simpson on the first n-3, 3/8 rule on the rest
    head = _simpson(vals[:-3], h) if n > 3 else 0.0
    tail = 3 * h / 8 * (vals[-4] + 3 * vals[-3] + 3 * vals[-2] + vals[-1])
    return head + tail


def along_orbit(p, traj):
    """Values of a field (SMScalarField, pair, or callable (x, y, w)) along an orbit."""
    if isinstance(p, (TensorPair, PotentialPair)):
        p = p.restriction()
    s = traj.states
    return np.asarray(p(s[:, 0], s[:, 1], s[:, 2]), dtype=float)


def xray_transform(p, traj):
    """int_0^T p(phi_t) dt by composite Simpson, with the SM closure defect."""
    vals = along_orbit(p, traj)
    integral = float(_simpson(vals, abs(traj.dt)))
    defect = sm_distance(traj.params, traj.start, traj.end)
    return integral, defect


# -- closed orbits -------------------------------------------------------------

def _lattice_shift(params, d):
    s = np.zeros(3)
    surf = params.surface
    if surf.compact:
        s[0] = surf.Lx * np.round(d[0] / surf.Lx)
        s[1] = surf.Ly * np.round(d[1] / surf.Ly)
    s[2] = 2 * np.pi * np.round(d[2] / (2 * np.pi))
    return s


def recurrence_scan(params, p0, T_max, min_time=0.5, dt=DEFAULT_DT):
    """Time in [min_time, T_max] at which the orbit of p0 comes closest to p0."""
    traj = integrate_flow(params, p0, T_max, dt)
    i0 = int(np.searchsorted(traj.t, min_time))
    d = traj.states[i0:] - traj.states[0]
    surf = params.surface
    if surf.compact:
        d[:, 0] -= surf.Lx * np.round(d[:, 0] / surf.Lx)
        d[:, 1] -= surf.Ly * np.round(d[:, 1] / surf.Ly)
    d[:, 2] -= 2 * np.pi * np.round(d[:, 2] / (2 * np.pi))
    dist = np.hypot(d[:, 0], d[:, 1]) + np.abs(d[:, 2])
    j = int(np.argmin(dist))
    return float(traj.t[i0 + j]), float(dist[j])


def find_closed_orbit(params, seed, T_guess=None, tol=1e-9, max_iter=40, dt=DEFAULT_DT, T_max=30.0):
    """Gauss-Newton on (x0, y0, w0, T) for phi_T(p) = p modulo the chart lattice.

    The Jacobian is [M - I | F(phi_T p)] with M from Jacobi fields; the
    underdetermined step is the minimum-norm least-squares one.
    Returns (trajectory, period, report).
    """
    z = SMPoint.of(seed).as_array()
    if T_guess is None:
        T_guess, _ = recurrence_scan(params, seed, T_max, dt=dt)
    T = float(T_guess)
    shift = None
    best = (math.inf, None)
    for it in range(1, max_iter + 1):
        M, traj = linearized_map(params, z, T, dt)
        d = traj.states[-1] - z
        if shift is None:
            shift = _lattice_shift(params, d)
        R = d - shift
        defect = float(np.hypot(R[0], R[1]) + abs(R[2]))
        if defect < best[0]:
            best = (defect, (z.copy(), T))
        if defect < tol:
            return traj, T, {"iterations": it, "defect": defect}
        J = np.column_stack([M - np.eye(3), flow_vector(params, traj.states[-1])])
        step = np.linalg.lstsq(J, -R, rcond=None)[0]
        z = z + step[:3]
        T = T + step[3]
        if not (T > 0 and np.all(np.isfinite(z))):
            break
    raise OrbitNotFound(f"no closed orbit within {tol:g} (best defect {best[0]:.3g})",
                        {"defect": best[0], "point": None if best[1] is None else best[1][0].tolist(),
                         "period": None if best[1] is None else best[1][1]})


def closed_orbit_exact(params, p0, T, n_even=True, dt=DEFAULT_DT):
    """Orbit over exactly T with an even number of steps (for Simpson)."""
    n = int(math.ceil(abs(T) / dt - 1e-9))
    if n_even and n % 2:
        n += 1
    return integrate_steps(params, p0, n, T / n)


# -- norm chain for degree-one u ---------------------------------------------

def fibre_norms(p):
    """Per-point fibre L2 norms of p, Vp, V^2 p from the vertical modes (Parseval)."""
    K = p.degree
    k = np.arange(-K, K + 1)[:, None, None]
    a = np.abs(p.modes) ** 2
    return (np.sqrt(np.sum(a, axis=0)), np.sqrt(np.sum(k**2 * a, axis=0)),
            np.sqrt(np.sum(k**4 * a, axis=0)))


def key_inequality_probe(u, params, c_s=None, c_u=None):
    """Quantities in the chain bounding |u| by F(u) for u of degree <= 1.

    Returns |p|, |Vp|, |V^2 p| (L^2(SM)), the worst fibre ratios, |H_c u| for
    the supplied c's, |u|_{H^1} and |delta [q, sigma]| where [q, sigma] is the
    pair of p = F(u). Ratios |Vp|/|p| <= 2 and |V^2 p|/|p| <= 4 are the
    unconditional sub-steps; the Anosov constant is only reported.
    """
    if isinstance(u, PotentialPair):
        w = u
        uf = u.restriction()
    else:
        uf = u
        if any(abs(k) > 1 for k in uf.support()):
            raise ValueError("u must have vertical degree <= 1")
        w = PotentialPair(uf.grid, 2 * np.stack([(uf.mode(1) * uf.grid.E**-1).real,
                                                 -(uf.mode(1) * uf.grid.E**-1).imag]), uf.mode(0).real)
    g = uf.grid
    lam = g.lam(params)
    p = F(uf, lam)
    pair = unrestrict(p)
    n_p, n_vp, n_v2p = (math.sqrt(max(0.0, 2 * np.pi * g.quad(g.conf * a**2))) for a in fibre_norms(p))
    fp, fvp, fv2p = fibre_norms(p)
    mask = fp > 1e-14 * max(1.0, float(fp.max()))
    rep = {
        "support": p.support(),
        "|p|": n_p, "|Vp|": n_vp, "|V2p|": n_v2p,
        "ratio_Vp": n_vp / n_p if n_p else 0.0,
        "ratio_V2p": n_v2p / n_p if n_p else 0.0,
        "fibre_ratio_Vp": float(np.max(fvp[mask] / fp[mask])) if mask.any() else 0.0,
        "fibre_ratio_V2p": float(np.max(fv2p[mask] / fp[mask])) if mask.any() else 0.0,
        "|u|": uf.l2(),
        "|u|_H1": math.sqrt(sum(a.l2() ** 2 for a in (uf, uf.X(), uf.H(), uf.V()))),
        "|delta[q,sigma]|": delta_op(pair, params).norm(),
    }
    for name, c in (("c_s", c_s), ("c_u", c_u)):
        if c is not None:
            cf = g.constant(c) if np.isscalar(c) else c
            rep[f"|H_{name} u|"] = (uf.H() + cf * uf.V()).l2()
    if c_s is not None and c_u is not None:
        # H u and V u from H_{c_u} u and H_{c_s} u: V u = (H_cu u - H_cs u)/(c_u - c_s)
        cs = g.constant(c_s) if np.isscalar(c_s) else c_s
        cu = g.constant(c_u) if np.isscalar(c_u) else c_u
        gap = (cu - cs).values()
        rep["recovery_condition"] = float(1.0 / np.min(np.abs(gap)))
    return rep


def norm_equivalence(pair):
    """|p|^2_{L^2(SM)} / |[q, sigma]|^2: lies in [pi/2, pi]."""
    p = pair.restriction()
    n2 = pair.norm() ** 2
    return p.l2() ** 2 / n2 if n2 else float("nan")


__all__ = [
    "TensorPair", "PotentialPair", "unrestrict", "random_tensor_pair", "random_potential_pair",
    "even_odd_split", "symmetric_derivative", "d_op", "delta_op", "adjointness_defect",
    "solenoidal_decompose", "orthogonality_probe", "divergence_identities_check",
    "xray_transform", "along_orbit", "recurrence_scan", "find_closed_orbit", "closed_orbit_exact",
    "key_inequality_probe", "fibre_norms", "norm_equivalence", "SolverDivergence", "OrbitNotFound",
    "Trajectory", "SMScalarField",
]
