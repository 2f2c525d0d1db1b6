"""The frame {X, H, V} on SM, the modified frame {F, H_c, V} and Liouville quadrature.

Functions on SM over a torus chart are stored as vertical Fourier series
``u(x, y, w) = sum_{|k|<=K} u_k(x, y) e^{ikw}`` with each ``u_k`` sampled on an
N x N periodic grid. V is exact (multiplication by ik); X and H are

    X = e^{-phi} [cos w d_x + sin w d_y + (phi_y cos w - phi_x sin w) d_w]
    H = e^{-phi} [-sin w d_x + cos w d_y - (phi_x cos w + phi_y sin w) d_w]

with spectral horizontal derivatives. Each raises the vertical degree by one.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .geometry import ChartFunction, ConformalSurface, GeometryError

DEGREE_CAP = 32
DEFAULT_KMAX = 8


class DegreeError(ValueError):
    """Vertical degree above DEGREE_CAP."""


class NonCompactChartError(GeometryError):
    """Liouville quadrature requested on a non-compact chart."""


class TorusGrid:
    """Periodic N x N grid carrying the conformal data of a torus chart."""

    def __init__(self, surface: ConformalSurface, N: int = 64, Ny: int | None = None):
        if not surface.compact:
            raise NonCompactChartError(f"grid fields need a torus chart, got {surface.chart!r}")
        self.surface = surface
        self.Nx = int(N)
        self.Ny = int(Ny or N)
        self.Lx, self.Ly = surface.Lx, surface.Ly
        xs = np.arange(self.Nx) * self.Lx / self.Nx
        ys = np.arange(self.Ny) * self.Ly / self.Ny
        self.X, self.Y = np.meshgrid(xs, ys)
        p, px, py, pxx, _pxy, pyy = surface.phi.jet(self.X, self.Y)
        self.phi, self.phi_x, self.phi_y = p, px, py
        self.E = np.exp(-p)
        self.conf = np.exp(2 * p)
        self.K = -np.exp(-2 * p) * (pxx + pyy)
        kx = 2 * np.pi * np.fft.fftfreq(self.Nx, d=self.Lx / self.Nx)
        ky = 2 * np.pi * np.fft.fftfreq(self.Ny, d=self.Ly / self.Ny)
        # zeroed Nyquist keeps the differentiation matrix exactly skew
        if self.Nx % 2 == 0:
            kx[self.Nx // 2] = 0.0
        if self.Ny % 2 == 0:
            ky[self.Ny // 2] = 0.0
        self.kx, self.ky = kx, ky
        self.cell = self.Lx * self.Ly / (self.Nx * self.Ny)

    @property
    def N(self):
        return self.Nx

    def dx(self, a):
        return np.fft.ifft2(1j * self.kx * np.fft.fft2(a))

    def dy(self, a):
        return np.fft.ifft2(1j * self.ky[:, None] * np.fft.fft2(a))

    def rdx(self, a):
        return self.dx(a).real

    def rdy(self, a):
        return self.dy(a).real

    def quad(self, a):
        """Trapezoid rule for the flat integral over the chart (last two axes)."""
        return self.cell * np.sum(a, axis=(-2, -1))

    def sample(self, fn: ChartFunction):
        return fn(self.X, self.Y)

    def interpolate(self, a, x, y):
        """Spectral interpolation of grid data a (..., Ny, Nx) at points (P,)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        hat = np.fft.fft2(a) / (self.Nx * self.Ny)
        if self.Nx % 2 == 0:
            hat[..., :, self.Nx // 2] = 0.0
        if self.Ny % 2 == 0:
            hat[..., self.Ny // 2, :] = 0.0
        kx = 2 * np.pi * np.fft.fftfreq(self.Nx, d=self.Lx / self.Nx)
        ky = 2 * np.pi * np.fft.fftfreq(self.Ny, d=self.Ly / self.Ny)
        ex = np.exp(1j * np.outer(x, kx))          # (P, Nx)
        ey = np.exp(1j * np.outer(y, ky))          # (P, Ny)
        tmp = hat @ ex.T                              # (..., Ny, P)
        return np.einsum("...np,pn->...p", tmp, ey)

    # -- field factories ----------------------------------------------
    def field(self, values):
        """Mode-0 field from grid values or a ChartFunction."""
        if isinstance(values, ChartFunction):
            values = self.sample(values)
        return SMScalarField(self, np.asarray(values, dtype=complex)[None])

    def constant(self, value):
        return self.field(np.full((self.Ny, self.Nx), float(value)))

    def curvature(self):
        return self.field(self.K)

    def lam(self, params):
        """lambda = f + X(g) as a degree-1 field."""
        return self.field(params.f) + self.field(params.stream).X()

    def theta(self, params):
        """theta = <e, v> = -H(g)."""
        return -self.field(params.stream).H()

    def from_function(self, fn, K):
        """Sample fn(X, Y, w) on 2K+1 fibre angles and transform."""
        nw = 2 * K + 1
        w = 2 * np.pi * np.arange(nw) / nw
        vals = np.stack([fn(self.X, self.Y, wj) * np.ones_like(self.X) for wj in w])
        modes = np.fft.fftshift(np.fft.fft(vals, axis=0) / nw, axes=0)
        return SMScalarField(self, modes)

    def from_modes(self, coeffs: dict):
        """coeffs {k: grid array} for k >= 0; negative modes filled by conjugation."""
        K = max(coeffs)
        modes = np.zeros((2 * K + 1, self.Ny, self.Nx), dtype=complex)
        for k, a in coeffs.items():
            a = np.broadcast_to(np.asarray(a, dtype=complex), (self.Ny, self.Nx))
            if k == 0:
                modes[K] = a.real
            else:
                modes[K + k] = a
                modes[K - k] = np.conj(a)
        return SMScalarField(self, modes)

    def random_field(self, rng, K=3, kh=2, amp=1.0, decay=0.6):
        """Real band-limited field: horizontal wavenumbers |m|,|n| <= kh."""
        coeffs = {}
        m = np.arange(-kh, kh + 1)
        ex = np.exp(1j * np.multiply.outer(m, 2 * np.pi * self.X / self.Lx))
        ey = np.exp(1j * np.multiply.outer(m, 2 * np.pi * self.Y / self.Ly))
        for k in range(K + 1):
            c = (rng.standard_normal((m.size, m.size)) + 1j * rng.standard_normal((m.size, m.size)))
            c *= amp * decay**k / m.size
            a = np.einsum("ab,a...,b...->...", c, ey, ex)
            coeffs[k] = a.real if k == 0 else a
        return self.from_modes(coeffs)


def _center_pad(modes, K):
    k0 = (modes.shape[0] - 1) // 2
    if k0 == K:
        return modes
    if k0 > K:
        return modes[k0 - K:k0 + K + 1]
    out = np.zeros((2 * K + 1,) + modes.shape[1:], dtype=complex)
    out[K - k0:K + k0 + 1] = modes
    return out


class SMScalarField:
    """Immutable truncated vertical Fourier series on a torus grid."""

    __slots__ = ("grid", "modes")
    __array_ufunc__ = None

    def __init__(self, grid: TorusGrid, modes):
        modes = np.asarray(modes, dtype=complex)
        if modes.ndim != 3 or modes.shape[0] % 2 == 0:
            raise ValueError("modes must have shape (2K+1, Ny, Nx)")
        if (modes.shape[0] - 1) // 2 > DEGREE_CAP:
            raise DegreeError(f"vertical degree {(modes.shape[0] - 1) // 2} exceeds cap {DEGREE_CAP}")
        modes.flags.writeable = False
        self.grid = grid
        self.modes = modes

    @property
    def degree(self):
        return (self.modes.shape[0] - 1) // 2

    def mode(self, k):
        K = self.degree
        if abs(k) > K:
            return np.zeros_like(self.modes[0])
        return self.modes[K + k]

    def padded(self, K):
        return SMScalarField(self.grid, _center_pad(self.modes, K))

    def trimmed(self, atol=0.0):
        """Drop top modes whose magnitude is <= atol."""
        K = self.degree
        while K > 0 and np.max(np.abs(self.modes[[self.degree - K, self.degree + K]])) <= atol:
            K -= 1
        return SMScalarField(self.grid, _center_pad(self.modes, K))

    def support(self, atol=1e-12):
        K = self.degree
        scale = max(1.0, float(np.max(np.abs(self.modes))))
        return sorted(k - K for k in range(2 * K + 1) if np.max(np.abs(self.modes[k])) > atol * scale)

    # -- algebra ------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, SMScalarField):
            return other
        return None

    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            if np.isscalar(other) or np.ndim(other) == 2:
                return self + self.grid.field(np.broadcast_to(other, self.grid.X.shape))
            return NotImplemented
        K = max(self.degree, o.degree)
        return SMScalarField(self.grid, _center_pad(self.modes, K) + _center_pad(o.modes, K))

    __radd__ = __add__

    def __neg__(self):
        return SMScalarField(self.grid, -self.modes)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        o = self._coerce(other)
        if o is None:
            if np.isscalar(other) or np.ndim(other) == 2:
                return SMScalarField(self.grid, self.modes * other)
            return NotImplemented
        if o.degree == 0:
            return SMScalarField(self.grid, self.modes * o.modes[0])
        if self.degree == 0:
            return SMScalarField(self.grid, o.modes * self.modes[0])
        K = self.degree + o.degree
        if K > DEGREE_CAP:
            raise DegreeError(f"product degree {K} exceeds cap {DEGREE_CAP}")
        nw = 2 * K + 1
        a = np.fft.ifft(np.fft.ifftshift(_center_pad(self.modes, K), axes=0), axis=0) * nw
        b = np.fft.ifft(np.fft.ifftshift(_center_pad(o.modes, K), axes=0), axis=0) * nw
        prod = np.fft.fftshift(np.fft.fft(a * b, axis=0) / nw, axes=0)
        return SMScalarField(self.grid, prod)

    __rmul__ = __mul__

    def __pow__(self, n):
        if n != 2:
            raise ValueError("only squares are supported")
        return self * self

    # -- derivatives --------------------------------------------------
    def _k(self):
        K = self.degree
        return np.arange(-K, K + 1)[:, None, None]

    def V(self):
        return SMScalarField(self.grid, 1j * self._k() * self.modes)

    def _raising_parts(self):
        g = self.grid
        uw = 1j * self._k() * self.modes
        A = g.dx(self.modes) + g.phi_y * uw
        B = g.dy(self.modes) - g.phi_x * uw
        P = g.E * (A - 1j * B) / 2
        M = g.E * (A + 1j * B) / 2
        return P, M

    def _shifted(self, P, M):
        K = self.degree
        out = np.zeros((2 * K + 3,) + self.modes.shape[1:], dtype=complex)
        out[2:] += P
        out[:-2] += M
        return SMScalarField(self.grid, out)

    def X(self):
        P, M = self._raising_parts()
        return self._shifted(P, M)

    def H(self):
        P, M = self._raising_parts()
        return self._shifted(1j * P, -1j * M)

    # -- evaluation ---------------------------------------------------
    def __call__(self, x, y, w):
        x, y, w = np.broadcast_arrays(*(np.atleast_1d(np.asarray(a, dtype=float)) for a in (x, y, w)))
        vk = self.grid.interpolate(self.modes, x.ravel(), y.ravel())   # (2K+1, P)
        phase = np.exp(1j * np.multiply.outer(np.arange(-self.degree, self.degree + 1), w.ravel()))
        return np.real(np.sum(vk * phase, axis=0)).reshape(x.shape)

    def values(self, nw=None):
        """Samples on (nw fibre angles) x grid; nw >= 2K+1."""
        K = self.degree
        nw = nw or 2 * K + 1
        if nw % 2 == 0 or nw < 2 * K + 1:
            raise ValueError("nw must be odd and >= 2K+1")
        a = np.fft.ifft(np.fft.ifftshift(_center_pad(self.modes, (nw - 1) // 2), axes=0), axis=0) * nw
        return a.real

    def max_abs(self):
        return float(np.max(np.abs(self.values()))) if self.modes.size else 0.0

    def imag_defect(self):
        """max |u_{-k} - conj(u_k)|: zero for real fields."""
        return float(np.max(np.abs(self.modes - np.conj(self.modes[::-1]))))

    def even(self):
        k = self._k()
        return SMScalarField(self.grid, np.where(k % 2 == 0, self.modes, 0))

    def odd(self):
        k = self._k()
        return SMScalarField(self.grid, np.where(k % 2 != 0, self.modes, 0))

    # -- quadrature ---------------------------------------------------
    def integrate(self):
        return liouville_integrate(self)

    def l2(self):
        return math.sqrt(max(0.0, liouville_integrate(self * self)))

    # -- serialization ------------------------------------------------
    def to_json(self):
        K = self.degree
        return {
            "surface": self.grid.surface.to_config(),
            "N": self.grid.Nx,
            "kmax": K,
            "modes": {str(k): {"re": self.modes[K + k].real.tolist(),
                               "im": self.modes[K + k].imag.tolist()} for k in range(K + 1)},
        }

    @classmethod
    def from_json(cls, d, grid=None):
        from .geometry import surface_from_config

        if grid is None:
            grid = TorusGrid(surface_from_config(d["surface"]), int(d["N"]))
        coeffs = {int(k): np.asarray(v["re"]) + 1j * np.asarray(v["im"]) for k, v in d["modes"].items()}
        return grid.from_modes(coeffs)


def liouville_integrate(u):
    """Integral over SM of u against exp(2 phi) dx dy dw (no 1/2pi)."""
    grid = getattr(u, "grid", None)
    if not isinstance(grid, TorusGrid):
        raise NonCompactChartError("Liouville integration needs a compact (torus) chart")
    return float(2 * np.pi * grid.quad(u.mode(0).real * grid.conf))


# -- frame choices ----------------------------------------------------

def F(u, lam):
    """F = X + lambda V."""
    return u.X() + lam * u.V()


def Hc(u, c):
    """H_c = H + c V."""
    return u.H() + c * u.V()


class Frame(enum.Enum):
    X = "X"
    H = "H"
    V = "V"
    F = "F"
    Hc = "H_c"


@dataclass(frozen=True)
class FrameChoice:
    kind: Frame
    lam: object = None
    c: object = None

    def apply(self, u):
        if self.kind is Frame.X:
            return u.X()
        if self.kind is Frame.H:
            return u.H()
        if self.kind is Frame.V:
            return u.V()
        if self.kind is Frame.F:
            if self.lam is None:
                raise ValueError("F needs lambda")
            return F(u, self.lam)
        if self.c is None:
            raise ValueError("H_c needs c")
        return Hc(u, self.c)


def apply_frame(choice, u, x, y, w):
    """Directional derivative of u along the frame field ``choice`` at points."""
    if isinstance(choice, (Frame, str)):
        choice = FrameChoice(Frame(choice))
    return choice.apply(u)(x, y, w)


# -- commutator residuals ---------------------------------------------------

def _maxabs(field):
    if hasattr(field, "max_abs"):
        return field.max_abs()
    return float(np.max(np.abs(field)))


def commutator_residuals(u, K_field):
    """Residual fields of [V,X]=H, [H,V]=X, [X,H]=KV applied to u."""
    vx = u.X().V() - u.V().X() - u.H()
    hv = u.V().H() - u.H().V() - u.X()
    xh = u.H().X() - u.X().H() - K_field * u.V()
    return {"[V,X]-H": vx, "[H,V]-X": hv, "[X,H]-KV": xh}


def modified_commutator_residuals(u, lam, c, K_field):
    """Residual fields of the three brackets in the basis {F, H_c, V}."""
    Vl = lam.V()
    Vc = c.V()
    kcheck = K_field - Hc(lam, c) + lam * lam
    curv = F(c, lam) + c * c + kcheck
    Fu, Hu, Vu = F(u, lam), Hc(u, c), u.V()
    r1 = Fu.V() - F(Vu, lam) - (Hu + (Vl - c) * Vu)
    r2 = Hu.V() - Hc(Vu, c) - (-Fu + (Vc + lam) * Vu)
    r3 = F(Hu, lam) - Hc(Fu, c) - (-lam * Fu - c * Hu + curv * Vu)
    return {"[V,F]": r1, "[V,H_c]": r2, "[F,H_c]": r3}


def commutator_battery(grid, rng, n_random=3, kmax=3):
    """Test fields spanning vertical degrees 0..kmax with non-constant horizontal parts."""
    X, Y = grid.X, grid.Y
    sx, sy = 2 * np.pi / grid.Lx, 2 * np.pi / grid.Ly
    fields = [
        grid.from_function(lambda x, y, w: np.cos(sx * x) * np.sin(w), 1),
        grid.field(np.sin(sy * Y) + np.cos(sx * X + sy * Y)),
        grid.from_function(lambda x, y, w: np.sin(sx * x - sy * y) * np.cos(2 * w) + np.cos(sy * y) * np.sin(3 * w), 3),
    ]
    fields += [grid.random_field(rng, K=kmax, kh=2) for _ in range(n_random)]
    return fields


def verify_commutators(surface, n_samples=200, N=64, kmax=8, seed=0):
    """Max residuals of the basic brackets over a test battery.

    Torus charts use the spectral fields; non-compact charts the symbolic ones.
    Residuals are maxima over the full sampling grid (torus) or over
    ``n_samples`` random chart points.
    """
    rng = np.random.default_rng(seed)
    if surface.compact:
        grid = TorusGrid(surface, N)
        Kf = grid.curvature()
        out = {}
        for u in commutator_battery(grid, rng, kmax=kmax):
            for name, r in commutator_residuals(u, Kf).items():
                out[name] = max(out.get(name, 0.0), r.max_abs())
        return out
    from .analytic import AnalyticSpace

    space = AnalyticSpace(surface)
    pts = space.sample_points(rng, n_samples)
    out = {}
    for u in space.battery():
        for name, r in commutator_residuals(u, space.curvature()).items():
            out[name] = max(out.get(name, 0.0), float(np.max(np.abs(r(*pts)))))
    return out


def verify_modified_commutators(surface, params, c, us=None, N=64, seed=0):
    grid = c.grid if hasattr(c, "grid") else TorusGrid(surface, N)
    lam = grid.lam(params)
    us = us or commutator_battery(grid, np.random.default_rng(seed), n_random=2)
    out = {}
    for u in us:
        for name, r in modified_commutator_residuals(u, lam, c, grid.curvature()).items():
            out[name] = max(out.get(name, 0.0), r.max_abs())
    return out
