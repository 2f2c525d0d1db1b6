"""Isothermal charts, curvature, the rotation i and divergence-free fields.

Metrics are always ``exp(2 phi) (dx^2 + dy^2)``. Scalar functions on a chart
(phi, the magnetic part f, the stream function g) share one closed-form
representation, :class:`ChartFunction`: a finite trigonometric sum plus
optional ``ln y`` and ``ln(1 + x^2 + y^2)`` terms. That covers the flat and
bumpy tori, the hyperbolic upper half-plane (phi = -ln y) and a stereographic
sphere chart (phi = ln 2 - ln(1 + r^2)), and it packs straight into the
numba kernels.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np

CHARTS = ("torus", "halfplane", "plane")


class GeometryError(ValueError):
    pass


@functools.lru_cache(maxsize=None)
def _log_derivative(ly: float, lr: float, nx: int, ny: int):
    import sympy as sp

    x, y = sp.symbols("x y", real=True)
    expr = 0
    if ly:
        expr += sp.Float(ly) * sp.log(y)
    if lr:
        expr += sp.Float(lr) * sp.log(1 + x**2 + y**2)
    d = sp.diff(expr, x, nx, y, ny) if (nx or ny) else expr
    return sp.lambdify((x, y), d, "numpy")


@dataclass(frozen=True)
class ChartFunction:
    """``sum_j a_j cos(kx_j x + ky_j y) + b_j sin(...) + ly ln y + lr ln(1+x^2+y^2)``."""

    modes: np.ndarray = field(default_factory=lambda: np.zeros((0, 4)))
    log_y: float = 0.0
    log_r: float = 0.0

    def __post_init__(self):
        m = np.asarray(self.modes, dtype=float).reshape(-1, 4)
        object.__setattr__(self, "modes", np.ascontiguousarray(m))

    # -- constructors -------------------------------------------------
    @classmethod
    def zero(cls):
        return cls()

    @classmethod
    def constant(cls, value):
        return cls(np.array([[0.0, 0.0, float(value), 0.0]]))

    @classmethod
    def trig(cls, terms):
        """terms: iterable of (kx, ky, cos_coef, sin_coef)."""
        return cls(np.array(list(terms), dtype=float).reshape(-1, 4))

    @classmethod
    def cos_product(cls, amp, kx=1.0, ky=1.0):
        # amp cos(kx x) cos(ky y) = amp/2 [cos(kx x + ky y) + cos(kx x - ky y)]
        return cls.trig([(kx, ky, amp / 2, 0.0), (kx, -ky, amp / 2, 0.0)])

    @classmethod
    def from_grid(cls, values, Lx, Ly, rtol=1e-15):
        """Exact trigonometric interpolant of periodic samples on [0,Lx)x[0,Ly)."""
        v = np.asarray(values, dtype=float)
        if v.ndim == 1:
            n = int(round(math.sqrt(v.size)))
            v = v.reshape(n, n)
        ny, nx = v.shape
        hat = np.fft.fft2(v) / (nx * ny)
        kxs = np.fft.fftfreq(nx, d=1.0 / nx)
        kys = np.fft.fftfreq(ny, d=1.0 / ny)
        scale = np.abs(hat).max() if hat.size else 0.0
        rows = []
        for iy, my in enumerate(kys):
            for ix, mx in enumerate(kxs):
                if (nx % 2 == 0 and ix == nx // 2) or (ny % 2 == 0 and iy == ny // 2):
                    continue  # Nyquist rows dropped: keeps the interpolant real
                c = hat[iy, ix]
                if abs(c) <= rtol * scale:
                    continue
                # c e^{i arg} + conj partner -> only keep half-plane of modes
                if (my < 0) or (my == 0 and mx < 0):
                    continue
                kx = 2 * math.pi * mx / Lx
                ky = 2 * math.pi * my / Ly
                if mx == 0 and my == 0:
                    rows.append((0.0, 0.0, c.real, 0.0))
                else:
                    rows.append((kx, ky, 2 * c.real, -2 * c.imag))
        return cls(np.array(rows).reshape(-1, 4))

    # -- algebra ------------------------------------------------------
    def __add__(self, other):
        if not isinstance(other, ChartFunction):
            return NotImplemented
        return ChartFunction(np.vstack([self.modes, other.modes]),
                             self.log_y + other.log_y, self.log_r + other.log_r)

    def scaled(self, s):
        m = self.modes.copy()
        m[:, 2:] *= s
        return ChartFunction(m, self.log_y * s, self.log_r * s)

    @property
    def is_zero(self):
        return not np.any(self.modes[:, 2:]) and self.log_y == 0.0 and self.log_r == 0.0

    def to_config(self):
        terms = [{"kind": "analytic", "name": "trig", "params": {"terms": self.modes.tolist()}}]
        if self.log_y:
            terms.append({"kind": "analytic", "name": "log_y", "params": {"scale": self.log_y}})
        if self.log_r:
            terms.append({"kind": "analytic", "name": "log_r", "params": {"scale": self.log_r}})
        return {"kind": "analytic", "name": "sum", "params": {"terms": terms}}

    def packed(self):
        """(modes, logs) arrays for the kernels."""
        return self.modes, np.array([self.log_y, self.log_r])

    # -- evaluation ---------------------------------------------------
    def derivative(self, x, y, nx=0, ny=0):
        """Mixed partial d^nx/dx^nx d^ny/dy^ny, vectorized over x, y."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = np.zeros(np.broadcast(x, y).shape)
        if self.modes.shape[0]:
            kx = self.modes[:, 0]
            ky = self.modes[:, 1]
            amp = (self.modes[:, 2] - 1j * self.modes[:, 3]) * (1j * kx) ** nx * (1j * ky) ** ny
            arg = np.multiply.outer(x, kx) + np.multiply.outer(y, ky)
            out = out + np.real(np.exp(1j * arg) @ amp)
        if self.log_y or self.log_r:
            out = out + _log_derivative(self.log_y, self.log_r, nx, ny)(x, y)
        return out

    def __call__(self, x, y):
        return self.derivative(x, y)

    def jet(self, x, y):
        """(v, vx, vy, vxx, vxy, vyy)."""
        d = self.derivative
        return (d(x, y), d(x, y, 1, 0), d(x, y, 0, 1),
                d(x, y, 2, 0), d(x, y, 1, 1), d(x, y, 0, 2))

    def check_periodic(self, Lx, Ly, atol=1e-9):
        if self.log_y or self.log_r:
            raise GeometryError("logarithmic terms are not periodic")
        for kx, ky in self.modes[:, :2]:
            for k, L in ((kx, Lx), (ky, Ly)):
                n = k * L / (2 * math.pi)
                if abs(n - round(n)) > atol:
                    raise GeometryError(f"wavenumber {k} is not periodic on length {L}")


# -- named analytic functions ----------------------------------------------

def _named(name, params):
    p = dict(params or {})
    if name == "zero":
        return ChartFunction.zero()
    if name == "constant":
        return ChartFunction.constant(p.get("value", 0.0))
    if name == "cos_product":
        return ChartFunction.cos_product(p.get("amp", 1.0), p.get("kx", 1.0), p.get("ky", 1.0))
    if name == "trig":
        terms = []
        for t in p.get("terms", []):
            if isinstance(t, dict):
                terms.append((t.get("kx", 0.0), t.get("ky", 0.0), t.get("cos", 0.0), t.get("sin", 0.0)))
            else:
                terms.append(tuple(t))
        return ChartFunction.trig(terms)
    if name == "hyperbolic":
        return ChartFunction(log_y=-1.0)
    if name == "log_y":
        return ChartFunction(log_y=float(p.get("scale", 1.0)))
    if name == "log_r":
        return ChartFunction(log_r=float(p.get("scale", 1.0)))
    if name == "spherical":
        return ChartFunction.constant(math.log(2.0)) + ChartFunction(log_r=-1.0)
    if name == "sum":
        out = ChartFunction.zero()
        for sub in p.get("terms", []):
            out = out + function_from_config(sub)
        return out
    raise GeometryError(f"unknown analytic function {name!r}")


def function_from_config(desc, Lx=2 * math.pi, Ly=2 * math.pi):
    """Build a ChartFunction from its JSON description.

    ``{"kind": "analytic", "name": ..., "params": {...}}`` or
    ``{"kind": "grid", "N": ..., "values": [...]}``. A bare number is a constant.
    """
    if desc is None:
        return ChartFunction.zero()
    if isinstance(desc, (int, float)):
        return ChartFunction.constant(desc)
    kind = desc.get("kind", "analytic")
    if kind == "analytic":
        return _named(desc["name"], desc.get("params"))
    if kind == "grid":
        vals = np.asarray(desc["values"], dtype=float)
        N = int(desc["N"])
        return ChartFunction.from_grid(vals.reshape(N, N), Lx, Ly)
    raise GeometryError(f"unknown function kind {kind!r}")


# -- surfaces ------------------------------------------------------------

@dataclass(frozen=True)
class ConformalSurface:
    """A chart with metric exp(2 phi)(dx^2 + dy^2).

    ``torus``: periodic [0,Lx)x[0,Ly), phi must be a periodic trig sum.
    ``halfplane``/``plane``: non-compact local charts; ``box`` bounds orbits.
    """

    chart: str = "torus"
    phi: ChartFunction = field(default_factory=ChartFunction.zero)
    Lx: float = 2 * math.pi
    Ly: float = 2 * math.pi
    box: tuple = (-math.inf, math.inf, -math.inf, math.inf)

    def __post_init__(self):
        if self.chart not in CHARTS:
            raise GeometryError(f"chart must be one of {CHARTS}, got {self.chart!r}")
        if self.chart == "torus":
            self.phi.check_periodic(self.Lx, self.Ly)
        if self.chart == "halfplane" and self.box[2] == -math.inf:
            object.__setattr__(self, "box", (self.box[0], self.box[1], 1e-300, self.box[3]))

    @classmethod
    def flat_torus(cls, Lx=2 * math.pi, Ly=2 * math.pi):
        return cls("torus", ChartFunction.zero(), Lx, Ly)

    @classmethod
    def hyperbolic(cls, box=None):
        return cls("halfplane", ChartFunction(log_y=-1.0),
                   box=tuple(box) if box else (-math.inf, math.inf, 1e-300, math.inf))

    @classmethod
    def sphere_chart(cls):
        return cls("plane", _named("spherical", {}))

    @property
    def compact(self):
        return self.chart == "torus"

    def conformal_factor(self, x, y):
        return self.phi(x, y)

    def metric(self, x, y):
        """Metric coefficient exp(2 phi) (scalar multiple of the identity)."""
        return np.exp(2 * self.phi(x, y))

    def connection_form(self, x, y, dx, dy):
        """alpha(dx, dy) = -phi_y dx + phi_x dy: rotation rate of the frame e^{-phi} d/dx."""
        return -self.phi.derivative(x, y, 0, 1) * dx + self.phi.derivative(x, y, 1, 0) * dy

    def to_config(self):
        return {"chart": self.chart, "Lx": self.Lx, "Ly": self.Ly, "phi": self.phi.to_config()}


def gaussian_curvature(surface, x, y):
    """K = -exp(-2 phi) (phi_xx + phi_yy)."""
    phi = surface.phi
    lap = phi.derivative(x, y, 2, 0) + phi.derivative(x, y, 0, 2)
    return -np.exp(-2 * phi(x, y)) * lap


def rotate90(surface, x, y, v):
    """The map i on T_xM. Conformal metrics make it the coordinate rotation."""
    v = np.asarray(v, dtype=float)
    return np.stack([-v[..., 1], v[..., 0]], axis=-1)


def metric_inner(surface, x, y, u, v):
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    return surface.metric(x, y) * np.sum(u * v, axis=-1)


def unit_vector(surface, x, y, omega):
    """v = exp(-phi)(cos omega, sin omega)."""
    E = np.exp(-surface.phi(x, y))
    return np.stack([E * np.cos(omega), E * np.sin(omega)], axis=-1)


@dataclass(frozen=True)
class DivergenceFreeField:
    """e = exp(-2 phi)(-g_y, g_x): the rotated gradient i grad g of a stream function."""

    surface: ConformalSurface
    stream: ChartFunction

    def __call__(self, x, y):
        g = self.stream
        w = np.exp(-2 * self.surface.phi(x, y))
        return np.stack([-w * g.derivative(x, y, 0, 1), w * g.derivative(x, y, 1, 0)], axis=-1)

    def lowered(self, x, y):
        """Components of the 1-form theta = <e, .>: (-g_y, g_x)."""
        g = self.stream
        return np.stack([-g.derivative(x, y, 0, 1), g.derivative(x, y, 1, 0)], axis=-1)


def divergence_free_field(surface, stream):
    return DivergenceFreeField(surface, stream)


def metric_divergence_spectral(surface, field_values, Lx, Ly):
    """exp(-2 phi) d_i(exp(2 phi) e^i) on a periodic grid by FFT differentiation."""
    ny, nx = field_values.shape[:2]
    xs = np.arange(nx) * Lx / nx
    ys = np.arange(ny) * Ly / ny
    X, Y = np.meshgrid(xs, ys)
    w = surface.metric(X, Y)
    kx = 2 * np.pi * np.fft.fftfreq(nx, d=Lx / nx)
    ky = 2 * np.pi * np.fft.fftfreq(ny, d=Ly / ny)
    if nx % 2 == 0:
        kx[nx // 2] = 0
    if ny % 2 == 0:
        ky[ny // 2] = 0
    a = np.fft.fft2(w * field_values[..., 0])
    b = np.fft.fft2(w * field_values[..., 1])
    div = np.real(np.fft.ifft2(1j * kx[None, :] * a + 1j * ky[:, None] * b))
    return div / w


@dataclass(frozen=True)
class ThermostatParams:
    """lambda(x, v) = f(x) + <e(x), iv> with e the rotated gradient of ``stream``."""

    surface: ConformalSurface
    f: ChartFunction = field(default_factory=ChartFunction.zero)
    stream: ChartFunction = field(default_factory=ChartFunction.zero)

    def __post_init__(self):
        if self.surface.compact:
            self.f.check_periodic(self.surface.Lx, self.surface.Ly)
            self.stream.check_periodic(self.surface.Lx, self.surface.Ly)

    @property
    def is_pure(self):
        return self.f.is_zero

    @property
    def is_magnetic(self):
        return self.stream.is_zero

    @property
    def e(self):
        return DivergenceFreeField(self.surface, self.stream)

    def packed(self):
        pm, pl = self.surface.phi.packed()
        fm, fl = self.f.packed()
        gm, gl = self.stream.packed()
        return pm, pl, fm, fl, gm, gl

    def lam(self, x, y, omega):
        """lambda = f + X(g)."""
        E = np.exp(-self.surface.phi(x, y))
        g = self.stream
        return self.f(x, y) + E * (np.cos(omega) * g.derivative(x, y, 1, 0)
                                   + np.sin(omega) * g.derivative(x, y, 0, 1))

    def theta(self, x, y, omega):
        """theta = <e, v> = -H(g)."""
        E = np.exp(-self.surface.phi(x, y))
        g = self.stream
        return -E * (-np.sin(omega) * g.derivative(x, y, 1, 0)
                     + np.cos(omega) * g.derivative(x, y, 0, 1))

    def rate_bound(self):
        """Crude upper bound on |lambda| + |dphi| used for the step-size guard."""
        def amp(fn, order):
            m = fn.modes
            if not m.shape[0]:
                return 0.0
            k = np.hypot(m[:, 0], m[:, 1])
            return float(np.sum(np.hypot(m[:, 2], m[:, 3]) * k**order))
        return 1.0 + amp(self.f, 0) + amp(self.stream, 1) + amp(self.surface.phi, 1) \
            + abs(self.stream.log_y) + abs(self.surface.phi.log_y)

    def dt_max(self):
        return 0.25 / self.rate_bound()


# -- config loading --------------------------------------------------------

def surface_from_config(cfg):
    chart = cfg.get("chart", "torus")
    Lx = float(cfg.get("Lx", 2 * math.pi))
    Ly = float(cfg.get("Ly", 2 * math.pi))
    default_phi = {"torus": None,
                   "halfplane": {"kind": "analytic", "name": "hyperbolic"},
                   "plane": {"kind": "analytic", "name": "zero"}}[chart] if chart in CHARTS else None
    phi = function_from_config(cfg.get("phi", default_phi), Lx, Ly)
    box = cfg.get("box")
    if box is None:
        box = (-math.inf, math.inf, 1e-300 if chart == "halfplane" else -math.inf, math.inf)
    return ConformalSurface(chart, phi, Lx, Ly, tuple(float(b) for b in box))


def thermostat_from_config(surface, cfg):
    cfg = cfg or {}
    f = function_from_config(cfg.get("f"), surface.Lx, surface.Ly)
    g = function_from_config(cfg.get("stream"), surface.Lx, surface.Ly)
    return ThermostatParams(surface, f, g)


def homogeneous_thermostat(e_scale, f_const=0.0):
    """K = -1 half-plane with stream e_scale * ln y.

    Then |e| = e_scale everywhere, theta = -e_scale cos(omega) and
    lambda = f + e_scale sin(omega): the thermostat commutes with the affine
    group x -> a x + b, so orbit data depends on omega only.
    """
    surf = ConformalSurface.hyperbolic()
    f = ChartFunction.constant(f_const) if f_const else ChartFunction.zero()
    return ThermostatParams(surf, f, ChartFunction(log_y=float(e_scale)))
