"""Closed-form frame on any chart via sympy.

This is the second route for the frame formulas: used on the non-compact
charts (half-plane, sphere chart) where no periodic grid exists, and as an
independent check of the spectral torus fields. Expressions are never
simplified; they are differentiated and lambdified as built.
"""
from __future__ import annotations

import numpy as np
import sympy as sp

x, y, w = sp.symbols("x y w", real=True)


def chart_expr(fn):
    """sympy expression of a ChartFunction."""
    e = sp.Integer(0)
    for kx, ky, a, b in fn.modes:
        arg = sp.Float(kx) * x + sp.Float(ky) * y
        if a:
            e += sp.Float(a) * sp.cos(arg)
        if b:
            e += sp.Float(b) * sp.sin(arg)
    if fn.log_y:
        e += sp.Float(fn.log_y) * sp.log(y)
    if fn.log_r:
        e += sp.Float(fn.log_r) * sp.log(1 + x**2 + y**2)
    return e


class AnalyticSMField:
    __slots__ = ("space", "expr", "_fn")
    __array_ufunc__ = None

    def __init__(self, space, expr):
        self.space = space
        self.expr = sp.sympify(expr)
        self._fn = None

    def _wrap(self, e):
        return AnalyticSMField(self.space, e)

    def _other(self, o):
        return o.expr if isinstance(o, AnalyticSMField) else sp.sympify(o)

    def __add__(self, o):
        return self._wrap(self.expr + self._other(o))

    __radd__ = __add__

    def __sub__(self, o):
        return self._wrap(self.expr - self._other(o))

    def __rsub__(self, o):
        return self._wrap(self._other(o) - self.expr)

    def __mul__(self, o):
        return self._wrap(self.expr * self._other(o))

    __rmul__ = __mul__

    def __neg__(self):
        return self._wrap(-self.expr)

    def __pow__(self, n):
        return self._wrap(self.expr**n)

    def V(self):
        return self._wrap(sp.diff(self.expr, w))

    def X(self):
        s = self.space
        u = self.expr
        return self._wrap(s.E * (sp.cos(w) * sp.diff(u, x) + sp.sin(w) * sp.diff(u, y)
                                 + (s.phi_y * sp.cos(w) - s.phi_x * sp.sin(w)) * sp.diff(u, w)))

    def H(self):
        s = self.space
        u = self.expr
        return self._wrap(s.E * (-sp.sin(w) * sp.diff(u, x) + sp.cos(w) * sp.diff(u, y)
                                 - (s.phi_x * sp.cos(w) + s.phi_y * sp.sin(w)) * sp.diff(u, w)))

    def __call__(self, xs, ys, ws):
        if self._fn is None:
            self._fn = sp.lambdify((x, y, w), self.expr, "numpy")
        xs, ys, ws = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (xs, ys, ws)))
        return np.broadcast_to(self._fn(xs, ys, ws), xs.shape).astype(float)


class AnalyticSpace:
    """Field factory for a surface: curvature, lambda, theta as expressions."""

    def __init__(self, surface):
        self.surface = surface
        self.phi = chart_expr(surface.phi)
        self.phi_x = sp.diff(self.phi, x)
        self.phi_y = sp.diff(self.phi, y)
        self.E = sp.exp(-self.phi)

    def field(self, expr):
        if hasattr(expr, "modes"):
            expr = chart_expr(expr)
        return AnalyticSMField(self, expr)

    def constant(self, value):
        return AnalyticSMField(self, sp.Float(value))

    def curvature(self):
        lap = sp.diff(self.phi, x, 2) + sp.diff(self.phi, y, 2)
        return AnalyticSMField(self, -sp.exp(-2 * self.phi) * lap)

    def lam(self, params):
        return self.field(params.f) + self.field(params.stream).X()

    def theta(self, params):
        return -self.field(params.stream).H()

    def sample_points(self, rng, n):
        chart = self.surface.chart
        if chart == "halfplane":
            xs = rng.uniform(-1.0, 1.0, n)
            ys = rng.uniform(0.5, 2.0, n)
        elif chart == "plane":
            xs = rng.uniform(-1.0, 1.0, n)
            ys = rng.uniform(-1.0, 1.0, n)
        else:
            xs = rng.uniform(0, self.surface.Lx, n)
            ys = rng.uniform(0, self.surface.Ly, n)
        ws = rng.uniform(0, 2 * np.pi, n)
        return xs, ys, ws

    def battery(self):
        exprs = [
            sp.Integer(1),
            sp.sin(x) * y * sp.cos(2 * w) + sp.log(1 + y**2) * sp.sin(w),
            x * y * sp.cos(3 * w) + sp.cos(x + y) + sp.exp(-y) * sp.sin(w - x),
            (x**2 + y) * sp.sin(2 * w) * sp.cos(w),
        ]
        return [AnalyticSMField(self, e) for e in exprs]
