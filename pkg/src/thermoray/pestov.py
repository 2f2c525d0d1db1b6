"""Pestov-type energy identities as residual checks.

Every identity is evaluated term by term on SM fields (spectral torus fields
or symbolic fields), so a failure points at the responsible term.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .frame import F, Hc, SMScalarField, TorusGrid, liouville_integrate

POINTWISE_TOL = 1e-8
INTEGRATED_TOL = 1e-8
PREMISE_TOL = 1e-10


class PremiseError(ValueError):
    """V^3 p + 4 V p does not vanish for p = F(u)."""


@dataclass
class IdentityReport:
    id: str
    params: dict
    left: float
    right: float
    breakdown: dict = field(default_factory=dict)
    residual: float = 0.0
    relative: float = 0.0

    def __post_init__(self):
        self.residual = abs(self.left - self.right)
        scale = max(abs(self.left), abs(self.right))
        self.relative = self.residual / scale if scale > 0 else self.residual

    def as_dict(self):
        return {"id": self.id, "params": self.params, "left": self.left, "right": self.right,
                "residual": self.residual, "relative": self.relative,
                "breakdown": {k: (float(v) if np.isscalar(v) else v) for k, v in self.breakdown.items()}}


def _space(u):
    return u.grid if isinstance(u, SMScalarField) else u.space


def _as_field(space, a):
    if isinstance(a, (int, float)):
        return space.constant(a)
    return a


def _evaluate(fields, points, nw):
    """Sample a dict of fields either at points (x, y, w) or on a full grid."""
    if points is not None:
        return {k: np.asarray(f(*points), dtype=float) for k, f in fields.items()}
    return {k: f.values(nw) for k, f in fields.items()}


def pestov_terms(u, lam, c):
    """Fields of both sides of the pointwise identity.

    Left: 2 H_c u V F u. Right, eight terms:
      (Fu)^2, (H_c u)^2, -(F(c) + c^2 + K_check)(Vu)^2, F(H_c u Vu),
      V(lambda) H_c u Vu, -H_c(Fu Vu), -V(c) Fu Vu, V(H_c u Fu)
    with K_check = K - H_c(lambda) + lambda^2.
    """
    sp = _space(u)
    lam = _as_field(sp, lam)
    c = _as_field(sp, c)
    K = sp.curvature()
    Fu, Hu, Vu = F(u, lam), Hc(u, c), u.V()
    kcheck = K - Hc(lam, c) + lam * lam
    curv = F(c, lam) + c * c + kcheck
    w1 = Hu * Vu
    w2 = Fu * Vu
    w3 = Hu * Fu
    left = {"2 H_c u VFu": 2 * Hu * Fu.V()}
    right = {
        "(Fu)^2": Fu * Fu,
        "(H_c u)^2": Hu * Hu,
        "-(F(c)+c^2+K)(Vu)^2": -1 * curv * Vu * Vu,
        "F(H_c u Vu)": F(w1, lam),
        "V(lam) H_c u Vu": lam.V() * w1,
        "-H_c(Fu Vu)": -1 * Hc(w2, c),
        "-V(c) Fu Vu": -1 * c.V() * w2,
        "V(H_c u Fu)": w3.V(),
    }
    return left, right, {"lam": lam, "c": c, "w1": w1, "w2": w2, "w3": w3, "curv": curv}


def _nw_for(fields):
    return 2 * max(f.degree for f in fields) + 1


def pointwise_pestov(u, lam, c, points=None, nw=None):
    """Pointwise identity at ``points`` (tuple of arrays) or on the whole grid.

    The report's left/right are the values at the worst point; ``residual``
    is the max absolute residual over all points.
    """
    left, right, _ = pestov_terms(u, lam, c)
    if points is None and not isinstance(u, SMScalarField):
        raise ValueError("symbolic fields need explicit points")
    if points is None:
        nw = nw or _nw_for(list(left.values()) + list(right.values()))
    L = _evaluate(left, points, nw)
    R = _evaluate(right, points, nw)
    lv = sum(L.values())
    rv = sum(R.values())
    diff = np.abs(lv - rv)
    i = np.unravel_index(int(np.argmax(diff)), diff.shape)
    breakdown = {k: float(v[i]) for k, v in {**L, **R}.items()}
    breakdown["max_residual"] = float(diff.max())
    rep = IdentityReport("pestov", {"points": int(diff.size)}, float(lv[i]), float(rv[i]), breakdown)
    return rep


def integrated_pestov(u, lam, c):
    """2 int H_c u VFu = |Fu|^2 + |H_c u|^2 - int (F(c)+c^2+K_check)(Vu)^2.

    The breakdown also lists the integrals of the five exact divergences
    that make up the remaining pointwise terms:
      F(w1) + V(lam) w1 = X(w1) + V(lam w1),  w1 = H_c u Vu
      -H_c(w2) - V(c) w2 = -H(w2) - V(c w2),  w2 = Fu Vu
      V(w3),                                   w3 = H_c u Fu
    """
    left, right, aux = pestov_terms(u, lam, c)
    I = liouville_integrate
    lhs = I(left["2 H_c u VFu"])
    parts = {k: I(right[k]) for k in ("(Fu)^2", "(H_c u)^2", "-(F(c)+c^2+K)(Vu)^2")}
    w1, w2, w3, lamf, cf = aux["w1"], aux["w2"], aux["w3"], aux["lam"], aux["c"]
    vanishing = {
        "X(w1)": I(w1.X()),
        "V(lam w1)": I((lamf * w1).V()),
        "H(w2)": I(w2.H()),
        "V(c w2)": I((cf * w2).V()),
        "V(w3)": I(w3.V()),
    }
    rhs = sum(parts.values())
    breakdown = {**parts, **{"vanishing " + k: v for k, v in vanishing.items()}}
    breakdown["max_vanishing"] = max(abs(v) for v in vanishing.values())
    return IdentityReport("pestov-int", {"N": u.grid.N, "kmax": u.degree}, lhs, rhs, breakdown)


def _premise(u, lam):
    p = F(u, lam)
    Vp = p.V()
    return p, Vp.V().V() + 4 * Vp


def modified_pestov(u, theta, c, strict=True):
    """Modified identity for pure thermostats (lambda = V(theta)), phi = V^2 u + u.

    |F phi|^2 + |H_c phi|^2 + |2 H_c phi - (theta + c) V phi|^2
        = int R_c (V phi)^2 + 2 int H_c phi r,
    R_c = F(theta + c) + (theta + 2c)(theta + c) + K,  r = V^3 p + 4 V p, p = F u.

    The correction r vanishes exactly when p has vertical modes in {0, +-2};
    with ``strict`` a nonzero r raises PremiseError.
    """
    sp = _space(u)
    theta = _as_field(sp, theta)
    c = _as_field(sp, c)
    lam = theta.V()
    _p, r = _premise(u, lam)
    rmax = r.max_abs()
    if strict and rmax > PREMISE_TOL:
        raise PremiseError(f"V^3 p + 4 V p = {rmax:.3g} is not zero: F(u) is not an even quadratic form")
    phi = u.V().V() + u
    Fphi, Hphi, Vphi = F(phi, lam), Hc(phi, c), phi.V()
    m = theta + c
    Rc = F(m, lam) + (theta + 2 * c) * m + sp.curvature()
    I = liouville_integrate
    square = 2 * Hphi - m * Vphi
    parts_l = {"|F phi|^2": I(Fphi * Fphi), "|H_c phi|^2": I(Hphi * Hphi),
               "|2H_c phi - (theta+c)V phi|^2": I(square * square)}
    parts_r = {"int R_c (V phi)^2": I(Rc * Vphi * Vphi), "2 int H_c phi r": 2 * I(Hphi * r)}
    # intermediate relation V F phi = -2 H_c phi + 2 (theta + c) V phi + r
    rel = Fphi.V() + 2 * Hphi - 2 * m * Vphi - r
    breakdown = {**parts_l, **parts_r, "premise |r|": rmax, "relation residual": rel.max_abs()}
    return IdentityReport("pestov-modified", {"strict": strict}, sum(parts_l.values()), sum(parts_r.values()),
                          breakdown)


def vertical_relation_residual(u, theta, c):
    """max |V F phi + 2 H_c phi - 2(theta + c) V phi - (V^3 p + 4 V p)| over the grid."""
    sp = _space(u)
    theta = _as_field(sp, theta)
    c = _as_field(sp, c)
    lam = theta.V()
    _p, r = _premise(u, lam)
    phi = u.V().V() + u
    rel = F(phi, lam).V() + 2 * Hc(phi, c) - 2 * (theta + c) * phi.V() - r
    return rel.max_abs()


def minus_theta_identity(u, theta, strict=True):
    """The choice c = -theta:

    -5 |H_c phi|^2 = |F phi|^2 - int K (V phi)^2 + int div(e) (V phi)^2 - 2 int H_c phi r.
    """
    sp = _space(u)
    theta = _as_field(sp, theta)
    c = -1 * theta
    lam = theta.V()
    _p, r = _premise(u, lam)
    rmax = r.max_abs()
    if strict and rmax > PREMISE_TOL:
        raise PremiseError(f"V^3 p + 4 V p = {rmax:.3g} is not zero")
    phi = u.V().V() + u
    Fphi, Hphi, Vphi = F(phi, lam), Hc(phi, c), phi.V()
    I = liouville_integrate
    dive = _div_e_from_theta(theta)
    K = sp.curvature()
    lhs = -5 * I(Hphi * Hphi)
    parts = {"|F phi|^2": I(Fphi * Fphi), "-int K (V phi)^2": -I(K * Vphi * Vphi),
             "int div e (V phi)^2": I(dive * Vphi * Vphi), "-2 int H_c phi r": -2 * I(Hphi * r)}
    breakdown = {"-5|H_c phi|^2": lhs, **parts, "premise |r|": rmax}
    return IdentityReport("pestov-theta", {"strict": strict}, lhs, sum(parts.values()), breakdown)


def _div_e_from_theta(theta):
    """div e for theta = <e, v>: the mode-0 part of X(theta) + H(V theta) (times 1)."""
    w = theta.X() + theta.V().H()
    return SMScalarField(theta.grid, w.mode(0)[None]) if isinstance(theta, SMScalarField) else w


def minus_theta_curvature_residual(theta):
    """max |F(c) + c^2 + K_check - (K - div e)| for c = -theta, lambda = V(theta)."""
    sp = _space(theta)
    c = -1 * theta
    lam = theta.V()
    K = sp.curvature()
    lhs = F(c, lam) + c * c + K - Hc(lam, c) + lam * lam
    rhs = K - _div_e_from_theta(theta)
    return (lhs - rhs).max_abs()


def vertical_ode_check(pair, tol=PREMISE_TOL):
    """True iff V^3 p + 4 V p vanishes for the restriction p of a tensor pair."""
    p = pair.restriction()
    Vp = p.V()
    return bool((Vp.V().V() + 4 * Vp).max_abs() < tol * max(1.0, p.max_abs()))


def riccati_integrand_along(bundles, which="unstable"):
    """F(c) + c^2 + K_check along an orbit for c = c^u or c^s (finite-difference F(c))."""
    from . import kernels

    c = bundles.cu if which == "unstable" else bundles.cs
    q = bundles.traj.quantities()
    h = bundles.traj.dt
    Fc = (c[:-4] - 8 * c[1:-3] + 8 * c[3:-1] - c[4:]) / (12 * h)
    s = slice(2, len(c) - 2)
    lam, vl, hl, K = (q[s, j] for j in (kernels.Q_LAM, kernels.Q_VLAM, kernels.Q_HLAM, kernels.Q_K))
    cc = c[s]
    return Fc + cc * cc + K - (hl + cc * vl) + lam * lam


def random_battery_draw(grid, rng, ku=2, kc=1, kh=1):
    """Random (u, lambda, c) with lambda = f + X(g) for random band-limited f, g."""
    u = grid.random_field(rng, K=ku, kh=kh)
    f = grid.random_field(rng, K=0, kh=kh, amp=0.5)
    g = grid.random_field(rng, K=0, kh=kh, amp=0.5)
    lam = f + g.X()
    c = grid.random_field(rng, K=kc, kh=kh, amp=0.5)
    return u, lam, c


__all__ = ["IdentityReport", "PremiseError", "pointwise_pestov", "integrated_pestov", "modified_pestov",
           "minus_theta_identity", "minus_theta_curvature_residual", "vertical_relation_residual",
           "vertical_ode_check", "riccati_integrand_along", "random_battery_draw", "TorusGrid"]
