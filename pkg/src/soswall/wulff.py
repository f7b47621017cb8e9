"""Wulff body, shape constants, constrained limit shapes and the curvature lemma.

Conventions: ``model`` is a SurfaceTensionModel; angles are normal angles of
the boundary.  The unscaled Wulff body has boundary p(t) = tau n + tau' t_hat
and radius of curvature tau + tau''.  ``WulffShape`` stores the body rescaled to
unit area.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .tension import QUARTER, SurfaceTensionModel

SQRT2 = np.sqrt(2.0)


def _panel_rule(a, b, panels=64, order=64):
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, panels + 1)
    lo, hi = edges[:-1, None], edges[1:, None]
    nodes = (0.5 * (hi - lo) * (x + 1) + lo).ravel()
    weights = (0.5 * (hi - lo) * w).ravel()
    return nodes, weights


def support_point(model, theta):
    """Unscaled Wulff boundary point with outer normal angle theta."""
    theta = np.asarray(theta, dtype=float)
    tau, dtau = model.tau(theta), model.dtau(theta)
    c, s = np.cos(theta), np.sin(theta)
    return np.stack([tau * c - dtau * s, tau * s + dtau * c], axis=-1)


def wulff_functional_unscaled(model):
    """W(boundary of the unscaled Wulff body) = integral of tau (tau + tau'').

    Faceted models get the facet contribution tau(0) * jump of tau' at 0.
    """
    t, w = _panel_rule(0.0, QUARTER)
    total = np.sum(w * model.tau(t) * model.curvature(t))
    if model.faceted:
        total += float(model.tau(0.0)[0]) * model.facet_slope
    return 8.0 * total


def octant_angles(n):
    """Normal angles on [0, pi/4], clustered near 0 where curvature peaks."""
    u = np.linspace(0.0, 1.0, n + 1)
    return QUARTER * (0.5 * u + 0.5 * u**2)


def unfold_octant(pts):
    """Complete a boundary from its normal-angle octant [0, pi/4].

    ``pts`` runs from the point on the positive x axis to the diagonal point.
    Returns a closed counter-clockwise loop (first point repeated).
    """
    quarter = np.vstack([pts, pts[-2::-1, ::-1]])
    loops = [quarter]
    rot = np.array([[0.0, -1.0], [1.0, 0.0]])
    for _ in range(3):
        loops.append(loops[-1][1:] @ rot.T)
    out = np.vstack(loops)
    return out


def polygon_area(poly):
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)


@dataclass
class WulffShape:
    model: SurfaceTensionModel
    scale: float
    w1: float
    ell_tau: float
    y_diag: float
    boundary: np.ndarray
    tau0: float
    _arcs: dict = field(default_factory=dict, repr=False, compare=False)

    def quarter_arcs(self, n):
        """Boundary points of the four normal-angle quadrants, n per quadrant (cached)."""
        if n not in self._arcs:
            self._arcs[n] = [self.point(np.linspace(q * np.pi / 2, (q + 1) * np.pi / 2, n)) for q in range(4)]
        return self._arcs[n]

    def radius_of_curvature(self, theta):
        return self.scale * self.model.curvature(theta)

    def point(self, theta):
        out = self.scale * support_point(self.model, theta)
        return out.reshape(2) if np.ndim(theta) == 0 else out

    def arc(self, theta0, theta1, n):
        """Scaled boundary points for normal angles in [theta0, theta1]."""
        return self.point(np.linspace(theta0, theta1, n))


def wulff_unit(model, n_octant=4096):
    """Unit-area Wulff body of ``model``."""
    if not model.is_convex():
        raise ValueError("surface tension is not strictly convex")
    big_w = wulff_functional_unscaled(model)
    scale = np.sqrt(2.0 / big_w)
    w1 = np.sqrt(2.0 * big_w)
    t = octant_angles(n_octant)
    pts = support_point(model, t)
    pts = np.vstack([[model.tau(0.0)[0], 0.0], pts]) if model.faceted else pts
    boundary = scale * unfold_octant(pts)
    tau0 = float(model.tau(0.0)[0])
    ell_tau = 2.0 * float(boundary[:, 0].max())
    y_diag = scale * float(model.tau(QUARTER)[0])
    return WulffShape(model, scale, w1, ell_tau, y_diag, boundary, tau0)


def boundary_functional(poly, model):
    """Polygonal Wulff functional: sum of edge length times tau(edge normal)."""
    e = np.diff(poly, axis=0, append=poly[:1]) if not np.allclose(poly[0], poly[-1]) else np.diff(poly, axis=0)
    length = np.hypot(e[:, 0], e[:, 1])
    keep = length > 0
    normal = np.arctan2(-e[keep, 0], e[keep, 1])
    return float(np.sum(length[keep] * model.tau(normal)))


# --- shape constants -------------------------------------------------------------

@dataclass
class ShapeConstants:
    beta: float
    lambda_hat: float
    lambda_c: float
    w1: float
    ell_tau: float
    tau0: float
    lambda_c_numeric: float = float("nan")

    def ell_c(self, lam):
        return self.beta * self.w1 / (2.0 * lam)


def shape_constants(beta, wulff, numeric=True):
    lam_hat = 2.0 * beta * wulff.tau0
    lam_c = lam_hat + beta * wulff.w1 / 2.0
    sc = ShapeConstants(beta, lam_hat, lam_c, wulff.w1, wulff.ell_tau, wulff.tau0)
    if numeric:
        sc.lambda_c_numeric = critical_lambda_bisect(beta, wulff)
    return sc


def critical_lambda_bisect(beta, wulff, arc_points=1024):
    """Root of lambda -> F_lambda(L_c(lambda)) from polygonal shapes."""

    def f(lam):
        shape = limit_shape(lam, 1.0, 0.0, wulff, beta=beta, arc_points=arc_points)
        return functional_F(shape.boundary, lam, wulff.model, beta, check=False)

    lo = 2.0 * beta * wulff.tau0
    hi = 2.0 * lo + beta * wulff.w1
    while f(hi) <= 0:
        hi *= 2.0
    return brentq(f, lo, hi, xtol=1e-13, rtol=1e-13)


# --- limit shapes ------------------------------------------------------------------

@dataclass
class LimitShape:
    lam: float
    t: float
    r: float
    radius: float
    a: float
    boundary: np.ndarray

    def closed_area(self, ell_tau):
        """Area from the mixed-area formula, before dilation."""
        rho = self.radius
        return (1.0 - rho**2 * ell_tau**2 + rho**2) * (1 + self.r) ** 2


def limit_shape(lam, t, r, wulff, beta=None, arc_points=256):
    """Union of translates of t * ell_c(lambda) * W1 inside the unit square.

    Built as the Minkowski sum of the square [a, 1-a]^2 with the scaled body,
    then dilated by (1 + r) about the centre.  ``beta`` defaults to the one
    recorded on the tension model.
    """
    if beta is None:
        beta = getattr(wulff.model, "beta", None)
        if beta is None:
            raise ValueError("beta is required for a table tension model")
    if lam <= 0 or not -1 < r < 1 or t <= 0:
        raise ValueError("need lambda > 0, t > 0 and r in (-1, 1)")
    rho = t * beta * wulff.w1 / (2.0 * lam)
    span = rho * wulff.ell_tau
    if span > 1 + 1e-12:
        raise ValueError("shape undefined: scaled Wulff body does not fit in the square")
    a = span / 2.0
    corners = [(1 - a, 1 - a), (a, 1 - a), (a, a), (1 - a, a)]
    pieces = []
    for c, arc in zip(corners, wulff.quarter_arcs(arc_points)):
        pieces.append(np.asarray(c) + rho * arc)
    poly = np.vstack(pieces)
    poly = 0.5 + (1.0 + r) * (poly - 0.5)
    return LimitShape(lam, t, r, rho, a, poly)


def functional_F(curve, lam, model, beta, check=True):
    """-beta * W(curve) + lam * area(curve) for a closed polyline."""
    curve = np.asarray(curve, dtype=float)
    if curve.ndim != 2 or curve.shape[1] != 2:
        raise ValueError("curve must be an (n, 2) array")
    if len(curve) < 3:
        return 0.0
    if check and _self_intersects(curve):
        raise ValueError("curve is self-intersecting")
    area = polygon_area(curve)
    if area < 0:
        raise ValueError("curve must be positively oriented")
    return -beta * boundary_functional(curve, model) + lam * area


def _self_intersects(poly):
    """Sweep-free check; only used on modest polylines."""
    p = poly if not np.allclose(poly[0], poly[-1]) else poly[:-1]
    n = len(p)
    if n < 4:
        return False
    a, b = p, np.roll(p, -1, axis=0)
    # cheap reject by bounding boxes, then exact orientation tests
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    for i in range(n):
        cand = np.nonzero(
            (lo[:, 0] <= hi[i, 0]) & (hi[:, 0] >= lo[i, 0])
            & (lo[:, 1] <= hi[i, 1]) & (hi[:, 1] >= lo[i, 1])
        )[0]
        cand = cand[(cand > i + 1) & ~((i == 0) & (cand == n - 1))]
        if len(cand) == 0:
            continue
        p1, p2 = a[i], b[i]
        q1, q2 = a[cand], b[cand]
        d1 = _orient(p1, p2, q1)
        d2 = _orient(p1, p2, q2)
        d3 = _orient(q1, q2, p1)
        d4 = _orient(q1, q2, p2)
        tol = 1e-9 * np.max(np.abs(hi - lo)) ** 2
        if np.any((d1 * d2 < -tol) & (d3 * d4 < -tol)):
            return True
    return False


def _orient(p, q, r):
    p, q, r = np.broadcast_arrays(np.atleast_2d(p), np.atleast_2d(q), np.atleast_2d(r))
    return (q[:, 0] - p[:, 0]) * (r[:, 1] - p[:, 1]) - (q[:, 1] - p[:, 1]) * (r[:, 0] - p[:, 0])


def closed_form_functional(lam, beta, wulff, t=1.0):
    """Area, W and F of L(lam, t, 0) in closed form."""
    rho = t * beta * wulff.w1 / (2.0 * lam)
    area = 1.0 - rho**2 * wulff.ell_tau**2 + rho**2
    w = 4.0 * wulff.tau0 * (1.0 - rho * wulff.ell_tau) + rho * wulff.w1
    return area, w, -beta * w + lam * area


# --- curvature lemma and enlargement ---------------------------------------------------

@dataclass
class SagResult:
    formula: float
    numeric: float

    @property
    def rel_error(self):
        return abs(self.numeric - self.formula) / abs(self.formula)


def chord_sag(wulff, d, theta):
    """Vertical sag of a chord of length d, direction theta, under the Wulff arc."""
    theta = float(theta)
    if not -QUARTER - 1e-12 <= theta <= QUARTER + 1e-12:
        raise ValueError("theta must lie in [-pi/4, pi/4]")
    model = wulff.model
    curv = float(model.curvature(theta)[0])
    formula = wulff.w1 * d**2 / (16.0 * curv * np.cos(theta))

    phi0 = theta + np.pi / 2
    n0 = np.array([np.cos(phi0), np.sin(phi0)])
    top = float(wulff.point(phi0) @ n0)
    height = lambda phi: float(wulff.point(phi) @ n0)
    # search window in normal angle: a generous multiple of d / radius
    rad = wulff.scale * curv
    span = min(np.pi / 2, 4.0 * d / max(rad, 1e-12))

    def chord(delta):
        f = lambda phi: height(phi) - (top - delta)
        lo = brentq(f, phi0 - span, phi0, xtol=1e-15)
        hi = brentq(f, phi0, phi0 + span, xtol=1e-15)
        return wulff.point(lo), wulff.point(hi)

    def excess(delta):
        p, q = chord(delta)
        return float(np.hypot(*(q - p))) - d

    dmax = height(phi0 - span) - top
    dmax = top - max(height(phi0 - span), height(phi0 + span))
    if excess(dmax) < 0:
        raise ValueError("chord does not fit")
    delta = brentq(excess, 0.0, dmax, xtol=1e-16, rtol=1e-14)
    p, q = chord(delta)
    mid = 0.5 * (p + q)
    # boundary point straight above the midpoint
    fx = lambda phi: float(wulff.point(phi)[0]) - mid[0]
    phi_up = brentq(fx, phi0 + span, phi0 - span, xtol=1e-15) if fx(phi0 + span) * fx(phi0 - span) < 0 else None
    if phi_up is None:
        raise ValueError("chord does not fit")
    numeric = float(wulff.point(phi_up)[1]) - mid[1]
    return SagResult(formula, numeric)


@dataclass
class Enlargement:
    r: np.ndarray
    limit: float
    rate: float


def enlarge_sequence(wulff, lam, ell, k_max, beta=None):
    """Iterate r_{k+1} = a r_k + (ell / sqrt 2) y from r_0 = 1/2."""
    if beta is None:
        beta = getattr(wulff.model, "beta", None)
    ell_c = beta * wulff.w1 / (2.0 * lam) if beta is not None else -np.inf
    if not ell_c < ell < 1.0 / wulff.ell_tau + 1e-15:
        raise ValueError("ell outside (ell_c(lambda), 1/ell_tau)")
    y = wulff.y_diag
    a = 1.0 - SQRT2 * y / wulff.ell_tau
    a = 0.0 if abs(a) < 1e-14 else a
    r = np.empty(k_max + 1)
    r[0] = 0.5
    for k in range(k_max):
        r[k + 1] = r[k] * a + ell / SQRT2 * y
    return Enlargement(r, ell * wulff.ell_tau / 2.0, a)
