"""Anisotropic surface tension models.

All models expose ``tau``, ``dtau`` and ``d2tau`` as vectorised functions of the
normal angle.  They are even and pi/2-periodic, so every evaluation is reduced
to the octant [0, pi/4] first.

The directed-walk model treats a level line of angle theta as a walk that
takes one horizontal bond per column plus ``|xi|`` vertical bonds, with weight
``exp(-beta * (1 + |xi|))``.  Its free energy per column is the Legendre
transform ``I`` of ``Lambda(s) = -beta + log sum_xi exp(-beta|xi| + s xi)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

QUARTER = np.pi / 4
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(48)


def reduce_angle(theta):
    """Map angles to the octant [0, pi/4].

    Returns the reduced angle and the sign picked up by odd derivatives.
    """
    t = np.mod(np.asarray(theta, dtype=float), np.pi / 2)
    flip = t > QUARTER
    t = np.where(flip, np.pi / 2 - t, t)
    return t, np.where(flip, -1.0, 1.0)


# --- directed walk -----------------------------------------------------------

def step_partition(s, beta, third=False):
    """Return Z(s), Z'(s), Z''(s) (and Z''' if asked) for the single-column step sum.

    ``Z(s) = sum_xi exp(-beta|xi| + s xi)`` in closed form; needs |s| < beta.
    """
    s = np.asarray(s, dtype=float)
    a = np.exp(-(beta - s))
    c = np.exp(-(beta + s))
    oma = -np.expm1(-(beta - s))
    omc = -np.expm1(-(beta + s))
    z = 1.0 + a / oma + c / omc
    z1 = a / oma**2 - c / omc**2
    z2 = a * (1 + a) / oma**3 + c * (1 + c) / omc**3
    if not third:
        return z, z1, z2
    z3 = a * (1 + 4 * a + a * a) / oma**4 - c * (1 + 4 * c + c * c) / omc**4
    return z, z1, z2, z3


def log_mgf(s, beta):
    """Lambda(s) = -beta + log Z(s)."""
    z, _, _ = step_partition(s, beta)
    return -beta + np.log(z)


def step_variance(beta, s=0.0):
    """Lambda''(s): variance of one column step under tilt ``s``."""
    z, z1, z2 = step_partition(s, beta)
    return z2 / z - (z1 / z) ** 2


def solve_tilt(u, beta):
    """Solve Lambda'(s) = u for s in (-beta, beta), vectorised.

    With a = exp(s - beta) and c = exp(-s - beta), so that a c = q = exp(-2 beta),
    the equation reduces to a - c = u (1 - a)(1 - c), i.e. the quadratic
    (1 + u) a^2 - u (1 + q) a - q (1 - u) = 0.  Solved for |u| and mirrored.
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    v = np.abs(u)
    q = np.exp(-2.0 * beta)
    disc = (v * (1 + q)) ** 2 + 4.0 * q * (1 + v) * (1 - v)
    a = (v * (1 + q) + np.sqrt(disc)) / (2.0 * (1 + v))
    return np.sign(u) * (beta + np.log(a))


def solve_tilt_newton(u, beta, tol=1e-14, max_iter=400):
    """Safeguarded Newton for Lambda'(s) = u; independent cross-check."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    lo = np.full_like(u, -beta)
    hi = np.full_like(u, beta)
    s = np.zeros_like(u)
    for _ in range(max_iter):
        z, z1, z2 = step_partition(s, beta)
        g = z1 / z - u
        d = z2 / z - (z1 / z) ** 2
        lo = np.where(g < 0, s, lo)
        hi = np.where(g > 0, s, hi)
        s_new = s - g / d
        bad = ~((s_new > lo) & (s_new < hi))
        s_new = np.where(bad, 0.5 * (lo + hi), s_new)
        done = np.abs(s_new - s) <= tol * max(1.0, beta)
        s = s_new
        if np.all(done):
            break
    return s


def rate_function(u, beta):
    """Legendre transform I(u) = sup_s (s u - Lambda(s)); also returns s*."""
    s = solve_tilt(u, beta)
    return s * u - log_mgf(s, beta), s


def directed_walk_parts(theta, beta):
    """tau, tau', tau + tau'' of the raw directed walk on [0, pi/4].

    Uses the Legendre identities I'(u) = s*, I''(u) = 1 / Lambda''(s*), which
    give (tau + tau'')(theta) = 1 / (beta Lambda''(s*) cos^3 theta).
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    u = np.tan(theta)
    rate, s = rate_function(u, beta)
    c = np.cos(theta)
    tau = c * rate / beta
    dtau = (-np.sin(theta) * rate + s / c) / beta
    curv = 1.0 / (beta * step_variance(beta, s) * c**3)
    return tau, dtau, curv


def directed_walk_curvature_slope(theta, beta):
    """d/dtheta of (tau + tau'') for the raw directed walk."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    s = solve_tilt(np.tan(theta), beta)
    z, z1, z2, z3 = step_partition(s, beta, third=True)
    m1, m2, m3 = z1 / z, z2 / z, z3 / z
    var = m2 - m1**2
    skew = m3 - 3 * m2 * m1 + 2 * m1**3
    c = np.cos(theta)
    curv = 1.0 / (beta * var * c**3)
    ds = 1.0 / (var * c**2)
    return curv * (-skew / var * ds + 3 * np.tan(theta))


def legendre_numeric(u, beta):
    """Brute-force Legendre transform by bounded scalar maximisation.

    Independent of the Newton solve; used as a cross-check.
    """
    from scipy.optimize import minimize_scalar

    res = minimize_scalar(
        lambda s: -(s * u - float(log_mgf(s, beta))),
        bounds=(-beta + 1e-12, beta - 1e-12),
        method="bounded",
        options={"xatol": 1e-13},
    )
    return -res.fun


# --- models --------------------------------------------------------------------

@dataclass
class SurfaceTensionModel:
    """Base class; subclasses implement the octant functions ``_parts``.

    ``_parts(t)`` returns (tau, tau', tau + tau'') for t in [0, pi/4].
    """

    provenance: str = "abstract"
    faceted: bool = False
    meta: dict = field(default_factory=dict)

    def _parts(self, t):
        raise NotImplementedError

    def tau(self, theta):
        t, _ = reduce_angle(theta)
        return self._parts(t)[0]

    def dtau(self, theta):
        t, sgn = reduce_angle(theta)
        return sgn * self._parts(t)[1]

    def curvature(self, theta):
        """tau + tau'' (radius of curvature of the unscaled Wulff body)."""
        t, _ = reduce_angle(theta)
        return self._parts(t)[2]

    def d2tau(self, theta):
        t, _ = reduce_angle(theta)
        tau, _, curv = self._parts(t)
        return curv - tau

    def is_convex(self, n=4096):
        if self.faceted:
            return True
        t = np.linspace(0.0, QUARTER, n + 1)
        return bool(np.all(self._parts(t)[2] > 0))


@dataclass
class DirectedWalkTension(SurfaceTensionModel):
    """Directed-walk surface tension, symmetrised about pi/4.

    The raw walk is slightly asymmetric under theta -> pi/2 - theta: tau' and
    the slope of tau + tau'' do not vanish at pi/4, so a plain mirror image has
    a concave kink there.  We reweight the curvature by
    ``exp(-eps * sin(2t)^4 - eps2 * sin(2t)^4 cos(2t))``.  ``eps2`` cancels the
    curvature slope at pi/4 and ``eps`` is fitted so that tau'(pi/4) = 0; the
    mirrored function is then C^3.  Both weights vanish to fourth order at
    t = 0, so tau(0) and (tau + tau'')(0) are the raw walk values.
    """

    beta: float = 2.0
    eps: float = 0.0
    eps2: float = 0.0
    cheb_degree: int = 96

    def __post_init__(self):
        if not np.isfinite(self.beta) or self.beta <= 0:
            raise ValueError("beta must be positive and finite")
        self.provenance = f"directed-walk(beta={self.beta:g})"
        k45 = float(self.raw(QUARTER)[2][0])
        dk45 = float(directed_walk_curvature_slope(QUARTER, self.beta)[0])
        # d/dt [sin^4(2t) cos(2t)] = -2 at pi/4, the first weight is flat there
        self.eps2 = -dk45 / (2.0 * k45)
        self.eps = self._fit_eps()
        self.meta["symmetry_eps"] = (self.eps, self.eps2)
        # delta and delta' are analytic on the octant; interpolate them once
        cheb = np.polynomial.chebyshev.Chebyshev
        k = np.arange(self.cheb_degree + 1)
        nodes = QUARTER * 0.5 * (1 - np.cos(np.pi * (k + 0.5) / (self.cheb_degree + 1)))
        delta, ddelta = self._correction(nodes, self.eps)
        dom = [0.0, QUARTER]
        self._delta = cheb.fit(nodes, delta, self.cheb_degree, domain=dom)
        self._ddelta = cheb.fit(nodes, ddelta, self.cheb_degree, domain=dom)

    def _exponent(self, t, eps):
        s4 = np.sin(2 * t) ** 4
        return eps * s4 + self.eps2 * s4 * np.cos(2 * t)

    def raw(self, theta):
        """Unweighted (tau, tau', tau + tau'') on [0, pi/4]."""
        return directed_walk_parts(theta, self.beta)

    def _correction(self, t, eps):
        """delta, delta' such that tau_raw - delta has the reweighted curvature."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        half = 0.5 * t[:, None]
        phi = half * (_GL_NODES[None, :] + 1.0)
        w = half * _GL_WEIGHTS[None, :]
        curv = directed_walk_parts(phi.ravel(), self.beta)[2].reshape(phi.shape)
        dk = curv * (-np.expm1(-self._exponent(phi, eps)))
        arg = t[:, None] - phi
        delta = np.sum(w * np.sin(arg) * dk, axis=1)
        ddelta = np.sum(w * np.cos(arg) * dk, axis=1)
        return delta, ddelta

    def _fit_eps(self):
        slope = float(self.raw(QUARTER)[1][0])
        f = lambda e: float(self._correction(QUARTER, e)[1][0]) - slope
        lo, hi = -1.0, 1.0
        while np.sign(f(lo)) == np.sign(f(hi)):
            lo, hi = 2 * lo, 2 * hi
            if hi > 1e4:
                raise ValueError("cannot symmetrise directed-walk tension")
        return brentq(f, lo, hi, xtol=1e-15, rtol=1e-14)

    def _parts(self, t):
        t = np.atleast_1d(t)
        tau, dtau, curv = self.raw(t)
        delta, ddelta = self._delta(t), self._ddelta(t)
        damped = curv * np.exp(-self._exponent(t, self.eps))
        return tau - delta, dtau - ddelta, damped


def tau_directed_walk(beta, angle_grid=None):
    """Build the directed-walk model; optionally tabulate it on ``angle_grid``.

    Returns the model, or ``(model, table)`` when a grid is given, where the
    table has columns theta, tau, tau', tau''.
    """
    if beta < 1:
        raise ValueError("directed-walk tension requires beta >= 1")
    model = DirectedWalkTension(beta=float(beta))
    if angle_grid is None:
        return model
    g = np.asarray(angle_grid, dtype=float)
    return model, np.column_stack([g, model.tau(g), model.dtau(g), model.d2tau(g)])


class SquareLimitTension(SurfaceTensionModel):
    """tau(theta) = |cos theta| + |sin theta|, the beta -> infinity limit."""

    def __init__(self):
        super().__init__(provenance="square-limit", faceted=True)

    facet_slope = 1.0  # tau'(0+); tau' jumps by 2 across each facet normal

    def _parts(self, t):
        t = np.atleast_1d(t)
        tau = np.cos(t) + np.sin(t)
        dtau = np.where(t == 0, 0.0, np.cos(t) - np.sin(t))
        return tau, dtau, np.zeros_like(t)


class TableTension(SurfaceTensionModel):
    """User-supplied tau values on [0, pi/4], interpolated by a periodic spline.

    The table is unfolded to the full circle with the lattice symmetries first,
    so the spline derivatives respect evenness at 0 and pi/4.
    """

    def __init__(self, angles, values, provenance="user-table"):
        super().__init__(provenance=provenance)
        a = np.asarray(angles, dtype=float)
        v = np.asarray(values, dtype=float)
        if a.ndim != 1 or a.shape != v.shape or len(a) < 4:
            raise ValueError("need matching 1-d angle/value arrays (>= 4 points)")
        if a[0] != 0.0 or not np.isclose(a[-1], QUARTER) or np.any(np.diff(a) <= 0):
            raise ValueError("table angles must increase from 0 to pi/4")
        if np.any(v <= 0):
            raise ValueError("surface tension must be positive")
        quarter = np.concatenate([a, np.pi / 2 - a[-2::-1]])
        qv = np.concatenate([v, v[-2::-1]])
        full = np.concatenate([quarter[:-1] + k * np.pi / 2 for k in range(4)] + [[2 * np.pi]])
        fv = np.concatenate([qv[:-1]] * 4 + [[v[0]]])
        self._spline = CubicSpline(full, fv, bc_type="periodic")

    def _parts(self, t):
        t = np.atleast_1d(t)
        tau = self._spline(t)
        return tau, self._spline(t, 1), tau + self._spline(t, 2)


def tension_from_table_file(path):
    """Read a two-column (angle, tau) text table."""
    data = np.loadtxt(path, delimiter=None, comments="#", ndmin=2)
    return TableTension(data[:, 0], data[:, 1], provenance=f"user-table({path})")
