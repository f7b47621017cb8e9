"""Local shape of an area-tilted open contour between two points A and B.

A = (x_A, a) and B = (x_B, b) with the chord at angle theta in [0, pi/4].
The contour height over x is close to a Gaussian with mean Y(x) (chord plus a
parabolic bulge) and Brownian-bridge variance sigma^2(x).  ``free_energy_G``
is the value of  -beta * integral(tau ds) + (mu / L) * area  at the optimal
parabola, where the area is measured from the chord.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def _chord(a, b, x_A, x_B):
    d = x_B - x_A
    if not d > 0:
        raise ValueError("need x_B > x_A")
    theta = math.atan2(b - a, d)
    if not -1e-12 <= theta <= math.pi / 4 + 1e-12:
        raise ValueError("chord angle must lie in [0, pi/4]")
    return d, theta, math.hypot(d, b - a)


def stiffness(model, theta):
    """tau + tau'' at theta (scalar)."""
    return float(np.atleast_1d(model.curvature(theta))[0])


def local_profile(mu, a, b, x_A, x_B, x, beta, L, model, strict=True):
    """Predicted mean height Y(x) and standard deviation sigma(x).

    With ``strict`` the point must be at least d/10 from both endpoints.
    """
    d, theta, _ = _chord(a, b, x_A, x_B)
    if not x_A <= x <= x_B:
        raise ValueError("x outside [x_A, x_B]")
    if strict and min(x - x_A, x_B - x) < d / 10:
        raise ValueError("x closer than d/10 to an endpoint")
    kc = stiffness(model, theta) * math.cos(theta) ** 3
    gap = (x - x_A) * (x_B - x)
    y = a + (b - a) * (x - x_A) / d + mu * gap / (2 * beta * L * kc)
    var = gap / (beta * d * kc)
    return y, math.sqrt(var)


def free_energy_G(mu, ell, theta, beta, L, model):
    tau = float(np.atleast_1d(model.tau(theta))[0])
    return -beta * tau * ell + mu**2 * ell**3 / (24 * beta * stiffness(model, theta) * L**2)


@dataclass
class Parabola:
    x: np.ndarray
    y: np.ndarray
    coefficient: float      # bulge = coefficient * (x - x_A)(x_B - x)
    chord: np.ndarray       # straight segment heights


def optimal_curve(mu, A, B, beta, L, model, n=2049):
    """Segment AB plus the quadratic bulge mu l^3 / (2 beta L (tau+tau'') d^3) (x-x_A)(x_B-x)."""
    (x_A, a), (x_B, b) = A, B
    d, theta, ell = _chord(a, b, x_A, x_B)
    coef = mu * ell**3 / (2 * beta * L * stiffness(model, theta) * d**3)
    x = np.linspace(x_A, x_B, n)
    chord = a + (b - a) * (x - x_A) / d
    return Parabola(x, chord + coef * (x - x_A) * (x_B - x), coef, chord)


def path_functional(x, y, chord, mu, beta, L, model):
    """-beta * sum tau(segment angle) * length + (mu/L) * area between path and chord."""
    dx, dy = np.diff(x), np.diff(y)
    seg = np.hypot(dx, dy)
    ang = np.arctan2(dy, dx)
    wulff = float(np.sum(model.tau(ang) * seg))
    h = y - chord
    area = float(np.sum(0.5 * (h[1:] + h[:-1]) * dx))
    return -beta * wulff + mu / L * area
