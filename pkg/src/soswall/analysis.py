"""Observables of sampled surfaces and loop ensembles."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

STRICT_FRACTION = 0.9
RELAXED_FRACTION = 0.8


# --- height concentration -------------------------------------------------------------

@dataclass
class Concentration:
    fractions: dict              # height -> fraction of interior sites
    H: int
    strict: tuple                # (E_H, E_{H-1}) at 9/10
    relaxed: tuple               # same at the relaxed threshold
    coverage: float              # fraction at H or H-1
    dominant: int | None         # H or H-1, whichever holds more sites

    @property
    def holds_strict(self):
        return any(self.strict)

    @property
    def holds_relaxed(self):
        return any(self.relaxed)


def height_concentration(field, params, relaxed=RELAXED_FRACTION):
    """Fractions of sites at each height and the E_H / E_{H-1} indicators."""
    h = np.asarray(field.heights).ravel()
    vals, counts = np.unique(h, return_counts=True)
    n = h.size
    fr = {int(v): c / n for v, c in zip(vals, counts)}
    H = params.H
    fH, fH1 = fr.get(H, 0.0), fr.get(H - 1, 0.0)
    return Concentration(
        fractions=fr, H=H,
        strict=(fH >= STRICT_FRACTION, fH1 >= STRICT_FRACTION),
        relaxed=(fH >= relaxed, fH1 >= relaxed),
        coverage=fH + fH1,
        dominant=H if fH >= fH1 else H - 1,
    )


# --- Hausdorff distance ------------------------------------------------------------------

def densify(poly, step):
    """Insert points so consecutive samples are at most ``step`` apart."""
    p = np.asarray(poly, dtype=float)
    if len(p) < 2:
        return p
    seg = p[1:] - p[:-1]
    n = np.maximum(1, np.ceil(np.hypot(seg[:, 0], seg[:, 1]) / step).astype(int))
    t = np.concatenate([np.arange(k) / k for k in n])
    idx = np.repeat(np.arange(len(seg)), n)
    return np.vstack([p[idx] + t[:, None] * seg[idx], p[-1:]])


def _directed(P, Q, chunk=2048):
    """max over points of P of the distance to the polyline Q."""
    a, b = Q[:-1], Q[1:]
    if len(a) == 0:
        return float(np.max(np.hypot(*(P - Q[0]).T)))
    ab = b - a
    den = np.einsum("ij,ij->i", ab, ab)
    den = np.where(den > 0, den, 1.0)
    worst = 0.0
    for s in range(0, len(P), chunk):
        p = P[s:s + chunk, None, :]
        t = np.clip(np.einsum("pij,ij->pi", p - a[None], ab) / den, 0.0, 1.0)
        proj = a[None] + t[..., None] * ab[None]
        d = np.sqrt(((p - proj) ** 2).sum(-1)).min(axis=1)
        worst = max(worst, float(d.max()))
    return worst


def hausdorff(P, Q, step=None):
    """Symmetric Hausdorff distance between two polylines.

    Points of each polyline (densified to ``step`` if given) are measured
    against the segments of the other.
    """
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    if P.size == 0 or Q.size == 0:
        raise ValueError("empty polyline")
    P, Q = P.reshape(-1, 2), Q.reshape(-1, 2)
    if step is not None:
        P, Q = densify(P, step), densify(Q, step)
    return max(_directed(P, Q), _directed(Q, P))


def loop_hausdorff(loop, shape, L, samples_per_arc=256):
    """d_H between a lattice loop scaled by 1/L and a limit-shape boundary."""
    P = np.asarray(loop.vertices, dtype=float) / L
    Q = np.asarray(shape.boundary, dtype=float)
    Q = np.vstack([Q, Q[:1]])
    return hausdorff(P, Q, step=1.0 / (4 * samples_per_arc))


# --- flat-part fluctuations --------------------------------------------------------------

@dataclass
class FlatFluctuation:
    applicable: bool
    x: np.ndarray = field(default_factory=lambda: np.zeros(0))
    rho: np.ndarray = field(default_factory=lambda: np.zeros(0))
    sup: float = float("nan")
    skipped: int = 0
    window: int = 0
    window_sups: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def window_min(self):
        return float(self.window_sups.min()) if self.window_sups.size else float("nan")


def column_heights(poly, xs, cap):
    """max{y <= cap : (x, y) on the polyline} for each x (nan where none)."""
    p = np.asarray(poly, dtype=float)
    x0, y0, x1, y1 = p[:-1, 0], p[:-1, 1], p[1:, 0], p[1:, 1]
    out = np.full(len(xs), np.nan)
    for i, x in enumerate(xs):
        hit = (np.minimum(x0, x1) <= x) & (x <= np.maximum(x0, x1))
        if not hit.any():
            continue
        ax, ay, bx, by = x0[hit], y0[hit], x1[hit], y1[hit]
        vert = ax == bx
        cand = []
        if vert.any():
            lo = np.minimum(ay[vert], by[vert])
            hi = np.minimum(np.maximum(ay[vert], by[vert]), cap)
            cand.append(hi[lo <= cap])
        nv = ~vert
        if nv.any():
            t = (x - ax[nv]) / (bx[nv] - ax[nv])
            y = ay[nv] + t * (by[nv] - ay[nv])
            cand.append(y[y <= cap])
        c = np.concatenate(cand) if cand else np.zeros(0)
        if c.size:
            out[i] = c.max()
    return out


def flat_fluctuation(loop, L, epsilon, a_flat, window=None):
    """Height of the loop above the bottom side over I_eps = [a(1+eps)L, (1-a(1+eps))L].

    ``loop`` is a ContourLoop or an (n, 2) polyline in lattice units.  The
    local sups are taken over consecutive windows of length L^(2/3 - eps)
    unless ``window`` is given.
    """
    poly = getattr(loop, "vertices", loop)
    lo = a_flat * (1 + epsilon) * L
    hi = (1 - a_flat * (1 + epsilon)) * L
    # round away float noise such as 0.2 * 1.1 * 100 = 22.000000000000004
    xs = np.arange(math.ceil(round(lo, 9)), math.floor(round(hi, 9)) + 1)
    if xs.size == 0:
        return FlatFluctuation(False)
    rho = column_heights(poly, xs, L / 2)
    ok = ~np.isnan(rho)
    if not ok.any():
        return FlatFluctuation(False, skipped=int(xs.size))
    xs, rho = xs[ok], rho[ok]
    w = max(1, int(window if window is not None else L ** (2 / 3 - epsilon)))
    sups = np.array([rho[i:i + w].max() for i in range(0, len(rho), w)])
    return FlatFluctuation(True, xs, rho, float(rho.max()), int((~ok).sum()), w, sups)


# --- regression ----------------------------------------------------------------------------

@dataclass
class Regression:
    slope: float
    intercept: float
    stderr: float
    residuals: np.ndarray


def exponent_regression(L, stat, weights=None):
    """Weighted least squares of log(stat) on log(L)."""
    L = np.asarray(L, dtype=float)
    y = np.asarray(stat, dtype=float)
    if L.size < 3 or L.size != y.size:
        raise ValueError("need at least 3 (L, statistic) pairs")
    if (L <= 0).any() or (y <= 0).any():
        raise ValueError("log-log fit needs positive data")
    w = np.ones_like(L) if weights is None else np.asarray(weights, dtype=float)
    X = np.column_stack([np.ones_like(L), np.log(L)])
    ly = np.log(y)
    sw = np.sqrt(w)
    coef, *_ = np.linalg.lstsq(X * sw[:, None], ly * sw, rcond=None)
    res = ly - X @ coef
    dof = L.size - 2
    s2 = float(np.sum(w * res**2) / dof) if dof > 0 else 0.0
    cov = s2 * np.linalg.inv(X.T @ (w[:, None] * X))
    return Regression(float(coef[1]), float(coef[0]), float(math.sqrt(max(cov[1, 1], 0.0))), res)


def cascade_target(n, H):
    """Predicted fluctuation exponent (1 - t)/3 of level H - n, t = n / H."""
    return (1.0 - n / H) / 3.0


# --- maxima --------------------------------------------------------------------------------

@dataclass
class MaximaReport:
    beta: float
    L: int
    floor_mean: float
    floor_ci: float
    free_mean: float
    free_ci: float
    floor_center: float
    free_center: float
    window: float

    @property
    def floor_ok(self):
        return abs(self.floor_mean - self.floor_center) <= self.window

    @property
    def free_ok(self):
        return abs(self.free_mean - self.free_center) <= self.window

    @property
    def dominates(self):
        """Floor maxima exceed floorless maxima with separated CIs."""
        return self.floor_mean - self.floor_ci > self.free_mean + self.free_ci


def _mean_ci(x, level=0.95):
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        return float(x.mean()), float("inf")
    q = stats.t.ppf(0.5 + level / 2, x.size - 1)
    return float(x.mean()), float(q * x.std(ddof=1) / math.sqrt(x.size))


def maxima_report(runs_with_floor, runs_without_floor, params, window=3.0):
    """Mean maxima against (3 / 4beta) log L with a floor and (1 / 2beta) log L without.

    Runs are fields or plain maxima.
    """
    def maxima(runs):
        return [int(np.max(r.heights)) if hasattr(r, "heights") else int(r) for r in runs]

    fm, fc = _mean_ci(maxima(runs_with_floor))
    nm, nc = _mean_ci(maxima(runs_without_floor))
    lg = math.log(params.L)
    return MaximaReport(params.beta, params.L, fm, fc, nm, nc,
                        3 * lg / (4 * params.beta), lg / (2 * params.beta), window)
