"""Exact area-tilted random bridge by transfer matrices.

Columns k = 0..d carry heights y_k with y_0 = a and y_d = b.  A path has weight

    prod_k exp(-beta (1 + |y_k - y_{k-1}|)) * exp(tilt * sum_{k<d} y_k)

(tilt = mu / L, area as a left Riemann sum).  Heights live in a window
[lo, lo + m); with ``wall`` the window starts at 0 and is a hard constraint,
otherwise it is a truncation that is widened until the mass on its edges is
negligible.  The step kernel is two-sided geometric, so each transfer step is
two linear passes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba as nb
import numpy as np

from .rng import stream_key, uniform_at

EDGE_MASS = 1e-10
MAX_WINDOW = 1 << 16


@nb.njit(cache=True)
def _geo_conv(f, q, out):
    """out[y] = sum_y' f[y'] q^|y - y'|."""
    m = len(f)
    acc = 0.0
    for y in range(m):
        acc = f[y] + q * acc
        out[y] = acc
    acc = 0.0
    for y in range(m - 1, -1, -1):
        out[y] += acc * q
        acc = f[y] + q * acc


@nb.njit(cache=True)
def _tables(d, m, ia, ib, q, tiltw):
    """Scaled forward/backward tables and log-scales.

    fwd[k] ~ weight of paths 0..k ending at each height (tilt of y_0..y_{k-1});
    bwd[k] ~ weight of paths k..d started at each height (tilt of y_k..y_{d-1});
    conv[k] = geometric convolution of bwd[k], the sampling normaliser.
    """
    fwd = np.zeros((d + 1, m))
    bwd = np.zeros((d + 1, m))
    conv = np.zeros((d + 1, m))
    lf = np.zeros(d + 1)
    lb = np.zeros(d + 1)
    fwd[0, ia] = 1.0
    tmp = np.empty(m)
    for k in range(1, d + 1):
        for y in range(m):
            tmp[y] = fwd[k - 1, y] * tiltw[y]
        _geo_conv(tmp, q, fwd[k])
        s = fwd[k].max()
        fwd[k] /= s
        lf[k] = lf[k - 1] + math.log(s)
    bwd[d, ib] = 1.0
    for k in range(d, 0, -1):
        _geo_conv(bwd[k], q, conv[k])
        for y in range(m):
            bwd[k - 1, y] = conv[k, y] * tiltw[y]
        s = bwd[k - 1].max()
        bwd[k - 1] /= s
        lb[k - 1] = lb[k] + math.log(s)
    return fwd, bwd, conv, lf, lb


@nb.njit(cache=True)
def _sample_paths(n_paths, d, ia, bwd, conv, q, seed, first):
    """Paths from the exact conditionals P(y_k | y_{k-1}) ~ q^|step| bwd[k].

    Each draw inverts the CDF over heights ordered y0, y0+1, y0-1, y0+2, ...,
    which takes O(1) steps on average.
    """
    m = bwd.shape[1]
    out = np.empty((n_paths, d + 1), dtype=np.int32)
    for p in range(n_paths):
        key = stream_key(seed, first + p)
        y0 = ia
        out[p, 0] = y0
        for k in range(1, d + 1):
            t = uniform_at(key, k) * conv[k, y0]
            acc = bwd[k, y0]
            y = y0
            r = 1
            w = q
            while acc < t:
                hit = False
                if y0 + r < m:
                    acc += w * bwd[k, y0 + r]
                    y = y0 + r
                    hit = True
                    if acc >= t:
                        break
                if y0 - r >= 0:
                    acc += w * bwd[k, y0 - r]
                    y = y0 - r
                    hit = True
                if not hit:
                    break
                r += 1
                w *= q
            out[p, k] = y
            y0 = y
    return out


@dataclass
class TiltedBridgeModel:
    beta: float
    tilt: float          # mu / L
    d: int
    a: int
    b: int
    lo: int              # height of window index 0
    m: int               # window size
    wall: bool
    fwd: np.ndarray
    bwd: np.ndarray
    conv: np.ndarray
    log_z: float
    edge_mass: float

    @property
    def heights(self):
        return np.arange(self.lo, self.lo + self.m)

    def marginals(self):
        p = self.fwd * self.bwd
        return p / p.sum(axis=1, keepdims=True)

    def sample(self, n_paths, seed=0, first=0):
        """Heights of ``n_paths`` exact samples, shape (n_paths, d + 1)."""
        paths = _sample_paths(n_paths, self.d, self.a - self.lo, self.bwd, self.conv,
                              math.exp(-self.beta), np.uint64(seed), first)
        return paths + self.lo


def _build(beta, tilt, d, a, b, lo, m):
    ys = np.arange(lo, lo + m, dtype=float)
    # rescale tilt weights by their max to keep the tables finite
    lt = tilt * ys
    tiltw = np.exp(lt - lt.max())
    fwd, bwd, conv, lf, lb = _tables(d, m, a - lo, b - lo, math.exp(-beta), tiltw)
    log_z = lf[d] + math.log(fwd[d, b - lo]) + d * (lt.max() - beta)
    p = fwd * bwd
    p /= p.sum(axis=1, keepdims=True)
    return fwd, bwd, conv, log_z, p


def build_bridge(beta, mu_over_L, d, a=0, b=0, M=None, wall=False, max_window=MAX_WINDOW):
    """Exact transfer-matrix tables for the tilted bridge.

    Without a wall heights run over [-M, M]; with a wall over [0, M].  The
    window doubles until the mass on its free edges is below 1e-10.
    """
    if d < 2:
        raise ValueError("need d >= 2")
    if not beta > 0:
        raise ValueError("beta must be positive")
    if wall and min(a, b) < 0:
        raise ValueError("endpoints below the wall")
    if M is None:
        M = max(16, 2 * max(abs(a), abs(b)), int(4 * math.sqrt(d)))
    while True:
        lo = 0 if wall else -M
        m = M + 1 if wall else 2 * M + 1
        if lo <= min(a, b) and max(a, b) < lo + m:
            fwd, bwd, conv, log_z, p = _build(beta, mu_over_L, d, a, b, lo, m)
            edge = float(p[:, -1].max()) if wall else float(max(p[:, 0].max(), p[:, -1].max()))
            if edge < EDGE_MASS and np.isfinite(log_z):
                return TiltedBridgeModel(beta, mu_over_L, d, a, b, lo, m, wall, fwd, bwd, conv, log_z, edge)
        if M * 2 > max_window:
            raise RuntimeError(f"height window overflow: edge mass still {edge:.3g} at M = {M}")
        M *= 2


@dataclass
class BridgeStats:
    mean: np.ndarray
    var: np.ndarray
    mid: int
    mid_mean: float
    mid_var: float


def bridge_stats(model: TiltedBridgeModel):
    p = model.marginals()
    ys = model.heights.astype(float)
    mean = p @ ys
    var = p @ ys**2 - mean**2
    var = np.maximum(var, 0.0)
    mid = model.d // 2
    return BridgeStats(mean, var, mid, float(mean[mid]), float(var[mid]))


def compare_profile(model: TiltedBridgeModel, L, tension, x=None):
    """Exact mean/variance at column x against the local-profile prediction."""
    from .profile import local_profile

    x = model.d // 2 if x is None else x
    st = bridge_stats(model)
    y, sigma = local_profile(model.tilt * L, model.a, model.b, 0, model.d, x, model.beta, L, tension)
    return {
        "x": x, "mean": float(st.mean[x]), "Y": y,
        "var": float(st.var[x]), "sigma2": sigma**2,
        "mean_rel": abs(st.mean[x] - y) / abs(y) if y else float("nan"),
        "var_rel": abs(st.var[x] - sigma**2) / sigma**2 if sigma else float("nan"),
    }


@dataclass
class ScalingResult:
    L: np.ndarray
    sup_mean: np.ndarray
    sup_se: np.ndarray
    slope: float
    intercept: float
    stderr: float
    n_paths: int


def sup_fluctuation_scaling(beta, mu_base, L_list, seed=0, n_paths=1000, window_exponent=None):
    """Mean of the path maximum against L for bridges of length d = L above a wall.

    The tilt -mu_base / L pushes the path onto the wall at 0 (the flat-boundary
    geometry: more enclosed area means a lower contour); a = b = 0.  With
    ``window_exponent`` the maximum is taken over a central window of length
    L^window_exponent only.
    """
    from .analysis import exponent_regression

    L_list = [int(v) for v in L_list]
    if len(L_list) < 4:
        raise ValueError("need at least 4 sizes")
    if any(v <= 0 or v & (v - 1) for v in L_list) or sorted(set(L_list)) != L_list:
        raise ValueError("sizes must be increasing powers of two")
    means, ses = [], []
    for i, L in enumerate(L_list):
        model = build_bridge(beta, -mu_base / L, L, 0, 0, wall=True)
        paths = model.sample(n_paths, seed=seed * 1000 + i)
        if window_exponent is None:
            sups = paths.max(axis=1).astype(float)
        else:
            half = max(1, int(L**window_exponent) // 2)
            sups = paths[:, L // 2 - half:L // 2 + half + 1].max(axis=1).astype(float)
        means.append(sups.mean())
        ses.append(sups.std(ddof=1) / math.sqrt(n_paths))
    means, ses = np.array(means), np.array(ses)
    usable = means > 0
    if usable.sum() < 3:
        raise ValueError("degenerate fit: fewer than 3 usable sizes")
    L_arr = np.array(L_list, dtype=float)
    w = (means[usable] / np.maximum(ses[usable], 1e-12)) ** 2
    reg = exponent_regression(L_arr[usable], means[usable], weights=w)
    return ScalingResult(L_arr, means, ses, reg.slope, reg.intercept, reg.stderr, n_paths)
