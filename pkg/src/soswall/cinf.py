"""Estimator of c_inf from the centre height of a floorless box.

a_h = exp(4 beta h) P(eta_0 >= h) is estimated two ways from one chain:

* indicator: the fraction of sweeps with eta_0 >= h;
* conditional (Rao-Blackwell): the average of the exact single-site
  probability P(eta_0 >= h | neighbours), which stays usable when
  exp(-4 beta h) is far below 1 / (number of sweeps).

Confidence intervals use batch means.  The extrapolated value is a weighted
mean over the largest reliable h, weights 1 / (ci^2 + exp(-4 beta h)), the
second term being the squared O(exp(-2 beta h)) distance to the limit.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numba as nb
import numpy as np
from scipy import stats

from .field import new_field
from .sampler import _checkerboard, _sort4, cached_tables, conditional_cdf

RELIABLE_FRACTION = 0.10


@nb.njit(cache=True, error_model="numpy")
def upper_mass(h, n1, n2, n3, n4, lq):
    """Unnormalised mass of {height >= h}, by reflecting the lower CDF."""
    return conditional_cdf(-h, -n4, -n3, -n2, -n1, lq)


@nb.njit(cache=True)
def _record_chain(pad, seed, sweep0, n_sweeps, lq, cdf, guide, w, h_max, cy, cx, up, down, ind_up, ind_down):
    """Sweep and record, after each sweep, tail probabilities at (cy, cx)."""
    for s in range(n_sweeps):
        _checkerboard(pad, seed, sweep0 + s, 1, False, lq, cdf, guide, w)
        n1, n2, n3, n4 = _sort4(pad[cy - 1, cx], pad[cy + 1, cx], pad[cy, cx - 1], pad[cy, cx + 1])
        total = upper_mass(n1, n1, n2, n3, n4, lq) + conditional_cdf(n1 - 1, n1, n2, n3, n4, lq)
        v = pad[cy, cx]
        for h in range(h_max + 1):
            up[s, h] = upper_mass(h, n1, n2, n3, n4, lq) / total
            down[s, h] = conditional_cdf(-h, n1, n2, n3, n4, lq) / total
            ind_up[s, h] = 1.0 if v >= h else 0.0
            ind_down[s, h] = 1.0 if v <= -h else 0.0


def batch_means(x, n_batches=20, level=0.95):
    """Mean and CI half-width of each column of x by non-overlapping batches."""
    x = np.asarray(x, dtype=float)
    m = len(x) // n_batches
    if m < 1:
        raise ValueError("fewer samples than batches")
    b = x[: m * n_batches].reshape(n_batches, m, *x.shape[1:]).mean(axis=1)
    q = stats.t.ppf(0.5 + level / 2, n_batches - 1)
    return x[: m * n_batches].mean(axis=0), q * b.std(axis=0, ddof=1) / math.sqrt(n_batches)


@dataclass
class CInfResult:
    beta: float
    box_side: int
    h: np.ndarray
    a: np.ndarray            # conditional estimates of a_h
    a_ci: np.ndarray
    a_indicator: np.ndarray
    a_indicator_ci: np.ndarray
    p_up: np.ndarray         # P(eta_0 >= h), conditional estimator
    p_down: np.ndarray       # P(eta_0 <= -h)
    p_up_ci: np.ndarray
    p_down_ci: np.ndarray
    c_inf: float
    c_inf_ci: float
    used_h: list = field(default_factory=list)
    ok: bool = True
    message: str = ""
    sweeps: int = 0

    def increments(self):
        """|a_{h+1} - a_h| and a conservative CI half-width for each."""
        return np.abs(np.diff(self.a)), self.a_ci[1:] + self.a_ci[:-1]


def center_tail_series(beta, side, h_max, num_samples, seed, burn_in=None):
    """Run a floorless 0-boundary chain; per-sweep tail probabilities at the centre."""
    if side < 1 or h_max < 0 or num_samples < 1:
        raise ValueError("bad chain size")
    burn_in = 10 * side if burn_in is None else burn_in
    f = new_field(side, init=0, boundary=0, floor=False, seed=seed)
    lq = -2.0 * beta
    cdf, guide, w = cached_tables(float(beta))
    dummy = np.zeros((burn_in, h_max + 1))
    c = side // 2 + 1
    if burn_in:
        _record_chain(f.padded, np.uint64(seed), 0, burn_in, lq, cdf, guide, w, h_max, c, c,
                      dummy, dummy.copy(), dummy.copy(), dummy.copy())
    out = [np.zeros((num_samples, h_max + 1)) for _ in range(4)]
    _record_chain(f.padded, np.uint64(seed), burn_in, num_samples, lq, cdf, guide, w, h_max, c, c, *out)
    f.sweeps = burn_in + num_samples
    return out


def estimate_c_infinity(beta, box_side=32, h_max=4, num_samples=20000, seed=0, burn_in=None,
                        tolerance=0.05, n_batches=20, max_used=3, strict=False):
    """Per-h estimates a_h with batch-means CIs and an extrapolated c_inf.

    h is reliable when its CI half-width is below 10% of a_h.  The result is
    flagged (``ok=False``), or raises with ``strict``, when no h is reliable
    or the extrapolated CI exceeds ``tolerance`` relative.
    """
    if not beta > 0:
        raise ValueError("beta must be positive")
    if box_side < 32:
        raise ValueError("box_side must be >= 32")
    up, down, iu, idn = center_tail_series(beta, box_side, h_max, num_samples, seed, burn_in)
    hs = np.arange(h_max + 1)
    scale = np.exp(4.0 * beta * hs)
    pu, pu_ci = batch_means(up, n_batches)
    pd, pd_ci = batch_means(down, n_batches)
    ind, ind_ci = batch_means(iu, n_batches)
    a, a_ci = pu * scale, pu_ci * scale

    reliable = [h for h in range(1, h_max + 1) if a[h] > 0 and a_ci[h] < RELIABLE_FRACTION * a[h]]
    used = reliable[-max_used:]
    ok, msg = True, ""
    if not used:
        c, c_ci, ok, msg = float("nan"), float("inf"), False, "no h with CI below 10% of a_h"
    else:
        wts = np.array([1.0 / (a_ci[h] ** 2 + math.exp(-4.0 * beta * h)) for h in used])
        c = float(np.sum(wts * a[used]) / wts.sum())
        stat = float(np.sqrt(np.sum((wts * a_ci[used]) ** 2)) / wts.sum())
        bias = math.exp(-2.0 * beta * used[-1])
        c_ci = stat + bias
        if c_ci > tolerance * c:
            ok, msg = False, f"CI half-width {c_ci:.3g} exceeds {tolerance:.3g} relative"
    if not ok:
        if strict:
            raise RuntimeError(f"insufficient effective samples: {msg}")
        warnings.warn(f"c_inf estimate unreliable: {msg}", RuntimeWarning, stacklevel=2)
    return CInfResult(
        beta=float(beta), box_side=box_side, h=hs, a=a, a_ci=a_ci,
        a_indicator=ind * scale, a_indicator_ci=ind_ci * scale,
        p_up=pu, p_down=pd, p_up_ci=pu_ci, p_down_ci=pd_ci,
        c_inf=c, c_inf_ci=c_ci, used_h=used, ok=ok, message=msg,
        sweeps=num_samples,
    )
