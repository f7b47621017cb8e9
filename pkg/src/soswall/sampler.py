"""Heat-bath dynamics for the SOS surface.

The single-site conditional P(k) ~ exp(-beta sum_i |k - n_i|) is piecewise
geometric between the sorted neighbour heights n1 <= n2 <= n3 <= n4: weight 1
on [n2, n3], ratio q = exp(-2 beta) per step out to n1 and n4, and ratio
p = q^2 beyond.  Two exact inverse-CDF samplers are provided:

* ``sample_sorted``: closed-form piece masses and a short walk from the mode;
* a tabulated CDF per gap pattern (n2-n1, n3-n2, n4-n3) with a guide table,
  used by the sweep kernels when all gaps are small.

Both consume one uniform per draw, and the floor is imposed by drawing u
above F(-1).  The sweep kernels keep array arguments out of per-site calls;
numba reference-counts arrays across calls, which costs more than the draw.
"""

from __future__ import annotations

import functools
import math

import numba as nb
import numpy as np

from .rng import stream_key, uniform_at

TAIL_MASS = 1e-12
GAP_MAX = 6
GUIDE_BINS = 64
TABLE_TAIL = 1e-17


# --- reference conditional (window form) ---------------------------------------

def window_halfwidth(beta, tail=TAIL_MASS):
    """Distance beyond the outer neighbours after which the mass is < tail."""
    p = math.exp(-4.0 * beta)
    return max(1, math.ceil(math.log(tail * (1 - p)) / math.log(p)) + 1)


def heat_bath_conditional(neighbors, beta, floor_active):
    """Single-site conditional on a finite window, by direct summation.

    Returns (ks, probs).  Mass outside the window is below 1e-12.
    """
    if not beta > 0:
        raise ValueError("beta must be positive")
    n = np.asarray(neighbors, dtype=np.int64)
    if n.shape != (4,):
        raise ValueError("need exactly 4 neighbour heights")
    w = window_halfwidth(beta)
    lo = 0 if floor_active else int(n.min()) - w
    hi = max(int(n.max()), lo) + w
    ks = np.arange(lo, hi + 1)
    energy = np.abs(ks[:, None] - n[None, :]).sum(axis=1)
    p = np.exp(-beta * (energy - energy.min()))
    return ks, p / p.sum()


# --- closed form ------------------------------------------------------------------

@nb.njit(cache=True, inline="always")
def _sort4(a, b, c, d):
    if a > b:
        a, b = b, a
    if c > d:
        c, d = d, c
    if a > c:
        a, c = c, a
    if b > d:
        b, d = d, b
    if b > c:
        b, c = c, b
    return a, b, c, d


@nb.njit(cache=True, error_model="numpy")
def _pieces(n1, n2, n3, n4, lq):
    """Unnormalised masses of the five pieces, left to right."""
    q = math.exp(lq)
    p = q * q
    qg1 = math.exp(lq * (n2 - n1))
    qg3 = math.exp(lq * (n4 - n3))
    return (qg1 * p / (1.0 - p), q * (1.0 - qg1) / (1.0 - q), float(n3 - n2 + 1),
            q * (1.0 - qg3) / (1.0 - q), qg3 * p / (1.0 - p))


@nb.njit(cache=True, error_model="numpy")
def conditional_cdf(k, n1, n2, n3, n4, lq):
    """Unnormalised mass of {height <= k} for sorted neighbours, q = exp(lq)."""
    q = math.exp(lq)
    p = q * q
    m_l2, m_l1, m_c, m_r1, m_r2 = _pieces(n1, n2, n3, n4, lq)
    qg1 = math.exp(lq * (n2 - n1))
    qg3 = math.exp(lq * (n4 - n3))
    if k < n1:
        return qg1 * math.exp(2 * lq * (n1 - k)) / (1.0 - p)
    if k < n2:
        return m_l2 + (math.exp(lq * (n2 - k)) - q * qg1) / (1.0 - q)
    if k <= n3:
        return m_l2 + m_l1 + (k - n2 + 1)
    base = m_l2 + m_l1 + m_c
    if k <= n4:
        return base + (q - math.exp(lq * (k - n3 + 1))) / (1.0 - q)
    return base + m_r1 + qg3 * (p - math.exp(2 * lq * (k - n4 + 1))) / (1.0 - p)


@nb.njit(cache=True, error_model="numpy")
def conditional_total(n1, n2, n3, n4, lq):
    m_l2, m_l1, m_c, m_r1, m_r2 = _pieces(n1, n2, n3, n4, lq)
    return m_l2 + m_l1 + m_c + m_r1 + m_r2


@nb.njit(cache=True, error_model="numpy")
def sample_sorted(n1, n2, n3, n4, floor, u, lq):
    """Inverse-CDF draw for sorted neighbours, with q = exp(lq) = exp(-2 beta).

    The flat piece [n2, n3] is inverted directly; the geometric pieces by a
    short walk outward from it (expected length O(1)).
    """
    q = math.exp(lq)
    p = q * q
    m_l2, m_l1, m_c, m_r1, m_r2 = _pieces(n1, n2, n3, n4, lq)
    total = m_l2 + m_l1 + m_c + m_r1 + m_r2
    if floor:
        t0 = conditional_cdf(-1, n1, n2, n3, n4, lq)
        t = t0 + u * (total - t0)
    else:
        t = u * total
    c1 = m_l2 + m_l1
    c2 = c1 + m_c
    if t > c1:
        if t <= c2:
            # ceil(x) - 1 for x > 0; math.ceil is slow inside numba
            x = t - c1
            c = int(x)
            if c == x:
                c -= 1
            return n2 + min(max(c, 0), n3 - n2)
        cdf = c2
        k = n3
        if n4 > n3:
            k = n3 + 1
            w = q
            cdf += w
            while cdf < t and k < n4:
                k += 1
                w *= q
                cdf += w
        if cdf < t:
            w = m_r2 * (1.0 - p)
            k = n4 + 1
            cdf = c2 + m_r1 + w
            while cdf < t and w > 0.0:
                k += 1
                w *= p
                cdf += w
        return k
    lower = c1
    k = n2
    if n2 > n1:
        k = n2 - 1
        w = q
        lower -= w
        while t <= lower and k > n1:
            k -= 1
            w *= q
            lower -= w
    if t <= lower:
        w = m_l2 * (1.0 - p)
        k = n1 - 1
        lower = m_l2 - w
        while t <= lower and w > 0.0:
            k -= 1
            w *= p
            lower -= w
    if floor and k < 0:
        k = 0
    return k


@nb.njit(cache=True, error_model="numpy")
def sample_conditional(a, b, c, d, floor, u, beta):
    """Exact heat-bath draw given four neighbour heights and a uniform u."""
    n1, n2, n3, n4 = _sort4(a, b, c, d)
    return sample_sorted(n1, n2, n3, n4, floor, u, -2.0 * beta)


# --- tabulated fast path ------------------------------------------------------------

def build_tables(beta, gap_max=GAP_MAX, bins=GUIDE_BINS, tail=TABLE_TAIL):
    """Normalised CDFs for every sorted-gap pattern (g1, g2, g3) <= gap_max.

    Entry r of a row is P(height <= n1 + r - w).  The neglected tails are
    below ``tail``, under the resolution of a double-precision uniform.  A
    guide table gives, for each of ``bins`` equal slices of (0, 1), the first
    row entry that can hold the inverse.
    """
    p = math.exp(-4.0 * beta)
    w = max(1, math.ceil(math.log(tail * (1 - p)) / math.log(p)))
    span = 3 * gap_max + 2 * w + 1
    n_pat = (gap_max + 1) ** 3
    cdf = np.ones((n_pat, span))
    guide = np.zeros((n_pat, bins + 1), dtype=np.int64)
    for g1 in range(gap_max + 1):
        for g2 in range(gap_max + 1):
            for g3 in range(gap_max + 1):
                idx = (g1 * (gap_max + 1) + g2) * (gap_max + 1) + g3
                nbr = np.array([0, g1, g1 + g2, g1 + g2 + g3])
                ks = np.arange(-w, g1 + g2 + g3 + w + 1)
                e = np.abs(ks[:, None] - nbr[None, :]).sum(axis=1)
                wt = np.exp(-beta * (e - e.min()))
                c = np.cumsum(wt) / wt.sum()
                c[-1] = 1.0
                cdf[idx, : len(c)] = c
                guide[idx] = np.searchsorted(c, np.arange(bins + 1) / bins, side="left")
    return cdf, guide, w


@functools.lru_cache(maxsize=16)
def cached_tables(beta):
    return build_tables(beta)


@nb.njit(cache=True, error_model="numpy")
def _update_row(pad, y, x0, step, key, floor, lq, cdf, guide, w):
    """Resample sites x0, x0 + step, ... of row y in order."""
    L = pad.shape[0] - 2
    gm = GAP_MAX
    bins = guide.shape[1] - 1
    yy = y + 1
    for x in range(x0, L, step):
        xx = x + 1
        u = uniform_at(key, y * L + x)
        n1, n2, n3, n4 = _sort4(pad[yy - 1, xx], pad[yy + 1, xx], pad[yy, xx - 1], pad[yy, xx + 1])
        g1 = n2 - n1
        g2 = n3 - n2
        g3 = n4 - n3
        if g1 > gm or g2 > gm or g3 > gm:
            pad[yy, xx] = sample_sorted(n1, n2, n3, n4, floor, u, lq)
            continue
        row = (g1 * (gm + 1) + g2) * (gm + 1) + g3
        if floor:
            r0 = w - 1 - n1
            if r0 >= 0:
                t0 = cdf[row, r0]
                u = t0 + u * (1.0 - t0)
        r = guide[row, int(u * bins)]
        while cdf[row, r] < u:
            r += 1
        k = n1 + r - w
        if floor and k < 0:
            k = 0
        pad[yy, xx] = k


# --- sweeps ----------------------------------------------------------------------

@nb.njit(cache=True)
def _checkerboard(pad, seed, sweep0, n_sweeps, floor, lq, cdf, guide, w):
    L = pad.shape[0] - 2
    for s in range(sweep0, sweep0 + n_sweeps):
        key = stream_key(seed, s)
        for parity in range(2):
            for y in range(L):
                _update_row(pad, y, (y + parity) & 1, 2, key, floor, lq, cdf, guide, w)


@nb.njit(cache=True, parallel=True)
def _checkerboard_parallel(pad, seed, sweep0, n_sweeps, floor, lq, cdf, guide, w):
    L = pad.shape[0] - 2
    for s in range(sweep0, sweep0 + n_sweeps):
        key = stream_key(seed, s)
        for parity in range(2):
            for y in nb.prange(L):
                _update_row(pad, y, (y + parity) & 1, 2, key, floor, lq, cdf, guide, w)


@nb.njit(cache=True)
def _raster(pad, seed, sweep0, n_sweeps, floor, lq, cdf, guide, w):
    L = pad.shape[0] - 2
    for s in range(sweep0, sweep0 + n_sweeps):
        key = stream_key(seed, s)
        for y in range(L):
            _update_row(pad, y, 0, 1, key, floor, lq, cdf, guide, w)


@nb.njit(cache=True)
def _accumulate(pad, hist):
    L = pad.shape[0] - 2
    top = hist.shape[1] - 1
    for y in range(L):
        for x in range(L):
            h = pad[y + 1, x + 1]
            h = 0 if h < 0 else (top if h > top else h)
            hist[y * L + x, h] += 1


@nb.njit(cache=True)
def _checkerboard_hist(pad, seed, sweep0, n_sweeps, floor, lq, cdf, guide, w, hist):
    for s in range(sweep0, sweep0 + n_sweeps):
        _checkerboard(pad, seed, s, 1, floor, lq, cdf, guide, w)
        _accumulate(pad, hist)


def run_sweeps(field, n_sweeps, beta, schedule="checkerboard", workers=1, hist_cap=None):
    """Advance ``field`` in place by ``n_sweeps`` sweeps.

    Draws are keyed by (field.seed, sweep index, site), so the result depends
    only on the seed, the schedule and the starting sweep count, not on the
    worker count.  With ``hist_cap`` the per-site histogram of heights
    0..hist_cap (clipped) after each sweep is returned.
    """
    if n_sweeps < 0:
        raise ValueError("n_sweeps must be >= 0")
    if not beta > 0:
        raise ValueError("beta must be positive")
    lq = -2.0 * float(beta)
    cdf, guide, w = cached_tables(float(beta))
    pad = field.padded
    args = (pad, np.uint64(field.seed), field.sweeps, n_sweeps, field.floor, lq, cdf, guide, w)
    hist = None
    if hist_cap is not None:
        if schedule != "checkerboard":
            raise ValueError("histograms are recorded for the checkerboard schedule only")
        hist = np.zeros((field.L * field.L, hist_cap + 1), dtype=np.int64)
        _checkerboard_hist(*args, hist)
    elif schedule == "checkerboard":
        if workers > 1:
            nb.set_num_threads(max(1, min(workers, nb.config.NUMBA_NUM_THREADS)))
            _checkerboard_parallel(*args)
        else:
            _checkerboard(*args)
    elif schedule == "raster":
        _raster(*args)
    else:
        raise ValueError(f"unknown schedule {schedule!r}")
    field.sweeps += n_sweeps
    return hist


def sweep(field, beta, schedule="checkerboard", workers=1):
    """One sweep: every interior site resampled once."""
    run_sweeps(field, 1, beta, schedule, workers)
    return field
