"""The thirteen acceptance checks, each returning a ``Criterion``.

Statistical checks on large lattices (8, 9, 10) read finished replicas from
the ensemble cache (see ``soswall.ensembles``); missing replicas fail.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import ensembles
from .analysis import height_concentration, loop_hausdorff, maxima_report
from .bridge import build_bridge, compare_profile, sup_fluctuation_scaling
from .cinf import estimate_c_infinity
from .contours import contour_loops, nesting_forest, _outer_key
from .field import new_field
from .oracle import ExactOracleSpec, exact_gibbs_oracle
from .params import SUBCRITICAL, SUPERCRITICAL, critical_lambda, derive_params
from .runs import cached_replica
from .sampler import run_sweeps
from .tension import SquareLimitTension, tau_directed_walk
from .wulff import chord_sag, enlarge_sequence, limit_shape, polygon_area, shape_constants, wulff_unit


@dataclass
class Criterion:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0
    values: dict = field(default_factory=dict)

    def line(self):
        return f"criterion {self.number:2d} [{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


def _timed(fn):
    def run(*args, **kw):
        t0 = time.perf_counter()
        c = fn(*args, **kw)
        c.seconds = time.perf_counter() - t0
        return c
    run.__name__ = fn.__name__
    run.__doc__ = fn.__doc__
    return run


# --- analytic shape checks ---------------------------------------------------------------

@_timed
def lambda_c_identity(betas=(2.0, 3.0, 5.0), rtol=1e-6, budget=1.0):
    """Bisection root of F(L_c(lambda)) against the closed form."""
    walls = {b: wulff_unit(tau_directed_walk(b)) for b in betas}
    t0 = time.perf_counter()
    errs = {}
    for b, w in walls.items():
        sc = shape_constants(b, w, numeric=True)
        errs[b] = abs(sc.lambda_c_numeric - sc.lambda_c) / sc.lambda_c
    took = time.perf_counter() - t0
    ok = max(errs.values()) <= rtol and took < budget
    detail = ", ".join(f"beta={b:g} rel={e:.2e}" for b, e in errs.items()) + f"; root finding {took:.2f} s"
    return Criterion(1, "lambda_c identity", ok, detail, values={"rel": errs, "runtime": took})


@_timed
def square_limit(beta=8.0):
    w = wulff_unit(tau_directed_walk(beta))
    sc = shape_constants(beta, w, numeric=False)
    checks = {
        "tau0": (abs(w.tau0 - 1), 0.01),
        "lambda_c/beta": (abs(sc.lambda_c / beta - 4), 0.05),
        "ell_c": (abs(sc.ell_c(sc.lambda_c) - 0.5), 0.01),
        "ell_tau": (abs(w.ell_tau - 1), 0.02),
    }
    ok = all(v < tol for v, tol in checks.values())
    detail = ", ".join(f"|{k} - limit| = {v:.4f} (< {tol})" for k, (v, tol) in checks.items())
    return Criterion(2, "square limit at beta = 8", ok, detail, values=checks)


@_timed
def wulff_normalization(betas=(2.0, 4.0, 8.0)):
    rows, ok = [], True
    for b in betas:
        w = wulff_unit(tau_directed_walk(b))
        area = polygon_area(w.boundary)
        ident = abs(w.ell_tau - 4 * w.tau0 / w.w1)
        ok &= abs(area - 1) <= 1e-6 and ident <= 1e-10
        rows.append(f"beta={b:g} area-1={area - 1:.1e} ell_tau-4tau0/w1={ident:.1e}")
    return Criterion(3, "Wulff normalization", ok, "; ".join(rows))


@_timed
def curvature_lemma(beta=2.0, ds=(0.01, 0.02, 0.03, 0.04, 0.05), thetas=(0.0, math.pi / 8, math.pi / 4)):
    w = wulff_unit(tau_directed_walk(beta))
    worst, ok = 0.0, True
    for th in thetas:
        for d in ds:
            r = chord_sag(w, d, th)
            ratio = r.rel_error / (2 * d * d)
            worst = max(worst, ratio)
            ok &= r.rel_error <= 2 * d * d
    return Criterion(4, "chord sag", ok, f"max rel_error / (2 d^2) = {worst:.3f} over {len(ds)} d x {len(thetas)} angles")


@_timed
def enlargement(beta=2.0, k_max=60):
    w = wulff_unit(tau_directed_walk(beta))
    sc = shape_constants(beta, w, numeric=False)
    lam = 2.0 * sc.lambda_c
    ell = 0.5 * (sc.ell_c(lam) + 1.0 / w.ell_tau)
    e = enlarge_sequence(w, lam, ell, k_max)
    k = np.arange(k_max + 1)
    predicted = e.limit + (0.5 - e.limit) * e.rate**k
    geo = float(np.max(np.abs(e.r - predicted)))
    fixed = abs(e.r[-1] - ell * w.ell_tau / 2)
    sq = wulff_unit(SquareLimitTension())
    lam_sq = 8.0 * 4.0
    ell_sq = 0.5 * (8.0 * sq.w1 / (2 * lam_sq) + 1.0 / sq.ell_tau)
    es = enlarge_sequence(sq, lam_sq, ell_sq, 3, beta=8.0)
    one_step = float(np.max(np.abs(es.r[1:] - es.limit)))
    ok = geo <= 1e-12 and fixed <= 1e-12 and one_step <= 1e-12
    return Criterion(5, "enlargement recursion", ok,
                     f"rate a={e.rate:.6f}, max|r_k - geometric|={geo:.1e}, |r_K - l l_tau/2|={fixed:.1e}, "
                     f"square-limit a={es.rate:g}, one-step error={one_step:.1e}")


# --- sampler and contours -------------------------------------------------------------------

@_timed
def sampler_exactness(sweeps=100_000, burn_in=1000, seed=2024, tv_max=0.01, budget=60.0):
    beta, K = 1.5, 4
    t0 = time.perf_counter()
    exact = exact_gibbs_oracle(ExactOracleSpec(3, K, beta, 0, True))
    f = new_field(3, 0, 0, True, seed=seed)
    run_sweeps(f, burn_in, beta)
    hist = run_sweeps(f, sweeps, beta, hist_cap=K)
    emp = hist / hist.sum(axis=1, keepdims=True)
    tv = 0.5 * np.abs(emp - exact.marginals).sum(axis=1)
    took = time.perf_counter() - t0
    ok = float(tv.max()) <= tv_max and took < budget
    return Criterion(6, "sampler vs exact enumeration", ok,
                     f"max site TV = {tv.max():.4f} (<= {tv_max}), {sweeps} sweeps, {took:.1f} s",
                     values={"tv": tv})


def _pip_many(poly, px, py):
    """Ray-casting membership of many points in a closed polyline."""
    x, y = poly[:-1, 0][None], poly[:-1, 1][None]
    xn, yn = poly[1:, 0][None], poly[1:, 1][None]
    px, py = px[:, None], py[:, None]
    cross = (y > py) != (yn > py)
    with np.errstate(divide="ignore", invalid="ignore"):
        xi = x + (py - y) * (xn - x) / (yn - y)
    return (np.count_nonzero(cross & (px < xi), axis=1) & 1).astype(bool)


def contour_field_check(heights, boundary=0, pairing="NE"):
    """Excursion sets from loops vs thresholding, and nesting vs point-in-polygon.

    Returns a list of problems (empty when everything matches).
    """
    L = heights.shape[0]
    f = new_field(L, heights, boundary, floor=False)
    gx, gy = np.meshgrid(np.arange(L) + 0.5, np.arange(L) + 0.5)
    px, py = gx.ravel(), gy.ravel()
    lo, hi = int(min(heights.min(), boundary)), int(max(heights.max(), boundary))
    problems, loops = [], []
    for h in range(lo, hi + 2):
        level = contour_loops(f, h, pairing)
        ind = np.full(L * L, 1 if boundary >= h else 0, dtype=np.int64)
        for lp in level:
            inside = _pip_many(lp.vertices.astype(float), px, py)
            ind += lp.sign * inside
            if inside.sum() != lp.area:
                problems.append(f"h={h}: fill area {lp.area} vs point-in-polygon {int(inside.sum())}")
        if not np.array_equal(ind.reshape(L, L), (heights >= h).astype(np.int64)):
            problems.append(f"h={h}: excursion set not reconstructed")
        loops += level
    for k, lp in enumerate(loops):
        lp.id = k
    parents = nesting_forest(loops)
    # oracle: containers by point-in-polygon on each loop's interior site centres
    members = [_pip_many(lp.vertices.astype(float), px, py) for lp in loops]
    keys = [_outer_key(lp, int(m.sum()), k) for k, (lp, m) in enumerate(zip(loops, members))]
    for b, mb in enumerate(members):
        if not mb.any():
            continue
        cands = [a for a in range(len(loops)) if a != b and keys[a] > keys[b] and not (mb & ~members[a]).any()]
        want = min(cands, key=lambda a: keys[a]) if cands else -1
        if parents[b] != want:
            problems.append(f"loop {b}: parent {parents[b]} vs oracle {want}")
    return problems


@_timed
def contour_round_trip(n_fields=200, side=16, seed=7):
    rng = np.random.default_rng(seed)
    bad = []
    for i in range(n_fields):
        heights = rng.integers(-2, 3, size=(side, side)).astype(np.int32)
        p = contour_field_check(heights)
        if p:
            bad.append((i, p[0]))
    ok = not bad
    detail = f"{n_fields - len(bad)}/{n_fields} random {side}x{side} fields reconstruct exactly with oracle nesting"
    if bad:
        detail += f"; first problem: field {bad[0][0]}: {bad[0][1]}"
    return Criterion(7, "contour round trip", ok, detail)


# --- cached-ensemble checks -----------------------------------------------------------------

def _replicas(specs, cache):
    fields = [cached_replica(s, cache) for s in specs]
    return [f for f in fields if f is not None], sum(f is None for f in fields)


def _c_inf(beta, num_samples, seed=11):
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        r = estimate_c_infinity(beta, 32, h_max=4, num_samples=num_samples, seed=seed)
    return r


@_timed
def height_concentration_check(cache=None, sizes=ensembles.CONCENTRATION_SIZES, c_inf_samples=50_000):
    cache = ensembles.DEFAULT_CACHE if cache is None else cache
    beta = ensembles.CONCENTRATION_BETA
    ci = _c_inf(beta, c_inf_samples)
    c_val = ci.c_inf if math.isfinite(ci.c_inf) else float(ci.a[-1])
    rows, conc_ok, verdict_ok = [], True, True
    for L in sizes:
        fields, missing = _replicas(ensembles.concentration_specs(L, True), cache)
        params = derive_params(beta, L, c_val)
        if missing or not fields:
            conc_ok = verdict_ok = False
            rows.append(f"L={L}: {missing} replicas missing")
            continue
        cs = [height_concentration(f, params) for f in fields]
        frac = np.mean([c.coverage >= 0.8 for c in cs])
        conc_ok &= frac >= 0.75
        gap = params.distance_to_critical()
        if params.regime in (SUPERCRITICAL, SUBCRITICAL) and gap is not None and gap >= 0.1:
            want = params.H if params.regime == SUPERCRITICAL else params.H - 1
            agree = np.mean([c.dominant == want for c in cs])
            verdict_ok &= agree >= 0.75
            vtxt = f"verdict {params.regime}, agreement {agree:.2f}"
        else:
            verdict_ok = False
            vtxt = f"verdict {params.regime}: no replica with a determinate lambda at least 10% from lambda_c"
        cov = ", ".join(f"{c.coverage:.3f}" for c in cs)
        rows.append(f"L={L} H={params.H} coverage[{cov}] ({frac:.0%} >= 0.8); {vtxt}")
    ok = conc_ok and verdict_ok
    return Criterion(8, "height concentration", ok,
                     f"concentration {'ok' if conc_ok else 'FAIL'}, verdict {'ok' if verdict_ok else 'FAIL'}; "
                     + " | ".join(rows), values={"concentration": conc_ok, "verdict": verdict_ok})


@_timed
def maxima_check(cache=None, sizes=ensembles.CONCENTRATION_SIZES, window=3.0):
    cache = ensembles.DEFAULT_CACHE if cache is None else cache
    beta = ensembles.CONCENTRATION_BETA
    rows, ok = [], True
    for L in sizes:
        ff, m1 = _replicas(ensembles.concentration_specs(L, True), cache)
        fn, m2 = _replicas(ensembles.concentration_specs(L, False), cache)
        if m1 or m2 or len(ff) < 2 or len(fn) < 2:
            ok = False
            rows.append(f"L={L}: {m1 + m2} replicas missing")
            continue
        params = derive_params(beta, L, 1.0)
        r = maxima_report(ff, fn, params, window)
        ok &= r.floor_ok and r.free_ok
        rows.append(f"L={L} floor {r.floor_mean:.2f} vs {r.floor_center:.2f}, "
                    f"free {r.free_mean:.2f} vs {r.free_center:.2f}")
    return Criterion(9, "maxima", ok, "; ".join(rows))


@_timed
def shape_theorem(cache=None, c_inf_samples=200_000, d_max=0.1):
    cache = ensembles.DEFAULT_CACHE if cache is None else cache
    from .contours import extract_ensemble

    beta, L = ensembles.SHAPE_BETA, ensembles.SHAPE_L
    ci = _c_inf(beta, c_inf_samples)
    c_val = ci.c_inf if math.isfinite(ci.c_inf) else float(ci.a[-1])
    params = derive_params(beta, L, c_val)
    fields, missing = _replicas(ensembles.shape_specs(), cache)
    if missing or not fields:
        return Criterion(10, "shape theorem", False, f"{missing} of {ensembles.REPLICAS} replicas missing")
    w = wulff_unit(tau_directed_walk(beta))
    shape1 = limit_shape(params.lambda_n(1), 1.0, 0.0, w, beta=beta)
    unique_H, none_above, dists = [], [], []
    for f in fields:
        ens = extract_ensemble(f, params, n_max=1)
        unique_H.append(len(ens.gamma(0)) == 1)
        none_above.append(len(ens.above()) == 0)
        g1 = ens.gamma(1)
        if g1:
            big = max(g1, key=lambda lp: lp.area)
            dists.append(loop_hausdorff(big, shape1, L))
    fu, fa = float(np.mean(unique_H)), float(np.mean(none_above))
    med = float(np.median(dists)) if dists else float("inf")
    ok = params.regime == SUPERCRITICAL and fu >= 0.75 and fa >= 0.9 and med <= d_max
    return Criterion(10, "shape theorem", ok,
                     f"beta={beta:g} L={L} c_inf={c_val:.3f} lambda={params.lam:.3f} lambda_c={params.lambda_c:.4f} "
                     f"({params.regime}); unique H-loop {fu:.0%}, no (H+1)-loop {fa:.0%}, "
                     f"median d_H = {med:.4f} over {len(dists)} replicas",
                     values={"dists": dists})


# --- effective interface ----------------------------------------------------------------

@_timed
def cube_root_scaling(beta=2.0, sizes=(512, 1024, 2048, 4096, 8192), n_paths=1000, seed=1, budget=600.0):
    t0 = time.perf_counter()
    mu = critical_lambda(beta)
    tilted = sup_fluctuation_scaling(beta, mu, sizes, seed=seed, n_paths=n_paths)
    flat = sup_fluctuation_scaling(beta, 0.0, sizes, seed=seed, n_paths=n_paths)
    took = time.perf_counter() - t0
    ok_t = 0.25 <= tilted.slope <= 0.41 and tilted.stderr < 0.05
    ok_f = 0.45 <= flat.slope <= 0.55
    ok = ok_t and ok_f and took < budget
    return Criterion(11, "cube-root scaling", ok,
                     f"tilted (mu={mu:.4f}) slope {tilted.slope:.3f} +- {tilted.stderr:.3f} (want [0.25, 0.41]); "
                     f"untilted slope {flat.slope:.3f} +- {flat.stderr:.3f} (want [0.45, 0.55]); {took:.0f} s",
                     values={"tilted": tilted, "untilted": flat})


@_timed
def local_profile_check(beta=2.0, ds=(512, 1024, 2048), mu=8.0, exponent=0.7):
    tension = tau_directed_walk(beta)
    rows, ok = [], True
    for d in ds:
        L = round(d ** (1 / exponent))
        model = build_bridge(beta, mu / L, d, 0, 0)
        c = compare_profile(model, L, tension)
        ok &= c["mean_rel"] <= 0.10 and c["var_rel"] <= 0.25
        rows.append(f"d={d} L={L}: mean {c['mean']:.3f} vs Y {c['Y']:.3f} ({c['mean_rel']:.1%}), "
                    f"var {c['var']:.3f} vs sigma^2 {c['sigma2']:.3f} ({c['var_rel']:.1%})")
    return Criterion(12, "local profile", ok, "; ".join(rows))


@_timed
def c_inf_behaviour(betas=(2.0, 4.0, 6.0), num_samples=100_000, seed=5):
    res = [_c_inf(b, num_samples, seed) for b in betas]
    inc_ok = True
    for r in res:
        diff, ci = r.increments()
        # decreasing within CI (plus double-precision roundoff of the rescaled tails):
        # each increment at most the previous plus the combined CI
        eps = 64 * np.finfo(float).eps * float(np.max(np.abs(r.a)))
        for k in range(1, len(diff)):
            if diff[k] > diff[k - 1] + ci[k] + ci[k - 1] + eps:
                inc_ok = False
    cs = [r.c_inf for r in res]
    increasing = all(b > a for a, b in zip(cs, cs[1:]))
    toward_one = all(abs(b - 1) < abs(a - 1) for a, b in zip(cs, cs[1:]))
    ok = inc_ok and increasing
    detail = ", ".join(f"beta={r.beta:g} c_inf={r.c_inf:.6f}+-{r.c_inf_ci:.1e}" for r in res)
    return Criterion(13, "c_inf behaviour", ok,
                     f"{detail}; increments decreasing {inc_ok}; c_inf increasing {increasing}; "
                     f"|c_inf - 1| decreasing {toward_one}", values={"results": res})


ALL = (lambda_c_identity, square_limit, wulff_normalization, curvature_lemma, enlargement,
       sampler_exactness, contour_round_trip, height_concentration_check, maxima_check,
       shape_theorem, cube_root_scaling, local_profile_check, c_inf_behaviour)


def run_all(cache=None, only=None):
    out = []
    for k, fn in enumerate(ALL, 1):
        if only and k not in only:
            continue
        kw = {"cache": cache} if k in (8, 9, 10) else {}
        try:
            out.append(fn(**kw))
        except Exception as exc:  # a crash is a failed criterion, reported with its cause
            out.append(Criterion(k, fn.__name__, False, f"error: {type(exc).__name__}: {exc}"))
    return out
