import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from soswall.analysis import (cascade_target, column_heights, densify, exponent_regression, flat_fluctuation,
                              hausdorff, height_concentration, loop_hausdorff, maxima_report)
from soswall.contours import contour_loops
from soswall.field import new_field
from soswall.params import ModelParams
from soswall.sampler import run_sweeps
from soswall.tension import tau_directed_walk
from soswall.wulff import limit_shape, shape_constants, wulff_unit


def params(L=64, H=2, beta=1.0):
    return ModelParams(beta=beta, L=L, H=H, alpha=0.0, c_inf=1.0, c_inf_halfwidth=0.0, lam=1.0)


def ray_cast(poly, px, py):
    """Even-odd rule on a grid of points."""
    inside = np.zeros(px.shape, dtype=bool)
    a, b = poly, np.roll(poly, -1, axis=0)
    for (x0, y0), (x1, y1) in zip(a, b):
        if y0 == y1:
            continue
        cross = (y0 > py) != (y1 > py)
        xi = x0 + (py - y0) * (x1 - x0) / (y1 - y0)
        inside ^= cross & (px < xi)
    return inside


def square(lo, hi):
    return np.array([[lo, lo], [hi, lo], [hi, hi], [lo, hi], [lo, lo]], dtype=float)


# --- concentration --------------------------------------------------------------------

def test_flat_field_concentration():
    c = height_concentration(new_field(16, 2), params(16, 2))
    assert c.fractions == {2: 1.0}
    assert c.strict == (True, False) and c.holds_strict and c.coverage == 1.0 and c.dominant == 2


def test_checkerboard_concentration():
    h = np.fromfunction(lambda y, x: 1 + (x + y) % 2, (16, 16), dtype=int)
    c = height_concentration(new_field(16, h), params(16, 2))
    assert not c.holds_strict and not c.holds_relaxed
    assert c.coverage == pytest.approx(1.0)
    assert c.fractions == {1: 0.5, 2: 0.5}


def test_relaxed_threshold():
    h = np.full((10, 10), 2)
    h[:1] = 5
    h[1, :5] = 5
    c = height_concentration(new_field(10, h), params(10, 2))
    assert c.fractions[2] == pytest.approx(0.85)
    assert not c.holds_strict and c.holds_relaxed
    assert height_concentration(new_field(10, h), params(10, 2), relaxed=0.86).holds_relaxed is False


@given(h=arrays(np.int64, (9, 9), elements=st.integers(0, 4)), k=st.integers(0, 3), flip=st.booleans())
def test_concentration_symmetry_invariance(h, k, flip):
    g = np.rot90(h, k)
    g = g.T if flip else g
    a = height_concentration(new_field(9, h, floor=False), params(9, 2))
    b = height_concentration(new_field(9, np.ascontiguousarray(g), floor=False), params(9, 2))
    assert a.fractions == b.fractions
    assert sum(a.fractions.values()) == pytest.approx(1.0, abs=1e-12)


# --- Hausdorff ------------------------------------------------------------------------

def test_hausdorff_identical_is_zero():
    assert hausdorff(square(0, 1), square(0, 1)) == 0.0


def test_hausdorff_nested_squares():
    d = hausdorff(square(0, 1), square(0.1, 0.9), step=0.001)
    assert d == pytest.approx(0.1 * math.sqrt(2), abs=1e-12)
    assert round(d, 5) == 0.14142


def test_hausdorff_segment_distance_not_vertex_distance():
    # a coarse segment against a point near its middle: distance to the segment, not to its ends
    assert hausdorff(np.array([[0.0, 0.0], [1.0, 0.0]]), np.array([[0.5, 0.2]])) == pytest.approx(
        math.hypot(0.5, 0.2))
    assert hausdorff(np.array([[0.5, 0.2]]), np.array([[0.0, 0.0], [1.0, 0.0]]), step=None) >= 0.2


def test_hausdorff_empty():
    with pytest.raises(ValueError):
        hausdorff(np.zeros((0, 2)), square(0, 1))


polylines = arrays(np.float64, st.tuples(st.integers(2, 6), st.just(2)),
                   elements=st.floats(-1, 1, allow_nan=False, width=32))


@given(P=polylines, Q=polylines, R=polylines)
@settings(max_examples=150)
def test_hausdorff_metric(P, Q, R):
    pq, qp = hausdorff(P, Q), hausdorff(Q, P)
    assert pq >= 0 and pq == pytest.approx(qp, abs=1e-12)
    assert hausdorff(P, R) <= pq + hausdorff(Q, R) + 1e-9


def test_densify():
    d = densify(square(0, 1), 0.1)
    steps = np.hypot(*np.diff(d, axis=0).T)
    assert steps.max() <= 0.1 + 1e-12
    np.testing.assert_allclose(d[[0, -1]], square(0, 1)[[0, -1]])


def test_loop_hausdorff_against_square_shape():
    L = 40
    h = np.ones((L, L), dtype=np.int64)
    (lp,) = contour_loops(new_field(L, h, 0, floor=False), 1)

    class Shape:
        boundary = square(0, 1)[:-1]

    assert loop_hausdorff(lp, Shape(), L) == pytest.approx(0.0, abs=1e-12)


def test_loop_hausdorff_limit_shape_of_plateau():
    beta, L = 2.0, 200
    w = wulff_unit(tau_directed_walk(beta))
    sc = shape_constants(beta, w, numeric=False)
    shape = limit_shape(1.5 * sc.lambda_c, 1.0, 0.0, w, beta=beta)
    # rasterise the shape and compare its level line with it
    gx, gy = np.meshgrid(np.arange(L) + 0.5, np.arange(L) + 0.5)
    h = ray_cast(shape.boundary * L, gx, gy).astype(np.int64)
    loops = contour_loops(new_field(L, h, 0, floor=False), 1)
    big = max(loops, key=lambda lp: lp.length)
    assert loop_hausdorff(big, shape, L) < 2.0 / L


# --- flat-part fluctuation -----------------------------------------------------------------

def test_horizontal_line_profile():
    L = 100
    line = np.array([[0, 7], [L, 7]], dtype=float)
    r = flat_fluctuation(line, L, 0.1, 0.2)
    assert r.applicable and np.all(r.rho == 7) and r.sup == 7
    assert r.x[0] == 22 and r.x[-1] == 78


def test_sawtooth_profile():
    L = 120
    xs = np.arange(0, L + 1, 2)
    ys = np.where((xs // 2) % 2 == 0, 1, 3)
    r = flat_fluctuation(np.column_stack([xs, ys]).astype(float), L, 0.0, 0.1, window=6)
    assert r.sup == 3
    # every full window spans a peak
    full = len(r.rho) // r.window
    assert np.all(r.window_sups[:full] == 3)


def test_profile_ignores_points_above_half():
    # a closed loop: the top side at L - 5 must not count
    L = 64
    loop = square(0, 1) * np.array([L, L - 10]) + np.array([0, 5])
    r = flat_fluctuation(loop, L, 0.05, 0.1)
    assert np.all(r.rho == 5)


def test_profile_not_applicable():
    L = 64
    high = np.array([[0, 50], [L, 50]], dtype=float)
    assert not flat_fluctuation(high, L, 0.1, 0.2).applicable
    assert not flat_fluctuation(high, L, 0.1, 0.5).applicable


def test_profile_skips_uncovered_columns():
    L = 100
    part = np.array([[0, 4], [40, 4]], dtype=float)
    r = flat_fluctuation(part, L, 0.0, 0.2)
    assert r.applicable and r.skipped == 60 - 20


def test_default_window_length():
    L = 1000
    r = flat_fluctuation(np.array([[0, 3], [L, 3]], dtype=float), L, 0.05, 0.1)
    assert r.window == int(L ** (2 / 3 - 0.05))


def test_column_heights_vertical_edges_capped():
    poly = np.array([[2, 0], [2, 10], [4, 10]], dtype=float)
    out = column_heights(poly, np.array([2, 3, 5]), 6)
    assert out[0] == 6
    assert math.isnan(out[1]) and math.isnan(out[2])


# --- regression and cascade ------------------------------------------------------------------

@pytest.mark.parametrize("exponent", [1 / 3, 1 / 2, 0.21])
def test_regression_recovers_power_law(exponent):
    L = 2.0 ** np.arange(9, 14)
    r = exponent_regression(L, 2.5 * L**exponent)
    assert r.slope == pytest.approx(exponent, abs=1e-12)
    assert r.intercept == pytest.approx(math.log(2.5), abs=1e-12)
    assert r.stderr == pytest.approx(0.0, abs=1e-12)


def test_regression_weights_and_noise():
    rng = np.random.default_rng(1)
    L = 2.0 ** np.arange(6, 14)
    y = L ** 0.4 * np.exp(rng.normal(0, 0.02, L.size))
    r = exponent_regression(L, y, weights=np.ones(L.size) * 7.0)
    r0 = exponent_regression(L, y)
    assert r.slope == pytest.approx(r0.slope, abs=1e-12)
    assert r.stderr > 0 and abs(r.slope - 0.4) < 5 * r.stderr
    assert r.residuals.shape == L.shape


def test_regression_errors():
    with pytest.raises(ValueError):
        exponent_regression([1, 2], [1, 2])
    with pytest.raises(ValueError):
        exponent_regression([1, 2, 3], [1, -2, 3])


def test_cascade_target():
    assert cascade_target(0, 4) == pytest.approx(1 / 3)
    assert cascade_target(2, 4) == pytest.approx(1 / 6)
    assert cascade_target(4, 4) == 0.0


# --- maxima ------------------------------------------------------------------------------

def test_maxima_centres():
    r = maxima_report([7, 6, 7, 8], [4, 5, 4, 4], params(1024, 2, beta=0.8))
    assert round(r.floor_center, 2) == 6.50 and round(r.free_center, 2) == 4.33
    assert r.floor_ok and r.free_ok
    assert r.floor_mean == 7.0 and r.free_mean == 4.25
    far = maxima_report([12, 12, 13], [0, 1, 0], params(1024, 2, beta=0.8))
    assert not far.floor_ok and not far.free_ok


def test_maxima_ci():
    r = maxima_report([5, 7], [3], params())
    # sample sd sqrt(2) over sqrt(2) samples times the 97.5% t quantile with 1 dof
    assert r.floor_ci == pytest.approx(12.706204736174705, rel=1e-9)
    assert math.isinf(r.free_ci) and not r.dominates


@pytest.fixture(scope="module")
def small_runs():
    beta, L = 0.8, 32
    out = {}
    for floor in (True, False):
        fields = []
        for s in range(12):
            f = new_field(L, 0, 0, floor=floor, seed=100 + s)
            run_sweeps(f, 400, beta)
            fields.append(f)
        out[floor] = fields
    return out


def test_floor_runs_dominate(small_runs):
    r = maxima_report(small_runs[True], small_runs[False], params(32, 1, beta=0.8))
    assert r.dominates


def test_free_maximum_nonnegative(small_runs):
    assert all(f.heights.max() >= 0 for f in small_runs[False])
