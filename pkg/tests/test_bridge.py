import itertools
import math

import numpy as np
import pytest

from soswall.bridge import bridge_stats, build_bridge, compare_profile, sup_fluctuation_scaling
from soswall.tension import tau_directed_walk


def enumerate_bridge(beta, tilt, d, a, b, lo, hi, wall=False):
    """Brute force over all interior heights in [lo, hi]: log Z and per-column marginals."""
    ys = range(max(lo, 0) if wall else lo, hi + 1)
    heights = np.arange(lo, hi + 1)
    marg = np.zeros((d + 1, len(heights)))
    weights = []
    for mid in itertools.product(ys, repeat=d - 1):
        path = (a,) + mid + (b,)
        steps = sum(abs(path[k + 1] - path[k]) for k in range(d))
        logw = -beta * (d + steps) + tilt * sum(path[:d])
        weights.append((logw, path))
    top = max(w for w, _ in weights)
    z = 0.0
    for logw, path in weights:
        w = math.exp(logw - top)
        z += w
        for k, y in enumerate(path):
            marg[k, y - lo] += w
    return top + math.log(z), marg / z


@pytest.mark.parametrize("tilt", [0.0, 0.3, -0.2])
@pytest.mark.parametrize("ab", [(0, 0), (1, 3), (-2, 0)])
def test_two_columns_vs_enumeration(tilt, ab):
    beta = 2.0
    a, b = ab
    model = build_bridge(beta, tilt, 2, a, b)
    log_z, marg = enumerate_bridge(beta, tilt, 2, a, b, model.lo, model.lo + model.m - 1)
    assert model.log_z == pytest.approx(log_z, abs=1e-10)
    np.testing.assert_allclose(model.marginals(), marg, atol=1e-12)


@pytest.mark.parametrize("wall", [False, True])
def test_five_columns_vs_enumeration(wall):
    beta, tilt, d = 1.5, 0.15, 5
    model = build_bridge(beta, tilt, d, 1, 2, M=24, wall=wall)
    lo, hi = -10, 13
    log_z, marg = enumerate_bridge(beta, tilt, d, 1, 2, lo, hi, wall=wall)
    # the brute-force window is narrower; its truncation error is ~ exp(-beta * 9)
    assert model.log_z == pytest.approx(log_z, abs=1e-4)
    p = model.marginals()
    for k in range(d + 1):
        full = dict(zip(model.heights.tolist(), p[k]))
        ref = dict(zip(range(lo, hi + 1), marg[k]))
        for y in range(0 if wall else lo, hi + 1):
            assert full.get(y, 0.0) == pytest.approx(ref[y], abs=1e-4)


def test_symmetric_midpoint():
    model = build_bridge(2.0, 0.0, 64, 3, 3)
    st = bridge_stats(model)
    assert st.mid_mean == pytest.approx(3.0, abs=1e-12)
    np.testing.assert_allclose(st.mean, st.mean[::-1], atol=1e-12)


def test_normalisation_and_edge_mass():
    model = build_bridge(2.0, 4.0 / 4096, 512, 0, 0)
    np.testing.assert_allclose(model.marginals().sum(axis=1), 1.0, atol=1e-9)
    assert model.edge_mass < 1e-10


def test_reversal_mirrors_profile():
    m1 = bridge_stats(build_bridge(2.0, 1e-3, 200, 0, 7))
    m2 = bridge_stats(build_bridge(2.0, 1e-3, 200, 7, 0))
    np.testing.assert_allclose(m1.mean, m2.mean[::-1], atol=1e-9)
    np.testing.assert_allclose(m1.var, m2.var[::-1], atol=1e-9)


def test_tilt_monotonicity():
    means = [bridge_stats(build_bridge(2.0, t, 128, 0, 0)).mean for t in (0.0, 1e-3, 5e-3, 2e-2)]
    for lo, hi in zip(means, means[1:]):
        assert np.all(hi >= lo - 1e-12)
        assert hi[64] > lo[64]


def test_window_robustness():
    m1 = build_bridge(2.0, 4.0 / 2048, 512, 0, 2)
    m2 = build_bridge(2.0, 4.0 / 2048, 512, 0, 2, M=4 * (m1.m // 2))
    s1, s2 = bridge_stats(m1), bridge_stats(m2)
    np.testing.assert_allclose(s1.mean, s2.mean, atol=1e-8)
    np.testing.assert_allclose(s1.var, s2.var, atol=1e-8)
    assert m1.log_z == pytest.approx(m2.log_z, abs=1e-8)


def test_sampled_marginals_match_tables():
    model = build_bridge(2.0, 2e-3, 48, 0, 4)
    paths = model.sample(100_000, seed=3)
    assert paths.shape == (100_000, 49)
    assert np.all(paths[:, 0] == 0) and np.all(paths[:, -1] == 4)
    p = model.marginals()
    idx = paths - model.lo
    for k in range(1, 48):
        emp = np.bincount(idx[:, k], minlength=model.m) / len(paths)
        assert 0.5 * np.abs(emp - p[k]).sum() < 0.02


def test_sampling_is_deterministic_and_splittable():
    model = build_bridge(2.0, 1e-3, 32, 0, 0)
    a = model.sample(10, seed=5)
    b = model.sample(10, seed=5)
    np.testing.assert_array_equal(a, b)
    tail = model.sample(4, seed=5, first=6)
    np.testing.assert_array_equal(a[6:], tail)


def test_wall_respected():
    model = build_bridge(2.0, -8.0 / 256, 256, 0, 0, wall=True)
    assert model.lo == 0
    assert model.sample(200, seed=1).min() >= 0


def test_errors():
    with pytest.raises(ValueError):
        build_bridge(2.0, 0.0, 1)
    with pytest.raises(ValueError):
        build_bridge(0.0, 0.0, 10)
    with pytest.raises(ValueError):
        build_bridge(2.0, 0.0, 10, -1, 0, wall=True)
    with pytest.raises(RuntimeError):
        build_bridge(2.0, 0.5, 64, max_window=32)


def test_untilted_variance_profile():
    tension = tau_directed_walk(2.0)
    model = build_bridge(2.0, 0.0, 512, 0, 0)
    for x in (128, 256, 384):
        r = compare_profile(model, 10**6, tension, x=x)
        assert r["var_rel"] < 0.10
        assert r["mean"] == pytest.approx(0.0, abs=1e-12)


def test_untilted_sup_slope_is_diffusive():
    # the wall start biases the slope upward at small L, so use the acceptance sizes
    r = sup_fluctuation_scaling(2.0, 0.0, [512, 1024, 2048, 4096, 8192], seed=2, n_paths=1000)
    assert r.slope == pytest.approx(0.5, abs=0.05)


def test_scaling_input_checks():
    with pytest.raises(ValueError):
        sup_fluctuation_scaling(2.0, 0.0, [256, 512, 1024])
    with pytest.raises(ValueError):
        sup_fluctuation_scaling(2.0, 0.0, [256, 500, 1024, 2048])
