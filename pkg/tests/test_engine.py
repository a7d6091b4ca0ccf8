import math

import numpy as np
import pytest

from kdesum.dataset import PointSet, generate
from kdesum.engine import (
    EngineConfig,
    ReferenceModel,
    dfd_kde,
    dfgt_kde,
    naive_kde,
    run_engine,
    verify_relative_error,
)

SCALES = [1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3]


def pilot(ps):
    return float(ps.data.std(axis=0, ddof=1).mean() * ps.n ** (-1 / (ps.d + 4)))


def brute(q, r, h):
    q, r = np.atleast_2d(q), np.atleast_2d(r)
    return np.array([sum(math.exp(-np.sum((x - y) ** 2) / (2 * h * h)) for y in r) for x in q])


def test_naive_examples():
    assert naive_kde([[0.3, 0.4]], [[0.3, 0.4]], 0.1)[0] == 1.0
    d, h = 0.8, 0.5
    assert naive_kde([[0.0]], [[0.0], [d]], h)[0] == pytest.approx(1 + math.exp(-d * d / (2 * h * h)), rel=1e-15)
    pts = generate("uniform", 50, 2, seed=1)
    np.testing.assert_allclose(naive_kde(pts, pts, 1e6 * math.sqrt(2)), 50, rtol=1e-6)


def test_naive_matches_loop_oracle(rng):
    q, r = rng.normal(size=(13, 3)), rng.normal(size=(29, 3))
    np.testing.assert_allclose(naive_kde(q, r, 0.7, chunk_elems=50), brute(q, r, 0.7), rtol=1e-13)


def test_dimension_mismatch():
    for fn in (naive_kde, dfd_kde, dfgt_kde):
        with pytest.raises(ValueError, match="dimension"):
            fn(np.zeros((3, 2)), np.zeros((3, 3)), 1.0)


def test_bad_bandwidth_and_epsilon():
    pts = np.zeros((4, 2))
    with pytest.raises(ValueError):
        dfgt_kde(pts, pts, 0.0)
    with pytest.raises(ValueError):
        dfgt_kde(pts, pts, -1.0)
    with pytest.raises(ValueError):
        EngineConfig(epsilon=-0.1)


@pytest.mark.parametrize("fn", [dfd_kde, dfgt_kde])
def test_single_point(fn):
    p = PointSet([[1.0, 2.0]])
    for eps in (0.0, 0.01, 10.0):
        assert fn(p, p, 0.3, eps)[0] == pytest.approx(1.0, rel=1e-15)


@pytest.mark.parametrize("fn", [dfd_kde, dfgt_kde])
def test_epsilon_zero_matches_naive(fn):
    pts = generate("mixture", 800, 2, seed=4)
    for s in (1e-3, 1.0, 1e3):
        h = pilot(pts) * s
        err, _, _ = verify_relative_error(fn(pts, pts, h, 0.0), naive_kde(pts, pts, h))
        assert err <= 1e-12


def test_dfd_random_1000():
    rng = np.random.default_rng(5)
    q, r = PointSet(rng.random((1000, 2))), PointSet(rng.random((1000, 2)))
    for h in (0.001, 0.02, 0.3):
        assert verify_relative_error(dfd_kde(q, r, h, 0.01), naive_kde(q, r, h))[0] <= 0.01


@pytest.mark.parametrize("fn", [dfd_kde, dfgt_kde])
def test_seven_scales_500_points(fn):
    pts = generate("mixture", 500, 2, seed=2)
    for s in SCALES:
        h = pilot(pts) * s
        assert verify_relative_error(fn(pts, pts, h, 0.01), naive_kde(pts, pts, h))[0] <= 0.01


def test_absurd_epsilon_prunes_at_root_and_balances():
    pts = generate("uniform", 300, 2, seed=3)
    h = 0.5
    exact = naive_kde(pts, pts, h)
    res = dfgt_kde(pts, pts, h, 1e6, exact=exact)
    assert res.stats["calls"] == 1 and res.stats["kernel_evals"] == 0
    np.testing.assert_array_equal(res.cover, 1)
    np.testing.assert_allclose(res.sums, res.sum_exhaustive + res.sum_farfield + res.sum_local, rtol=0)


def test_distinct_query_set(rng):
    q = PointSet(rng.normal(size=(700, 3)))
    r = PointSet(rng.normal(size=(900, 3)) + 0.5)
    for h in (0.05, 0.5, 5.0):
        exact = naive_kde(q, r, h)
        assert verify_relative_error(dfgt_kde(q, r, h, 0.01), exact)[0] <= 0.01
        assert verify_relative_error(dfd_kde(q, r, h, 0.01), exact)[0] <= 0.01


def test_global_guarantee_random_instances():
    rng = np.random.default_rng(2024)
    for k in range(50):
        d = int(rng.integers(1, 4))
        n = int(rng.integers(50, 2001))
        pts = generate(["mixture", "uniform", "clustered"][k % 3], n, d, seed=k)
        h = pilot(pts) * 10 ** rng.uniform(-3, 3)
        exact = naive_kde(pts, pts, h)
        model = ReferenceModel(pts)
        for eps in (0.1, 0.01, 0.001):
            err = verify_relative_error(dfgt_kde(model, model, h, eps), exact)[0]
            assert err <= eps, (k, d, n, h, eps, err)


def test_bookkeeping_small_instances():
    rng = np.random.default_rng(77)
    for k in range(12):
        d = int(rng.integers(1, 4))
        pts = generate("mixture", int(rng.integers(2, 200)), d, seed=100 + k)
        h = pilot(pts) * 10 ** rng.uniform(-2, 2)
        exact = naive_kde(pts, pts, h)
        for fn in (dfgt_kde, dfd_kde):
            res = fn(pts, pts, h, 0.01, exact=exact)
            assert res.stats["bound_violations"] == 0
            assert res.stats["checkpoints"] > 0
            np.testing.assert_array_equal(res.cover, 1)
            assert np.all(res.lower <= exact * (1 + 1e-10))
            assert np.all(res.upper >= exact * (1 - 1e-10))


def test_deterministic():
    pts = generate("clustered", 1500, 2, seed=9)
    h = pilot(pts)
    a = dfgt_kde(pts, pts, h, 0.01)
    b = dfgt_kde(pts, pts, h, 0.01)
    np.testing.assert_array_equal(a, b)


def test_kernel_evals_monotone_in_epsilon():
    pts = generate("mixture", 2000, 2, seed=11)
    for s in (0.1, 1.0):
        h = pilot(pts) * s
        evals = [dfgt_kde(pts, pts, h, eps, detailed=True).stats["kernel_evals"] for eps in (1e-3, 1e-2, 1e-1)]
        assert evals[0] >= evals[1] >= evals[2]


def test_reference_model_caches_moments():
    pts = generate("uniform", 400, 2, seed=1)
    m = ReferenceModel(pts)
    a = m.moments(0.1, 6)
    assert m.moments(0.1, 6) is a
    assert m.moments(0.2, 6) is not a
    r1 = dfgt_kde(m, m, 0.1)
    r2 = dfgt_kde(pts, pts, 0.1)
    np.testing.assert_array_equal(r1, r2)


def test_pmax_and_cost_model_options():
    pts = generate("mixture", 1000, 3, seed=6)
    h = pilot(pts)
    exact = naive_kde(pts, pts, h)
    for cfg in (EngineConfig(p_max=2), EngineConfig(cost_model="terms"), EngineConfig(centroid_prune=False),
                EngineConfig(leaf_threshold=3)):
        assert verify_relative_error(dfgt_kde(pts, pts, h, config=cfg), exact)[0] <= 0.01


def test_run_engine_dispatch():
    pts = generate("mixture", 300, 2, seed=8)
    h = pilot(pts)
    exact = naive_kde(pts, pts, h)
    for algo in ("naive", "dfd", "dfgt", "gridfft"):
        out = run_engine(algo, pts, pts, h, EngineConfig(algorithm=algo))
        assert verify_relative_error(out, exact)[0] <= 0.01
    with pytest.raises(ValueError):
        run_engine("magic", pts, pts, h)


def test_verify_examples():
    x = np.array([1.0, 2.0, 3.0])
    assert verify_relative_error(x, x)[0] == 0
    assert verify_relative_error(1.01 * x, x)[0] == pytest.approx(0.01)
    y = x.copy()
    y[1] *= 1.05
    err, idx, per = verify_relative_error(y, x)
    assert err == pytest.approx(0.05) and idx == 1 and per[0] == 0
    with pytest.raises(ValueError):
        verify_relative_error(x, x[:2])


def test_verify_underflowed_exact():
    err, idx, _ = verify_relative_error([0.0, 1e-300], [0.0, 0.0])
    assert err == math.inf and idx == 1
