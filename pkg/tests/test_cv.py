import math

import numpy as np
import pytest

from kdesum.cv import bandwidth_sweep, lkcv_score, log_scales, lscv_score, pilot_bandwidth
from kdesum.dataset import PointSet, generate
from kdesum.engine import EngineConfig


def K(h, d):
    return math.exp(-d * d / (2 * h * h))


def V(h):
    return math.sqrt(2 * math.pi) * h


EXACT = EngineConfig(epsilon=0.0)


@pytest.mark.parametrize("engine", ["naive", "dfd", "dfgt"])
def test_two_point_hand_formulas(engine):
    pts = PointSet([[0.0], [0.7]])
    h, d = 0.3, 0.7
    cfg = EngineConfig(epsilon=0.0, algorithm=engine)
    assert lkcv_score(pts, h, engine, config=cfg) == pytest.approx(math.log(K(h, d) / V(h)), rel=1e-12)
    expect = K(2 * h, d) / V(2 * h) - 2 * K(h, d) / V(h)
    assert lscv_score(pts, h, engine, config=cfg) == pytest.approx(expect, rel=1e-12)


def test_two_point_sqrt2_convolution():
    pts = PointSet([[0.0], [0.7]])
    h, d = 0.3, 0.7
    hc = math.sqrt(2) * h
    expect = K(hc, d) / V(hc) - 2 * K(h, d) / V(h)
    assert lscv_score(pts, h, "naive", convolution="sqrt2") == pytest.approx(expect, rel=1e-12)


def test_duplicated_pair():
    pts = PointSet([[1.5], [1.5]])
    h = 0.4
    assert lkcv_score(pts, h, "naive") == pytest.approx(-math.log(V(h)), rel=1e-13)


def test_point_duplicated_k_times():
    k, h = 5, 0.25
    pts = PointSet(np.vstack([np.zeros((k, 2)), [[100.0, 0.0]]]))
    # the far point's leave-one-out sum underflows to 0 and is clamped
    with pytest.warns(RuntimeWarning, match="clamped"):
        score = lkcv_score(pts, h, "naive")
    n = k + 1
    V2 = 2 * math.pi * h * h
    tiny = np.finfo(float).tiny * np.finfo(float).eps
    expect = (k * math.log(k - 1) + math.log(tiny)) / n - math.log((n - 1) * V2)
    assert math.isfinite(score)
    assert score == pytest.approx(expect, rel=1e-12)
    # without the isolated point nothing is clamped
    dup = PointSet(np.zeros((k, 2)))
    assert lkcv_score(dup, h, "naive") == pytest.approx(math.log((k - 1) / ((k - 1) * V2)), rel=1e-13)


@pytest.mark.filterwarnings("ignore:.*clamped")
def test_engine_independence_500_points():
    pts = generate("mixture", 500, 2, seed=21)
    base = pilot_bandwidth(pts)
    eps = 0.01
    for s in (0.1, 1.0, 10.0):
        h = base * s
        for fn in (lkcv_score, lscv_score):
            exact = fn(pts, h, "naive")
            for engine in ("dfgt", "dfd"):
                approx = fn(pts, h, engine, eps)
                assert abs(approx - exact) <= 10 * eps * abs(exact) + 10 * eps


def test_argmin_within_one_step_of_naive():
    x = PointSet(np.random.default_rng(31).normal(size=200))
    scales = log_scales(40, 1e-2, 1e2)
    a = np.argmin([r.score for r in bandwidth_sweep(x, scales, engine="naive")])
    b = np.argmin([r.score for r in bandwidth_sweep(x, scales, engine="dfgt", epsilon=0.01)])
    assert abs(int(a) - int(b)) <= 1


def test_bimodal_lscv_not_monotone():
    rng = np.random.default_rng(0)
    x = PointSet(np.concatenate([rng.normal(-3, 0.5, 150), rng.normal(3, 0.5, 150)]))
    s = [r.score for r in bandwidth_sweep(x, log_scales(), engine="naive")]
    diffs = np.sign(np.diff(s))
    assert (diffs > 0).any() and (diffs < 0).any()
    assert any(s[i] < s[i - 1] and s[i] < s[i + 1] for i in range(1, len(s) - 1))


def test_sweep_structure():
    pts = generate("uniform", 150, 2, seed=3)
    rows = bandwidth_sweep(pts, log_scales(), engine="dfgt", verify=True)
    assert len(rows) == 7
    assert all(r.seconds >= 0 for r in rows)
    assert all(b.h > a.h for a, b in zip(rows, rows[1:]))
    assert all(r.max_rel_err <= 0.01 for r in rows)
    one = bandwidth_sweep(pts, [1.0], base_h=0.2, kind="lkcv", engine="naive")
    assert one[0].score == lkcv_score(pts, 0.2, "naive")
    assert math.isnan(one[0].max_rel_err)


def test_sweep_rejects_bad_input():
    pts = generate("uniform", 20, 1, seed=3)
    with pytest.raises(ValueError):
        bandwidth_sweep(pts, [1.0, 0.5])
    with pytest.raises(ValueError):
        bandwidth_sweep(pts, [1.0], base_h=-1)
    with pytest.raises(ValueError):
        bandwidth_sweep(pts, [1.0], kind="aic")
    with pytest.raises(ValueError):
        lscv_score(pts, 0.1, convolution="3x")
    with pytest.raises(ValueError):
        lkcv_score(PointSet([[0.0]]), 0.1)


def test_pilot_bandwidth():
    rng = np.random.default_rng(4)
    data = rng.normal(size=(1000, 2)) * [1.0, 3.0]
    expect = data.std(axis=0, ddof=1).mean() * 1000 ** (-1 / 6)
    assert pilot_bandwidth(data) == pytest.approx(expect, rel=1e-14)
    with pytest.raises(ValueError):
        pilot_bandwidth(np.zeros((5, 2)))


def test_lscv_large_bandwidth_finite():
    pts = generate("uniform", 100, 1, seed=2)
    s = lscv_score(pts, 1e6, "naive")
    assert math.isfinite(s) and s < 0
    assert s == pytest.approx(1 / V(2e6) - 2 / V(1e6), rel=1e-6)
