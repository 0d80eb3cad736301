import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mixedpelt.glmer import GlmerCost
from mixedpelt.panel import GroupSpec, TimeSeriesPanel
from mixedpelt.pelt import (CostEvaluationError, DetectionError, FunctionCost, PenaltySpec,
                            default_min_seg, default_penalty, exhaustive_detect,
                            penalty_constant, pelt_detect)


def normal_mean_cost(x):
    """-2 log-likelihood of a Gaussian mean segment with unit variance (up to a constant)."""
    c1 = np.concatenate([[0.0], np.cumsum(x)])
    c2 = np.concatenate([[0.0], np.cumsum(x * x)])

    def cost(s, e):
        m = e - s
        d = c1[e] - c1[s]
        return float(c2[e] - c2[s] - d * d / m)
    return cost


def enumerate_best(cost, n, beta, min_seg):
    """Brute force over all 2^(n-1) changepoint sets."""
    best = math.inf
    best_cps = None
    for r in range(n):
        for cps in itertools.combinations(range(1, n), r):
            b = (0,) + cps + (n,)
            if any(e - s < min_seg for s, e in zip(b, b[1:])):
                continue
            v = sum(cost(s, e) for s, e in zip(b, b[1:])) + beta * r
            if best_cps is None or v < best - 1e-12 * max(1.0, abs(best)):
                best, best_cps = v, cps
    return best, best_cps


@given(st.integers(2, 11), st.integers(1, 3), st.floats(0, 8), st.integers(0, 2**31 - 1))
def test_pelt_matches_full_enumeration(n, min_seg, beta, seed):
    if n < min_seg:
        return
    x = np.random.default_rng(seed).standard_normal(n) * 2
    model = FunctionCost(normal_mean_cost(x), n, default_min_seg=min_seg)
    res = pelt_detect(model, beta)
    best, cps = enumerate_best(model.cost, n, beta, min_seg)
    assert res.objective == pytest.approx(best, rel=1e-9, abs=1e-9)
    assert res.recomputed_objective() == pytest.approx(best, rel=1e-9, abs=1e-9)
    assert res.changepoints == cps


@given(st.integers(5, 120), st.integers(1, 6), st.floats(0, 20), st.integers(0, 2**31 - 1))
def test_pelt_equals_exhaustive(n, min_seg, beta, seed):
    if n < min_seg:
        return
    rng = np.random.default_rng(seed)
    levels = rng.normal(0, 3, size=4)
    x = levels[np.sort(rng.integers(0, 4, size=n))] + rng.standard_normal(n)
    model = FunctionCost(normal_mean_cost(x), n, default_min_seg=min_seg)
    a = pelt_detect(model, beta)
    b = exhaustive_detect(model, beta)
    assert a.changepoints == b.changepoints
    assert abs(a.objective - b.objective) <= 1e-9 * max(1.0, abs(b.objective))
    assert all(e - s >= min_seg for s, e in a.segmentation.segments())


def test_pelt_prunes(rng):
    x = np.repeat(np.arange(20) % 2 * 5.0, 50) + rng.standard_normal(1000)
    res = pelt_detect(FunctionCost(normal_mean_cost(x), 1000), 3 * math.log(1000))
    assert res.pruning_stats.max() < 200
    assert res.M == 19


@pytest.mark.parametrize("seed", range(10))
def test_constant_series_has_no_changepoints(seed):
    rng = np.random.default_rng(seed)
    panel = TimeSeriesPanel(3.0 + rng.standard_normal((100, 6)), GroupSpec((3, 3)))
    model = GlmerCost(panel, "normal")
    res = pelt_detect(model, default_penalty(model.model_kind, 100, p=3))
    assert res.M == 0


def test_step_series(rng):
    x = np.concatenate([np.zeros(50), np.full(50, 5.0)]) + rng.standard_normal(100)
    model = FunctionCost(normal_mean_cost(x), 100)
    res = pelt_detect(model, 2 * math.log(100))
    assert len(res.changepoints) == 1 and abs(res.changepoints[0] - 50) <= 1
    assert res.changepoints == exhaustive_detect(model, 2 * math.log(100)).changepoints


def test_n_equal_min_seg_gives_single_segment(rng):
    x = rng.standard_normal(6) * 10
    res = pelt_detect(FunctionCost(normal_mean_cost(x), 6, default_min_seg=6), 0.0)
    assert res.M == 0
    assert res.segmentation.segments() == [(0, 6)]


def test_ties_go_to_the_earliest_candidate():
    # every segmentation has the same objective with a zero cost and zero penalty
    model = FunctionCost(lambda s, e: 0.0, 8)
    assert pelt_detect(model, 0.0).M == 0
    assert exhaustive_detect(model, 0.0).M == 0


def test_zero_penalty_beats_every_enumerated_segmentation(rng):
    x = rng.standard_normal(10)
    cost = normal_mean_cost(x)
    res = pelt_detect(FunctionCost(cost, 10), 0.0)
    for r in range(10):
        for cps in itertools.combinations(range(1, 10), r):
            b = (0,) + cps + (10,)
            assert res.objective <= sum(cost(s, e) for s, e in zip(b, b[1:])) + 1e-12


def test_min_seg_below_default_needs_force(rng):
    model = FunctionCost(normal_mean_cost(rng.standard_normal(30)), 30, default_min_seg=5)
    with pytest.raises(DetectionError, match="force"):
        pelt_detect(model, 1.0, min_seg=2)
    assert pelt_detect(model, 1.0, min_seg=2, force=True).min_seg == 2


def test_exhaustive_limit():
    model = FunctionCost(lambda s, e: 0.0, 2001)
    with pytest.raises(DetectionError, match="2000"):
        exhaustive_detect(model, 1.0)


@pytest.mark.parametrize("kwargs", [dict(penalty=-1.0), dict(penalty=math.inf),
                                    dict(penalty=1.0, min_seg=0), dict(penalty=1.0, n=11),
                                    dict(penalty=1.0, min_seg=11)])
def test_invalid_requests(kwargs):
    model = FunctionCost(lambda s, e: 0.0, 10)
    with pytest.raises(DetectionError):
        pelt_detect(model, **kwargs)


def test_cost_failure_names_the_segment():
    def bad(s, e):
        if (s, e) == (0, 5):
            raise FloatingPointError("boom")
        return 1.0
    with pytest.raises(CostEvaluationError) as info:
        pelt_detect(FunctionCost(bad, 8), 0.5)
    assert info.value.segment == (0, 5)


def test_penalties():
    assert default_penalty("glmer-bernoulli", 96, p=56).beta == pytest.approx(56 * math.log(96))
    assert default_penalty("glmer-bernoulli", 672, p=8).beta == pytest.approx(8 * math.log(672))
    for kind in ("lmec-ub", "lmec-hb"):
        spec = default_penalty(kind, 1000, K=4)
        assert spec.C == 14
        assert spec.beta == pytest.approx(14 * math.log(1000))
    assert default_penalty("lmec-hb", 100, K=4, C=2.5).beta == pytest.approx(2.5 * math.log(100))
    assert penalty_constant("glmer-normal", p=3) == 3
    with pytest.raises(DetectionError):
        penalty_constant("glmer-bernoulli")
    with pytest.raises(DetectionError):
        penalty_constant("arima", K=4)
    with pytest.raises(DetectionError):
        PenaltySpec(-0.1)


def test_default_min_seg_rule():
    assert default_min_seg("glmer-bernoulli", p=56) == 56
    assert default_min_seg("lmec-ub", P=20) == 40
    assert default_min_seg("lmec-hb", P=56) == 112


def test_prune_slack(rng):
    x = np.repeat(np.arange(10) % 2 * 4.0, 30) + rng.standard_normal(300)
    model = FunctionCost(normal_mean_cost(x), 300)
    base = pelt_detect(model, 10.0)
    loose = pelt_detect(model, 10.0, prune_slack=25.0)
    none = pelt_detect(model, 10.0, prune_slack=math.inf)
    assert base.changepoints == loose.changepoints == none.changepoints
    assert base.pruning_stats.sum() <= loose.pruning_stats.sum() <= none.pruning_stats.sum()
    np.testing.assert_array_equal(none.pruning_stats[1:], np.arange(1, 301))
    with pytest.raises(DetectionError):
        pelt_detect(model, 10.0, prune_slack=-1.0)
