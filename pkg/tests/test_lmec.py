import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import multivariate_normal

from mixedpelt.lmec import (HB, UB, BlockCovParams, LmecCost, SampleCov, assemble_cov,
                            estimate_hb, estimate_ub, lmec_cost, logdet_quadform, param_count,
                            sample_cov)
from mixedpelt.panel import GroupSpec, PanelError, TimeSeriesPanel

sizes_st = st.lists(st.integers(2, 6), min_size=1, max_size=5)


def random_params(rng, k: GroupSpec, structure):
    A = rng.standard_normal((k.K, k.K))
    mu = A @ A.T / k.K + 0.05 * np.eye(k.K)
    eps = rng.uniform(0.2, 2.0, size=k.K if structure == UB else k.P)
    return BlockCovParams(structure, mu, eps)


def dense_terms(Sigma, y):
    L = np.linalg.cholesky(Sigma)
    z = np.linalg.solve(L, y.T)
    return 2 * np.log(np.diag(L)).sum(), float((z * z).sum())


# ---------------------------------------------------------------------------
# sample covariance


def test_sample_cov_examples():
    k = GroupSpec((2,))
    S = sample_cov(np.array([[0.0, 0.0], [2.0, 2.0]]), k).S
    np.testing.assert_array_equal(S, [[2, 2], [2, 2]])
    np.testing.assert_array_equal(sample_cov(np.ones((5, 2)) * 3, k).S, 0.0)


def test_sample_cov_brute_force(rng):
    x = rng.standard_normal((100, 4))
    k = GroupSpec((2, 2))
    m = x.shape[0]
    mean = [sum(x[t, a] for t in range(m)) / m for a in range(4)]
    brute = np.array([[sum((x[t, a] - mean[a]) * (x[t, b] - mean[b]) for t in range(m)) / (m - 1)
                       for b in range(4)] for a in range(4)])
    np.testing.assert_allclose(sample_cov(x, k).S, brute, atol=1e-12)
    np.testing.assert_allclose(sample_cov(x, k).S, np.cov(x.T), atol=1e-12)
    np.testing.assert_allclose(sample_cov(x, k, center=False).S, x.T @ x / m, atol=1e-12)


def test_sample_cov_needs_rows():
    with pytest.raises(PanelError):
        sample_cov(np.zeros((1, 2)), GroupSpec((2,)))


# ---------------------------------------------------------------------------
# estimators


def test_ub_examples():
    k = GroupSpec((2,))
    est = estimate_ub(SampleCov(np.array([[1.0, 0.5], [0.5, 1.0]]), k), k)
    assert est.sigma_mu[0, 0] == pytest.approx(0.5)
    assert est.sigma_eps[0] == pytest.approx(0.5)

    k = GroupSpec((2, 3, 4))
    est = estimate_ub(SampleCov(np.eye(9), k), k)
    np.testing.assert_array_equal(est.sigma_mu, 0.0)
    np.testing.assert_array_equal(est.sigma_eps, 1.0)

    k = GroupSpec((2, 2))
    S = np.full((4, 4), 0.5) + 0.5 * np.eye(4)
    S[:2, 2:] = S[2:, :2] = 0.3
    assert estimate_ub(SampleCov(S, k), k).sigma_mu[0, 1] == pytest.approx(0.3)


def test_hb_examples():
    k = GroupSpec((2,))
    est = estimate_hb(SampleCov(np.array([[2.0, 0.5], [0.5, 1.0]]), k), k)
    assert est.sigma_mu[0, 0] == pytest.approx(0.5)
    np.testing.assert_allclose(est.sigma_eps, [1.5, 0.5])
    k = GroupSpec((3, 2))
    np.testing.assert_array_equal(estimate_hb(SampleCov(np.eye(5), k), k).sigma_eps, 1.0)


@given(sizes_st, st.integers(0, 2**31 - 1))
def test_hb_equals_ub_on_homogeneous_diagonal(sizes, seed):
    rng = np.random.default_rng(seed)
    k = GroupSpec(tuple(sizes))
    S = assemble_cov(random_params(rng, k, UB), k)
    ub, hb = estimate_ub(SampleCov(S, k), k), estimate_hb(SampleCov(S, k), k)
    np.testing.assert_allclose(hb.sigma_eps, np.repeat(ub.sigma_eps, k.sizes), rtol=1e-12)
    np.testing.assert_allclose(hb.sigma_mu, ub.sigma_mu, rtol=1e-12)


@given(sizes_st, st.sampled_from([UB, HB]), st.integers(0, 2**31 - 1))
def test_exact_structure_is_recovered(sizes, structure, seed):
    rng = np.random.default_rng(seed)
    k = GroupSpec(tuple(sizes))
    true = random_params(rng, k, structure)
    S = SampleCov(assemble_cov(true, k), k)
    est = (estimate_ub if structure == UB else estimate_hb)(S, k)
    np.testing.assert_allclose(est.sigma_mu, true.sigma_mu, rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(est.sigma_eps, true.sigma_eps, rtol=1e-12)


def raw_moments(S, k):
    """Unrepaired block averages, written out entry by entry."""
    off = k.offsets
    mu = np.empty((k.K, k.K))
    for u in range(k.K):
        for v in range(k.K):
            block = S[off[u]:off[u + 1], off[v]:off[v + 1]]
            if u == v:
                ku = k.sizes[u]
                mu[u, u] = (block.sum() - np.trace(block)) / (ku * (ku - 1))
            else:
                mu[u, v] = block.mean()
    return mu


@given(sizes_st, st.integers(0, 2**31 - 1))
def test_averaging_identity(sizes, seed):
    rng = np.random.default_rng(seed)
    k = GroupSpec(tuple(sizes))
    Sigma = assemble_cov(random_params(rng, k, HB), k)
    x = rng.multivariate_normal(np.zeros(k.P), Sigma, size=10 * k.P)
    S = sample_cov(x, k)
    traces = S.block_traces() / np.asarray(k.sizes)
    mu = raw_moments(S.S, k)
    ub, hb = estimate_ub(S, k), estimate_hb(S, k)
    if np.linalg.eigvalsh(mu).min() > 1e-9 and np.all(np.diag(S.S) - np.diag(mu)[k.group_of] > 1e-6):
        np.testing.assert_allclose(ub.sigma_mu, mu, rtol=1e-12, atol=1e-15)
        np.testing.assert_allclose(np.diag(ub.sigma_mu) + ub.sigma_eps, traces, rtol=1e-12)
        group_mean = np.bincount(k.group_of, weights=hb.sigma_eps) / np.asarray(k.sizes)
        np.testing.assert_allclose(np.diag(hb.sigma_mu) + group_mean, traces, rtol=1e-12)


@given(sizes_st, st.sampled_from([UB, HB]), st.integers(1, 6), st.integers(0, 2**31 - 1))
def test_repair_gives_positive_definite(sizes, structure, m, seed):
    rng = np.random.default_rng(seed)
    k = GroupSpec(tuple(sizes))
    # few rows and adversarial scaling make the raw moment estimates indefinite
    x = rng.standard_normal((m, k.P)) * rng.uniform(0.01, 5, size=k.P)
    est = (estimate_ub if structure == UB else estimate_hb)(sample_cov(x, k, center=False), k)
    assert np.all(est.sigma_eps > 0)
    assert np.linalg.eigvalsh(est.sigma_mu).min() >= -1e-12
    np.linalg.cholesky(assemble_cov(est, k))


def test_estimator_needs_pairs():
    k = GroupSpec((1, 2))
    with pytest.raises(PanelError, match="k_i >= 2"):
        estimate_ub(SampleCov(np.eye(3), k), k)


# ---------------------------------------------------------------------------
# covariance assembly and Woodbury terms


def test_assemble_examples():
    k = GroupSpec((2, 1, 3))
    p = BlockCovParams(UB, np.zeros((3, 3)), np.array([1.0, 2.0, 3.0]))
    np.testing.assert_array_equal(assemble_cov(p, k), np.diag([1, 1, 2, 3, 3, 3.0]))
    k = GroupSpec((2,))
    p = BlockCovParams(UB, np.array([[0.5]]), np.array([0.5]))
    np.testing.assert_array_equal(assemble_cov(p, k), [[1, 0.5], [0.5, 1]])


def test_logdet_identity(rng):
    k = GroupSpec((3,))
    y = rng.standard_normal((7, 3))
    logdet, q = logdet_quadform(BlockCovParams(HB, np.zeros((1, 1)), np.ones(3)), k, y)
    assert logdet == pytest.approx(0.0, abs=1e-14)
    assert q == pytest.approx(float((y * y).sum()))


@given(st.lists(st.integers(2, 15), min_size=4, max_size=4), st.sampled_from([UB, HB]),
       st.integers(1, 60), st.integers(0, 2**31 - 1))
def test_logdet_quadform_matches_dense(sizes, structure, m, seed):
    rng = np.random.default_rng(seed)
    k = GroupSpec(tuple(sizes))
    params = random_params(rng, k, structure)
    y = rng.standard_normal((m, k.P)) * 2
    logdet, q = logdet_quadform(params, k, y)
    ld, qq = dense_terms(assemble_cov(params, k), y)
    assert logdet == pytest.approx(ld, rel=1e-8, abs=1e-8)
    assert q == pytest.approx(qq, rel=1e-8)


def test_logdet_near_singular_random_effect(rng):
    k = GroupSpec((5, 5, 5, 5))
    Q, _ = np.linalg.qr(rng.standard_normal((4, 4)))
    mu = Q @ np.diag([1e-6, 0.5, 1.0, 3.0]) @ Q.T
    params = BlockCovParams(HB, mu, rng.uniform(0.75, 1.25, 20))
    y = rng.standard_normal((50, 20))
    logdet, q = logdet_quadform(params, k, y)
    ld, qq = dense_terms(assemble_cov(params, k), y)
    assert logdet == pytest.approx(ld, rel=1e-6)
    assert q == pytest.approx(qq, rel=1e-6)


# ---------------------------------------------------------------------------
# segment costs


def _panel(rng, sizes, n, scale=1.0):
    k = GroupSpec(tuple(sizes))
    return TimeSeriesPanel(rng.standard_normal((n, k.P)) * scale, k)


def test_cost_matches_multivariate_normal(rng):
    panel = _panel(rng, (3, 2, 4), 40)
    for structure in (UB, HB):
        for center in (False, True):
            rows = panel.values[5:30]
            S = sample_cov(rows, panel.groups, center=center)
            est = (estimate_ub if structure == UB else estimate_hb)(S, panel.groups)
            mean = rows.mean(axis=0) if center else np.zeros(panel.P)
            oracle = -2 * multivariate_normal(mean, assemble_cov(est, panel.groups)).logpdf(rows).sum()
            got = lmec_cost(panel, 5, 30, structure, center=center)
            assert got == pytest.approx(oracle, rel=1e-10)


def test_iid_segment_cost(rng):
    panel = _panel(rng, (2, 2), 200)
    expected = 200 * 4 * (math.log(2 * math.pi) + 1)
    for structure in (UB, HB):
        for center in (False, True):
            assert lmec_cost(panel, 0, 200, structure, center) == pytest.approx(expected, rel=0.05)


@given(st.lists(st.integers(2, 5), min_size=1, max_size=4), st.sampled_from([UB, HB]),
       st.booleans(), st.integers(0, 2**31 - 1))
def test_kernel_matches_direct_cost(sizes, structure, center, seed):
    rng = np.random.default_rng(seed)
    panel = _panel(rng, sizes, 30, scale=rng.uniform(0.1, 10))
    model = LmecCost(panel, structure, center=center)
    lo = 2 if center else 1
    starts = np.arange(0, 30 - lo + 1)
    for e in (lo, 17, 30):
        ss = starts[starts <= e - lo]
        direct = np.array([lmec_cost(panel, int(s), e, structure, center) for s in ss])
        got = model.costs(ss, e)
        # rank-deficient segments (m <= P) and fits with a floored noise variance are
        # ill-conditioned, so cancellation in the cumulative sums shows there
        floored = np.array([model.fit(int(s), e).sigma_eps.min() < 1e-6 * panel.values[s:e].var()
                            for s in ss])
        well = (e - ss > panel.P) & ~floored
        np.testing.assert_allclose(got[well], direct[well], rtol=1e-8)
        np.testing.assert_allclose(got[~well], direct[~well], rtol=1e-6)


def test_cost_invariant_to_within_group_permutation(rng):
    panel = _panel(rng, (3, 4, 2), 50)
    perm = np.concatenate([rng.permutation(np.arange(a, b)) for a, b in
                           zip(panel.groups.offsets[:-1], panel.groups.offsets[1:])])
    shuffled = panel.replace_values(panel.values[:, perm])
    for structure in (UB, HB):
        assert lmec_cost(shuffled, 3, 41, structure) == pytest.approx(
            lmec_cost(panel, 3, 41, structure), rel=1e-12)


def test_model_metadata(rng):
    panel = _panel(rng, (5, 5, 5, 5), 100)
    ub, hb = LmecCost(panel, UB), LmecCost(panel, HB)
    assert ub.default_min_seg == hb.default_min_seg == 40
    assert (ub.model_kind, hb.model_kind) == ("lmec-ub", "lmec-hb")
    assert param_count(UB, panel.groups) == 14
    assert param_count(HB, panel.groups) == 30
    fit = hb.fit(0, 100)
    assert fit.sigma_eps.shape == (20,)
    np.testing.assert_allclose(np.diag(fit.correlation(panel.groups)), 1.0)
    with pytest.raises(PanelError):
        LmecCost(_panel(rng, (1, 3), 10))


def test_centered_cost_invariant_to_constant_shift(rng):
    panel = _panel(rng, (3, 3), 60)
    shifted = panel.replace_values(panel.values + rng.normal(0, 5, size=panel.P))
    for structure in (UB, HB):
        assert lmec_cost(shifted, 4, 50, structure, center=True) == pytest.approx(
            lmec_cost(panel, 4, 50, structure, center=True), rel=1e-10)


def test_consistency_at_large_m():
    k = GroupSpec((5, 5, 5))
    truth = BlockCovParams(UB, np.array([[1.0, 0.4, 0.2], [0.4, 1.2, 0.3], [0.2, 0.3, 0.8]]),
                           np.array([1.0, 0.8, 1.2]))
    L = np.linalg.cholesky(assemble_cov(truth, k))
    good = 0
    for rep in range(200):
        y = np.random.default_rng(rep).standard_normal((5000, k.P)) @ L.T
        est = estimate_ub(sample_cov(y, k, center=False), k)
        err_mu = np.abs(est.sigma_mu - truth.sigma_mu).max() / np.abs(truth.sigma_mu).max()
        err_eps = np.abs(est.sigma_eps / truth.sigma_eps - 1).max()
        good += max(err_mu, err_eps) <= 0.05
    assert good >= 190


def test_split_homogeneous_segment_sanity():
    # refitting two halves gains no more than the penalty that guards against such splits
    from mixedpelt.pelt import default_penalty
    k = GroupSpec((4, 4))
    for rep in range(100):
        rng = np.random.default_rng(rep)
        panel = TimeSeriesPanel(rng.standard_normal((200, k.P)) + rng.standard_normal((1, 2)).repeat(4, axis=1), k)
        for structure in (UB, HB):
            whole = lmec_cost(panel, 0, 200, structure)
            halves = lmec_cost(panel, 0, 100, structure) + lmec_cost(panel, 100, 200, structure)
            beta = default_penalty(f"lmec-{structure.lower()}", 200, K=k.K).beta
            assert whole <= halves + beta
