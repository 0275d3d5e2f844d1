import math

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from spectral_rasch import (
    DegenerateItemError,
    EstimatorConfig,
    IncompleteMatrixError,
    PairwiseStats,
    ResponseMatrix,
    conditional_ratio_matrix,
    eigenvector_estimate,
    exact_conditional_matrix,
    pairwise_loglik,
    pmle_mm_estimate,
    rowsum_estimate,
    spectral_estimate,
    theta_mle,
)
from spectral_rasch.baselines import ConditionalMatrix
from spectral_rasch.chain import pairwise_diff_counts
from spectral_rasch.errors import ContractError

from conftest import synthetic

HALF_LOG2 = math.log(2) / 2


def stats_from(Y):
    Y = np.asarray(Y, dtype=float)
    return PairwiseStats(Y, ((Y + Y.T) > 0).astype(int), 0.0)


def fd_gradient(f, x, h=1e-6):
    g = np.zeros_like(x)
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h
        g[k] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def random_counts(rng, m, scale=20):
    Y = rng.integers(1, scale, size=(m, m)).astype(float)
    np.fill_diagonal(Y, 0)
    return Y


class TestConditionalMatrix:
    def test_arithmetic(self):
        cm = conditional_ratio_matrix(stats_from([[0, 2], [1, 0]]))
        assert cm.f[0, 1] == pytest.approx(2 / 3)
        assert cm.D[0, 1] == pytest.approx(0.5)
        assert cm.f[0, 1] + cm.f[1, 0] == pytest.approx(1)
        assert cm.D[0, 1] * cm.D[1, 0] == pytest.approx(1)

    def test_symmetric(self):
        assert conditional_ratio_matrix(stats_from([[0, 3], [3, 0]])).D[0, 1] == 1

    def test_exact_limit(self):
        beta = np.array([0.3, -0.2, 0.8])
        cm = exact_conditional_matrix(beta)
        for i in range(3):
            for j in range(3):
                if i != j:
                    assert cm.f[i, j] == pytest.approx(math.exp(beta[j]) / (math.exp(beta[i]) + math.exp(beta[j])))

    def test_missing_pair(self):
        Y = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=float)
        with pytest.raises(IncompleteMatrixError) as exc:
            conditional_ratio_matrix(stats_from(Y))
        assert exc.value.pair == (0, 2)


class TestRowsum:
    def test_two_items(self):
        np.testing.assert_allclose(rowsum_estimate(exact_conditional_matrix([0, 1])), [-0.5, 0.5], atol=1e-15)

    def test_ones(self):
        cm = ConditionalMatrix(np.full((3, 3), 0.5), np.ones((3, 3)), np.ones((3, 3)))
        np.testing.assert_array_equal(rowsum_estimate(cm), np.zeros(3))

    def test_permutation(self, rng):
        beta = rng.normal(size=6)
        perm = rng.permutation(6)
        a = rowsum_estimate(exact_conditional_matrix(beta))
        b = rowsum_estimate(exact_conditional_matrix(beta[perm]))
        np.testing.assert_allclose(b, a[perm], atol=1e-12)


class TestEigenvector:
    def test_two_items(self):
        cm = exact_conditional_matrix([0, math.log(2)])
        np.testing.assert_allclose(cm.D, [[1, 0.5], [2, 1]])
        np.testing.assert_allclose(cm.D @ [1, 2], [2, 4])
        np.testing.assert_allclose(eigenvector_estimate(cm), [-HALF_LOG2, HALF_LOG2], atol=1e-12)

    def test_ones(self):
        cm = ConditionalMatrix(np.full((4, 4), 0.5), np.ones((4, 4)), np.ones((4, 4)))
        np.testing.assert_allclose(eigenvector_estimate(cm), np.zeros(4), atol=1e-15)

    def test_scale_invariance(self, rng):
        Y = random_counts(rng, 5)
        cm = conditional_ratio_matrix(stats_from(Y))
        scaled = ConditionalMatrix(cm.f, cm.counts, 3.7 * cm.D)
        np.testing.assert_allclose(eigenvector_estimate(scaled), eigenvector_estimate(cm), atol=1e-10)


def test_exact_recovery(rng):
    for _ in range(30):
        m = int(rng.integers(2, 11))
        beta = rng.uniform(-2, 2, m)
        cm = exact_conditional_matrix(beta)
        np.testing.assert_allclose(rowsum_estimate(cm), beta - beta.mean(), atol=1e-10)
        np.testing.assert_allclose(eigenvector_estimate(cm), beta - beta.mean(), atol=1e-10)


class TestPMLE:
    def test_two_item_closed_form(self):
        b = pmle_mm_estimate(stats_from([[0, 2], [1, 0]]))
        np.testing.assert_allclose(b, [-HALF_LOG2, HALF_LOG2], atol=1e-8)

    def test_symmetric(self):
        np.testing.assert_allclose(pmle_mm_estimate(stats_from([[0, 4], [4, 0]])), [0, 0], atol=1e-12)

    def test_zero_wins(self):
        with pytest.raises(DegenerateItemError) as exc:
            pmle_mm_estimate(stats_from([[0, 0, 0], [2, 0, 1], [1, 1, 0]]))
        assert exc.value.items == [0]

    def test_monotone_loglik(self, rng):
        for _ in range(10):
            Y = random_counts(rng, int(rng.integers(3, 9)))
            trace = []
            pmle_mm_estimate(stats_from(Y), callback=lambda k, b: trace.append(pairwise_loglik(b, Y)))
            assert len(trace) > 2
            assert (np.diff(trace) >= -1e-12 * np.abs(trace[:-1]).max()).all()

    def test_gradient_vanishes(self, rng):
        for _ in range(10):
            Y = random_counts(rng, int(rng.integers(2, 9)))
            b = pmle_mm_estimate(stats_from(Y), tol=1e-13, max_iters=100_000)
            g = fd_gradient(lambda x: pairwise_loglik(x, Y), b)
            assert np.abs(g).max() < 1e-6

    def test_loglik_orientation(self):
        # item 0 wins twice: easier item (lower beta) should be more likely
        Y = np.array([[0, 2], [1, 0]], dtype=float)
        assert pairwise_loglik([-0.1, 0.1], Y) > pairwise_loglik([0.1, -0.1], Y)

    def test_two_items_matches_spectral(self, rng):
        for _ in range(20):
            a, b = rng.integers(1, 50, size=2)
            rows = [[1, 0]] * int(a) + [[0, 1]] * int(b)
            X = ResponseMatrix(rows, np.ones((len(rows), 2), dtype=bool))
            spec = spectral_estimate(X, EstimatorConfig(nu=0)).beta
            pm = pmle_mm_estimate(pairwise_diff_counts(X, 0))
            np.testing.assert_allclose(pm, spec, atol=1e-8)


def test_cross_method_agreement():
    # dense data: every method lands within sampling noise of the others
    ests = {k: [] for k in ("spectral", "rowsum", "eigen", "pmle")}
    truths = []
    for seed in range(12):
        truth, X = synthetic(2000, 10, 1.0, seed=seed)
        s = pairwise_diff_counts(X, 1.0)
        cm = conditional_ratio_matrix(s)
        ests["spectral"].append(spectral_estimate(X).beta)
        ests["rowsum"].append(rowsum_estimate(cm))
        ests["eigen"].append(eigenvector_estimate(cm))
        ests["pmle"].append(pmle_mm_estimate(s))
        truths.append(truth.beta)
    errs = {k: np.array([np.linalg.norm(e - t) for e, t in zip(v, truths)]) for k, v in ests.items()}
    sd = np.std(errs["spectral"], ddof=1)
    for k in ests:
        for trial in range(12):
            gap = np.linalg.norm(ests[k][trial] - ests["spectral"][trial])
            assert gap < 3 * sd


class TestThetaMLE:
    def test_symmetric(self):
        fit = theta_mle([1, 0], [True, True], [0.0, 0.0])
        assert fit.theta == pytest.approx(0, abs=1e-10) and not fit.at_boundary

    def test_all_correct(self):
        assert theta_mle([1, 1, 1], [True] * 3, [0.0, 1.0, -1.0]) == (10.0, True)
        assert theta_mle([0, 0], [True, True], [0.0, 1.0]) == (-10.0, True)

    def test_single_item(self):
        assert theta_mle([1], [True], [0.0]) == (10.0, True)

    def test_no_responses(self):
        with pytest.raises(ContractError):
            theta_mle([1, 0], [False, False], [0.0, 0.0])

    def test_against_scalar_optimizer(self, rng):
        for _ in range(25):
            m = int(rng.integers(2, 15))
            beta = rng.uniform(-2, 2, m)
            x = (rng.random(m) < 0.5).astype(int)
            a = rng.random(m) < 0.8
            if not a.any() or x[a].min() == x[a].max():
                continue

            def nll(t):
                z = t - beta[a]
                return float(np.sum(np.logaddexp(0, -z) * x[a] + np.logaddexp(0, z) * (1 - x[a])))

            ref = minimize_scalar(nll, bounds=(-10, 10), method="bounded", options={"xatol": 1e-10}).x
            assert theta_mle(x, a, beta).theta == pytest.approx(ref, abs=1e-5)
