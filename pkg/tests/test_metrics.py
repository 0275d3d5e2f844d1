import itertools
import json
import math

import numpy as np
import pytest

from spectral_rasch import ResponseMatrix, UndefinedMetricError, auc, l2_error, linf_rel_error, log_likelihood, topk_accuracy
from spectral_rasch.errors import ContractError
from spectral_rasch.metrics import evaluate_estimate, heldout_predictions, reference_ranking


def brute_auc(scores, labels):
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    wins = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p, n in itertools.product(pos, neg))
    return wins / (len(pos) * len(neg))


class TestAUC:
    def test_perfect(self):
        assert auc([0.9, 0.1], [1, 0]) == 1.0

    def test_all_ties(self):
        assert auc([0.3] * 6, [1, 0, 1, 0, 0, 1]) == 0.5

    def test_concordant_pairs(self):
        assert auc([0.8, 0.7, 0.6, 0.5], [1, 0, 1, 0]) == 0.75

    def test_single_class(self):
        with pytest.raises(UndefinedMetricError):
            auc([0.1, 0.2], [1, 1])

    def test_brute_force_and_monotone_invariance(self, rng):
        for _ in range(30):
            k = int(rng.integers(2, 40))
            scores = np.round(rng.random(k), 1)
            labels = rng.integers(0, 2, k)
            if labels.min() == labels.max():
                continue
            a = auc(scores, labels)
            assert a == pytest.approx(brute_auc(scores, labels))
            assert auc(np.exp(3 * scores) - 7, labels) == pytest.approx(a)


class TestErrors:
    def test_l2(self):
        assert l2_error([0.1, 0.2], [0.1, 0.2]) == 0
        assert l2_error([1.5, 2.5, 0.0], [0.0, 1.0, -1.5]) == pytest.approx(0)
        assert l2_error([1, -1], [0, 0]) == pytest.approx(math.sqrt(2))

    def test_l2_triangle(self, rng):
        for _ in range(50):
            a, b, c = rng.normal(size=(3, 6))
            assert l2_error(a, c) <= l2_error(a, b) + l2_error(b, c) + 1e-12

    def test_linf(self):
        assert linf_rel_error([0.2, 0.8], [0.2, 0.8]) == 0
        assert linf_rel_error([0.6, 0.4], [0.5, 0.5]) == pytest.approx(0.2)
        perm = [1, 2, 0]
        a, b = np.array([0.1, 0.3, 0.6]), np.array([0.2, 0.2, 0.6])
        assert linf_rel_error(a[perm], b[perm]) == linf_rel_error(a, b)

    def test_length_mismatch(self):
        with pytest.raises(ContractError):
            l2_error([1, 2], [1, 2, 3])


class TestTopK:
    def test_same_order(self):
        beta = np.array([0.5, 2.0, -1.0, 1.0])
        ref = np.argsort(-beta)
        assert topk_accuracy(beta, ref, [1, 2, 3, 4]) == {1: 1.0, 2: 1.0, 3: 1.0, 4: 1.0}

    def test_reversed_full_overlap(self):
        beta = np.array([3.0, 2.0, 1.0, 0.0])
        assert topk_accuracy(beta, [3, 2, 1, 0], [4])[4] == 1.0

    def test_disjoint(self):
        # beta ranking (items 1,2,3,4) vs reference (3,4,1,2), 0-indexed
        beta = np.array([4.0, 3.0, 2.0, 1.0])
        assert topk_accuracy(beta, [2, 3, 0, 1], [2])[2] == 0.0

    def test_ties_by_index(self):
        assert topk_accuracy(np.zeros(3), [0, 1, 2], [1])[1] == 1.0

    def test_smallest_orientation(self):
        assert topk_accuracy([3.0, 1.0, 2.0], [1, 2, 0], [1], largest=False)[1] == 1.0

    def test_k_too_large(self):
        with pytest.raises(ContractError):
            topk_accuracy([0.0, 1.0], [0, 1], [3])


class TestHeldout:
    def test_zero_theta_scores_log_half(self):
        X = ResponseMatrix([[1, 0, 1, 0], [0, 1, 1, 0]], np.ones((2, 4), dtype=bool))
        # beta = 0 and a two-item fit half: theta is 0 iff the half is mixed
        for seed in range(20):
            prob, label, _, _ = heldout_predictions(X, np.zeros(4), seed)
            mixed = np.isclose(prob, 0.5)
            if mixed.all():
                assert log_likelihood(X, np.zeros(4), seed) == pytest.approx(math.log(0.5))
                break
        else:
            pytest.fail("no seed produced balanced fit halves")

    def test_clamped_prediction(self):
        # fit half all positive -> theta = +10; scored half positive too
        X = ResponseMatrix([[1, 1]] * 3, np.ones((3, 2), dtype=bool))
        ll = log_likelihood(X, np.zeros(2))
        assert ll == pytest.approx(-math.log1p(math.exp(-10)))
        assert ll == pytest.approx(-4.54e-5, rel=1e-3)

    def test_no_evaluable_users(self):
        X = ResponseMatrix([[1, 0], [0, 1]], [[True, False], [False, True]])
        with pytest.warns(UserWarning):
            with pytest.raises(UndefinedMetricError):
                log_likelihood(X, np.zeros(2))

    def test_fit_and_score_disjoint(self):
        X = ResponseMatrix(np.eye(6, dtype=int)[:, :6], np.ones((6, 6), dtype=bool))
        prob, label, scored, skipped = heldout_predictions(X, np.zeros(6))
        assert label.size == 6 * 3 and scored == 6 and skipped == 0


def test_reference_ranking_filters():
    values = np.array([[1, 1, 0, 1], [1, 0, 0, 1], [1, 1, 1, 0]])
    assigned = np.ones((3, 4), dtype=bool)
    assigned[1:, 3] = False  # item 3: mean 1.0 from a single response
    X = ResponseMatrix(values, assigned)
    np.testing.assert_array_equal(reference_ranking(X), [0, 3, 1, 2])
    np.testing.assert_array_equal(reference_ranking(X, min_count=2, max_mean=0.9), [0, 1, 2])


def test_evaluate_report_serializes():
    X = ResponseMatrix([[1, 0, 1], [0, 0, 1], [1, 1, 1], [0, 0, 0], [1, 0, 0]], np.ones((5, 3), dtype=bool))
    r = evaluate_estimate(X, np.array([-0.2, 0.6, -0.4]), Ks=[1, 2], reference=reference_ranking(X))
    d = json.loads(r.to_json())
    assert set(d["topk"]) == {"1", "2"}
    assert r.to_csv().startswith("metric,value\nauc,")
