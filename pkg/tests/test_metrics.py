import itertools

import numpy as np
import pytest
from sklearn.metrics import average_precision_score, roc_auc_score

import gram
from gram import DomainError


def brute_auc(labels, scores):
    """Pair-counting definition: P(pos > neg) + 0.5 P(pos == neg)."""
    pos = [s for y, s in zip(labels, scores) if y == 1]
    neg = [s for y, s in zip(labels, scores) if y == 0]
    wins = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p in pos for n in neg)
    return wins / (len(pos) * len(neg))


def brute_ap(labels, scores):
    """Mean precision at each true positive, scanning scores descending."""
    order = np.argsort(-np.asarray(scores, dtype=float), kind="stable")
    hits = 0
    precisions = []
    for rank, idx in enumerate(order, start=1):
        if labels[idx] == 1:
            hits += 1
            precisions.append(hits / rank)
    return sum(precisions) / hits


class TestAuc:
    def test_perfect_separation(self):
        assert gram.auc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0

    def test_inverted(self):
        assert gram.auc([0.9, 0.8, 0.2, 0.1], [0, 0, 1, 1]) == 0.0

    def test_all_tied_is_half(self):
        assert gram.auc([3.0, 3.0, 3.0, 3.0], [0, 1, 0, 1]) == 0.5

    def test_known_mixed_value(self):
        labels = [0, 1, 0, 1, 1]
        scores = [0.3, 0.2, 0.5, 0.9, 0.5]
        assert gram.auc(scores, labels) == pytest.approx(brute_auc(labels, scores), abs=1e-12)

    def test_single_class_rejected(self):
        with pytest.raises(DomainError):
            gram.auc([0.1, 0.2], [1, 1])
        with pytest.raises(DomainError):
            gram.auc([0.1, 0.2], [0, 0])

    def test_validation(self):
        with pytest.raises(DomainError):
            gram.auc([], [])
        with pytest.raises(DomainError):
            gram.auc([0.1, 0.2], [0, 2])
        with pytest.raises(DomainError):
            gram.auc([0.1, np.nan], [0, 1])
        with pytest.raises(gram.ShapeError):
            gram.auc([0.1, 0.2], [0, 1, 1])

    def test_matches_sklearn_on_random_inputs(self, rng):
        for _ in range(50):
            n = int(rng.integers(4, 40))
            labels = rng.integers(0, 2, size=n)
            if labels.min() == labels.max():
                labels[0] = 1 - labels[0]
            scores = np.round(rng.standard_normal(n), 1)  # rounding forces ties
            assert gram.auc(scores, labels) == pytest.approx(
                roc_auc_score(labels, scores), abs=1e-12
            )


class TestAveragePrecision:
    def test_perfect_ranking(self):
        assert gram.average_precision([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0

    def test_known_value(self):
        # positives at ranks 1 and 3: (1/1 + 2/3) / 2
        labels = [1, 0, 1, 0]
        scores = [0.9, 0.8, 0.7, 0.1]
        assert gram.average_precision(scores, labels) == pytest.approx(5.0 / 6.0, abs=1e-12)

    def test_no_positives_rejected(self):
        with pytest.raises(DomainError):
            gram.average_precision([0.1, 0.2], [0, 0])

    def test_all_positives_is_one(self):
        assert gram.average_precision([0.3, 0.2, 0.1], [1, 1, 1]) == 1.0

    def test_matches_sklearn_when_tie_free(self, rng):
        for _ in range(50):
            n = int(rng.integers(4, 40))
            labels = rng.integers(0, 2, size=n)
            if labels.max() == 0:
                labels[0] = 1
            scores = rng.standard_normal(n)  # distinct almost surely
            assert gram.average_precision(scores, labels) == pytest.approx(
                average_precision_score(labels, scores), abs=1e-9
            )

    def test_matches_brute_force(self, rng):
        for _ in range(30):
            n = int(rng.integers(3, 12))
            labels = rng.integers(0, 2, size=n)
            if labels.max() == 0:
                labels[0] = 1
            scores = rng.standard_normal(n)
            assert gram.average_precision(scores, labels) == pytest.approx(
                brute_ap(labels, scores), abs=1e-12
            )


class TestExhaustiveSmall:
    def test_auc_all_label_patterns_up_to_seven(self, rng):
        # every label pattern with both classes present, several score styles
        for n in range(2, 8):
            score_sets = [
                np.arange(n, dtype=float),
                np.zeros(n),
                np.round(rng.standard_normal(n), 0),
                rng.standard_normal(n),
            ]
            for bits in itertools.product((0, 1), repeat=n):
                if sum(bits) in (0, n):
                    continue
                for scores in score_sets:
                    got = gram.auc(scores, bits)
                    want = brute_auc(bits, scores)
                    assert got == pytest.approx(want, abs=1e-12), (bits, scores)

    def test_monotone_transform_invariance(self, rng):
        # strictly increasing maps must leave both metrics unchanged
        for _ in range(100):
            n = int(rng.integers(4, 25))
            labels = rng.integers(0, 2, size=n)
            if labels.min() == labels.max():
                labels[0] = 1 - labels[0]
            scores = rng.standard_normal(n)
            mapped = 3.0 * scores + 1.0
            mapped = np.exp(mapped / (1.0 + np.abs(mapped)))
            assert gram.auc(mapped, labels) == pytest.approx(
                gram.auc(scores, labels), abs=1e-12
            )
            assert gram.average_precision(mapped, labels) == pytest.approx(
                gram.average_precision(scores, labels), abs=1e-12
            )
