"""Ranking metrics for anomaly detection, computed exactly.

Labels are binary: 1 marks an anomaly (the positive class), 0 a normal graph.
Higher scores are expected to indicate anomalies.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError, ShapeError


def _check_inputs(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    scores = np.asarray(list(scores), dtype=np.float64)
    labels = np.asarray(list(labels), dtype=np.int64)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ShapeError(f"scores shape {scores.shape} vs labels shape {labels.shape}")
    if scores.size == 0:
        raise DomainError("metrics need at least one sample")
    if not np.isin(labels, (0, 1)).all():
        raise DomainError("labels must be 0 or 1")
    if not np.isfinite(scores).all():
        raise DomainError("scores must be finite")
    return scores, labels


def _midranks(scores: np.ndarray) -> np.ndarray:
    """1-based ranks with tied values sharing their average rank."""
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(scores.size, dtype=np.float64)
    sorted_scores = scores[order]
    start = 0
    while start < scores.size:
        stop = start
        while stop + 1 < scores.size and sorted_scores[stop + 1] == sorted_scores[start]:
            stop += 1
        # ranks start..stop (0-based) share the average of (start+1 .. stop+1)
        ranks[order[start : stop + 1]] = 0.5 * (start + stop) + 1.0
        start = stop + 1
    return ranks


def auc(scores, labels) -> float:
    """P(anomaly score > normal score) + half the tie probability.

    Computed exactly as the Mann-Whitney rank statistic with midranks, so it
    equals the brute-force average over all anomaly/normal pairs.
    """
    scores, labels = _check_inputs(scores, labels)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DomainError("auc needs both classes present")
    ranks = _midranks(scores)
    rank_sum_pos = float(ranks[labels == 1].sum())
    u = rank_sum_pos - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def average_precision(scores, labels) -> float:
    """Area under the precision-recall steps over the descending ranking.

    AP = sum_k (recall_k - recall_{k-1}) * precision_k, which reduces to the
    mean of precision-at-k over the positions k holding positives. Ties are
    broken by stable input order.
    """
    scores, labels = _check_inputs(scores, labels)
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise DomainError("average precision needs at least one positive label")
    order = np.argsort(-scores, kind="stable")
    hits = 0
    total = 0.0
    for k, idx in enumerate(order, start=1):
        if labels[idx] == 1:
            hits += 1
            total += hits / k
    return total / n_pos
