"""Partition-agreement metrics: accuracy, F1, NMI, AMI, ARI.

All six metrics work on integer label arrays of equal length.  NMI and
AMI use arithmetic-mean normalization and natural logs; AMI's expected
mutual information is the exact permutation-model value.  Degenerate
denominators follow the conventions stated with each function.
"""

from __future__ import annotations

from math import lgamma, log

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ContractError

__all__ = [
    "contingency",
    "accuracy",
    "matched_accuracy",
    "f1_scores",
    "nmi",
    "ami",
    "ami_flagged",
    "ari",
    "ari_flagged",
    "classification_report",
    "clustering_report",
]

_DEGENERATE_EPS = 1e-12


def _check_pair(labels_true, labels_pred) -> tuple[np.ndarray, np.ndarray]:
    t = np.asarray(labels_true, dtype=np.int64).ravel()
    p = np.asarray(labels_pred, dtype=np.int64).ravel()
    if t.shape[0] != p.shape[0]:
        raise ContractError(f"label lengths differ: {t.shape[0]} vs {p.shape[0]}")
    if t.shape[0] == 0:
        raise ContractError("labels are empty")
    return t, p


def contingency(labels_true, labels_pred) -> np.ndarray:
    """Count matrix n[u, v] over the observed true/predicted label values."""
    t, p = _check_pair(labels_true, labels_pred)
    _, ti = np.unique(t, return_inverse=True)
    _, pi = np.unique(p, return_inverse=True)
    table = np.zeros((ti.max() + 1, pi.max() + 1), dtype=np.int64)
    np.add.at(table, (ti, pi), 1)
    return table


def accuracy(labels_true, labels_pred) -> float:
    """Fraction of exact matches (labels compared as-is)."""
    t, p = _check_pair(labels_true, labels_pred)
    return float(np.mean(t == p))


def matched_accuracy(labels_true, labels_pred) -> float:
    """Accuracy after the optimal one-to-one cluster-to-class assignment."""
    table = contingency(labels_true, labels_pred)
    rows, cols = linear_sum_assignment(-table)
    return float(table[rows, cols].sum() / table.sum())


def f1_scores(labels_true, labels_pred) -> tuple[float, float]:
    """(micro, macro) F1 over classes observed in the truth or prediction.

    A class that is never predicted but occurs in the truth contributes
    F1 = 0 to the macro mean; classes absent from both sides are excluded.
    """
    t, p = _check_pair(labels_true, labels_pred)
    classes = np.union1d(np.unique(t), np.unique(p))
    tp_total = fp_total = fn_total = 0
    per_class = []
    for c in classes:
        tp = int(np.sum((t == c) & (p == c)))
        fp = int(np.sum((t != c) & (p == c)))
        fn = int(np.sum((t == c) & (p != c)))
        tp_total, fp_total, fn_total = tp_total + tp, fp_total + fp, fn_total + fn
        denom = 2 * tp + fp + fn
        per_class.append(2 * tp / denom if denom else 0.0)
    micro_denom = 2 * tp_total + fp_total + fn_total
    micro = 2 * tp_total / micro_denom if micro_denom else 0.0
    macro = float(np.mean(per_class)) if per_class else 0.0
    return micro, macro


def _entropy(counts: np.ndarray, n: int) -> float:
    probs = counts[counts > 0] / n
    return float(-(probs * np.log(probs)).sum())


def _mutual_information(table: np.ndarray) -> float:
    n = table.sum()
    a = table.sum(axis=1)
    b = table.sum(axis=0)
    mi = 0.0
    for u in range(table.shape[0]):
        for v in range(table.shape[1]):
            nij = table[u, v]
            if nij > 0:
                mi += (nij / n) * log(n * nij / (a[u] * b[v]))
    return mi


def nmi(labels_true, labels_pred) -> float:
    """I(U;V) / mean(H(U), H(V)); 1 for identical partitions, 0/0 -> 0."""
    table = contingency(labels_true, labels_pred)
    if table.shape == (1, 1):
        return 1.0  # both partitions are a single cluster: identical
    n = table.sum()
    h_true = _entropy(table.sum(axis=1), n)
    h_pred = _entropy(table.sum(axis=0), n)
    denom = 0.5 * (h_true + h_pred)
    if denom < _DEGENERATE_EPS:
        return 0.0
    return _mutual_information(table) / denom


def _expected_mutual_information(table: np.ndarray) -> float:
    """Exact permutation-model E[I] from the marginals (hypergeometric sum)."""
    n = int(table.sum())
    a = table.sum(axis=1).astype(np.int64)
    b = table.sum(axis=0).astype(np.int64)
    lg = lgamma
    emi = 0.0
    for au in a:
        for bv in b:
            lo = max(1, au + bv - n)
            hi = min(au, bv)
            for nij in range(lo, hi + 1):
                term = (nij / n) * log(n * nij / (au * bv))
                weight = (
                    lg(au + 1) + lg(bv + 1) + lg(n - au + 1) + lg(n - bv + 1)
                    - lg(n + 1) - lg(nij + 1) - lg(au - nij + 1)
                    - lg(bv - nij + 1) - lg(n - au - bv + nij + 1)
                )
                emi += term * np.exp(weight)
    return emi


def ami_flagged(labels_true, labels_pred) -> tuple[float, bool]:
    """AMI plus a flag marking a degenerate (near-zero) denominator."""
    table = contingency(labels_true, labels_pred)
    if table.shape == (1, 1):
        return 1.0, False
    n = table.sum()
    h_true = _entropy(table.sum(axis=1), n)
    h_pred = _entropy(table.sum(axis=0), n)
    mi = _mutual_information(table)
    emi = _expected_mutual_information(table)
    denom = 0.5 * (h_true + h_pred) - emi
    if abs(denom) < _DEGENERATE_EPS:
        return 0.0, True
    return (mi - emi) / denom, False


def ami(labels_true, labels_pred) -> float:
    return ami_flagged(labels_true, labels_pred)[0]


def ari_flagged(labels_true, labels_pred) -> tuple[float, bool]:
    """ARI plus a flag marking a degenerate (zero) denominator.

    Pair counts are integers, so the index is computed as one exact
    integer ratio: hand-checkable values like -0.5 come out bit-exact.
    """
    table = contingency(labels_true, labels_pred)

    def comb2(x):
        return x * (x - 1) // 2

    n = int(table.sum())
    sum_ij = int(comb2(table).sum())
    sum_a = int(comb2(table.sum(axis=1)).sum())
    sum_b = int(comb2(table.sum(axis=0)).sum())
    total = int(comb2(n))
    if sum_a == sum_ij and sum_b == sum_ij:
        # The partitions agree on every pair (identical up to relabeling),
        # including the 0/0 single-cluster and all-singleton limits.
        return 1.0, False
    numerator = 2 * (total * sum_ij - sum_a * sum_b)
    denominator = total * (sum_a + sum_b) - 2 * sum_a * sum_b
    if denominator == 0:
        return 0.0, True
    return numerator / denominator, False


def ari(labels_true, labels_pred) -> float:
    return ari_flagged(labels_true, labels_pred)[0]


def _report(labels_true, labels_pred, acc: float, micro: float, macro: float) -> dict:
    return {
        "acc": acc,
        "micro_f1": micro,
        "macro_f1": macro,
        "nmi": nmi(labels_true, labels_pred),
        "ami": ami(labels_true, labels_pred),
        "ari": ari(labels_true, labels_pred),
    }


def classification_report(labels_true, labels_pred) -> dict:
    """All six metrics for predictions expressed in true class ids."""
    micro, macro = f1_scores(labels_true, labels_pred)
    return _report(labels_true, labels_pred, accuracy(labels_true, labels_pred), micro, macro)


def clustering_report(labels_true, labels_pred) -> dict:
    """All six metrics for cluster assignments (Hungarian-matched where needed)."""
    table = contingency(labels_true, labels_pred)
    rows, cols = linear_sum_assignment(-table)
    true_vals = np.unique(np.asarray(labels_true, dtype=np.int64))
    pred_vals = np.unique(np.asarray(labels_pred, dtype=np.int64))
    mapping = {pred_vals[c]: true_vals[r] for r, c in zip(rows, cols)}
    remapped = np.array(
        [mapping.get(v, -1) for v in np.asarray(labels_pred, dtype=np.int64).ravel()],
        dtype=np.int64,
    )
    micro, macro = f1_scores(labels_true, remapped)
    return _report(labels_true, labels_pred, matched_accuracy(labels_true, labels_pred),
                   micro, macro)
