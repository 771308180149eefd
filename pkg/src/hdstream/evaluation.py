"""Unsupervised clustering accuracy over a held-out labeled test set.

ACC is the fraction of test samples whose class matches the best one-to-one
mapping from predicted clusters to classes. Clusters left unmatched (when
there are more clusters than classes) earn nothing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .learner import UNTRAINED


@dataclass
class ContingencyTable:
    counts: np.ndarray  # rows: predicted clusters, columns: true classes
    clusters: list
    classes: list

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def contingency(pred, true) -> ContingencyTable:
    pred = np.asarray(pred)
    true = np.asarray(true)
    if pred.shape != true.shape:
        raise ValueError("prediction and label arrays differ in length")
    clusters, pi = np.unique(pred, return_inverse=True)
    classes, ti = np.unique(true, return_inverse=True)
    counts = np.zeros((len(clusters), len(classes)), dtype=np.int64)
    np.add.at(counts, (pi, ti), 1)
    return ContingencyTable(counts, clusters.tolist(), classes.tolist())


def _counts(table) -> np.ndarray:
    C = table.counts if isinstance(table, ContingencyTable) else np.asarray(table)
    if C.ndim != 2 or C.size == 0 or C.sum() <= 0:
        raise ValueError("ACC of an empty contingency table is undefined")
    if np.any(C < 0):
        raise ValueError("contingency counts must be non-negative")
    return C


def acc(table) -> float:
    """Best one-to-one cluster-to-class accuracy (exact, via optimal assignment)."""
    C = _counts(table)
    rows, cols = linear_sum_assignment(C, maximize=True)
    return float(C[rows, cols].sum() / C.sum())


def purity(table) -> float:
    """Many-to-one score: each cluster votes for its majority class. Not the headline metric."""
    C = _counts(table)
    return float(C.max(axis=1).sum() / C.sum())


@dataclass
class MetricRecord:
    batch_idx: int
    acc: float
    purity: float
    wm_size: int
    ltm_size: int
    n_clusters: int


def _sizes(model) -> tuple[int, int]:
    wm = getattr(model, "wm", None)
    ltm = getattr(model, "ltm", None)
    if wm is None:  # supervised baseline: class table only
        n = len(getattr(model, "classes", {}))
        return 0, n
    return len(wm), len(ltm)


def evaluate(model, test_hvs, test_labels, batch_idx: int) -> MetricRecord:
    """Predict every test hypervector and score against the hidden labels.

    An untrained model answers :data:`UNTRAINED` for every sample, which acts
    as one pseudo-cluster.
    """
    if len(test_labels) == 0:
        raise ValueError("test set is empty")
    pred = model.predict_many(test_hvs)
    table = contingency(pred, test_labels)
    wm, ltm = _sizes(model)
    n_clusters = len([c for c in table.clusters if c != UNTRAINED])
    return MetricRecord(batch_idx, acc(table), purity(table), wm, ltm, n_clusters)
