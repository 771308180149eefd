"""Semi-supervised learner with labeled class hypervectors, and a supervised baseline.

Labeled samples are bundled straight into one class hypervector per label.
Unlabeled samples go through the usual novelty/update path, but the nearest
candidate is searched over the labeled pool as well as working memory, so an
unlabeled sample may strengthen a labeled class. During merging, labeled
entries never get an edge to each other, so two labels cannot end up fused.
"""

from __future__ import annotations

import logging
from typing import Callable

import numpy as np

from .hdcore import ACC_DTYPE, AccumHV
from .learner import UNTRAINED, LearnerConfig, LifelongLearner, SampleEvent, update_stats
from .memory import ClusterEntry, ClusterMemory, EmptyMemory
from .merge import (MergeReport, SimilarityGraph, build_adjacency, fuse, merge_threshold, spectral_groups,
                    unlink_wm)

log = logging.getLogger(__name__)


def build_adjacency_semi(cos: np.ndarray, beta: float, n_labeled: int) -> SimilarityGraph:
    """Base thresholded graph with the first ``n_labeled`` nodes pairwise disconnected."""
    g = build_adjacency(cos, beta)
    g.adj[:n_labeled, :n_labeled] = 0.0
    return g


def _cos_rows(A: np.ndarray) -> np.ndarray:
    G = A @ A.T
    n = np.sqrt(np.diag(G))
    with np.errstate(divide="ignore", invalid="ignore"):
        C = G / np.outer(n, n)
    return np.nan_to_num(C, nan=0.0)


class SemiSupervisedLearner(LifelongLearner):
    """Unsupervised learner plus a pool of labeled class hypervectors.

    The labeled pool grows with each new label and is never LRU-evicted.
    Batches carry ``labeled`` flags and ``labels``; only flagged labels are read.
    """

    def __init__(self, dim: int, cfg: LearnerConfig | None = None,
                 encode: Callable[[np.ndarray], np.ndarray] | None = None):
        super().__init__(dim, cfg, encode)
        self.labeled = ClusterMemory(8, dim, self.ids, "labeled")
        self._by_label: dict[int, int] = {}

    # -- labeled path --------------------------------------------------

    def update_labeled(self, hv: np.ndarray, label: int) -> SampleEvent:
        label = int(label)
        b = self.batch_idx
        eid = self._by_label.get(label)
        if eid is None:
            if self.labeled.full:
                self.labeled.reserve(2 * self.labeled.capacity)
            e = self.labeled.put(np.asarray(hv, dtype=np.float64), 1, mu=1.0, sigma=self.cfg.sigma_init,
                                 hit=1, last_access=b, label=label, consolidated=True)
            self._by_label[label] = e.id
            return SampleEvent(b, "labeled", e.id, None, "labeled")
        e = self.labeled.get(eid)
        sims, dots = self.labeled.scan(hv)
        sim = float(sims[e.slot])
        self.labeled.add(e, hv, float(dots[e.slot]) if self.labeled.mask is None else None)
        update_stats(e, sim, self.cfg.alpha, b, self.cfg.sigma_floor)
        return SampleEvent(b, "labeled", e.id, sim, "labeled")

    # -- unlabeled path ------------------------------------------------

    def _nearest_candidate(self, hv):
        if len(self.labeled) == 0:
            return super()._nearest_candidate(hv)
        cands = []
        for mem in (self.wm, self.labeled):
            try:
                entry, sim, dot = mem.nearest(hv)
            except EmptyMemory:
                continue
            cands.append((-sim, entry.id, mem, entry, sim, dot))
        cands.sort(key=lambda c: (c[0], c[1]))
        _, _, mem, entry, sim, dot = cands[0]
        return mem, entry, sim, dot

    def _observe_batch(self, batch, hvs):
        flags = getattr(batch, "labeled", None)
        if flags is None:
            return super()._observe_batch(batch, hvs)
        labels = batch.labels
        out = []
        for hv, flag, y in zip(hvs, flags, labels):
            out.append(self.update_labeled(hv, y) if flag else self.observe(hv))
        return out

    # -- merging -------------------------------------------------------

    def _can_merge(self) -> bool:
        return len(self.ltm) + len(self.labeled) >= 2 and len(self.ltm) >= 1

    def _merge(self) -> MergeReport | None:
        if len(self.labeled) == 0:
            return super()._merge()
        lab_ids = self.labeled.ids()
        ltm_ids = self.ltm.ids()
        J = len(lab_ids)
        A = np.vstack([self.labeled.accum_matrix(lab_ids), self.ltm.accum_matrix(ltm_ids)])
        cos = _cos_rows(A)
        beta = merge_threshold(self.wm, self.cfg.beta_default)
        graph = build_adjacency_semi(cos, beta, J)
        assignment, k, evals = spectral_groups(cos, beta, self.cfg.g_ub,
                                               [self.cfg.merge_seed, self.n_merges], graph=graph)
        nodes = lab_ids + ltm_ids
        groups = []
        for g in np.unique(assignment):
            members = np.flatnonzero(assignment == g)
            labs = [i for i in members if i < J]
            unl = [i for i in members if i >= J]
            if not labs:
                if len(unl) >= 2:
                    groups.append(self._fuse_unlabeled([nodes[i] for i in unl]))
                continue
            if not unl:
                continue
            # several labels in one group: each cluster joins its most similar label
            owner = {i: labs[int(np.argmax(cos[i, labs]))] for i in unl}
            for lab in labs:
                mine = [nodes[i] for i in unl if owner[i] == lab]
                if mine:
                    groups.append(self._fuse_into_label(nodes[lab], mine))
        groups.sort(key=lambda gm: min(gm[1]))
        log.debug("semi merge: n=%d labeled=%d beta=%.4f k=%d fused=%d", len(nodes), J, beta, k, len(groups))
        return MergeReport(n=len(nodes), beta=beta, k=k, eigenvalues=evals.tolist(), groups=groups)

    def _fuse_unlabeled(self, members: list[int]) -> tuple[int, list[int]]:
        unlink_wm(self.wm, set(members))
        new = fuse(self.ltm, members)
        return new.id, sorted(members)

    def _fuse_into_label(self, label_id: int, members: list[int]) -> tuple[int, list[int]]:
        unlink_wm(self.wm, set(members))
        target = self.labeled.get(label_id)
        parts = [target] + [self.ltm.get(i) for i in members]
        hits = np.array([e.hit for e in parts], dtype=np.float64)
        mu = float(np.dot(hits, [e.mu for e in parts]) / hits.sum())
        sigma = float(np.dot(hits, [e.sigma for e in parts]) / hits.sum())
        last = max(e.last_access for e in parts)
        for i in members:
            e = self.ltm.get(i)
            self.labeled.absorb(target, self.ltm.accum_matrix([i])[0], e.count)
            self.ltm.remove(i)
        target.mu, target.sigma, target.hit = mu, max(sigma, self.cfg.sigma_floor), int(hits.sum())
        target.last_access = last
        return label_id, sorted([label_id] + members)

    # -- inference -----------------------------------------------------

    def _nearest_over(self, hv, mems) -> ClusterEntry | None:
        best = None
        for mem in mems:
            if not len(mem):
                continue
            e, sim, _ = mem.nearest(hv)
            if best is None or sim > best[0] or (sim == best[0] and e.id < best[1].id):
                best = (sim, e)
        return None if best is None else best[1]

    def predict_hv(self, hv) -> int:
        e = self._nearest_over(hv, (self.ltm, self.labeled))
        if e is None:
            return super().predict_hv(hv)
        return e.id

    def predict_label(self, hv) -> int:
        """Label of the nearest labeled class hypervector, :data:`UNTRAINED` if none."""
        e = self._nearest_over(hv, (self.labeled,))
        return UNTRAINED if e is None else int(e.label)

    def memories(self):
        return {"wm": self.wm, "ltm": self.ltm, "labeled": self.labeled}

    def load_state_dict(self, state: dict) -> None:
        super().load_state_dict(state)
        if "labeled" not in state["memories"]:
            self.labeled = ClusterMemory(8, self.dim, self.ids, "labeled")
        self._by_label = {int(e.label): e.id for e in self.labeled}


def infer_supervised(query: np.ndarray, classes: dict[int, AccumHV]) -> int:
    """Label whose class accumulator is most similar to ``query``; lowest label on ties."""
    if not classes:
        return UNTRAINED
    labels = sorted(classes)
    A = np.stack([classes[c].dims for c in labels]).astype(np.float64)
    q = np.asarray(query, dtype=np.float64)
    n = np.sqrt(np.einsum("ij,ij->i", A, A) * np.dot(q, q))
    with np.errstate(divide="ignore", invalid="ignore"):
        sims = np.where(n > 0, (A @ q) / n, 0.0)
    return labels[int(np.argmax(sims))]


class SupervisedHDC:
    """Classic HDC classifier: each class is the bundle of its training encodings."""

    def __init__(self, dim: int, encode: Callable[[np.ndarray], np.ndarray] | None = None):
        self.dim = dim
        self.encode = encode
        self.classes: dict[int, AccumHV] = {}

    def _hv(self, x) -> np.ndarray:
        return np.asarray(x) if self.encode is None else self.encode(x)

    def partial_fit(self, x, label: int) -> None:
        hv = self._hv(x)
        label = int(label)
        acc = self.classes.get(label)
        if acc is None:
            self.classes[label] = AccumHV(np.asarray(hv, dtype=ACC_DTYPE).copy(), 1)
        else:
            acc.dims += hv
            acc.count += 1

    def fit(self, X, y) -> SupervisedHDC:
        for x, label in zip(X, y):
            self.partial_fit(x, label)
        return self

    def process_batch(self, batch) -> None:
        for x, label in zip(batch.samples, batch.labels):
            self.partial_fit(x, label)

    def predict(self, x) -> int:
        return infer_supervised(self._hv(x), self.classes)

    def predict_hv(self, hv) -> int:
        return infer_supervised(hv, self.classes)

    def predict_many(self, H) -> np.ndarray:
        if not self.classes:
            return np.full(len(H), UNTRAINED, dtype=np.int64)
        labels = sorted(self.classes)
        A = np.stack([self.classes[c].dims for c in labels]).astype(np.float64)
        Q = np.asarray(H, dtype=np.float64)
        n = np.sqrt(np.outer(np.einsum("ij,ij->i", Q, Q), np.einsum("ij,ij->i", A, A)))
        with np.errstate(divide="ignore", invalid="ignore"):
            S = np.where(n > 0, (Q @ A.T) / n, 0.0)
        return np.asarray(labels, dtype=np.int64)[np.argmax(S, axis=1)]
