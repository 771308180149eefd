"""Spectral merging of long-term cluster hypervectors.

Nodes are LTM accumulators; an edge joins two nodes whose cosine reaches the
adaptive threshold ``beta`` (mean WM similarity). The number of groups ``k``
is the count of unnormalised-Laplacian eigenvalues at or below ``g_ub``; the
rows of the first ``k`` eigenvectors are grouped with K-Means and each
multi-member group is fused into a supercluster.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .memory import ClusterMemory

log = logging.getLogger(__name__)

K_SLACK = 1e-9


@dataclass
class SimilarityGraph:
    adj: np.ndarray
    beta: float

    @property
    def n(self) -> int:
        return self.adj.shape[0]


@dataclass
class SpectralDecomposition:
    eigenvalues: np.ndarray  # ascending
    eigenvectors: np.ndarray  # columns


@dataclass
class MergeReport:
    n: int
    beta: float
    k: int
    eigenvalues: list[float]
    groups: list[tuple[int, list[int]]] = field(default_factory=list)  # (new id, member ids)

    @property
    def merged(self) -> int:
        return len(self.groups)


def merge_threshold(wm: ClusterMemory, beta_default: float = 0.5) -> float:
    """Mean ``mu`` over the working memory, or ``beta_default`` when it is empty."""
    mus = [e.mu for e in wm]
    if not mus:
        return beta_default
    return float(np.mean(mus))


def build_adjacency(cos: np.ndarray, beta: float) -> SimilarityGraph:
    cos = np.asarray(cos, dtype=np.float64)
    if cos.ndim != 2 or cos.shape[0] != cos.shape[1]:
        raise ValueError("similarity matrix must be square")
    if cos.shape[0] < 2:
        raise ValueError("need at least 2 entries to build a merge graph")
    adj = (cos >= beta).astype(np.float64)
    adj = np.maximum(adj, adj.T)
    np.fill_diagonal(adj, 0.0)
    return SimilarityGraph(adj=adj, beta=float(beta))


def laplacian(g: SimilarityGraph) -> np.ndarray:
    A = g.adj
    return np.diag(A.sum(axis=1)) - A


def eig_sym(W: np.ndarray, tol: float = 1e-14, max_sweeps: int = 100) -> SpectralDecomposition:
    """Full eigendecomposition of a small symmetric matrix by cyclic Jacobi rotations.

    Eigenvalues come back ascending. Each eigenvector is flipped so that its
    first non-negligible component is positive.
    """
    W = np.asarray(W, dtype=np.float64)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise ValueError("matrix must be square")
    scale = max(float(np.abs(W).max(initial=0.0)), 1.0)
    if not np.allclose(W, W.T, rtol=0.0, atol=1e-12 * scale):
        raise ValueError("matrix is not symmetric")
    n = W.shape[0]
    A = (W + W.T) / 2.0
    V = np.eye(n)
    frob = float(np.linalg.norm(A))
    offdiag = ~np.eye(n, dtype=bool)
    for _ in range(max_sweeps):
        off = float(np.sqrt(np.sum(A[offdiag] ** 2)))
        if off <= tol * frob or off == 0.0:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                if theta == 0.0:
                    t = 1.0
                elif abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = np.copysign(1.0, theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                ap = A[:, p].copy()
                aq = A[:, q]
                A[:, p] = c * ap - s * aq
                A[:, q] = s * ap + c * aq
                ap = A[p, :].copy()
                aq = A[q, :]
                A[p, :] = c * ap - s * aq
                A[q, :] = s * ap + c * aq
                A[p, q] = A[q, p] = 0.0
                vp = V[:, p].copy()
                vq = V[:, q]
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    evals = np.diag(A).copy()
    order = np.argsort(evals, kind="stable")
    evals = evals[order]
    V = V[:, order]
    for j in range(n):
        col = V[:, j]
        nz = np.flatnonzero(np.abs(col) > 1e-10)
        if nz.size and col[nz[0]] < 0:
            V[:, j] = -col
    return SpectralDecomposition(eigenvalues=evals, eigenvectors=V)


def choose_k(decomp: SpectralDecomposition, g_ub: float) -> int:
    """Number of eigenvalues not exceeding ``g_ub``, clamped to ``[1, n]``."""
    ev = decomp.eigenvalues
    k = int(np.count_nonzero(ev <= g_ub + K_SLACK))
    return min(max(k, 1), len(ev))


def _sqdist(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    return ((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)


def kmeans(rows: np.ndarray, k: int, seed, max_iter: int = 100, rtol: float = 1e-6) -> np.ndarray:
    """Lloyd's algorithm with greedy farthest-point seeding.

    The first centre is drawn from ``seed``; each further centre is the point
    farthest from those already chosen. Returns one group label per row.
    """
    X = np.asarray(rows, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} must lie in [1, {n}]")
    if k == n:
        return np.arange(n)
    if k == 1:
        return np.zeros(n, dtype=np.int64)
    rng = np.random.default_rng(seed)
    chosen = [int(rng.integers(n))]
    mind = _sqdist(X, X[chosen])[:, 0]
    for _ in range(1, k):
        cand = mind.copy()
        cand[chosen] = -1.0
        nxt = int(np.argmax(cand))
        chosen.append(nxt)
        mind = np.minimum(mind, _sqdist(X, X[[nxt]])[:, 0])
    C = X[chosen].copy()

    labels = np.full(n, -1)
    prev_inertia = None
    for _ in range(max_iter):
        d2 = _sqdist(X, C)
        new_labels = np.argmin(d2, axis=1)
        point_d = d2[np.arange(n), new_labels]
        for j in range(k):
            if np.any(new_labels == j):
                continue
            sizes = np.bincount(new_labels, minlength=k)
            movable = sizes[new_labels] > 1
            if not np.any(movable & (point_d > 0)):
                continue
            far = int(np.argmax(np.where(movable, point_d, -1.0)))
            new_labels[far] = j
            point_d[far] = 0.0
            C[j] = X[far]
        for j in range(k):
            members = new_labels == j
            if np.any(members):
                C[j] = X[members].mean(axis=0)
        inertia = float(_sqdist(X, C)[np.arange(n), new_labels].sum())
        converged = np.array_equal(new_labels, labels) or (
            prev_inertia is not None
            and abs(prev_inertia - inertia) <= rtol * max(prev_inertia, 1e-300)
        )
        labels = new_labels
        prev_inertia = inertia
        if converged:
            break
    return labels


def spectral_groups(cos: np.ndarray, beta: float, g_ub: float, seed,
                    graph: SimilarityGraph | None = None) -> tuple[np.ndarray, int, np.ndarray]:
    """Group assignment for nodes with pairwise similarities ``cos``.

    Returns ``(assignment, k, eigenvalues)``.
    """
    g = graph if graph is not None else build_adjacency(cos, beta)
    decomp = eig_sym(laplacian(g))
    k = choose_k(decomp, g_ub)
    assignment = kmeans(decomp.eigenvectors[:, :k], k, seed)
    return assignment, k, decomp.eigenvalues


def groups_of(assignment: np.ndarray, ids: list[int]) -> list[list[int]]:
    """Member id lists per group, each sorted, groups ordered by smallest member."""
    buckets: dict[int, list[int]] = {}
    for node, g in enumerate(assignment):
        buckets.setdefault(int(g), []).append(ids[node])
    return sorted((sorted(m) for m in buckets.values()), key=lambda m: m[0])


def fuse(mem: ClusterMemory, members: list[int], **extra):
    """Replace ``members`` of ``mem`` by one supercluster and return it.

    Accumulators are summed; ``mu``/``sigma`` are hit-weighted means.
    """
    entries = [mem.get(i) for i in members]
    acc = np.sum([mem.accum_matrix([i])[0] for i in members], axis=0)
    hits = np.array([e.hit for e in entries], dtype=np.float64)
    mu = float(np.dot(hits, [e.mu for e in entries]) / hits.sum())
    sigma = float(np.dot(hits, [e.sigma for e in entries]) / hits.sum())
    count = sum(e.count for e in entries)
    last = max(e.last_access for e in entries)
    for i in members:
        mem.remove(i)
    return mem.put(acc, count, mu=mu, sigma=sigma, hit=int(hits.sum()), last_access=last,
                   consolidated=True, **extra)


def unlink_wm(wm: ClusterMemory, ltm_ids: set[int]) -> None:
    for e in wm:
        if e.link is not None and e.link in ltm_ids:
            e.link = None
            e.consolidated = False


def merge_groups(ltm: ClusterMemory, assignment: np.ndarray, wm: ClusterMemory | None = None,
                 ids: list[int] | None = None) -> list[tuple[int, list[int]]]:
    """Fuse every multi-member group of ``assignment`` (aligned with ``ids``)."""
    ids = ltm.ids() if ids is None else ids
    if len(assignment) != len(ids):
        raise ValueError("assignment must cover every LTM entry")
    out = []
    for members in groups_of(assignment, ids):
        if len(members) < 2:
            continue
        if wm is not None:
            unlink_wm(wm, set(members))
        new = fuse(ltm, members)
        out.append((new.id, members))
    return out


def merge_ltm(ltm: ClusterMemory, wm: ClusterMemory, g_ub: float, seed,
              beta_default: float = 0.5) -> MergeReport | None:
    """Run one full merge pass over the long-term memory. ``None`` if fewer than 2 entries."""
    if len(ltm) < 2:
        return None
    ids = ltm.ids()
    beta = merge_threshold(wm, beta_default)
    assignment, k, evals = spectral_groups(ltm.pairwise_cosine(ids), beta, g_ub, seed)
    groups = merge_groups(ltm, assignment, wm, ids)
    log.debug("merge: n=%d beta=%.4f k=%d fused=%d", len(ids), beta, k, len(groups))
    return MergeReport(n=len(ids), beta=beta, k=k, eigenvalues=evals.tolist(), groups=groups)
