import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import flip, rand_hvs
from oracles import components
from hdstream.memory import ClusterMemory, IdSource
from hdstream.merge import (SimilarityGraph, build_adjacency, choose_k, eig_sym, fuse, kmeans, laplacian,
                            merge_groups, merge_ltm, merge_threshold, spectral_groups)


def random_graph(seed, n_max=12):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, n_max + 1))
    p = rng.uniform(0.05, 0.6)
    A = np.triu((rng.random((n, n)) < p).astype(float), 1)
    return SimilarityGraph(A + A.T, 0.5)


def test_adjacency_examples():
    cos = np.array([[1, 0.9, 0.2], [0.9, 1, 0.1], [0.2, 0.1, 1]])
    g = build_adjacency(cos, 0.5)
    assert g.adj.sum() == 2 and g.adj[0, 1] == 1
    assert np.all(np.diag(g.adj) == 0)
    assert build_adjacency(cos, 0.95).adj.sum() == 0
    with pytest.raises(ValueError):
        build_adjacency(np.ones((1, 1)), 0.5)
    with pytest.raises(ValueError):
        build_adjacency(np.ones((2, 3)), 0.5)


def test_beta_from_wm():
    H = rand_hvs(2, 50)
    wm = ClusterMemory(3, 50)
    assert merge_threshold(wm, 0.5) == 0.5
    a, _ = wm.insert(H[0], 0)
    b, _ = wm.insert(H[1], 0)
    a.mu, b.mu = 0.7, 0.9
    assert merge_threshold(wm) == pytest.approx(0.8)


def test_laplacian_examples():
    W = laplacian(SimilarityGraph(np.array([[0, 1.0], [1, 0]]), 0.5))
    assert W.tolist() == [[1, -1], [-1, 1]]
    assert not laplacian(SimilarityGraph(np.zeros((3, 3)), 0.5)).any()
    g = random_graph(3)
    assert np.allclose(laplacian(g).sum(axis=1), 0)


def test_eig_two_disjoint_edges():
    A = np.zeros((4, 4))
    A[0, 1] = A[1, 0] = A[2, 3] = A[3, 2] = 1
    d = eig_sym(laplacian(SimilarityGraph(A, 0.5)))
    ref = np.linalg.eigvalsh(laplacian(SimilarityGraph(A, 0.5)))
    assert np.allclose(d.eigenvalues, [0, 0, 2, 2], atol=1e-12)
    assert np.allclose(d.eigenvalues, ref, atol=1e-12)
    assert choose_k(d, 0.1) == 2


def test_eig_zero_and_rejects():
    d = eig_sym(np.zeros((3, 3)))
    assert np.all(d.eigenvalues == 0) and np.allclose(d.eigenvectors, np.eye(3))
    with pytest.raises(ValueError):
        eig_sym(np.array([[0, 1.0], [0, 0]]))
    with pytest.raises(ValueError):
        eig_sym(np.ones((2, 3)))


def test_eig_against_numpy_and_residual():
    rng = np.random.default_rng(0)
    for seed in range(100):
        g = random_graph(seed, n_max=30)
        W = laplacian(g)
        d = eig_sym(W)
        assert np.allclose(d.eigenvalues, np.linalg.eigvalsh(W), atol=1e-9)
        V, lam = d.eigenvectors, d.eigenvalues
        assert np.abs(W @ V - V * lam).max() < 1e-6
        assert np.allclose(V.T @ V, np.eye(len(W)), atol=1e-9)
        assert lam[0] >= -1e-8
        for j in range(V.shape[1]):
            nz = np.flatnonzero(np.abs(V[:, j]) > 1e-10)
            assert V[nz[0], j] > 0
    S = rng.standard_normal((6, 6))
    S = S + S.T
    assert np.allclose(eig_sym(S).eigenvalues, np.linalg.eigvalsh(S), atol=1e-10)


def test_eig_deterministic():
    W = laplacian(random_graph(9))
    a, b = eig_sym(W), eig_sym(W.copy())
    assert np.array_equal(a.eigenvalues, b.eigenvalues) and np.array_equal(a.eigenvectors, b.eigenvectors)


def test_choose_k_bounds():
    g = random_graph(1)
    d = eig_sym(laplacian(g))
    assert choose_k(d, 1e9) == g.n
    assert choose_k(d, 1e-12) >= 1


def test_zero_eigs_match_components():
    for seed in range(500):
        g = random_graph(seed)
        d = eig_sym(laplacian(g))
        c, _ = components(g.adj)
        assert int(np.sum(d.eigenvalues <= 1e-6)) == c


def test_component_recovery_grouping():
    for seed in range(200):
        g = random_graph(seed)
        W = laplacian(g)
        lam = np.linalg.eigvalsh(W)
        c, roots = components(g.adj)
        nonzero = lam[lam > 1e-6]
        g_ub = (nonzero.min() / 2) if nonzero.size else 0.1
        assign, k, _ = spectral_groups(None, 0.5, g_ub, seed, graph=g)
        assert k == c
        # same partition as union-find
        for i in range(g.n):
            for j in range(g.n):
                assert (assign[i] == assign[j]) == (roots[i] == roots[j])


def test_kmeans_examples():
    X = np.array([[0, 0], [0, 0.1], [5, 5], [5, 5.1]])
    lab = kmeans(X, 2, 0)
    assert lab[0] == lab[1] and lab[2] == lab[3] and lab[0] != lab[2]
    assert kmeans(X, 4, 0).tolist() == [0, 1, 2, 3]
    assert kmeans(X, 1, 0).tolist() == [0, 0, 0, 0]
    with pytest.raises(ValueError):
        kmeans(X, 5, 0)
    assert np.array_equal(kmeans(X, 2, 3), kmeans(X, 2, 3))


def test_kmeans_no_empty_clusters():
    rng = np.random.default_rng(0)
    for s in range(50):
        X = rng.standard_normal((12, 3))
        X[:6] = X[0]  # duplicates invite empty clusters
        k = int(rng.integers(2, 7))
        lab = kmeans(X, k, s)
        assert len(np.unique(lab)) <= k


def build_ltm(hvs, hits=None, mus=None):
    ltm = ClusterMemory(len(hvs), hvs.shape[1], IdSource(), "ltm")
    for i, h in enumerate(hvs):
        ltm.put(h.astype(float), 1, mu=mus[i] if mus else 0.9, sigma=0.05, hit=hits[i] if hits else 10,
                last_access=i, consolidated=True)
    return ltm


def test_fuse_stats():
    H = rand_hvs(2, 100)
    ltm = build_ltm(H, hits=[10, 30], mus=[0.8, 0.6])
    new = fuse(ltm, [0, 1])
    assert new.mu == pytest.approx(0.65) and new.hit == 40 and new.last_access == 1
    assert new.id == 2 and len(ltm) == 1
    assert np.array_equal(ltm.accum(new.id).dims, H[0].astype(np.int64) + H[1])


def test_merge_singletons_noop():
    H = rand_hvs(3, 100)
    ltm = build_ltm(H)
    assert merge_groups(ltm, np.array([0, 1, 2])) == []
    assert ltm.ids() == [0, 1, 2]
    with pytest.raises(ValueError):
        merge_groups(ltm, np.array([0, 1]))


def test_merge_unlinks_wm():
    H = rand_hvs(2, 200)
    ids = IdSource()
    wm = ClusterMemory(5, 200, ids, "wm")
    ltm = ClusterMemory(5, 200, ids, "ltm")
    for h in H:
        e, _ = wm.insert(h, 0)
        c = ltm.put(h.astype(float), 1, mu=1, sigma=0.05, hit=10, last_access=0, consolidated=True, link=e.id)
        e.link, e.consolidated = c.id, True
    merge_groups(ltm, np.array([0, 0]), wm)
    assert all(e.link is None and not e.consolidated for e in wm)


def planted_ltm(seed, groups=3, per=10, dim=10000, noise=0.009):
    rng = np.random.default_rng(seed)
    base = rand_hvs(groups, dim, seed=seed + 1000)
    hvs = np.stack([flip(base[g], noise, rng) for g in range(groups) for _ in range(per)])
    truth = np.repeat(np.arange(groups), per)
    return build_ltm(hvs), truth


def test_planted_three_groups():
    ok = 0
    for seed in range(20):
        ltm, truth = planted_ltm(seed)
        hits_before = sum(e.hit for e in ltm)
        rep = merge_ltm(ltm, ClusterMemory(1, ltm.dim), 0.1, seed)
        members = sorted(sorted(m) for _, m in rep.groups)
        expect = sorted(sorted(np.flatnonzero(truth == g).tolist()) for g in range(3))
        ok += len(ltm) == 3 and members == expect
        assert sum(e.hit for e in ltm) == hits_before
    assert ok == 20


def test_merge_ltm_too_small():
    ltm = build_ltm(rand_hvs(1, 10))
    assert merge_ltm(ltm, ClusterMemory(1, 10), 0.1, 0) is None


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 10), st.integers(0, 10**6), st.floats(0.01, 3.0))
def test_merge_never_grows_and_conserves_hits(n, seed, g_ub):
    rng = np.random.default_rng(seed)
    base = rand_hvs(3, 256, seed=seed)
    hvs = np.stack([flip(base[rng.integers(3)], 0.05, rng) for _ in range(n)])
    ltm = build_ltm(hvs, hits=[int(h) for h in rng.integers(1, 50, n)])
    before = (len(ltm), sum(e.hit for e in ltm), sum(e.count for e in ltm))
    merge_ltm(ltm, ClusterMemory(1, 256), g_ub, seed)
    assert len(ltm) <= before[0]
    assert (sum(e.hit for e in ltm), sum(e.count for e in ltm)) == before[1:]
