import numpy as np
import pytest

from oracles import brute_force_acc, brute_force_matches, random_table
from hdstream.evaluation import ContingencyTable, acc, contingency, evaluate, purity
from hdstream.learner import UNTRAINED, LifelongLearner
from conftest import rand_hvs


def test_acc_examples():
    assert acc(np.diag([3, 4, 5])) == 1.0
    C = np.array([[5, 0], [4, 0], [0, 6]])
    assert brute_force_acc(C) == pytest.approx(11 / 15)
    assert acc(C) == pytest.approx(11 / 15)
    assert acc(np.array([[10, 10]])) == 0.5


def test_acc_rejects_empty():
    with pytest.raises(ValueError):
        acc(np.zeros((2, 2)))
    with pytest.raises(ValueError):
        acc(np.zeros((0, 3)))
    with pytest.raises(ValueError):
        acc(np.array([[1, -1]]))


def test_acc_matches_oracle():
    rng = np.random.default_rng(0)
    for _ in range(300):
        C = random_table(rng)
        rows_cols = acc(C) * C.sum()
        assert round(rows_cols) == brute_force_matches(C)
        assert acc(C) == brute_force_acc(C)


def test_acc_relabel_invariant():
    rng = np.random.default_rng(1)
    for _ in range(100):
        C = random_table(rng)
        P = C[rng.permutation(C.shape[0])][:, rng.permutation(C.shape[1])]
        assert acc(P) == acc(C)


def test_split_cluster_bound():
    rng = np.random.default_rng(2)
    for _ in range(300):
        C = random_table(rng)
        K, J = C.shape
        i = int(rng.integers(K))
        moved = rng.integers(0, C[i] + 1)
        S = np.vstack([C, moved[None]])
        S[i] -= moved
        assert acc(S) >= acc(C) - moved.sum() / C.sum() - 1e-15


def test_split_can_lower_acc_even_with_spare_classes():
    # with K < J a split still loses mass: the moved part competes for a class it only partly covers
    C = np.array([[9, 17, 5]])
    S = np.array([[8, 11, 1], [1, 6, 4]])
    assert acc(C) == pytest.approx(17 / 31)
    assert acc(S) == pytest.approx(15 / 31)
    assert acc(S) >= acc(C) - 6 / 31


def test_contingency_and_purity():
    t = contingency([7, 7, 3, 3, 3], [0, 1, 1, 1, 0])
    assert isinstance(t, ContingencyTable)
    assert t.clusters == [3, 7] and t.classes == [0, 1] and t.total == 5
    assert t.counts.tolist() == [[1, 2], [1, 1]]
    assert purity(t) == pytest.approx(3 / 5)
    assert acc(t) == pytest.approx(3 / 5)
    assert purity(np.array([[5, 0], [4, 0], [0, 6]])) == 1.0
    with pytest.raises(ValueError):
        contingency([1, 2], [1])


class Fixed:
    def __init__(self, out):
        self.out = np.asarray(out)

    def predict_many(self, H):
        return self.out


def test_evaluate_perfect_and_untrained():
    H = rand_hvs(4, 100)
    labels = np.array([0, 1, 1, 1])
    rec = evaluate(Fixed([9, 4, 4, 4]), H, labels, 10)
    assert rec.acc == 1.0 and rec.batch_idx == 10
    rec = evaluate(LifelongLearner(100), H, labels, 0)
    assert rec.acc == 0.75 and rec.n_clusters == 0 and (rec.wm_size, rec.ltm_size) == (0, 0)
    with pytest.raises(ValueError):
        evaluate(Fixed([]), H[:0], np.array([]), 1)
