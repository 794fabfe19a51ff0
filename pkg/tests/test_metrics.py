import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.metrics import normalized_mutual_info_score

from ccl.errors import DimensionError, PreconditionError
from ccl.metrics import ConfusionMatrix, brute_force_accuracy, clustering_accuracy, confusion, evaluate, nmi

CM_3x2 = [[2, 0], [1, 1], [0, 2]]


def textbook_nmi(counts):
    """Plain-loop mutual information over sqrt(H(U) H(V))."""
    n = sum(sum(r) for r in counts)
    rows = [sum(r) for r in counts]
    cols = [sum(counts[i][j] for i in range(len(counts))) for j in range(len(counts[0]))]
    mi = 0.0
    for i, r in enumerate(counts):
        for j, c in enumerate(r):
            if c:
                mi += c / n * math.log(n * c / (rows[i] * cols[j]))
    h = lambda marg: -sum(m / n * math.log(m / n) for m in marg if m)
    return mi / math.sqrt(h(rows) * h(cols))


def test_confusion_examples():
    np.testing.assert_array_equal(confusion([0, 1], [0, 1]).counts, np.eye(2))
    np.testing.assert_array_equal(confusion([0, 0], [0, 1]).counts, [[1, 1]])
    cm = confusion([0, 0, 1, 1, 2, 2], [0, 0, 0, 1, 1, 1])
    np.testing.assert_array_equal(cm.counts, CM_3x2)
    assert cm.n == 6


def test_confusion_errors():
    with pytest.raises(DimensionError):
        confusion([0, 1], [0])
    with pytest.raises(PreconditionError):
        confusion([], [])


def test_confusion_reindexes_sparse_labels():
    cm = confusion([7, 7, 42], ["a", "b", "b"])
    assert cm.counts.shape == (2, 2)
    acc, mapping = clustering_accuracy(cm)
    assert acc == pytest.approx(2 / 3)
    assert set(mapping) <= {7, 42}


def test_accuracy_examples():
    acc, mapping = clustering_accuracy(ConfusionMatrix(np.array(CM_3x2)))
    assert acc == pytest.approx(4 / 6)
    assert mapping == {0: 0, 2: 1}
    assert brute_force_accuracy(ConfusionMatrix(np.array(CM_3x2))) == pytest.approx(4 / 6)
    acc, _ = clustering_accuracy(ConfusionMatrix(np.array([[5, 5]])))
    assert acc == 0.5


def test_accuracy_permuted_diagonal():
    counts = np.diag([3, 1, 4, 1, 5])
    for seed in range(5):
        perm = np.random.default_rng(seed).permutation(5)
        assert clustering_accuracy(ConfusionMatrix(counts[perm]))[0] == 1.0


@st.composite
def count_matrices(draw, max_dim=8):
    r = draw(st.integers(1, max_dim))
    c = draw(st.integers(1, max_dim))
    flat = draw(st.lists(st.integers(0, 20), min_size=r * c, max_size=r * c))
    m = np.array(flat).reshape(r, c)
    if m.sum() == 0:
        m[0, 0] = 1
    return m


@settings(max_examples=60, deadline=None)
@given(count_matrices(max_dim=6))
def test_hungarian_matches_brute_force(m):
    cm = ConfusionMatrix(m)
    assert clustering_accuracy(cm)[0] == brute_force_accuracy(cm)


def test_hungarian_matches_brute_force_random_5x5():
    for seed in range(100):
        m = np.random.default_rng(seed).integers(0, 30, size=(5, 5))
        cm = ConfusionMatrix(m)
        assert clustering_accuracy(cm)[0] == brute_force_accuracy(cm)


def test_rectangular_8x3():
    m = np.random.default_rng(0).integers(0, 10, size=(8, 3))
    cm = ConfusionMatrix(m)
    assert clustering_accuracy(cm)[0] == brute_force_accuracy(cm)
    assert clustering_accuracy(ConfusionMatrix(m.T))[0] == brute_force_accuracy(ConfusionMatrix(m.T))


def test_brute_force_bound():
    with pytest.raises(PreconditionError):
        brute_force_accuracy(ConfusionMatrix(np.ones((9, 2), dtype=int)))


@settings(max_examples=40, deadline=None)
@given(count_matrices(max_dim=5), st.randoms(use_true_random=False))
def test_accuracy_relabel_invariance(m, rnd):
    rows = list(range(m.shape[0]))
    cols = list(range(m.shape[1]))
    rnd.shuffle(rows)
    rnd.shuffle(cols)
    a = clustering_accuracy(ConfusionMatrix(m))[0]
    assert clustering_accuracy(ConfusionMatrix(m[rows][:, cols]))[0] == a
    assert a <= 1.0


@settings(max_examples=40, deadline=None)
@given(count_matrices(max_dim=5))
def test_empty_row_changes_nothing(m):
    padded = np.vstack([m, np.zeros((1, m.shape[1]), dtype=int)])
    assert clustering_accuracy(ConfusionMatrix(padded))[0] == clustering_accuracy(ConfusionMatrix(m))[0]
    assert nmi(ConfusionMatrix(padded)) == nmi(ConfusionMatrix(m))


@settings(max_examples=40, deadline=None)
@given(count_matrices(max_dim=6))
def test_nmi_symmetric_and_bounded(m):
    a, b = nmi(ConfusionMatrix(m)), nmi(ConfusionMatrix(m.T))
    assert a == pytest.approx(b, abs=1e-12)
    assert 0.0 <= a <= 1.0


def test_nmi_examples():
    assert nmi(confusion([1, 1, 0, 2], [5, 5, 3, 4])) == 1.0
    assert nmi(ConfusionMatrix(np.full((3, 4), 5))) == pytest.approx(0.0, abs=1e-12)
    expected = textbook_nmi(CM_3x2)
    assert nmi(ConfusionMatrix(np.array(CM_3x2))) == pytest.approx(expected, rel=1e-12)
    pred, truth = [0, 0, 1, 1, 2, 2], [0, 0, 0, 1, 1, 1]
    assert expected == pytest.approx(normalized_mutual_info_score(truth, pred, average_method="geometric"), rel=1e-12)


def test_nmi_degenerate_cases():
    assert nmi(ConfusionMatrix(np.array([[4]]))) == 1.0
    assert nmi(ConfusionMatrix(np.array([[2, 2]]))) == 0.0
    assert nmi(ConfusionMatrix(np.array([[2], [2]]))) == 0.0


def test_nmi_against_sklearn_random():
    rng = np.random.default_rng(4)
    for _ in range(20):
        pred = rng.integers(0, 6, 200)
        truth = (pred + (rng.random(200) < 0.3) * rng.integers(0, 4, 200)) % 5
        ours = nmi(confusion(pred, truth))
        ref = normalized_mutual_info_score(truth, pred, average_method="geometric")
        assert ours == pytest.approx(ref, rel=1e-9)


def test_evaluate_over_clustered():
    truth = np.repeat([0, 1], 10)
    pred = np.concatenate([np.repeat([0, 1], 5), np.repeat([2], 10)])
    rep = evaluate(pred, truth)
    assert rep.acc == pytest.approx(15 / 20)
    assert rep.k_pred_used == 3
    assert len(set(rep.mapping.values())) == len(rep.mapping)
    assert set(rep.to_dict()) == {"acc", "nmi", "k_pred_used", "mapping"}
