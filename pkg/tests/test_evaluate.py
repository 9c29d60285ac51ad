import numpy as np
import pytest

from motifgcl.errors import InputDataError
from motifgcl.evaluate import (MultiLabelKNN, Split, logistic_eval,
                               logistic_eval_repeated, make_splits, mlknn_eval)
from motifgcl.graphs import LabelSet


class TestMakeSplits:
    def test_ten_nodes(self):
        s = make_splits(10, seed=0)
        assert len(s.train) == 1 and len(s.val) == 1 and len(s.test) == 8

    def test_partition_properties(self):
        s = make_splits(137, seed=3)
        joined = np.concatenate([s.train, s.val, s.test])
        assert len(np.unique(joined)) == 137

    def test_seed_determinism(self):
        a, b = make_splits(50, seed=7), make_splits(50, seed=7)
        assert np.array_equal(a.train, b.train)
        assert np.array_equal(a.test, b.test)

    def test_too_small_rejected(self):
        with pytest.raises(InputDataError):
            make_splits(9, seed=0)

    def test_overlap_rejected(self):
        with pytest.raises(InputDataError):
            Split(np.array([0]), np.array([0]), np.array([1]))


class TestLogisticEval:
    def test_linearly_separable_reaches_one(self):
        rng = np.random.default_rng(0)
        n = 200
        y = np.repeat([0, 1], n // 2)
        z = rng.normal(size=(n, 4)) * 0.1
        z[:, 0] += np.where(y == 0, 3.0, -3.0)
        acc = logistic_eval(z, y, make_splits(n, 0))
        assert acc == 1.0

    def test_chance_level_on_random_embeddings(self):
        rng = np.random.default_rng(1)
        n = 1000
        y = np.repeat([0, 1], n // 2)
        z = rng.normal(size=(n, 8))
        acc = logistic_eval(z, y, make_splits(n, 1))
        assert abs(acc - 0.5) < 0.05

    def test_identical_embeddings_predict_majority(self):
        n = 100
        y = np.array([0] * 70 + [1] * 30)
        z = np.ones((n, 3))
        split = make_splits(n, 2)
        acc = logistic_eval(z, y, split)
        majority = np.mean(y[split.test] == np.bincount(y[split.train]).argmax())
        assert acc == pytest.approx(majority)

    def test_label_permutation_invariance(self):
        rng = np.random.default_rng(3)
        n = 150
        y = rng.integers(0, 3, n)
        z = rng.normal(size=(n, 5)) + y[:, None]
        split = make_splits(n, 0)
        acc = logistic_eval(z, y, split)
        perm = np.array([2, 0, 1])
        acc_perm = logistic_eval(z, perm[y], split)
        assert acc == pytest.approx(acc_perm)

    def test_single_class_train_rejected(self):
        z = np.ones((20, 2))
        y = np.zeros(20, dtype=int)
        with pytest.raises(InputDataError, match="single class"):
            logistic_eval(z, y, make_splits(20, 0))

    def test_repeated_reports_mean_std(self):
        rng = np.random.default_rng(4)
        n = 120
        y = np.repeat([0, 1], n // 2)
        z = rng.normal(size=(n, 4)) + 2.5 * y[:, None]
        mean, std, accs = logistic_eval_repeated(z, y, repeats=5, seed=0)
        assert len(accs) == 5
        assert mean == pytest.approx(np.mean(accs))
        assert std == pytest.approx(np.std(accs))

    def test_embeddings_not_mutated(self):
        rng = np.random.default_rng(5)
        n, y = 80, np.tile([0, 1], 40)
        z = rng.normal(size=(n, 3))
        snapshot = z.copy()
        logistic_eval(z, y, make_splits(n, 0))
        assert np.array_equal(z, snapshot)


def community_case(seed=0, n=300, c=4, overlap_frac=0.5, sep=4.0, noise=1.0):
    """Embeddings clustered by label set; half the nodes carry two labels."""
    rng = np.random.default_rng(seed)
    labels = []
    for i in range(n):
        if rng.random() < overlap_frac:
            labels.append(tuple(sorted(rng.choice(c, 2, replace=False).tolist())))
        else:
            labels.append((int(rng.integers(c)),))
    ls = LabelSet(tuple(labels), c)
    z = sep * ls.indicator() + noise * rng.normal(size=(n, c))
    return z, ls


class TestMlknnEval:
    def test_one_hot_indicators_score_one(self):
        # every label set populated densely enough for unambiguous neighbors
        c = 4
        sets = [(i,) for i in range(c)] + [(i, j) for i in range(c)
                                           for j in range(i + 1, c)]
        labels = LabelSet(tuple(sets[i % len(sets)] for i in range(600)), c)
        z = 4.0 * labels.indicator()
        heat = mlknn_eval(z, labels, make_splits(600, 0), k_nn=5)
        assert np.nanmin(heat) == 1.0

    def test_random_embeddings_near_chance(self):
        rng = np.random.default_rng(1)
        z, ls = community_case(seed=1)
        z = rng.normal(size=z.shape)
        heat = mlknn_eval(z, ls, make_splits(len(ls), 1), k_nn=5)
        assert np.nanmean(heat) < 0.35

    def test_heatmap_symmetry_and_nan_cells(self):
        z, ls = community_case(seed=2, noise=0.5)
        heat = mlknn_eval(z, ls, make_splits(len(ls), 2), k_nn=5)
        c = heat.shape[0]
        for i in range(c):
            for j in range(c):
                if np.isnan(heat[i, j]):
                    assert np.isnan(heat[j, i])
                else:
                    assert heat[i, j] == heat[j, i]

    def test_exact_match_stricter_than_recall(self):
        z, ls = community_case(seed=3, noise=2.0)
        split = make_splits(len(ls), 3)
        strict = mlknn_eval(z, ls, split, k_nn=5, exact_match=True)
        loose = mlknn_eval(z, ls, split, k_nn=5, exact_match=False)
        both = ~(np.isnan(strict) | np.isnan(loose))
        assert np.all(strict[both] <= loose[both] + 1e-12)

    def test_knn_one_nearest_duplicate(self):
        # duplicated reference points make 1-NN exact recovery trivial
        base = np.eye(3)
        z = np.concatenate([base] * 20)
        labels = LabelSet(tuple((i % 3,) for i in range(60)), 3)
        # shuffle so that splits hold all classes
        heat = mlknn_eval(z, labels, make_splits(60, 4), k_nn=1)
        diag = np.diag(heat)
        assert np.nanmin(diag) == 1.0

    def test_embeddings_not_mutated(self):
        z, ls = community_case(seed=5)
        snapshot = z.copy()
        mlknn_eval(z, ls, make_splits(len(ls), 5), k_nn=5)
        assert np.array_equal(z, snapshot)


class TestMultiLabelKNN:
    def test_needs_enough_reference_points(self):
        with pytest.raises(InputDataError):
            MultiLabelKNN(k=10).fit(np.ones((5, 2)), np.ones((5, 2)))

    def test_posterior_prediction_shape(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(50, 3))
        y = (rng.random((50, 4)) < 0.3).astype(int)
        clf = MultiLabelKNN(k=5).fit(x, y)
        pred = clf.predict(rng.normal(size=(7, 3)))
        assert pred.shape == (7, 4)
        assert set(np.unique(pred)) <= {0, 1}
