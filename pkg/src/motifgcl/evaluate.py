"""Downstream evaluation on frozen embeddings.

Single-label node classification uses an L2-regularized multinomial logistic
regression fitted by plain full-batch gradient descent, with the penalty
weight grid-searched on a validation split. Overlapping-community studies
use a Bayesian multilabel k-nearest-neighbor classifier and report exact
label-set recovery per community pair as a heatmap.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputDataError
from .graphs import LabelSet

__all__ = [
    "Split",
    "make_splits",
    "logistic_eval",
    "logistic_eval_repeated",
    "MultiLabelKNN",
    "mlknn_eval",
    "DEFAULT_STRENGTHS",
]

# penalty weights 2^-10 .. 2^10
DEFAULT_STRENGTHS = tuple(2.0 ** e for e in range(-10, 11))


@dataclass(frozen=True)
class Split:
    """Disjoint train/validation/test node index sets."""

    train: np.ndarray
    val: np.ndarray
    test: np.ndarray

    def __post_init__(self):
        a = set(self.train.tolist())
        b = set(self.val.tolist())
        c = set(self.test.tolist())
        if a & b or a & c or b & c:
            raise InputDataError("split parts overlap")


def make_splits(n: int, seed: int) -> Split:
    """Shuffled 10/10/80 percent train/validation/test partition."""
    if n < 10:
        raise InputDataError(f"need at least 10 nodes to split, got {n}")
    perm = np.random.Generator(np.random.PCG64(seed)).permutation(n)
    n_train = n // 10
    n_val = n // 10
    return Split(
        train=np.sort(perm[:n_train]),
        val=np.sort(perm[n_train:n_train + n_val]),
        test=np.sort(perm[n_train + n_val:]),
    )


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _fit_logistic(
    x: np.ndarray,
    y: np.ndarray,
    num_classes: int,
    strength: float,
    lr: float = 0.1,
    iterations: int = 500,
    tol: float = 1e-6,
) -> tuple[np.ndarray, np.ndarray]:
    """Multinomial logistic regression by fixed-step gradient descent.

    Loss: mean cross-entropy + strength/2 * ||W||^2 (intercept unpenalized).
    Stops early once the full gradient norm falls below ``tol``.
    """
    n, d = x.shape
    w = np.zeros((d, num_classes))
    b = np.zeros((1, num_classes))
    onehot = np.zeros((n, num_classes))
    onehot[np.arange(n), y] = 1.0
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(iterations):
            probs = _softmax(x @ w + b)
            err = (probs - onehot) / n
            gw = x.T @ err + strength * w
            gb = err.sum(axis=0, keepdims=True)
            gnorm = np.sqrt(np.sum(gw * gw) + np.sum(gb * gb))
            if gnorm < tol:
                break
            w -= lr * gw
            b -= lr * gb
            # the fixed step diverges once lr*strength > 2; such strengths
            # lose the validation race anyway, flag the fit as unusable
            if not np.all(np.isfinite(w)) or np.max(np.abs(w)) > 1e8:
                return None, None
    return w, b


def _accuracy(x, y, w, b) -> float:
    return float(np.mean(np.argmax(x @ w + b, axis=1) == y))


def logistic_eval(
    z: np.ndarray,
    labels: LabelSet | np.ndarray,
    split: Split,
    strengths: tuple[float, ...] = DEFAULT_STRENGTHS,
) -> float:
    """Test accuracy with the penalty strength picked on the validation set.

    Ties on validation accuracy resolve to the smallest strength.
    """
    y = labels.single() if isinstance(labels, LabelSet) else np.asarray(labels)
    if y.shape[0] != z.shape[0]:
        raise InputDataError("labels and embeddings disagree on node count")
    num_classes = int(y.max()) + 1
    y_train = y[split.train]
    if np.unique(y_train).size < 2:
        raise InputDataError("train split holds a single class; cannot fit")
    best = None
    for strength in sorted(strengths):
        w, b = _fit_logistic(z[split.train], y_train, num_classes, strength)
        if w is None:
            continue
        val_acc = _accuracy(z[split.val], y[split.val], w, b)
        if best is None or val_acc > best[0]:
            best = (val_acc, w, b)
    if best is None:
        raise InputDataError("every regularization strength diverged")
    _, w, b = best
    return _accuracy(z[split.test], y[split.test], w, b)


def logistic_eval_repeated(
    z: np.ndarray,
    labels: LabelSet | np.ndarray,
    repeats: int = 5,
    seed: int = 0,
    strengths: tuple[float, ...] = DEFAULT_STRENGTHS,
) -> tuple[float, float, list[float]]:
    """Mean and standard deviation of test accuracy over fresh random splits."""
    accs = [logistic_eval(z, labels, make_splits(z.shape[0], seed + r), strengths)
            for r in range(repeats)]
    return float(np.mean(accs)), float(np.std(accs)), accs


class MultiLabelKNN:
    """Multilabel k-nearest-neighbor classifier with Bayesian posterior
    thresholding per label (neighbor label counts vs. smoothed priors)."""

    def __init__(self, k: int = 10, smoothing: float = 1.0):
        self.k = k
        self.s = smoothing

    def fit(self, x: np.ndarray, y: np.ndarray) -> "MultiLabelKNN":
        """x: reference embeddings; y: binary label matrix (n, num_labels)."""
        n, num_labels = y.shape
        if n <= self.k:
            raise InputDataError(f"need more than k={self.k} reference points, got {n}")
        self.x = x
        self.y = y
        s, k = self.s, self.k
        self.prior1 = (s + y.sum(axis=0)) / (2.0 * s + n)
        self.prior0 = 1.0 - self.prior1
        # delta counts on the reference set itself, self excluded
        c1 = np.zeros((num_labels, k + 1))
        c0 = np.zeros((num_labels, k + 1))
        for i in range(n):
            counts = y[self._neighbors(x[i], exclude=i)].sum(axis=0).astype(int)
            for j in range(num_labels):
                if y[i, j] == 1:
                    c1[j, counts[j]] += 1
                else:
                    c0[j, counts[j]] += 1
        self.cond1 = (s + c1) / (s * (k + 1) + c1.sum(axis=1, keepdims=True))
        self.cond0 = (s + c0) / (s * (k + 1) + c0.sum(axis=1, keepdims=True))
        return self

    def _neighbors(self, q: np.ndarray, exclude: int | None = None) -> np.ndarray:
        d = np.sum((self.x - q) ** 2, axis=1)
        if exclude is not None:
            d[exclude] = np.inf
        # stable ties: argsort on (distance, index)
        return np.lexsort((np.arange(d.shape[0]), d))[: self.k]

    def predict(self, queries: np.ndarray) -> np.ndarray:
        """Binary label matrix; label j on iff its posterior favors presence."""
        out = np.zeros((queries.shape[0], self.y.shape[1]), dtype=int)
        for i, q in enumerate(queries):
            counts = self.y[self._neighbors(q)].sum(axis=0).astype(int)
            for j in range(self.y.shape[1]):
                p1 = self.prior1[j] * self.cond1[j, counts[j]]
                p0 = self.prior0[j] * self.cond0[j, counts[j]]
                out[i, j] = int(p1 >= p0)
        return out


def mlknn_eval(
    z: np.ndarray,
    labels: LabelSet,
    split: Split,
    k_nn: int = 10,
    smoothing: float = 1.0,
    exact_match: bool = True,
) -> np.ndarray:
    """Per-community-pair accuracy heatmap from a multilabel kNN classifier.

    The classifier is fitted on train+val nodes and scored on test nodes.
    Cell (i, j), i != j, covers test nodes whose label set is exactly
    {i, j}; the diagonal covers single-label nodes. With ``exact_match``
    a node counts as correct only if its whole label set is recovered;
    otherwise it counts if every true label is predicted (recall-style).
    Cells with no nodes are NaN. The matrix is symmetric by construction.
    """
    y = labels.indicator()
    reference = np.concatenate([split.train, split.val])
    clf = MultiLabelKNN(k=k_nn, smoothing=smoothing).fit(z[reference], y[reference])
    predicted = clf.predict(z[split.test])
    truth = y[split.test]

    c = labels.num_classes
    hits = np.zeros((c, c))
    totals = np.zeros((c, c))
    for row_pred, row_true in zip(predicted, truth):
        true_idx = np.nonzero(row_true)[0]
        if len(true_idx) == 1:
            i = j = int(true_idx[0])
        elif len(true_idx) == 2:
            i, j = int(true_idx[0]), int(true_idx[1])
        else:
            continue  # heatmap covers 1- and 2-label nodes only
        if exact_match:
            ok = bool(np.array_equal(row_pred, row_true))
        else:
            ok = bool(np.all(row_pred[true_idx] == 1))
        for a, b in {(i, j), (j, i)}:
            totals[a, b] += 1
            hits[a, b] += ok
    with np.errstate(invalid="ignore"):
        heat = np.where(totals > 0, hits / np.maximum(totals, 1), np.nan)
    return heat
