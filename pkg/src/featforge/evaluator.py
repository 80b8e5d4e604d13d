"""Downstream models and metrics that score a candidate feature set.

Random forest (CART trees built from scratch) for classification/regression,
closed-form ridge regression, and a KNN mean-distance anomaly scorer.  The
headline metric is macro-F1 / 1-RAE / ROC-AUC depending on the task.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from featforge.data_core import SplitPlan, Task


@dataclass(frozen=True)
class ModelSpec:
    kind: str = "random_forest"  # random_forest | ridge | knn_anomaly
    n_trees: int = 10
    max_depth: int = 8
    min_samples_leaf: int = 2
    ridge_lambda: float = 1.0
    knn_k: int = 5
    seed: int = 0

    def __post_init__(self):
        if min(self.n_trees, self.max_depth, self.min_samples_leaf, self.knn_k) < 1:
            raise ValueError("hyperparameters must be positive")
        if self.ridge_lambda <= 0:
            raise ValueError("ridge_lambda must be positive")


@dataclass(frozen=True)
class EvalResult:
    primary_metric: float
    auxiliary: dict


# ---------------------------------------------------------------- CART trees


class _TreeNode:
    __slots__ = ("feature", "threshold", "left", "right", "value")

    def __init__(self, value=None):
        self.feature = -1
        self.threshold = 0.0
        self.left = None
        self.right = None
        self.value = value


def _gini(counts: np.ndarray) -> float:
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts / total
    return float(1.0 - np.sum(p * p))


def _best_split(x: np.ndarray, y: np.ndarray, classification: bool, n_classes: int, min_leaf: int):
    """Best (threshold, weighted impurity) for one feature; None if no valid split."""
    order = np.argsort(x, kind="mergesort")
    xs = x[order]
    ys = y[order]
    m = len(xs)
    # split positions: after index i (left gets i+1 rows), only where value changes
    cut = np.flatnonzero(xs[:-1] < xs[1:]) + 1  # left sizes
    cut = cut[(cut >= min_leaf) & (m - cut >= min_leaf)]
    if cut.size == 0:
        return None
    if classification:
        onehot = np.zeros((m, n_classes))
        onehot[np.arange(m), ys.astype(int)] = 1.0
        prefix = np.cumsum(onehot, axis=0)
        left = prefix[cut - 1]
        right = prefix[-1] - left
        nl = cut.astype(float)
        nr = m - nl
        pl = left / nl[:, None]
        pr = right / nr[:, None]
        gini_l = 1.0 - np.sum(pl * pl, axis=1)
        gini_r = 1.0 - np.sum(pr * pr, axis=1)
        score = (nl * gini_l + nr * gini_r) / m
    else:
        s = np.cumsum(ys)
        s2 = np.cumsum(ys * ys)
        nl = cut.astype(float)
        nr = m - nl
        sl = s[cut - 1]
        sr = s[-1] - sl
        s2l = s2[cut - 1]
        s2r = s2[-1] - s2l
        var_l = s2l / nl - (sl / nl) ** 2
        var_r = s2r / nr - (sr / nr) ** 2
        score = (nl * var_l + nr * var_r) / m
    best = int(np.argmin(score))
    pos = cut[best]
    threshold = 0.5 * (xs[pos - 1] + xs[pos])
    return threshold, float(score[best])


def _build_tree(
    X: np.ndarray,
    y: np.ndarray,
    classification: bool,
    n_classes: int,
    max_depth: int,
    min_leaf: int,
    rng: np.random.Generator,
    depth: int = 0,
) -> _TreeNode:
    def leaf():
        if classification:
            counts = np.bincount(y.astype(int), minlength=n_classes)
            return _TreeNode(value=int(np.argmax(counts)))
        return _TreeNode(value=float(y.mean()))

    if depth >= max_depth or len(y) < 2 * min_leaf or len(np.unique(y)) == 1:
        return leaf()
    n = X.shape[1]
    n_try = int(np.ceil(np.sqrt(n)))
    feats = np.sort(rng.choice(n, size=n_try, replace=False))
    best = None
    for f in feats:
        res = _best_split(X[:, f], y, classification, n_classes, min_leaf)
        if res is None:
            continue
        threshold, score = res
        if best is None or score < best[2]:
            best = (f, threshold, score)
    if best is None:
        return leaf()
    f, threshold, _ = best
    mask = X[:, f] <= threshold
    # midpoints of near-identical values can round onto one of them
    if not mask.any() or mask.all():
        return leaf()
    node = _TreeNode()
    node.feature = int(f)
    node.threshold = float(threshold)
    node.left = _build_tree(X[mask], y[mask], classification, n_classes, max_depth, min_leaf, rng, depth + 1)
    node.right = _build_tree(X[~mask], y[~mask], classification, n_classes, max_depth, min_leaf, rng, depth + 1)
    return node


def _predict_tree(node: _TreeNode, X: np.ndarray) -> np.ndarray:
    out = np.empty(X.shape[0])
    for i in range(X.shape[0]):
        cur = node
        while cur.value is None:
            cur = cur.left if X[i, cur.feature] <= cur.threshold else cur.right
        out[i] = cur.value
    return out


class RandomForest:
    """Bagged CART trees with per-split feature subsampling."""

    def __init__(self, spec: ModelSpec, classification: bool):
        self.spec = spec
        self.classification = classification
        self.trees: list[_TreeNode] = []
        self.n_classes = 0

    def fit(self, X, y) -> "RandomForest":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        if len(y) == 0:
            raise ValueError("empty training set")
        if self.classification:
            self.n_classes = int(y.max()) + 1
        m = len(y)
        self.trees = []
        for t in range(self.spec.n_trees):
            rng = np.random.default_rng(self.spec.seed * 1_000_003 + t)
            rows = rng.integers(0, m, size=m)
            self.trees.append(
                _build_tree(
                    X[rows],
                    y[rows],
                    self.classification,
                    self.n_classes,
                    self.spec.max_depth,
                    self.spec.min_samples_leaf,
                    rng,
                )
            )
        return self

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        preds = np.stack([_predict_tree(t, X) for t in self.trees])
        if self.classification:
            out = np.empty(X.shape[0])
            for i in range(X.shape[0]):
                counts = np.bincount(preds[:, i].astype(int), minlength=self.n_classes)
                out[i] = int(np.argmax(counts))
            return out
        return preds.mean(axis=0)


def train_random_forest(X, y, spec: ModelSpec, classification: bool) -> RandomForest:
    return RandomForest(spec, classification).fit(X, y)


# ------------------------------------------------------------ ridge and KNN


def _standardize(train: np.ndarray, other: np.ndarray):
    mu = train.mean(axis=0)
    sd = train.std(axis=0)
    sd = np.where(sd < 1e-12, 1.0, sd)
    return (train - mu) / sd, (other - mu) / sd


def ridge_fit_predict(train_X, train_y, test_X, lam: float = 1.0) -> np.ndarray:
    """Closed-form ridge on standardized features; intercept unpenalized."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    train_X = np.asarray(train_X, dtype=float)
    test_X = np.asarray(test_X, dtype=float)
    train_y = np.asarray(train_y, dtype=float)
    xs, xt = _standardize(train_X, test_X)
    y_mean = train_y.mean()
    yc = train_y - y_mean
    n = xs.shape[1]
    w = np.linalg.solve(xs.T @ xs + lam * np.eye(n), xs.T @ yc)
    return xt @ w + y_mean


def knn_anomaly_scores(train_X, test_X, k: int = 5) -> np.ndarray:
    """Mean distance of each test point to its k nearest train neighbors."""
    train_X = np.asarray(train_X, dtype=float)
    test_X = np.asarray(test_X, dtype=float)
    if k >= len(train_X):
        raise ValueError("k must be < number of reference rows")
    xs, xt = _standardize(train_X, test_X)
    d2 = np.sum(xt**2, axis=1)[:, None] + np.sum(xs**2, axis=1)[None, :] - 2 * xt @ xs.T
    d = np.sqrt(np.maximum(d2, 0.0))
    part = np.sort(d, axis=1)[:, :k]
    return part.mean(axis=1)


def knn_self_scores(X, k: int = 5) -> np.ndarray:
    """Anomaly score within one set: mean distance to k nearest others."""
    X = np.asarray(X, dtype=float)
    if k >= len(X):
        raise ValueError("k must be < number of rows")
    xs, _ = _standardize(X, X)
    d2 = np.sum(xs**2, axis=1)[:, None] + np.sum(xs**2, axis=1)[None, :] - 2 * xs @ xs.T
    d = np.sqrt(np.maximum(d2, 0.0))
    np.fill_diagonal(d, np.inf)
    part = np.sort(d, axis=1)[:, :k]
    return part.mean(axis=1)


# ------------------------------------------------------------------- metrics


def confusion_counts(pred, truth, n_classes: int):
    mat = np.zeros((n_classes, n_classes), dtype=int)
    for p, t in zip(np.asarray(pred, dtype=int), np.asarray(truth, dtype=int)):
        mat[t, p] += 1
    return mat


def metric_f1(pred, truth) -> float:
    """Macro-averaged F1 over the classes present in the truth vector."""
    pred = np.asarray(pred, dtype=int)
    truth = np.asarray(truth, dtype=int)
    if len(pred) != len(truth):
        raise ValueError("length mismatch")
    classes = np.unique(truth)
    f1s = []
    for c in classes:
        tp = np.sum((pred == c) & (truth == c))
        fp = np.sum((pred == c) & (truth != c))
        fn = np.sum((pred != c) & (truth == c))
        precision = tp / (tp + fp) if tp + fp > 0 else 0.0
        recall = tp / (tp + fn) if tp + fn > 0 else 0.0
        f1s.append(2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0)
    return float(np.mean(f1s))


def metric_1rae(pred, truth) -> float:
    """1 - sum|y - yhat| / sum|y - mean(y)|; may be negative."""
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if len(pred) != len(truth):
        raise ValueError("length mismatch")
    denom = np.sum(np.abs(truth - truth.mean()))
    if denom == 0.0:
        return 1.0 if np.allclose(pred, truth) else 0.0
    return float(1.0 - np.sum(np.abs(truth - pred)) / denom)


def metric_auc(scores, truth) -> float:
    """Mann-Whitney ROC-AUC with average-rank tie correction."""
    scores = np.asarray(scores, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if len(scores) != len(truth):
        raise ValueError("length mismatch")
    pos = truth == 1
    n_pos = int(pos.sum())
    n_neg = len(truth) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC undefined for single-class truth")
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(len(scores))
    sorted_scores = scores[order]
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    rank_sum = ranks[pos].sum()
    return float((rank_sum - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def evaluate_predictions(pred_or_scores, truth, task: Task) -> EvalResult:
    """Full metric bundle for a task; primary metric per the task kind."""
    if task is Task.CLASSIFICATION:
        pred = np.asarray(pred_or_scores)
        truth_i = np.asarray(truth, dtype=int)
        f1 = metric_f1(pred, truth_i)
        classes = np.unique(truth_i)
        precs, recs = [], []
        for c in classes:
            tp = np.sum((pred == c) & (truth_i == c))
            fp = np.sum((pred == c) & (truth_i != c))
            fn = np.sum((pred != c) & (truth_i == c))
            precs.append(tp / (tp + fp) if tp + fp > 0 else 0.0)
            recs.append(tp / (tp + fn) if tp + fn > 0 else 0.0)
        return EvalResult(
            primary_metric=f1,
            auxiliary={
                "f1_macro": f1,
                "precision_macro": float(np.mean(precs)),
                "recall_macro": float(np.mean(recs)),
                "accuracy": float(np.mean(pred == truth_i)),
            },
        )
    if task is Task.REGRESSION:
        pred = np.asarray(pred_or_scores, dtype=float)
        truth_f = np.asarray(truth, dtype=float)
        one_rae = metric_1rae(pred, truth_f)
        mae = float(np.mean(np.abs(pred - truth_f)))
        rmse = float(np.sqrt(np.mean((pred - truth_f) ** 2)))
        denom_mae = float(np.mean(np.abs(truth_f - truth_f.mean())))
        denom_rmse = float(np.sqrt(np.mean((truth_f - truth_f.mean()) ** 2)))
        return EvalResult(
            primary_metric=one_rae,
            auxiliary={
                "1-RAE": one_rae,
                "1-MAE": 1.0 - mae / denom_mae if denom_mae > 0 else 0.0,
                "1-RMSE": 1.0 - rmse / denom_rmse if denom_rmse > 0 else 0.0,
            },
        )
    auc = metric_auc(pred_or_scores, truth)
    return EvalResult(primary_metric=auc, auxiliary={"roc_auc": auc})


def downstream_performance(
    features, target, task: Task, spec: ModelSpec, split: SplitPlan
) -> float:
    """Search-time reward V_A: primary metric of the task model on the test side.

    Regression clamps negative 1-RAE to 0 so the reward scale stays
    commensurate with utility deltas.
    """
    features = np.asarray(features, dtype=float)
    target = np.asarray(target, dtype=float)
    tr = split.train_indices
    te = split.test_indices
    if len(tr) == 0 or len(te) == 0:
        raise ValueError("degenerate split")
    if task is Task.CLASSIFICATION:
        model = train_random_forest(features[tr], target[tr], spec, classification=True)
        return metric_f1(model.predict(features[te]), target[te])
    if task is Task.REGRESSION:
        model = train_random_forest(features[tr], target[tr], spec, classification=False)
        return max(0.0, metric_1rae(model.predict(features[te]), target[te]))
    scores = knn_anomaly_scores(features[tr], features[te], k=min(spec.knn_k, len(tr) - 1))
    return metric_auc(scores, target[te])
