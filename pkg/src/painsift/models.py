"""Four from-scratch classifier families behind one train/predict contract.

All trainers are deterministic functions of (data, hyperparameters, seed).
Ties anywhere (votes, leaf majorities, probability argmax) resolve to the
smallest class index. Multiclass problems are trained as nominal
classification; ordinality only enters at evaluation time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .features import FeatureVector, Layout

__all__ = [
    "TrainedModel",
    "TreeNode",
    "train_logreg",
    "train_tree",
    "train_forest",
    "train_ffnn",
    "predict",
    "predict_batch",
    "MODEL_KINDS",
]

MODEL_KINDS = ("lr", "dt", "rf", "ffnn")


@dataclass(frozen=True)
class TrainedModel:
    kind: str  # "lr" | "dt" | "rf" | "ffnn"
    params: object  # kind-specific payload
    label_map: tuple  # class index -> label
    feature_layout: Layout
    seed: int


@dataclass(frozen=True)
class TreeNode:
    """Internal split (feature, threshold, children) or leaf (histogram)."""

    feature: Optional[int] = None
    threshold: Optional[float] = None
    left: Optional["TreeNode"] = None
    right: Optional["TreeNode"] = None
    histogram: Optional[np.ndarray] = None  # per-class counts at a leaf

    @property
    def is_leaf(self) -> bool:
        return self.histogram is not None


def _check_training_data(X, y) -> tuple[np.ndarray, np.ndarray, tuple]:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("X must be a 2-D matrix")
    if not np.all(np.isfinite(X)):
        raise ValueError("feature matrix contains non-finite values")
    y = np.asarray(y)
    if len(y) != X.shape[0]:
        raise ValueError("X and y are not parallel")
    labels = tuple(sorted(set(y.tolist())))
    y_idx = np.array([labels.index(v) for v in y.tolist()], dtype=np.int64)
    return X, y_idx, labels


def _default_layout(d: int) -> Layout:
    return (("features", d),)


def _one_hot(y_idx: np.ndarray, n_classes: int) -> np.ndarray:
    out = np.zeros((len(y_idx), n_classes))
    out[np.arange(len(y_idx)), y_idx] = 1.0
    return out


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def _cross_entropy(probs: np.ndarray, y_onehot: np.ndarray) -> float:
    eps = 1e-300  # only guards exact zeros; softmax output is positive
    return float(-(y_onehot * np.log(probs + eps)).sum() / len(probs))


# ---------------------------------------------------------------------------
# logistic regression
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LogRegParams:
    W: np.ndarray  # d x C
    b: np.ndarray  # C
    learning_rate: float
    epochs: int
    l2: float
    loss_history: tuple[float, ...]


def logreg_loss_and_grads(
    W: np.ndarray, b: np.ndarray, X: np.ndarray, y_onehot: np.ndarray, l2: float
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean cross-entropy plus l2*||W||^2/2, with analytic gradients."""
    probs = _softmax(X @ W + b)
    n = len(X)
    loss = _cross_entropy(probs, y_onehot) + 0.5 * l2 * float((W**2).sum())
    delta = (probs - y_onehot) / n
    return loss, X.T @ delta + l2 * W, delta.sum(axis=0)


def train_logreg(
    X,
    y,
    learning_rate: float = 0.1,
    epochs: int = 300,
    l2: float = 1e-4,
    seed: int = 0,
    feature_layout: Optional[Layout] = None,
) -> TrainedModel:
    """Multinomial logistic regression by full-batch gradient descent.

    Weights start at zero, so epoch 0 predicts uniform probabilities and the
    run is deterministic regardless of seed.
    """
    X, y_idx, labels = _check_training_data(X, y)
    if len(labels) < 2:
        raise ValueError("logistic regression needs at least 2 classes")
    n, d = X.shape
    c = len(labels)
    y_onehot = _one_hot(y_idx, c)
    W = np.zeros((d, c))
    b = np.zeros(c)
    history = []
    for _ in range(epochs):
        loss, g_w, g_b = logreg_loss_and_grads(W, b, X, y_onehot, l2)
        history.append(loss)
        W = W - learning_rate * g_w
        b = b - learning_rate * g_b
    history.append(logreg_loss_and_grads(W, b, X, y_onehot, l2)[0])
    params = LogRegParams(
        W=W, b=b, learning_rate=learning_rate, epochs=epochs, l2=l2,
        loss_history=tuple(history),
    )
    return TrainedModel(
        kind="lr", params=params, label_map=labels,
        feature_layout=feature_layout or _default_layout(d), seed=seed,
    )


# ---------------------------------------------------------------------------
# CART decision tree
# ---------------------------------------------------------------------------


def gini_impurity(histogram: np.ndarray) -> float:
    total = histogram.sum()
    if total == 0:
        return 0.0
    p = histogram / total
    return float(1.0 - (p**2).sum())


def _best_split(
    X: np.ndarray,
    y_idx: np.ndarray,
    n_classes: int,
    feature_ids: np.ndarray,
    min_leaf: int,
) -> Optional[tuple[int, float]]:
    """Best (feature, midpoint threshold) by Gini decrease; None if no gain.

    Features are scanned in ascending index and thresholds in ascending
    value, with strict improvement required, so ties resolve to the first
    candidate and the tree is deterministic.
    """
    n = len(y_idx)
    parent = gini_impurity(np.bincount(y_idx, minlength=n_classes).astype(float))
    best_gain = 1e-12
    best: Optional[tuple[int, float]] = None
    for f in feature_ids:
        col = X[:, f]
        order = np.argsort(col, kind="stable")
        sorted_vals = col[order]
        sorted_y = y_idx[order]
        distinct = np.flatnonzero(sorted_vals[:-1] < sorted_vals[1:])
        if distinct.size == 0:
            continue
        onehot = np.zeros((n, n_classes))
        onehot[np.arange(n), sorted_y] = 1.0
        left_counts = np.cumsum(onehot, axis=0)[distinct]
        totals = np.bincount(sorted_y, minlength=n_classes).astype(float)
        right_counts = totals - left_counts
        n_left = (distinct + 1).astype(float)
        n_right = n - n_left
        ok = (n_left >= min_leaf) & (n_right >= min_leaf)
        if not ok.any():
            continue
        gini_left = 1.0 - ((left_counts / n_left[:, None]) ** 2).sum(axis=1)
        gini_right = 1.0 - ((right_counts / n_right[:, None]) ** 2).sum(axis=1)
        gains = parent - (n_left * gini_left + n_right * gini_right) / n
        gains[~ok] = -np.inf
        pos = int(np.argmax(gains))
        if gains[pos] > best_gain:
            best_gain = float(gains[pos])
            i = distinct[pos]
            best = (int(f), float((sorted_vals[i] + sorted_vals[i + 1]) / 2.0))
    return best


def _grow_tree(
    X: np.ndarray,
    y_idx: np.ndarray,
    n_classes: int,
    depth: int,
    max_depth: Optional[int],
    min_leaf: int,
    n_subsample: Optional[int],
    rng: Optional[np.random.Generator],
) -> TreeNode:
    histogram = np.bincount(y_idx, minlength=n_classes).astype(float)
    if (
        (max_depth is not None and depth >= max_depth)
        or len(y_idx) < 2 * min_leaf
        or np.count_nonzero(histogram) <= 1
    ):
        return TreeNode(histogram=histogram)

    d = X.shape[1]
    if n_subsample is not None and n_subsample < d:
        feature_ids = np.sort(rng.choice(d, size=n_subsample, replace=False))
    else:
        feature_ids = np.arange(d)

    split = _best_split(X, y_idx, n_classes, feature_ids, min_leaf)
    if split is None:
        return TreeNode(histogram=histogram)
    f, thr = split
    mask = X[:, f] <= thr
    left = _grow_tree(X[mask], y_idx[mask], n_classes, depth + 1, max_depth,
                      min_leaf, n_subsample, rng)
    right = _grow_tree(X[~mask], y_idx[~mask], n_classes, depth + 1, max_depth,
                       min_leaf, n_subsample, rng)
    return TreeNode(feature=f, threshold=thr, left=left, right=right)


def _tree_leaf(node: TreeNode, x: np.ndarray) -> TreeNode:
    while not node.is_leaf:
        node = node.left if x[node.feature] <= node.threshold else node.right
    return node


@dataclass(frozen=True)
class TreeParams:
    root: TreeNode
    max_depth: Optional[int]
    min_leaf: int


def train_tree(
    X,
    y,
    max_depth: Optional[int] = 20,
    min_leaf: int = 2,
    seed: int = 0,
    feature_layout: Optional[Layout] = None,
) -> TrainedModel:
    """Greedy CART with Gini impurity and midpoint thresholds.

    max_depth=None grows until purity or min_leaf stops a branch.
    """
    X, y_idx, labels = _check_training_data(X, y)
    if min_leaf < 1:
        raise ValueError(f"min_leaf must be >= 1, got {min_leaf}")
    root = _grow_tree(X, y_idx, len(labels), 0, max_depth, min_leaf, None, None)
    params = TreeParams(root=root, max_depth=max_depth, min_leaf=min_leaf)
    return TrainedModel(
        kind="dt", params=params, label_map=labels,
        feature_layout=feature_layout or _default_layout(X.shape[1]), seed=seed,
    )


# ---------------------------------------------------------------------------
# random forest
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ForestParams:
    roots: tuple[TreeNode, ...]
    n_trees: int
    max_depth: Optional[int]
    min_leaf: int
    feature_fraction: Optional[float]
    bootstrap: bool


def train_forest(
    X,
    y,
    n_trees: int = 100,
    max_depth: Optional[int] = 20,
    min_leaf: int = 2,
    feature_fraction: Optional[float] = None,
    bootstrap: bool = True,
    seed: int = 0,
    feature_layout: Optional[Layout] = None,
) -> TrainedModel:
    """Bootstrap-aggregated CART trees with per-split feature subsampling.

    feature_fraction=None uses ceil(sqrt(d)) features per split; an explicit
    fraction uses ceil(fraction * d). Each tree gets its own RNG stream
    spawned from the master seed, so the forest is identical whether trees
    are trained sequentially or in parallel.
    """
    X, y_idx, labels = _check_training_data(X, y)
    if n_trees < 1:
        raise ValueError(f"n_trees must be >= 1, got {n_trees}")
    d = X.shape[1]
    if feature_fraction is None:
        n_subsample = math.ceil(math.sqrt(d))
    else:
        if not 0.0 < feature_fraction <= 1.0:
            raise ValueError(f"feature_fraction must be in (0,1], got {feature_fraction}")
        n_subsample = math.ceil(feature_fraction * d)
    if n_subsample >= d:
        n_subsample = None  # full feature set: no per-split draw, no RNG use

    streams = np.random.SeedSequence(seed).spawn(n_trees)
    roots = []
    for tree_seed in streams:
        rng = np.random.default_rng(tree_seed)
        if bootstrap:
            idx = rng.integers(0, len(y_idx), size=len(y_idx))
            X_t, y_t = X[idx], y_idx[idx]
        else:
            X_t, y_t = X, y_idx
        roots.append(
            _grow_tree(X_t, y_t, len(labels), 0, max_depth, min_leaf, n_subsample, rng)
        )
    params = ForestParams(
        roots=tuple(roots), n_trees=n_trees, max_depth=max_depth, min_leaf=min_leaf,
        feature_fraction=feature_fraction, bootstrap=bootstrap,
    )
    return TrainedModel(
        kind="rf", params=params, label_map=labels,
        feature_layout=feature_layout or _default_layout(d), seed=seed,
    )


# ---------------------------------------------------------------------------
# feed-forward neural network
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FFNNParams:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    hidden_size: int
    learning_rate: float
    epochs: int
    batch_size: int
    loss_history: tuple[float, ...]


def ffnn_loss_and_grads(
    W1: np.ndarray,
    b1: np.ndarray,
    W2: np.ndarray,
    b2: np.ndarray,
    X: np.ndarray,
    y_onehot: np.ndarray,
) -> tuple[float, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Forward + backprop for one ReLU hidden layer and softmax output."""
    z1 = X @ W1 + b1
    h = np.maximum(z1, 0.0)
    probs = _softmax(h @ W2 + b2)
    loss = _cross_entropy(probs, y_onehot)
    n = len(X)
    delta2 = (probs - y_onehot) / n
    g_w2 = h.T @ delta2
    g_b2 = delta2.sum(axis=0)
    delta1 = (delta2 @ W2.T) * (z1 > 0.0)
    g_w1 = X.T @ delta1
    g_b1 = delta1.sum(axis=0)
    return loss, g_w1, g_b1, g_w2, g_b2


def train_ffnn(
    X,
    y,
    hidden_size: int = 64,
    learning_rate: float = 0.05,
    epochs: int = 200,
    batch_size: int = 16,
    seed: int = 0,
    feature_layout: Optional[Layout] = None,
) -> TrainedModel:
    """One-hidden-layer network trained with mini-batch gradient descent.

    Weights start uniform in +/- 1/sqrt(fan_in) from the seeded RNG, biases
    at zero; batches follow one seeded shuffle per epoch, so training is
    fully deterministic. A non-finite loss aborts with advice to lower the
    learning rate.
    """
    X, y_idx, labels = _check_training_data(X, y)
    if len(labels) < 2:
        raise ValueError("FFNN needs at least 2 classes")
    if hidden_size < 1 or batch_size < 1:
        raise ValueError("hidden_size and batch_size must be >= 1")
    n, d = X.shape
    c = len(labels)
    y_onehot = _one_hot(y_idx, c)

    rng = np.random.default_rng(seed)
    W1 = rng.uniform(-1.0, 1.0, size=(d, hidden_size)) / math.sqrt(d)
    b1 = np.zeros(hidden_size)
    W2 = rng.uniform(-1.0, 1.0, size=(hidden_size, c)) / math.sqrt(hidden_size)
    b2 = np.zeros(c)

    history = [ffnn_loss_and_grads(W1, b1, W2, b2, X, y_onehot)[0]]
    for epoch in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            batch = order[start : start + batch_size]
            _, g_w1, g_b1, g_w2, g_b2 = ffnn_loss_and_grads(
                W1, b1, W2, b2, X[batch], y_onehot[batch]
            )
            W1 = W1 - learning_rate * g_w1
            b1 = b1 - learning_rate * g_b1
            W2 = W2 - learning_rate * g_w2
            b2 = b2 - learning_rate * g_b2
        loss = ffnn_loss_and_grads(W1, b1, W2, b2, X, y_onehot)[0]
        if not math.isfinite(loss):
            raise ValueError(
                f"FFNN training diverged at epoch {epoch} (non-finite loss); "
                "lower the learning rate"
            )
        history.append(loss)

    params = FFNNParams(
        W1=W1, b1=b1, W2=W2, b2=b2, hidden_size=hidden_size,
        learning_rate=learning_rate, epochs=epochs, batch_size=batch_size,
        loss_history=tuple(history),
    )
    return TrainedModel(
        kind="ffnn", params=params, label_map=labels,
        feature_layout=feature_layout or _default_layout(d), seed=seed,
    )


# ---------------------------------------------------------------------------
# prediction
# ---------------------------------------------------------------------------


def _check_input(model: TrainedModel, x: Union[FeatureVector, np.ndarray]) -> np.ndarray:
    expected = sum(n for _, n in model.feature_layout)
    if isinstance(x, FeatureVector):
        if x.layout != model.feature_layout:
            raise ValueError(
                f"feature layout mismatch: model expects {model.feature_layout}, got {x.layout}"
            )
        return x.values
    vec = np.asarray(x, dtype=np.float64)
    if vec.ndim != 1 or vec.shape[0] != expected:
        raise ValueError(
            f"feature layout mismatch: model expects a vector of length {expected}"
        )
    return vec


def _probabilities(model: TrainedModel, vec: np.ndarray) -> np.ndarray:
    if model.kind == "lr":
        p: LogRegParams = model.params
        return _softmax((vec[None, :] @ p.W + p.b))[0]
    if model.kind == "ffnn":
        p: FFNNParams = model.params
        h = np.maximum(vec[None, :] @ p.W1 + p.b1, 0.0)
        return _softmax(h @ p.W2 + p.b2)[0]
    if model.kind == "dt":
        hist = _tree_leaf(model.params.root, vec).histogram
        return hist / hist.sum()
    if model.kind == "rf":
        votes = np.zeros(len(model.label_map))
        for root in model.params.roots:
            hist = _tree_leaf(root, vec).histogram
            votes[int(np.argmax(hist))] += 1.0
        return votes / votes.sum()
    raise ValueError(f"unknown model kind {model.kind!r}")


def predict(model: TrainedModel, x: Union[FeatureVector, np.ndarray]):
    """Label plus class-probability vector (vote/leaf fractions for trees)."""
    vec = _check_input(model, x)
    probs = _probabilities(model, vec)
    return model.label_map[int(np.argmax(probs))], probs


def predict_batch(model: TrainedModel, xs: Sequence[Union[FeatureVector, np.ndarray]]):
    return [predict(model, x) for x in xs]
