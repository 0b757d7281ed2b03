"""From-scratch supervised learners used by the localization pipelines.

Regressors (linear, polynomial, CART tree, random forest, extra trees)
predict coordinates from per-anchor RSSI features; the kNN classifier and
the small feed-forward network predict zone labels. Multi-output targets
are handled by fitting one independent model per output column.

All fitted models are immutable value objects with a ``predict`` method
and a portable JSON representation (see :func:`model_to_dict`).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np

from .exceptions import (EmptyDataset, EmptyTrainingSet, KTooLarge,
                         ShapeMismatch)

ZONE_LABELS = ("A", "B", "C", "D")

MODEL_FORMAT = "rssiloc-model"
MODEL_VERSION = 1

MLP_DEFAULT_SIZES = (13, 20, 17, 4)


# --- datasets -----------------------------------------------------------------

@dataclass(frozen=True)
class RegressionDataset:
    """RSSI feature matrix (N, F) with coordinate targets (N, 2), in cm."""

    features: np.ndarray
    targets: np.ndarray
    feature_names: Tuple[str, ...] = ()

    def __post_init__(self):
        if len(self.features) == 0:
            raise EmptyDataset("regression dataset is empty")
        if len(self.features) != len(self.targets):
            raise ShapeMismatch("features and targets disagree on N")
        if not (np.all(np.isfinite(self.features))
                and np.all(np.isfinite(self.targets))):
            raise ValueError("dataset contains non-finite entries")

    def __len__(self) -> int:
        return len(self.features)


@dataclass(frozen=True)
class ClassificationDataset:
    """Beacon RSSI vectors with zone labels.

    features keeps raw readings including the -200 out-of-range sentinel;
    labels are zone indices into zone_names and one_hot the matching
    indicator rows.
    """

    features: np.ndarray
    labels: np.ndarray
    one_hot: np.ndarray
    locations: Tuple[str, ...] = ()
    zone_names: Tuple[str, ...] = ZONE_LABELS

    def __post_init__(self):
        if len(self.features) == 0:
            raise EmptyDataset("classification dataset is empty")
        if not np.all(self.one_hot.sum(axis=1) == 1):
            raise ValueError("one-hot rows must sum to 1")

    def __len__(self) -> int:
        return len(self.features)


def one_hot_encode(labels: Sequence[int], n_classes: int) -> np.ndarray:
    out = np.zeros((len(labels), n_classes), dtype=float)
    out[np.arange(len(labels)), np.asarray(labels, dtype=int)] = 1.0
    return out


def train_test_split_indices(n: int, test_fraction: float,
                             rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """Shuffled train/test index split; deterministic under the rng state."""
    perm = rng.permutation(n)
    n_test = int(round(n * test_fraction))
    return perm[n_test:], perm[:n_test]


# --- linear and polynomial regression -------------------------------------------

def _as_2d_targets(y) -> Tuple[np.ndarray, bool]:
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        return y[:, None], True
    return y, False


@dataclass(frozen=True)
class LinearModel:
    """Least-squares linear map from features to targets.

    theta has shape (F + 1, K) with the intercept in row 0.
    """

    theta: np.ndarray
    squeeze: bool = False

    def predict(self, features) -> np.ndarray:
        x = np.asarray(features, dtype=float)
        single = x.ndim == 1
        if single:
            x = x[None, :]
        out = np.hstack([np.ones((len(x), 1)), x]) @ self.theta
        if self.squeeze:
            out = out[:, 0]
        return out[0] if single else out

    def to_dict(self) -> dict:
        return _wrap("linear", {}, {"theta": self.theta.tolist(),
                                    "squeeze": self.squeeze})


def fit_linear(features, targets) -> LinearModel:
    """Least squares through the pseudo-inverse.

    Underdetermined or rank-deficient designs get the minimal-norm
    solution, so duplicated feature columns leave predictions unchanged.
    """
    x = np.asarray(features, dtype=float)
    if x.size == 0:
        raise EmptyDataset("no training samples")
    y, squeeze = _as_2d_targets(targets)
    design = np.hstack([np.ones((len(x), 1)), x])
    theta, *_ = np.linalg.lstsq(design, y, rcond=None)
    return LinearModel(theta=theta, squeeze=squeeze)


def polynomial_features(features, degree: int, cross_terms: bool = False) -> np.ndarray:
    """Expand features to polynomial terms (no intercept column).

    Default is per-feature powers 1..degree. With cross_terms=True the
    expansion instead contains every monomial of total degree 1..degree.
    """
    x = np.asarray(features, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if degree < 1:
        raise ValueError("degree must be >= 1")
    if not cross_terms:
        return np.hstack([x ** p for p in range(1, degree + 1)])
    from itertools import combinations_with_replacement
    cols = []
    for total in range(1, degree + 1):
        for combo in combinations_with_replacement(range(x.shape[1]), total):
            cols.append(np.prod(x[:, combo], axis=1))
    return np.column_stack(cols)


@dataclass(frozen=True)
class PolynomialModel:
    theta: np.ndarray
    degree: int
    cross_terms: bool = False
    squeeze: bool = False

    def predict(self, features) -> np.ndarray:
        x = np.asarray(features, dtype=float)
        single = x.ndim == 1
        if single:
            x = x[None, :]
        expanded = polynomial_features(x, self.degree, self.cross_terms)
        out = np.hstack([np.ones((len(expanded), 1)), expanded]) @ self.theta
        if self.squeeze:
            out = out[:, 0]
        return out[0] if single else out

    def to_dict(self) -> dict:
        return _wrap("polynomial",
                     {"degree": self.degree, "cross_terms": self.cross_terms},
                     {"theta": self.theta.tolist(), "squeeze": self.squeeze})


def fit_polynomial(features, targets, degree: int,
                   cross_terms: bool = False) -> PolynomialModel:
    """Polynomial regression: expand features, then fit linearly."""
    x = np.asarray(features, dtype=float)
    if x.size == 0:
        raise EmptyDataset("no training samples")
    y, squeeze = _as_2d_targets(targets)
    expanded = polynomial_features(x, degree, cross_terms)
    design = np.hstack([np.ones((len(expanded), 1)), expanded])
    theta, *_ = np.linalg.lstsq(design, y, rcond=None)
    return PolynomialModel(theta=theta, degree=degree,
                           cross_terms=cross_terms, squeeze=squeeze)


# --- CART regression trees ----------------------------------------------------------

@dataclass(frozen=True)
class TreeNode:
    """Binary regression tree node; a leaf has feature None and carries the
    mean of its training targets."""

    feature: Optional[int] = None
    threshold: float = 0.0
    left: Optional["TreeNode"] = None
    right: Optional["TreeNode"] = None
    value: float = 0.0
    n_samples: int = 0

    @property
    def is_leaf(self) -> bool:
        return self.feature is None


def _split_sse(x_col: np.ndarray, y: np.ndarray, min_leaf: int):
    """Best exhaustive split of one feature: (sse, threshold) or None.

    Candidate thresholds are midpoints between consecutive distinct sorted
    values; the loss is the summed squared error of the two sides.
    """
    order = np.argsort(x_col, kind="stable")
    xs = x_col[order]
    ys = y[order]
    n = len(ys)
    csum = np.cumsum(ys)
    csum2 = np.cumsum(ys ** 2)
    n_left = np.arange(1, n)
    boundary = xs[:-1] < xs[1:]
    valid = boundary & (n_left >= min_leaf) & (n - n_left >= min_leaf)
    if not valid.any():
        return None
    sse_left = csum2[:-1] - csum[:-1] ** 2 / n_left
    sse_right = (csum2[-1] - csum2[:-1]) - (csum[-1] - csum[:-1]) ** 2 / (n - n_left)
    sse = np.where(valid, sse_left + sse_right, np.inf)
    best = int(np.argmin(sse))
    return float(sse[best]), float((xs[best] + xs[best + 1]) / 2.0)


def _split_random(x_col: np.ndarray, y: np.ndarray, min_leaf: int,
                  rng: np.random.Generator):
    """One uniform threshold between min and max of the feature."""
    lo, hi = float(x_col.min()), float(x_col.max())
    if lo == hi:
        return None
    threshold = rng.uniform(lo, hi)
    mask = x_col <= threshold
    n_left = int(mask.sum())
    if n_left < min_leaf or len(y) - n_left < min_leaf:
        return None
    sse = 0.0
    for side in (y[mask], y[~mask]):
        sse += float(((side - side.mean()) ** 2).sum())
    return sse, threshold


def _grow_tree(x: np.ndarray, y: np.ndarray, depth: int,
               max_depth: Optional[int], min_leaf: int, split_mode: str,
               rng: np.random.Generator) -> TreeNode:
    def leaf() -> TreeNode:
        return TreeNode(value=float(y.mean()), n_samples=len(y))

    if (len(y) < 2 * min_leaf
            or (max_depth is not None and depth >= max_depth)
            or np.all(y == y[0])):
        return leaf()

    best = None
    for feature in range(x.shape[1]):
        if split_mode == "exhaustive":
            cand = _split_sse(x[:, feature], y, min_leaf)
        else:
            cand = _split_random(x[:, feature], y, min_leaf, rng)
        if cand is not None and (best is None or cand[0] < best[0]):
            best = (cand[0], feature, cand[1])
    if best is None:
        return leaf()

    _, feature, threshold = best
    mask = x[:, feature] <= threshold
    return TreeNode(
        feature=feature,
        threshold=threshold,
        left=_grow_tree(x[mask], y[mask], depth + 1, max_depth, min_leaf,
                        split_mode, rng),
        right=_grow_tree(x[~mask], y[~mask], depth + 1, max_depth, min_leaf,
                         split_mode, rng),
        value=float(y.mean()),
        n_samples=len(y),
    )


def _tree_predict(node: TreeNode, x: np.ndarray) -> np.ndarray:
    out = np.empty(len(x))
    idx = np.arange(len(x))
    stack = [(node, idx)]
    while stack:
        current, rows = stack.pop()
        if current.is_leaf:
            out[rows] = current.value
            continue
        mask = x[rows, current.feature] <= current.threshold
        stack.append((current.left, rows[mask]))
        stack.append((current.right, rows[~mask]))
    return out


@dataclass(frozen=True)
class RegressionTree:
    """Single CART regression tree for a scalar target."""

    root: TreeNode
    max_depth: Optional[int] = None
    min_leaf: int = 1
    split_mode: str = "exhaustive"

    def predict(self, features) -> np.ndarray:
        x = np.asarray(features, dtype=float)
        single = x.ndim == 1
        if single:
            x = x[None, :]
        out = _tree_predict(self.root, x)
        return float(out[0]) if single else out

    def depth(self) -> int:
        def walk(node: TreeNode) -> int:
            if node.is_leaf:
                return 0
            return 1 + max(walk(node.left), walk(node.right))
        return walk(self.root)

    def to_dict(self) -> dict:
        return _wrap("tree",
                     {"max_depth": self.max_depth, "min_leaf": self.min_leaf,
                      "split_mode": self.split_mode},
                     {"root": _node_to_dict(self.root)})


def fit_tree(features, targets, max_depth: Optional[int] = None,
             min_leaf: int = 1, split_mode: str = "exhaustive",
             rng_seed: int = 0):
    """Grow a CART regression tree.

    Exhaustive mode scans midpoints of sorted unique feature values for
    the split minimizing the summed squared error of the two children;
    random mode (the extra-trees rule) draws one uniform threshold per
    feature and keeps the best. Nodes become leaves at the depth limit, at
    min_leaf, or at zero target variance.

    A 2-D target matrix yields a :class:`PairedRegressor` with one
    independently grown tree per column.
    """
    x = np.asarray(features, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.size == 0:
        raise EmptyDataset("no training samples")
    if split_mode not in ("exhaustive", "random"):
        raise ValueError(f"unknown split_mode {split_mode!r}")
    y = np.asarray(targets, dtype=float)
    if y.ndim == 2:
        models = [fit_tree(x, y[:, j], max_depth, min_leaf, split_mode,
                           rng_seed + j) for j in range(y.shape[1])]
        return PairedRegressor(models=tuple(models))
    rng = np.random.default_rng(rng_seed)
    root = _grow_tree(x, y, 0, max_depth, min_leaf, split_mode, rng)
    return RegressionTree(root=root, max_depth=max_depth, min_leaf=min_leaf,
                          split_mode=split_mode)


# --- forests -----------------------------------------------------------------------

@dataclass(frozen=True)
class Forest:
    """Average of independently grown trees (bagging when bootstrap=True)."""

    trees: Tuple[RegressionTree, ...]
    bootstrap: bool = True
    rng_seed: int = 0

    def predict(self, features) -> np.ndarray:
        x = np.asarray(features, dtype=float)
        single = x.ndim == 1
        if single:
            x = x[None, :]
        preds = np.mean([t.predict(x) for t in self.trees], axis=0)
        return float(preds[0]) if single else preds

    def to_dict(self) -> dict:
        first = self.trees[0]
        return _wrap("forest",
                     {"n_trees": len(self.trees), "bootstrap": self.bootstrap,
                      "max_depth": first.max_depth, "min_leaf": first.min_leaf,
                      "split_mode": first.split_mode, "rng_seed": self.rng_seed},
                     {"trees": [_node_to_dict(t.root) for t in self.trees]})


def fit_forest(features, targets, n_trees: int = 100, bootstrap: bool = True,
               max_depth: Optional[int] = None, min_leaf: int = 1,
               split_mode: str = "exhaustive", rng_seed: int = 0):
    """Fit an averaging tree ensemble.

    bootstrap=True resamples N rows with replacement per tree (random
    forest); bootstrap=False trains every tree on the whole dataset, which
    with split_mode="random" is the extra-trees scheme. Per-tree RNG
    substreams make the fit reproducible under a fixed seed.
    """
    x = np.asarray(features, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.size == 0:
        raise EmptyDataset("no training samples")
    if n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    y = np.asarray(targets, dtype=float)
    if y.ndim == 2:
        models = [fit_forest(x, y[:, j], n_trees, bootstrap, max_depth,
                             min_leaf, split_mode, rng_seed + j)
                  for j in range(y.shape[1])]
        return PairedRegressor(models=tuple(models))

    trees = []
    for i in range(n_trees):
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=rng_seed, spawn_key=(i,)))
        if bootstrap:
            rows = rng.integers(0, len(x), size=len(x))
            xi, yi = x[rows], y[rows]
        else:
            xi, yi = x, y
        root = _grow_tree(xi, yi, 0, max_depth, min_leaf, split_mode, rng)
        trees.append(RegressionTree(root=root, max_depth=max_depth,
                                    min_leaf=min_leaf, split_mode=split_mode))
    return Forest(trees=tuple(trees), bootstrap=bootstrap, rng_seed=rng_seed)


def fit_extra_trees(features, targets, n_trees: int = 100,
                    max_depth: Optional[int] = None, min_leaf: int = 1,
                    rng_seed: int = 0):
    """Extra trees: whole dataset per tree, randomized split thresholds."""
    return fit_forest(features, targets, n_trees=n_trees, bootstrap=False,
                      max_depth=max_depth, min_leaf=min_leaf,
                      split_mode="random", rng_seed=rng_seed)


@dataclass(frozen=True)
class PairedRegressor:
    """Independent scalar models stacked into one multi-output predictor."""

    models: Tuple[object, ...]

    def predict(self, features) -> np.ndarray:
        x = np.asarray(features, dtype=float)
        single = x.ndim == 1
        if single:
            x = x[None, :]
        out = np.column_stack([m.predict(x) for m in self.models])
        return out[0] if single else out

    def to_dict(self) -> dict:
        return _wrap("paired", {},
                     {"components": [m.to_dict() for m in self.models]})


# --- k nearest neighbors -----------------------------------------------------------

def knn_classify(train_features, train_labels, query, k: int,
                 n_classes: Optional[int] = None) -> Tuple[int, np.ndarray]:
    """Classify one query vector by majority vote of its k nearest rows.

    Distances are Euclidean; the vote yields a class-probability vector
    (counts / k) and the returned label is its argmax, with ties going to
    the smallest class index. The distance sort is stable, so equidistant
    training rows keep their file order.
    """
    x = np.asarray(train_features, dtype=float)
    labels = np.asarray(train_labels, dtype=int)
    if len(x) == 0:
        raise EmptyTrainingSet("no training samples")
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > len(x):
        raise KTooLarge(f"k={k} exceeds training size {len(x)}")
    if n_classes is None:
        n_classes = int(labels.max()) + 1
    q = np.asarray(query, dtype=float)
    dist = np.sqrt(((x - q) ** 2).sum(axis=1))
    nearest = np.argsort(dist, kind="stable")[:k]
    probs = np.bincount(labels[nearest], minlength=n_classes) / k
    return int(np.argmax(probs)), probs


@dataclass(frozen=True)
class KnnModel:
    """Stored training set plus k, packaged like the other models."""

    features: np.ndarray
    labels: np.ndarray
    k: int
    n_classes: int

    def predict_proba(self, queries) -> np.ndarray:
        q = np.asarray(queries, dtype=float)
        single = q.ndim == 1
        if single:
            q = q[None, :]
        probs = np.array([knn_classify(self.features, self.labels, row,
                                       self.k, self.n_classes)[1]
                          for row in q])
        return probs[0] if single else probs

    def predict(self, queries):
        probs = self.predict_proba(queries)
        if probs.ndim == 1:
            return int(probs.argmax())
        return probs.argmax(axis=1)

    def to_dict(self) -> dict:
        return _wrap("knn", {"k": self.k, "n_classes": self.n_classes},
                     {"features": self.features.tolist(),
                      "labels": self.labels.tolist()})


def fit_knn(features, labels, k: int, n_classes: Optional[int] = None) -> KnnModel:
    x = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=int)
    if len(x) == 0:
        raise EmptyTrainingSet("no training samples")
    if k > len(x):
        raise KTooLarge(f"k={k} exceeds training size {len(x)}")
    if n_classes is None:
        n_classes = int(y.max()) + 1
    return KnnModel(features=x, labels=y, k=int(k), n_classes=int(n_classes))


# --- feed-forward network -------------------------------------------------------------

def sigmoid(z):
    """Logistic activation 1 / (1 + exp(-z))."""
    return 1.0 / (1.0 + np.exp(-np.asarray(z, dtype=float)))


def relu(z):
    return np.maximum(np.asarray(z, dtype=float), 0.0)


def softmax(z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass(frozen=True)
class MlpModel:
    """Fully connected network with ReLU hidden layers and softmax output.

    weights[l] has shape (n_out, n_in); the default architecture maps 13
    beacon readings to 4 zone probabilities through hidden widths 20 and 17.
    """

    weights: Tuple[np.ndarray, ...]
    biases: Tuple[np.ndarray, ...]

    @property
    def sizes(self) -> Tuple[int, ...]:
        return (self.weights[0].shape[1],) + tuple(w.shape[0] for w in self.weights)

    @classmethod
    def create(cls, sizes: Sequence[int] = MLP_DEFAULT_SIZES,
               rng_seed: int = 0) -> "MlpModel":
        """He-initialized network; biases start at zero."""
        rng = np.random.default_rng(rng_seed)
        weights = []
        for n_in, n_out in zip(sizes[:-1], sizes[1:]):
            weights.append(rng.normal(0.0, np.sqrt(2.0 / n_in), (n_out, n_in)))
        biases = [np.zeros(n) for n in sizes[1:]]
        return cls(weights=tuple(weights), biases=tuple(biases))

    def to_dict(self) -> dict:
        return _wrap("mlp", {"sizes": list(self.sizes)},
                     {"weights": [w.tolist() for w in self.weights],
                      "biases": [b.tolist() for b in self.biases]})


def _mlp_layers(model: MlpModel, x: np.ndarray):
    """Forward pass keeping pre-activations; returns (zs, activations)."""
    zs, acts = [], [x]
    a = x
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ w.T + b
        zs.append(z)
        a = softmax(z) if i == last else relu(z)
        acts.append(a)
    return zs, acts


def mlp_forward(model: MlpModel, x) -> np.ndarray:
    """Class probabilities for one input vector or a batch."""
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    if arr.shape[1] != model.sizes[0]:
        raise ShapeMismatch(
            f"expected {model.sizes[0]} inputs, got {arr.shape[1]}")
    _, acts = _mlp_layers(model, arr)
    return acts[-1][0] if single else acts[-1]


def mlp_backprop(model: MlpModel, x, y_onehot):
    """Cross-entropy loss and its gradients for a batch.

    Returns (loss, weight grads, bias grads, input grad). The loss is the
    mean cross-entropy over the batch; the softmax/cross-entropy pair makes
    the output-layer delta simply (probs - y) / N.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y_onehot, dtype=float))
    if x.shape[1] != model.sizes[0] or y.shape[1] != model.sizes[-1]:
        raise ShapeMismatch("batch shapes do not match the network")
    n = len(x)
    zs, acts = _mlp_layers(model, x)
    probs = acts[-1]
    logp = zs[-1] - zs[-1].max(axis=1, keepdims=True)
    logp = logp - np.log(np.exp(logp).sum(axis=1, keepdims=True))
    loss = float(-(y * logp).sum() / n)

    grad_w = [np.zeros_like(w) for w in model.weights]
    grad_b = [np.zeros_like(b) for b in model.biases]
    delta = (probs - y) / n
    for layer in range(len(model.weights) - 1, -1, -1):
        grad_w[layer] = delta.T @ acts[layer]
        grad_b[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ model.weights[layer]) * (zs[layer - 1] > 0)
    grad_x = delta @ model.weights[0]
    return loss, grad_w, grad_b, grad_x


@dataclass(frozen=True)
class MlpHistory:
    train_accuracy: Tuple[float, ...]
    test_accuracy: Tuple[float, ...]


def _accuracy(model: MlpModel, x: np.ndarray, y: np.ndarray) -> float:
    probs = mlp_forward(model, x)
    return float(np.mean(probs.argmax(axis=1) == y.argmax(axis=1)))


def mlp_train(model: MlpModel, features, labels_onehot, lr: float = 0.01,
              batch_size: int = 10, epochs: int = 100, rng_seed: int = 0,
              test_fraction: float = 0.3) -> Tuple[MlpModel, MlpHistory]:
    """Mini-batch gradient descent on cross-entropy.

    The dataset is split once into train/held-out parts (test_fraction of
    the rows, 0 disables the holdout), then reshuffled every epoch, all
    under the given seed. Returns the trained network and the per-epoch
    accuracy trace on both parts.
    """
    x = np.asarray(features, dtype=float)
    y = np.asarray(labels_onehot, dtype=float)
    if len(x) == 0:
        raise EmptyDataset("no training samples")
    if lr < 0:
        raise ValueError("learning rate must be >= 0")
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    rng = np.random.default_rng(rng_seed)
    train_idx, test_idx = train_test_split_indices(len(x), test_fraction, rng)
    if len(train_idx) == 0:
        raise EmptyDataset("test_fraction leaves no training samples")
    x_train, y_train = x[train_idx], y[train_idx]

    weights = [w.copy() for w in model.weights]
    biases = [b.copy() for b in model.biases]
    train_acc, test_acc = [], []
    for _ in range(epochs):
        perm = rng.permutation(len(x_train))
        for start in range(0, len(perm), batch_size):
            batch = perm[start:start + batch_size]
            current = MlpModel(weights=tuple(weights), biases=tuple(biases))
            _, gw, gb, _ = mlp_backprop(current, x_train[batch], y_train[batch])
            for layer in range(len(weights)):
                weights[layer] -= lr * gw[layer]
                biases[layer] -= lr * gb[layer]
        current = MlpModel(weights=tuple(weights), biases=tuple(biases))
        train_acc.append(_accuracy(current, x_train, y_train))
        if len(test_idx):
            test_acc.append(_accuracy(current, x[test_idx], y[test_idx]))
    final = MlpModel(weights=tuple(np.asarray(w) for w in weights),
                     biases=tuple(np.asarray(b) for b in biases))
    return final, MlpHistory(train_accuracy=tuple(train_acc),
                             test_accuracy=tuple(test_acc))


# --- portable model serialization ----------------------------------------------------

def _wrap(kind: str, hyperparameters: dict, parameters: dict) -> dict:
    return {"format": MODEL_FORMAT, "version": MODEL_VERSION, "kind": kind,
            "hyperparameters": hyperparameters, "parameters": parameters}


def _node_to_dict(node: TreeNode) -> dict:
    if node.is_leaf:
        return {"leaf": node.value, "n": node.n_samples}
    return {"feature": node.feature, "threshold": node.threshold,
            "n": node.n_samples, "value": node.value,
            "left": _node_to_dict(node.left), "right": _node_to_dict(node.right)}


def _node_from_dict(data: dict) -> TreeNode:
    if "leaf" in data:
        return TreeNode(value=data["leaf"], n_samples=data.get("n", 0))
    return TreeNode(feature=data["feature"], threshold=data["threshold"],
                    left=_node_from_dict(data["left"]),
                    right=_node_from_dict(data["right"]),
                    value=data.get("value", 0.0), n_samples=data.get("n", 0))


def _linear_from_dict(d: dict) -> LinearModel:
    p = d["parameters"]
    return LinearModel(theta=np.asarray(p["theta"]), squeeze=p["squeeze"])


def _polynomial_from_dict(d: dict) -> PolynomialModel:
    p, h = d["parameters"], d["hyperparameters"]
    return PolynomialModel(theta=np.asarray(p["theta"]), degree=h["degree"],
                           cross_terms=h["cross_terms"], squeeze=p["squeeze"])


def _tree_from_dict(d: dict) -> RegressionTree:
    h = d["hyperparameters"]
    return RegressionTree(root=_node_from_dict(d["parameters"]["root"]),
                          max_depth=h["max_depth"], min_leaf=h["min_leaf"],
                          split_mode=h["split_mode"])


def _forest_from_dict(d: dict) -> Forest:
    h = d["hyperparameters"]
    trees = tuple(RegressionTree(root=_node_from_dict(t),
                                 max_depth=h["max_depth"],
                                 min_leaf=h["min_leaf"],
                                 split_mode=h["split_mode"])
                  for t in d["parameters"]["trees"])
    return Forest(trees=trees, bootstrap=h["bootstrap"],
                  rng_seed=h.get("rng_seed", 0))


def _paired_from_dict(d: dict) -> PairedRegressor:
    comps = tuple(model_from_dict(c) for c in d["parameters"]["components"])
    return PairedRegressor(models=comps)


def _knn_from_dict(d: dict) -> KnnModel:
    p, h = d["parameters"], d["hyperparameters"]
    return KnnModel(features=np.asarray(p["features"], dtype=float),
                    labels=np.asarray(p["labels"], dtype=int),
                    k=h["k"], n_classes=h["n_classes"])


def _mlp_from_dict(d: dict) -> MlpModel:
    p = d["parameters"]
    return MlpModel(weights=tuple(np.asarray(w) for w in p["weights"]),
                    biases=tuple(np.asarray(b) for b in p["biases"]))


_MODEL_KINDS: Dict[str, Callable[[dict], object]] = {
    "linear": _linear_from_dict,
    "polynomial": _polynomial_from_dict,
    "tree": _tree_from_dict,
    "forest": _forest_from_dict,
    "paired": _paired_from_dict,
    "knn": _knn_from_dict,
    "mlp": _mlp_from_dict,
}


def register_model_kind(kind: str, from_dict: Callable[[dict], object]):
    """Let other modules plug their model kinds into the portable format."""
    _MODEL_KINDS[kind] = from_dict


def model_to_dict(model) -> dict:
    """Portable JSON-compatible record: kind, hyperparameters, parameters."""
    return model.to_dict()


def model_from_dict(data: dict):
    if data.get("format") != MODEL_FORMAT:
        raise ValueError("not a model record")
    if data.get("version") != MODEL_VERSION:
        raise ValueError(f"unsupported model version {data.get('version')}")
    kind = data.get("kind")
    if kind not in _MODEL_KINDS:
        raise ValueError(f"unknown model kind {kind!r}")
    return _MODEL_KINDS[kind](data)


def save_model(model, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh)


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
