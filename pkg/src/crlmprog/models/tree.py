"""Array-backed CART trees for classification (Gini) and regression (squared error)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LEAF = -1


class ModelError(ValueError):
    """Invalid training input or an unusable model."""


def check_xy(X, y=None, *, binary=True) -> tuple[np.ndarray, np.ndarray | None]:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ModelError(f"X must be 2-D, got shape {X.shape}")
    if not np.isfinite(X).all():
        raise ModelError("X contains non-finite values")
    if y is None:
        return X, None
    y = np.asarray(y, dtype=float)
    if y.shape != (X.shape[0],):
        raise ModelError(f"y has shape {y.shape}, expected ({X.shape[0]},)")
    if binary:
        if not np.isin(y, (0.0, 1.0)).all():
            raise ModelError("labels must be 0/1")
        if y.min() == y.max():
            raise ModelError("labels contain a single class")
    return X, y


@dataclass(frozen=True)
class Tree:
    """Flat node arrays; internal nodes send x[feature] <= threshold to the left child.

    Thresholds are observed training values (the largest value sent left).
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray
    impurity: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def depth(self) -> int:
        d = np.zeros(self.n_nodes, dtype=int)
        for i in range(self.n_nodes):  # children always follow their parent
            if self.feature[i] != LEAF:
                d[self.left[i]] = d[self.right[i]] = d[i] + 1
        return int(d.max())

    def apply(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        while True:
            feat = self.feature[node]
            active = feat != LEAF
            if not active.any():
                return node
            go_left = X[rows[active], feat[active]] <= self.threshold[node[active]]
            node[active] = np.where(go_left, self.left[node[active]], self.right[node[active]])

    def predict(self, X) -> np.ndarray:
        return self.value[self.apply(X)]

    def with_values(self, value: np.ndarray) -> "Tree":
        return Tree(self.feature, self.threshold, self.left, self.right, np.asarray(value, dtype=float),
                    self.n_samples, self.impurity)

    def feature_importance(self, n_features: int) -> np.ndarray:
        """Total weighted impurity decrease per feature (unnormalized)."""
        imp = np.zeros(n_features)
        for i in np.flatnonzero(self.feature != LEAF):
            l, r = self.left[i], self.right[i]
            imp[self.feature[i]] += (
                self.n_samples[i] * self.impurity[i]
                - self.n_samples[l] * self.impurity[l]
                - self.n_samples[r] * self.impurity[r]
            )
        return np.maximum(imp, 0.0)

    def to_dict(self) -> dict:
        """Nested-node form for serialization."""

        def node(i):
            d = {"value": float(self.value[i]), "n_samples": int(self.n_samples[i]), "impurity": float(self.impurity[i])}
            if self.feature[i] != LEAF:
                d.update(feature=int(self.feature[i]), threshold=float(self.threshold[i]),
                         left=node(self.left[i]), right=node(self.right[i]))
            return d

        return node(0)

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        cols = {k: [] for k in ("feature", "threshold", "left", "right", "value", "n_samples", "impurity")}

        def add(nd):
            i = len(cols["feature"])
            for k in cols:
                cols[k].append(LEAF if k in ("feature", "left", "right") else 0.0)
            cols["value"][i] = nd["value"]
            cols["n_samples"][i] = nd["n_samples"]
            cols["impurity"][i] = nd["impurity"]
            if "feature" in nd:
                cols["feature"][i] = nd["feature"]
                cols["threshold"][i] = nd["threshold"]
                cols["left"][i] = add(nd["left"])
                cols["right"][i] = add(nd["right"])
            return i

        add(d)
        return cls(
            np.array(cols["feature"], dtype=np.int64), np.array(cols["threshold"], dtype=float),
            np.array(cols["left"], dtype=np.int64), np.array(cols["right"], dtype=np.int64),
            np.array(cols["value"], dtype=float), np.array(cols["n_samples"], dtype=np.int64),
            np.array(cols["impurity"], dtype=float),
        )


def _node_impurity(y: np.ndarray, criterion: str) -> float:
    if criterion == "gini":
        p = y.mean()
        return float(2.0 * p * (1.0 - p))
    return float(y.var())


def _sorted_node(X, y, rows, features, presort):
    """Column-wise sorted feature values and matching targets for the node's rows.

    With a global presort (n x p row order), large nodes are filtered from it instead of re-sorted.
    """
    if presort is not None and 8 * len(rows) > presort.shape[0]:
        member = np.zeros(presort.shape[0], dtype=bool)
        member[rows] = True
        sel = presort[:, features]
        order = sel.T[member[sel].T].reshape(len(features), len(rows)).T
        return X[order, features], y[order]
    sub = X[np.ix_(rows, features)]
    # order among equal values is irrelevant: gains are only read between distinct values
    order = np.argsort(sub, axis=0)
    return np.take_along_axis(sub, order, axis=0), y[rows][order]


def _best_split(xs: np.ndarray, ys: np.ndarray, features: np.ndarray, criterion: str, min_leaf: int):
    """Return (gain, feature, threshold) of the best split or None.

    ``xs``/``ys`` hold each candidate feature's sorted values and the aligned targets.
    Gain is the decrease in sample-weighted impurity (sum over rows). Candidates are
    scanned in ascending feature index then ascending threshold and the first maximum wins.
    """
    m = xs.shape[0]
    n_left = np.arange(1, m, dtype=float)[:, None]
    n_right = m - n_left
    s_left = np.cumsum(ys, axis=0)[:-1]
    total = ys[:, 0].sum()
    s_right = total - s_left
    if criterion == "gini":
        child = 2.0 * s_left * (n_left - s_left) / n_left + 2.0 * s_right * (n_right - s_right) / n_right
        parent = 2.0 * total * (m - total) / m
        gain = parent - child
        scale = max(parent, 1.0)
    else:
        gain = s_left**2 / n_left + s_right**2 / n_right - total**2 / m
        scale = max(float((ys[:, 0] ** 2).sum()), 1.0)
    valid = xs[1:] > xs[:-1]
    if min_leaf > 1:
        sizes = np.arange(1, m)
        valid &= ((sizes >= min_leaf) & (m - sizes >= min_leaf))[:, None]
    gain = np.where(valid, gain, -np.inf)
    # column-major flattening gives feature-major scan order
    flat = gain.T.ravel()
    k = int(np.argmax(flat))
    best = flat[k]
    if not np.isfinite(best) or best <= 1e-12 * scale:
        return None
    j, pos = divmod(k, m - 1)
    # threshold is the largest left-side value, so routing commutes with monotone transforms
    return float(best), int(features[j]), float(xs[pos, j])


def fit_tree(
    X,
    y,
    *,
    max_depth: int | None = None,
    min_samples_leaf: int = 1,
    criterion: str = "gini",
    max_features: int | None = None,
    rng: np.random.Generator | None = None,
    rows: np.ndarray | None = None,
    presort: np.ndarray | None = None,
) -> Tree:
    """Grow a tree depth-first on ``rows`` of (X, y) (all rows by default).

    ``max_features`` draws a fresh feature subset at every node. ``presort`` is an optional
    per-column argsort of X, reused when many trees are grown on the same matrix.
    """
    if criterion not in ("gini", "squared_error"):
        raise ModelError(f"unknown criterion {criterion!r}")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    start = np.arange(n) if rows is None else np.asarray(rows, dtype=np.int64)
    if start.size == 0:
        raise ModelError("cannot grow a tree on zero rows")
    if min_samples_leaf < 1:
        raise ModelError("min_samples_leaf must be >= 1")
    if max_features is not None and not 1 <= max_features <= p:
        raise ModelError(f"max_features must be in [1, {p}]")
    depth_cap = np.inf if max_depth is None else max_depth
    all_features = np.arange(p)
    feature, threshold, left, right, value, n_samples, impurity = [], [], [], [], [], [], []

    def grow(rows: np.ndarray, depth: int) -> int:
        i = len(feature)
        yn = y[rows]
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        value.append(float(yn.mean()))
        n_samples.append(len(rows))
        imp = _node_impurity(yn, criterion)
        impurity.append(imp)
        if depth >= depth_cap or imp <= 0.0 or len(rows) < 2 * min_samples_leaf:
            return i
        if max_features is None or max_features == p:
            feats = all_features
        else:
            feats = np.sort(rng.choice(p, size=max_features, replace=False))
        xs, ys = _sorted_node(X, y, rows, feats, presort)
        found = _best_split(xs, ys, feats, criterion, min_samples_leaf)
        if found is None:
            return i
        _, f, t = found
        mask = X[rows, f] <= t
        feature[i] = f
        threshold[i] = t
        left[i] = grow(rows[mask], depth + 1)
        right[i] = grow(rows[~mask], depth + 1)
        return i

    grow(start, 0)
    return Tree(
        np.array(feature, dtype=np.int64), np.array(threshold, dtype=float), np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64), np.array(value, dtype=float), np.array(n_samples, dtype=np.int64),
        np.array(impurity, dtype=float),
    )
