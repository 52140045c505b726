"""Tree classifiers: single CART, random forest (bagging) and gradient boosting."""
from __future__ import annotations

from dataclasses import dataclass, field
import numpy as np

from .tree import ModelError, Tree, check_xy, fit_tree


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=float)))


def _logit(p: float) -> float:
    return float(np.log(p / (1.0 - p)))


def _names(feature_names, p):
    if feature_names is None:
        return [f"x{j}" for j in range(p)]
    if len(feature_names) != p:
        raise ModelError(f"{len(feature_names)} feature names for {p} columns")
    return list(feature_names)


def logistic_loss(y, raw) -> float:
    """Mean negative log-likelihood for raw (logit) scores."""
    y = np.asarray(y, dtype=float)
    raw = np.asarray(raw, dtype=float)
    return float(np.mean(np.logaddexp(0.0, raw) - y * raw))


@dataclass(frozen=True)
class CartModel:
    tree: Tree
    feature_names: list[str]
    hyperparameters: dict = field(default_factory=dict)
    kind = "cart"

    def predict_proba(self, X) -> np.ndarray:
        return self.tree.predict(check_xy(X)[0])

    def predict(self, X) -> np.ndarray:
        # an exact 0.5 leaf resolves to the lower label
        return (self.predict_proba(X) > 0.5).astype(int)

    def raw_importance(self) -> np.ndarray:
        return self.tree.feature_importance(len(self.feature_names))

    def to_dict(self) -> dict:
        return {"type": self.kind, "feature_names": self.feature_names,
                "hyperparameters": self.hyperparameters, "tree": self.tree.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "CartModel":
        return cls(Tree.from_dict(d["tree"]), list(d["feature_names"]), dict(d["hyperparameters"]))


def fit_cart(X, y, max_depth: int | None = None, min_samples_leaf: int = 1, feature_names=None) -> CartModel:
    X, y = check_xy(X, y)
    tree = fit_tree(X, y, max_depth=max_depth, min_samples_leaf=min_samples_leaf, criterion="gini")
    return CartModel(tree, _names(feature_names, X.shape[1]),
                     {"max_depth": max_depth, "min_samples_leaf": min_samples_leaf})


def resolve_max_features(spec, p: int) -> int | None:
    if spec is None:
        return None
    if spec == "sqrt":
        return max(1, int(np.sqrt(p)))
    if isinstance(spec, float):
        if not 0 < spec <= 1:
            raise ModelError("fractional feature_subsample must be in (0, 1]")
        return max(1, int(round(spec * p)))
    if isinstance(spec, int) and 1 <= spec:
        return min(spec, p)
    raise ModelError(f"invalid feature_subsample {spec!r}")


@dataclass(frozen=True)
class TreeEnsembleModel:
    """Bagged (probability = mean leaf frequency) or boosted (sigmoid of init + lr * sum) trees."""

    trees: list[Tree]
    mode: str
    feature_names: list[str]
    hyperparameters: dict
    init: float = 0.0
    oob_score: float | None = None

    @property
    def kind(self) -> str:
        return "random_forest" if self.mode == "bagging" else "gradient_boosting"

    def raw_score(self, X) -> np.ndarray:
        if self.mode != "boosting":
            raise ModelError("raw scores exist only for boosted ensembles")
        X = check_xy(X)[0]
        out = np.full(len(X), self.init)
        lr = self.hyperparameters["learning_rate"]
        for t in self.trees:
            out += lr * t.predict(X)
        return out

    def predict_proba(self, X) -> np.ndarray:
        if self.mode == "boosting":
            return _sigmoid(self.raw_score(X))
        X = check_xy(X)[0]
        acc = np.zeros(len(X))
        for t in self.trees:
            acc += t.predict(X)
        return acc / len(self.trees)

    def predict(self, X) -> np.ndarray:
        return (self.predict_proba(X) > 0.5).astype(int)

    def staged_raw_scores(self, X):
        X = check_xy(X)[0]
        out = np.full(len(X), self.init)
        yield out.copy()
        for t in self.trees:
            out = out + self.hyperparameters["learning_rate"] * t.predict(X)
            yield out.copy()

    def raw_importance(self) -> np.ndarray:
        p = len(self.feature_names)
        total = np.zeros(p)
        for t in self.trees:
            imp = t.feature_importance(p)
            if imp.sum() > 0:
                total += imp / imp.sum()
        return total

    def to_dict(self) -> dict:
        return {
            "type": self.kind, "feature_names": self.feature_names, "hyperparameters": self.hyperparameters,
            "init": self.init, "oob_score": self.oob_score, "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TreeEnsembleModel":
        mode = "bagging" if d["type"] == "random_forest" else "boosting"
        return cls([Tree.from_dict(t) for t in d["trees"]], mode, list(d["feature_names"]),
                   dict(d["hyperparameters"]), float(d["init"]), d.get("oob_score"))


def fit_random_forest(
    X,
    y,
    n_trees: int = 100,
    max_depth: int | None = 6,
    feature_subsample="sqrt",
    seed: int = 0,
    *,
    bootstrap: bool = True,
    min_samples_leaf: int = 1,
    feature_names=None,
) -> TreeEnsembleModel:
    """Each tree gets its own child seed, so a forest is reproducible tree by tree."""
    X, y = check_xy(X, y)
    if n_trees < 1:
        raise ModelError("n_trees must be >= 1")
    n, p = X.shape
    mf = resolve_max_features(feature_subsample, p)
    trees = []
    oob_sum = np.zeros(n)
    oob_count = np.zeros(n)
    for child in np.random.SeedSequence(seed).spawn(n_trees):
        rng = np.random.default_rng(child)
        rows = rng.integers(0, n, n) if bootstrap else np.arange(n)
        tree = fit_tree(X[rows], y[rows], max_depth=max_depth, min_samples_leaf=min_samples_leaf,
                        criterion="gini", max_features=mf, rng=rng)
        trees.append(tree)
        if bootstrap:
            out = np.ones(n, dtype=bool)
            out[rows] = False
            if out.any():
                oob_sum[out] += tree.predict(X[out])
                oob_count[out] += 1
    oob = None
    seen = oob_count > 0
    if bootstrap and seen.any():
        oob = float(np.mean((oob_sum[seen] / oob_count[seen] > 0.5) == (y[seen] == 1)))
    hp = {"n_trees": n_trees, "max_depth": max_depth, "feature_subsample": feature_subsample,
          "bootstrap": bootstrap, "min_samples_leaf": min_samples_leaf, "seed": seed}
    return TreeEnsembleModel(trees, "bagging", _names(feature_names, p), hp, 0.0, oob)


def _newton_leaf_values(tree: Tree, leaves: np.ndarray, y, p, raw, lr) -> np.ndarray:
    """Per-leaf Newton step, halved until that leaf's training loss does not increase."""
    values = tree.value.copy()
    for leaf in np.unique(leaves):
        idx = leaves == leaf
        g = float(np.sum(y[idx] - p[idx]))
        h = float(np.sum(p[idx] * (1.0 - p[idx])))
        step = g / max(h, 1e-12)
        before = np.sum(np.logaddexp(0.0, raw[idx]) - y[idx] * raw[idx])
        for _ in range(60):
            r = raw[idx] + lr * step
            if np.sum(np.logaddexp(0.0, r) - y[idx] * r) <= before:
                break
            step *= 0.5
        else:
            step = 0.0
        values[leaf] = step
    return values


def fit_gradient_boosting(
    X,
    y,
    n_trees: int = 100,
    learning_rate: float = 0.1,
    max_depth: int = 3,
    seed: int = 0,
    *,
    subsample: float = 1.0,
    min_samples_leaf: int = 1,
    feature_names=None,
) -> TreeEnsembleModel:
    """Stagewise regression trees on the logistic-loss negative gradient.

    Leaf outputs are Newton steps; with subsample < 1 each tree sees a seeded row subset.
    """
    X, y = check_xy(X, y)
    if n_trees < 0:
        raise ModelError("n_trees must be >= 0")
    if not 0 < subsample <= 1:
        raise ModelError("subsample must be in (0, 1]")
    n, p = X.shape
    init = _logit(float(y.mean()))
    raw = np.full(n, init)
    rng = np.random.default_rng(seed)
    presort = np.argsort(X, axis=0, kind="stable") if n_trees else None
    trees = []
    for _ in range(n_trees):
        prob = _sigmoid(raw)
        resid = y - prob
        if subsample < 1.0:
            rows = np.sort(rng.choice(n, size=max(2, int(round(subsample * n))), replace=False))
        else:
            rows = np.arange(n)
        tree = fit_tree(X, resid, max_depth=max_depth, min_samples_leaf=min_samples_leaf,
                        criterion="squared_error", rows=rows, presort=presort)
        leaves = tree.apply(X[rows])
        tree = tree.with_values(_newton_leaf_values(tree, leaves, y[rows], prob[rows], raw[rows], learning_rate))
        if subsample < 1.0:
            # loss on the full training set must not rise either; shrink until it does not
            full = np.sum(np.logaddexp(0.0, raw) - y * raw)
            delta = tree.predict(X)
            for _ in range(60):
                cand = raw + learning_rate * delta
                if np.sum(np.logaddexp(0.0, cand) - y * cand) <= full:
                    break
                delta = delta * 0.5
                tree = tree.with_values(tree.value * 0.5)
            else:
                tree = tree.with_values(np.zeros_like(tree.value))
        raw = raw + learning_rate * tree.predict(X)
        trees.append(tree)
    hp = {"n_trees": n_trees, "learning_rate": learning_rate, "max_depth": max_depth, "seed": seed,
          "subsample": subsample, "min_samples_leaf": min_samples_leaf}
    return TreeEnsembleModel(trees, "boosting", _names(feature_names, p), hp, init)
