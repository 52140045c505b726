"""Soft voting, multi-horizon wrapping, model specs, importance reports and JSON serialization."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .lasso import LassoLogisticModel, fit_lasso_cv, fit_lasso_logistic
from .tree import ModelError, check_xy
from .trees import CartModel, TreeEnsembleModel, _names, fit_cart, fit_gradient_boosting, fit_random_forest

FORMAT_VERSION = 1
MEMBER_TYPES = ("lasso_logistic", "cart", "random_forest", "gradient_boosting")

# Random forest plus two boosting members: a deterministic one standing in for the
# XGBoost-style learner and a stochastic (row-subsampled) gradient-boosting model.
DEFAULT_ENSEMBLE = {
    "type": "voting",
    "members": [
        {"type": "random_forest", "params": {"n_trees": 100, "max_depth": 6, "feature_subsample": "sqrt"}},
        {"type": "gradient_boosting", "params": {"n_trees": 100, "learning_rate": 0.1, "max_depth": 3}},
        {"type": "gradient_boosting",
         "params": {"n_trees": 100, "learning_rate": 0.1, "max_depth": 3, "subsample": 0.8}},
    ],
    "weights": None,
}


@dataclass(frozen=True)
class VotingEnsemble:
    members: list
    weights: np.ndarray
    feature_names: list[str]
    kind = "voting"

    def member_probabilities(self, X) -> np.ndarray:
        return np.vstack([m.predict_proba(X) for m in self.members])

    def predict_proba(self, X) -> np.ndarray:
        P = self.member_probabilities(X)
        out = np.zeros(P.shape[1])
        for w, row in zip(self.weights, P):
            if w:
                out += w * row
        return out

    def predict(self, X) -> np.ndarray:
        return (self.predict_proba(X) > 0.5).astype(int)

    def raw_importance(self) -> np.ndarray:
        total = np.zeros(len(self.feature_names))
        for w, m in zip(self.weights, self.members):
            imp = m.raw_importance()
            if w and imp.sum() > 0:
                total += w * imp / imp.sum()
        return total

    def to_dict(self) -> dict:
        return {"type": self.kind, "feature_names": self.feature_names, "weights": self.weights.tolist(),
                "members": [m.to_dict() for m in self.members]}

    @classmethod
    def from_dict(cls, d: dict) -> "VotingEnsemble":
        return cls([model_from_dict(m) for m in d["members"]], np.array(d["weights"], dtype=float),
                   list(d["feature_names"]))


def normalize_weights(weights, n: int) -> np.ndarray:
    if weights is None:
        return np.full(n, 1.0 / n)
    w = np.asarray(weights, dtype=float)
    if w.shape != (n,):
        raise ModelError(f"{len(w)} weights for {n} members")
    if (w < 0).any() or not np.isfinite(w).all():
        raise ModelError("weights must be finite and nonnegative")
    if w.sum() <= 0:
        raise ModelError("weights sum to zero")
    return w / w.sum()


def _member_seed(seed: int, i: int) -> int:
    return int(np.random.SeedSequence([seed, i]).generate_state(1)[0])


def fit_member(spec: dict, X, y, seed: int, feature_names=None):
    kind = spec.get("type")
    params = dict(spec.get("params", {}))
    if kind == "lasso_logistic":
        if params.get("lam") is None:
            params.pop("lam", None)
            return fit_lasso_cv(X, y, seed=seed, feature_names=feature_names, **params)
        return fit_lasso_logistic(X, y, feature_names=feature_names, **params)
    if kind == "cart":
        return fit_cart(X, y, feature_names=feature_names, **params)
    if kind == "random_forest":
        return fit_random_forest(X, y, seed=seed, feature_names=feature_names, **params)
    if kind == "gradient_boosting":
        return fit_gradient_boosting(X, y, seed=seed, feature_names=feature_names, **params)
    if kind == "voting":
        return fit_voting_ensemble(X, y, spec["members"], spec.get("weights"), seed, feature_names=feature_names)
    raise ModelError(f"unknown model type {kind!r}; expected one of {MEMBER_TYPES + ('voting',)}")


def fit_voting_ensemble(X, y, members: Sequence[dict], weights=None, seed: int = 0, *, feature_names=None):
    """Members are fitted independently on (X, y), member i with a seed derived from (seed, i)."""
    if not members:
        raise ModelError("a voting ensemble needs at least one member")
    w = normalize_weights(weights, len(members))
    X, y = check_xy(X, y)
    names = _names(feature_names, X.shape[1])
    fitted = [fit_member(m, X, y, _member_seed(seed, i), names) for i, m in enumerate(members)]
    return VotingEnsemble(fitted, w, names)


def fit_model(spec: dict | None, X, y, seed: int, feature_names=None):
    return fit_member(spec or DEFAULT_ENSEMBLE, X, y, seed, feature_names)


@dataclass(frozen=True)
class MultiHorizonModel:
    horizons: tuple[int, ...]
    models: dict
    kind = "multi_horizon"

    @property
    def feature_names(self) -> list[str]:
        return self.models[self.horizons[0]].feature_names

    def predict_proba(self, X) -> np.ndarray:
        """Rows x horizons matrix of probabilities."""
        return np.column_stack([self.models[h].predict_proba(X) for h in self.horizons])

    def to_dict(self) -> dict:
        return {"type": self.kind, "horizons": list(self.horizons),
                "models": {str(h): self.models[h].to_dict() for h in self.horizons}}

    @classmethod
    def from_dict(cls, d: dict) -> "MultiHorizonModel":
        hs = tuple(int(h) for h in d["horizons"])
        return cls(hs, {h: model_from_dict(d["models"][str(h)]) for h in hs})


def fit_multi_horizon(X, labels_by_horizon: dict, spec: dict | None = None, seed: int = 0, *, feature_names=None):
    """One independent classifier per horizon, all from the same feature matrix and seed."""
    X = check_xy(X)[0]
    models = {}
    for h in sorted(labels_by_horizon):
        y = np.asarray(labels_by_horizon[h], dtype=float)
        if len(y) != len(X):
            raise ModelError(f"{h}-month labels have {len(y)} rows, matrix has {len(X)}")
        if y.min() == y.max():
            raise ModelError(f"{h}-month labels contain a single class")
        models[h] = fit_model(spec, X, y, seed, feature_names)
    return MultiHorizonModel(tuple(sorted(models)), models)


@dataclass(frozen=True)
class FeatureImportanceReport:
    ranking: list[tuple[str, float]]
    method: str

    def cumulative(self, k: int) -> float:
        return float(sum(v for _, v in self.ranking[:k]))

    def top(self, k: int) -> list[tuple[str, float]]:
        return self.ranking[:k]

    def as_dict(self) -> dict[str, float]:
        return dict(self.ranking)


def feature_importance(model) -> FeatureImportanceReport:
    """Normalized, descending importances (ties ordered by name).

    Trees use total impurity decrease; LASSO uses |coefficient| times the training SD of the feature.
    """
    if not hasattr(model, "raw_importance"):
        raise ModelError(f"no importance defined for {type(model).__name__}")
    raw = np.asarray(model.raw_importance(), dtype=float)
    total = raw.sum()
    norm = raw / total if total > 0 else raw
    method = "coefficient_sd" if isinstance(model, LassoLogisticModel) else "impurity_decrease"
    ranking = sorted(zip(model.feature_names, (float(v) for v in norm)), key=lambda t: (-t[1], t[0]))
    return FeatureImportanceReport(ranking, method)


_LOADERS = {
    "lasso_logistic": LassoLogisticModel.from_dict,
    "cart": CartModel.from_dict,
    "random_forest": TreeEnsembleModel.from_dict,
    "gradient_boosting": TreeEnsembleModel.from_dict,
    "voting": VotingEnsemble.from_dict,
    "multi_horizon": MultiHorizonModel.from_dict,
}


def model_from_dict(d: dict):
    try:
        return _LOADERS[d["type"]](d)
    except KeyError as exc:
        raise ModelError(f"unknown serialized model type {d.get('type')!r}") from exc


def save_model(model, path: str | Path, extra: dict | None = None) -> None:
    doc = {"format_version": FORMAT_VERSION, "model": model.to_dict()}
    if extra:
        doc.update(extra)
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def load_model(path: str | Path):
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format_version") != FORMAT_VERSION:
        raise ModelError(f"unsupported model format version {doc.get('format_version')!r}")
    return model_from_dict(doc["model"])
