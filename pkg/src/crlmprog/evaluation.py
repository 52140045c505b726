"""Discrimination metrics, bootstrap intervals, fold-safe cross-validation and the leakage audit."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .models import feature_importance, fit_model
from .models.tree import ModelError
from .preprocess import FeatureMatrix, FittedPreprocessor, PreprocessError, fit_preprocessor, smote_oversample


class EvaluationError(ValueError):
    pass


def _binary(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels)
    if s.shape != y.shape or s.ndim != 1:
        raise EvaluationError(f"scores {s.shape} and labels {y.shape} must be aligned 1-D arrays")
    if not np.isin(y, (0, 1)).all():
        raise EvaluationError("labels must be 0/1")
    if np.isnan(s).any():
        raise EvaluationError("scores contain NaN")
    return s, y.astype(int)


@dataclass(frozen=True)
class RocResult:
    auc: float
    curve: list[tuple[float, float, float]]  # (fpr, tpr, threshold)
    n_pos: int
    n_neg: int


def auc_counts(scores, labels) -> tuple[int, int, int]:
    """(twice the Mann-Whitney U, n_pos, n_neg): integer pair counts with ties worth one half."""
    s, y = _binary(scores, labels)
    pos, neg = s[y == 1], np.sort(s[y == 0])
    if pos.size == 0 or neg.size == 0:
        raise EvaluationError("AUC needs both classes")
    below = np.searchsorted(neg, pos, side="left")
    at_or_below = np.searchsorted(neg, pos, side="right")
    twice_u = int(np.sum(below, dtype=np.int64) + np.sum(at_or_below, dtype=np.int64))
    return twice_u, int(pos.size), int(neg.size)


def roc_curve(scores, labels) -> list[tuple[float, float, float]]:
    """Operating points for "positive iff score >= t", from t = +inf down to the lowest score."""
    s, y = _binary(scores, labels)
    n_pos, n_neg = int(y.sum()), int((1 - y).sum())
    order = np.argsort(-s, kind="stable")
    s_sorted, y_sorted = s[order], y[order]
    tp = np.cumsum(y_sorted)
    fp = np.cumsum(1 - y_sorted)
    last = np.r_[np.flatnonzero(s_sorted[1:] != s_sorted[:-1]), len(s) - 1]
    curve = [(0.0, 0.0, float("inf"))]
    for i in last:
        curve.append((fp[i] / n_neg, tp[i] / n_pos, float(s_sorted[i])))
    return curve


def roc_auc(scores, labels) -> RocResult:
    twice_u, n_pos, n_neg = auc_counts(scores, labels)
    return RocResult(twice_u / (2 * n_pos * n_neg), roc_curve(scores, labels), n_pos, n_neg)


def auc_score(scores, labels) -> float:
    twice_u, n_pos, n_neg = auc_counts(scores, labels)
    return twice_u / (2 * n_pos * n_neg)


@dataclass(frozen=True)
class ThresholdMetrics:
    """Ratios are None when their denominator is zero."""

    threshold: float
    sensitivity: float | None
    specificity: float | None
    ppv: float | None
    npv: float | None
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def confusion(self) -> tuple[int, int, int, int]:
        return self.tp, self.fp, self.tn, self.fn

    def undefined(self) -> list[str]:
        return [k for k in ("sensitivity", "specificity", "ppv", "npv") if getattr(self, k) is None]


def _ratio(a: int, b: int) -> float | None:
    return a / b if b else None


def threshold_metrics(scores, labels, threshold: float = 0.5) -> ThresholdMetrics:
    """Positive prediction iff score >= threshold."""
    s, y = _binary(scores, labels)
    pred = s >= threshold
    tp = int(np.sum(pred & (y == 1)))
    fp = int(np.sum(pred & (y == 0)))
    tn = int(np.sum(~pred & (y == 0)))
    fn = int(np.sum(~pred & (y == 1)))
    return ThresholdMetrics(float(threshold), _ratio(tp, tp + fn), _ratio(tn, tn + fp), _ratio(tp, tp + fp),
                            _ratio(tn, tn + fn), tp, fp, tn, fn)


@dataclass(frozen=True)
class BootstrapCI:
    point: float
    lower: float
    upper: float
    n_iterations: int
    seed: int
    n_degenerate: int
    samples: np.ndarray = field(repr=False)

    @property
    def point_outside(self) -> bool:
        return not self.lower <= self.point <= self.upper

    def to_dict(self, with_samples: bool = False) -> dict:
        d = {"point": self.point, "lower": self.lower, "upper": self.upper, "n_iterations": self.n_iterations,
             "seed": self.seed, "n_degenerate": self.n_degenerate, "point_outside": self.point_outside}
        if with_samples:
            d["samples"] = self.samples.tolist()
        return d


def percentile_bounds(samples, level: float = 0.95) -> tuple[float, float]:
    """Order statistics at the (1-level)/2 and (1+level)/2 empirical quantiles."""
    a = (1.0 - level) / 2.0
    lo, hi = np.quantile(np.asarray(samples, dtype=float), [a, 1.0 - a], method="inverted_cdf")
    return float(lo), float(hi)


def bootstrap_ci(
    metric: Callable[[np.ndarray, np.ndarray], float],
    scores,
    labels,
    n_iterations: int = 1000,
    seed: int = 0,
    level: float = 0.95,
) -> BootstrapCI:
    """Percentile bootstrap over patients; resamples missing a class are skipped and counted."""
    if n_iterations < 100:
        raise EvaluationError("n_iterations must be >= 100")
    s, y = _binary(scores, labels)
    point = float(metric(s, y))
    rng = np.random.default_rng(seed)
    samples, degenerate = [], 0
    n = len(s)
    for _ in range(n_iterations):
        idx = rng.integers(0, n, n)
        yb = y[idx]
        if yb.min() == yb.max():
            degenerate += 1
            continue
        samples.append(float(metric(s[idx], yb)))
    if degenerate > n_iterations / 2:
        raise EvaluationError(f"{degenerate} of {n_iterations} bootstrap resamples lacked a class")
    samples = np.array(samples)
    lo, hi = percentile_bounds(samples, level)
    return BootstrapCI(point, lo, hi, n_iterations, seed, degenerate, samples)


# ---------------------------------------------------------------------------
# fold-safe pipeline


@dataclass(frozen=True)
class FittedPipeline:
    """Preprocessor (imputation, z-scores, one-hot) plus a classifier, all fit on the same rows."""

    preprocessor: FittedPreprocessor
    model: object
    smote_rows: int

    def design(self, matrix: FeatureMatrix) -> FeatureMatrix:
        return self.preprocessor.transform(matrix)

    def predict_proba(self, matrix: FeatureMatrix) -> np.ndarray:
        return self.model.predict_proba(self.design(matrix).to_array())

    def state(self) -> dict:
        return {"preprocessor": self.preprocessor.to_dict(), "model": self.model.to_dict(),
                "smote_rows": self.smote_rows}


def fit_pipeline(train: FeatureMatrix, y, spec: dict | None = None, seed: int = 0, *, smote: bool = True,
                 smote_k: int = 5) -> FittedPipeline:
    """Every statistic is learned from ``train`` alone."""
    y = np.asarray(y, dtype=int)
    if len(y) != train.n_rows:
        raise EvaluationError(f"{len(y)} labels for {train.n_rows} rows")
    if y.min() == y.max():
        raise EvaluationError("training labels contain a single class")
    pre = fit_preprocessor(train)
    design = pre.transform(train)
    X = design.to_array()
    added = 0
    if smote and min(int(y.sum()), int((1 - y).sum())) >= 2:
        res = smote_oversample(X, y, k=smote_k, seed=seed)
        X, y = res.X, res.y
        added = int(res.synthetic.sum())
    model = fit_model(spec, X, y, seed, design.names)
    return FittedPipeline(pre, model, added)


@dataclass(frozen=True)
class CVResult:
    fold_aucs: list[float]
    folds: np.ndarray
    seed: int
    pipelines: list[FittedPipeline] = field(repr=False, default_factory=list)

    @property
    def mean(self) -> float:
        return float(np.mean(self.fold_aucs))

    @property
    def sd(self) -> float:
        return float(np.std(self.fold_aucs, ddof=1)) if len(self.fold_aucs) > 1 else 0.0

    def to_dict(self) -> dict:
        return {"fold_aucs": self.fold_aucs, "mean": self.mean, "sd": self.sd, "seed": self.seed,
                "n_folds": len(self.fold_aucs)}


class FoldObserver:
    """Hook points around each fold's fitting phase; the default does nothing."""

    def fit_start(self, fold: int, train_rows: np.ndarray, test_rows: np.ndarray) -> None:
        pass

    def fit_end(self, fold: int) -> None:
        pass


def stratified_fold_ids(y, n_folds: int, seed: int) -> np.ndarray:
    from .models.lasso import stratified_folds

    y = np.asarray(y)
    if n_folds < 2 or n_folds > len(y):
        raise EvaluationError(f"n_folds must be in [2, {len(y)}]")
    return stratified_folds(y, n_folds, seed)


def cross_validate(
    matrix: FeatureMatrix,
    y,
    spec: dict | None = None,
    n_folds: int = 5,
    seed: int = 0,
    *,
    smote: bool = True,
    observer: FoldObserver | None = None,
) -> CVResult:
    """Stratified k-fold CV; the whole pipeline is refit inside each training fold.

    Folds with a single-class test set cannot yield an AUC and are reported as NaN.
    """
    y = np.asarray(y, dtype=int)
    if len(y) != matrix.n_rows:
        raise EvaluationError(f"{len(y)} labels for {matrix.n_rows} rows")
    observer = observer or FoldObserver()
    folds = stratified_fold_ids(y, n_folds, seed)
    aucs, pipes = [], []
    for k in range(n_folds):
        test = np.flatnonzero(folds == k)
        train = np.flatnonzero(folds != k)
        if y[train].min() == y[train].max():
            raise EvaluationError(f"fold {k}: training labels contain a single class")
        observer.fit_start(k, train, test)
        pipe = fit_pipeline(matrix.take(train), y[train], spec, seed, smote=smote)
        observer.fit_end(k)
        pipes.append(pipe)
        yt = y[test]
        if yt.min() == yt.max():
            aucs.append(float("nan"))
        else:
            aucs.append(auc_score(pipe.predict_proba(matrix.take(test)), yt))
    return CVResult(aucs, folds, seed, pipes)


# ---------------------------------------------------------------------------
# leakage audit


@dataclass(frozen=True)
class LeakageAuditReport:
    flagged_features: list[dict]  # name, column, temporal_tag, importance, reason
    top_k_cumulative_importance: float
    verdict: str
    importance_threshold: float
    top_k: int
    model_inputs: list[str]

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "importance_threshold": self.importance_threshold,
            "top_k": self.top_k,
            "top_k_cumulative_importance": self.top_k_cumulative_importance,
            "flagged_features": self.flagged_features,
            "model_inputs": self.model_inputs,
        }

    def to_text(self) -> str:
        lines = [
            f"verdict: {self.verdict}",
            f"non-baseline share of top-{self.top_k} importance: {self.top_k_cumulative_importance:.3f}"
            f" (threshold {self.importance_threshold:.2f})",
        ]
        if self.flagged_features:
            lines.append("flagged features:")
            w = max(len(f["name"]) for f in self.flagged_features)
            for f in self.flagged_features:
                lines.append(f"  {f['name']:<{w}}  {f['temporal_tag']:<13}  {f['importance']:.4f}  {f['reason']}")
        else:
            lines.append("flagged features: none")
        return "\n".join(lines) + "\n"


def _tag_lookup(matrix: FeatureMatrix) -> dict[str, str]:
    tags = {}
    for c in matrix.columns:
        if c.temporal_tag is None:
            raise PreprocessError(f"column {c.name!r} has no temporal tag")
        tags[c.name] = c.temporal_tag
    return tags


def _tag_of(name: str, tags: dict[str, str]) -> str:
    if name in tags:
        return tags[name]
    base = name.split("=", 1)[0]
    if base in tags:
        return tags[base]
    raise PreprocessError(f"model input {name!r} has no tagged column in the matrix")


def _source_of(name: str, matrix: FeatureMatrix) -> str:
    """Raw cohort column behind a model input (one-hot names map to their base column)."""
    sources = {c.name: c.source or c.name for c in matrix.columns}
    key = name if name in sources else name.split("=", 1)[0]
    return sources.get(key, key)


def _non_baseline_mass(report, tags, top_k) -> tuple[float, dict[str, float]]:
    top = report.top(top_k)
    mass = sum(v for n, v in top if _tag_of(n, tags) != "baseline")
    return float(mass), report.as_dict()


def leakage_audit(
    model,
    matrix: FeatureMatrix,
    importance_threshold: float = 0.5,
    *,
    labels=None,
    diagnostic_spec: dict | None = None,
    seed: int = 0,
    top_k: int = 5,
) -> LeakageAuditReport:
    """Verdict "leaked" iff a postoperative/outcome column feeds the model, or non-baseline
    columns hold more than ``importance_threshold`` of the top-k importance.

    ``matrix`` must carry a temporal tag for every column. When ``labels`` is given and the
    model itself is clean, a diagnostic pipeline is fitted on all of ``matrix`` (tagged
    columns included) and its importance mass is what the threshold is compared to.
    """
    tags = _tag_lookup(matrix)
    inputs = list(model.feature_names)
    importance = feature_importance(model)
    flagged = []
    for name in inputs:
        tag = _tag_of(name, tags)
        if tag != "baseline":
            flagged.append({"name": name, "column": _source_of(name, matrix), "temporal_tag": tag,
                            "importance": importance.as_dict()[name], "reason": "model input"})
    mass, _ = _non_baseline_mass(importance, tags, top_k)
    if not flagged and labels is not None and any(t != "baseline" for t in tags.values()):
        pipe = fit_pipeline(matrix, labels, diagnostic_spec, seed)
        diag = feature_importance(pipe.model)
        mass, imp = _non_baseline_mass(diag, tags, top_k)
        for name, value in diag.top(top_k):
            tag = _tag_of(name, tags)
            if tag != "baseline":
                flagged.append({"name": name, "column": _source_of(name, matrix), "temporal_tag": tag,
                                "importance": imp[name], "reason": "diagnostic fit"})
    leaked = any(f["reason"] == "model input" for f in flagged) or mass > importance_threshold
    return LeakageAuditReport(flagged, mass, "leaked" if leaked else "clean", importance_threshold, top_k, inputs)


# ---------------------------------------------------------------------------
# report writers


def write_roc_csv(roc: RocResult, path: str | Path, header_comment: str | None = None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["fpr", "tpr", "threshold"])
        for fpr, tpr, t in roc.curve:
            w.writerow([repr(float(fpr)), repr(float(tpr)), "inf" if np.isinf(t) else repr(float(t))])


def write_json(doc: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n", encoding="utf-8")


def metrics_dict(m: ThresholdMetrics) -> dict:
    return {"threshold": m.threshold, "sensitivity": m.sensitivity, "specificity": m.specificity, "ppv": m.ppv,
            "npv": m.npv, "tp": m.tp, "fp": m.fp, "tn": m.tn, "fn": m.fn, "undefined": m.undefined()}


__all__ = [
    "BootstrapCI", "CVResult", "EvaluationError", "FittedPipeline", "FoldObserver", "LeakageAuditReport",
    "ModelError", "RocResult", "ThresholdMetrics", "auc_counts", "auc_score", "bootstrap_ci", "cross_validate",
    "fit_pipeline", "leakage_audit", "metrics_dict", "percentile_bounds", "roc_auc", "roc_curve",
    "stratified_fold_ids", "threshold_metrics", "write_json", "write_roc_csv",
]
