"""Preprocessing: missingness filter, imputation, scaling/encoding, metabolic
score, horizon labels, baseline-only gate, stratified split and SMOTE.

Every statistic used to transform data is learned by ``fit_preprocessor`` from
an explicit row subset and stored in a JSON-serializable fit state, so the
same transform can be replayed on held-out rows without reading them during
fitting.
"""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .tabular import Cohort, CohortError, is_missing

log = logging.getLogger(__name__)

HORIZONS = (3, 6, 12)


class PreprocessError(ValueError):
    pass


@dataclass(frozen=True)
class ColumnInfo:
    name: str
    kind: str  # continuous | categorical
    temporal_tag: str | None
    provenance: str = "clinical"
    source: str | None = None  # originating variable for one-hot indicators

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "temporal_tag": self.temporal_tag,
            "provenance": self.provenance,
            "source": self.source,
        }


@dataclass(frozen=True)
class FeatureMatrix:
    """Named, tagged design matrix.

    ``data`` maps column name to a float array (NaN = missing) for continuous
    columns or an object array (None = missing) for categorical columns.
    """

    ids: tuple[str, ...]
    columns: tuple[ColumnInfo, ...]
    data: dict[str, np.ndarray]
    fit_state: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "ids", tuple(self.ids))
        object.__setattr__(self, "columns", tuple(self.columns))
        n = len(self.ids)
        for c in self.columns:
            if c.name not in self.data:
                raise PreprocessError(f"column {c.name!r} has no data")
            if len(self.data[c.name]) != n:
                raise PreprocessError(f"column {c.name!r} has {len(self.data[c.name])} rows, expected {n}")

    @classmethod
    def from_cohort(cls, cohort: Cohort, names: Sequence[str] | None = None) -> "FeatureMatrix":
        names = list(cohort.names if names is None else names)
        cols, data = [], {}
        for name in names:
            var = cohort.variable(name)
            cols.append(ColumnInfo(name, var.kind, var.temporal_tag, var.provenance, name))
            if var.kind == "continuous":
                data[name] = cohort.numeric_column(name)
            else:
                data[name] = np.array([None if is_missing(v) else str(v) for v in cohort.column(name)], dtype=object)
        return cls(tuple(cohort.ids), tuple(cols), data)

    @classmethod
    def from_array(cls, X, names=None, ids=None, temporal_tag="baseline", provenance="clinical") -> "FeatureMatrix":
        X = np.asarray(X, dtype=float)
        if X.ndim != 2:
            raise PreprocessError("expected a 2-D array")
        names = [f"x{j}" for j in range(X.shape[1])] if names is None else list(names)
        ids = [str(i) for i in range(X.shape[0])] if ids is None else list(ids)
        cols = [ColumnInfo(nm, "continuous", temporal_tag, provenance, nm) for nm in names]
        return cls(tuple(ids), tuple(cols), {nm: X[:, j].copy() for j, nm in enumerate(names)})

    @property
    def n_rows(self) -> int:
        return len(self.ids)

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    def column_info(self, name: str) -> ColumnInfo:
        for c in self.columns:
            if c.name == name:
                return c
        raise KeyError(name)

    def take(self, rows) -> "FeatureMatrix":
        rows = np.asarray(rows, dtype=int)
        return FeatureMatrix(
            tuple(self.ids[i] for i in rows), self.columns, {k: v[rows] for k, v in self.data.items()}, self.fit_state
        )

    def select(self, names: Iterable[str]) -> "FeatureMatrix":
        names = list(names)
        info = {c.name: c for c in self.columns}
        return FeatureMatrix(self.ids, tuple(info[n] for n in names), {n: self.data[n] for n in names}, self.fit_state)

    def hstack(self, other: "FeatureMatrix") -> "FeatureMatrix":
        if other.ids != self.ids:
            raise PreprocessError("cannot join matrices with different row ids")
        clash = set(self.names) & set(other.names)
        if clash:
            raise PreprocessError(f"duplicate columns: {sorted(clash)}")
        return FeatureMatrix(self.ids, self.columns + other.columns, {**self.data, **other.data}, self.fit_state)

    def to_array(self) -> np.ndarray:
        """Numeric view (rows x columns); requires a fully encoded, complete matrix."""
        if not self.columns:
            return np.empty((self.n_rows, 0))
        for c in self.columns:
            if c.kind != "continuous":
                raise PreprocessError(f"column {c.name!r} is categorical; encode before use")
        X = np.column_stack([self.data[c.name] for c in self.columns]).astype(float)
        if np.isnan(X).any():
            raise PreprocessError("matrix has missing entries")
        return X

    def to_csv(self, path: str | Path, header_comment: str | None = None) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["id", *self.names])
            for i, pid in enumerate(self.ids):
                w.writerow([pid, *(_cell(self.data[n][i]) for n in self.names)])


def _cell(v) -> str:
    if is_missing(v):
        return "NA"
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def write_manifest_csv(rows: Sequence[dict], path: str | Path, header_comment: str | None = None) -> None:
    keys = list(rows[0]) if rows else ["column", "reason"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.DictWriter(fh, fieldnames=keys, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _cell(v) if isinstance(v, float) else v for k, v in r.items()})


# ---------------------------------------------------------------------------
# missingness


def drop_high_missingness(cohort: Cohort, threshold: float = 0.30) -> tuple[Cohort, list[dict]]:
    """Drop variables whose missing fraction is strictly greater than ``threshold``."""
    if not 0.0 < threshold <= 1.0:
        raise PreprocessError(f"threshold must be in (0, 1], got {threshold}")
    report = []
    for var in cohort.schema:
        frac = cohort.missing_fraction(var.name)
        if frac > threshold:
            report.append({"column": var.name, "temporal_tag": var.temporal_tag, "missing_fraction": frac,
                           "reason": "missingness"})
    if cohort.schema and len(report) == len(cohort.schema):
        raise PreprocessError("every column exceeds the missingness threshold")
    return cohort.drop_variables(r["column"] for r in report), report


# ---------------------------------------------------------------------------
# fit / transform


def _mode(values: Sequence[str]) -> str:
    counts: dict[str, int] = {}
    for v in values:
        counts[v] = counts.get(v, 0) + 1
    best = max(counts.values())
    return min(k for k, c in counts.items() if c == best)


@dataclass(frozen=True)
class FittedPreprocessor:
    """Imputation values, z-score parameters and one-hot vocabularies learned on training rows."""

    columns: tuple[ColumnInfo, ...]
    impute_values: dict[str, Any]
    scaling: dict[str, tuple[float, float]]
    vocab: dict[str, list[str]]
    constant_columns: tuple[str, ...] = ()

    def impute(self, matrix: FeatureMatrix) -> FeatureMatrix:
        data = dict(matrix.data)
        for c in self.columns:
            col = data[c.name]
            fill = self.impute_values[c.name]
            if c.kind == "continuous":
                col = np.where(np.isnan(col), fill, col)
            else:
                col = np.array([fill if v is None else v for v in col], dtype=object)
            data[c.name] = col
        state = {**matrix.fit_state, "impute": dict(self.impute_values)}
        return FeatureMatrix(matrix.ids, matrix.columns, data, state)

    def encode(self, matrix: FeatureMatrix) -> FeatureMatrix:
        cols, data = [], {}
        for c in self.columns:
            col = matrix.data[c.name]
            if c.kind == "continuous":
                mean, sd = self.scaling[c.name]
                data[c.name] = np.zeros(len(col)) if c.name in self.constant_columns else (col - mean) / sd
                cols.append(replace(c, source=c.source or c.name))
            else:
                for level in self.vocab[c.name]:
                    name = f"{c.name}={level}"
                    data[name] = np.array([1.0 if v == level else 0.0 for v in col])
                    cols.append(ColumnInfo(name, "continuous", c.temporal_tag, c.provenance, c.name))
        state = {
            **matrix.fit_state,
            "scaling": {k: list(v) for k, v in self.scaling.items()},
            "vocab": {k: list(v) for k, v in self.vocab.items()},
            "constant_columns": list(self.constant_columns),
        }
        return FeatureMatrix(matrix.ids, tuple(cols), data, state)

    def transform(self, matrix: FeatureMatrix) -> FeatureMatrix:
        missing = [c.name for c in self.columns if c.name not in matrix.data]
        if missing:
            raise PreprocessError(f"matrix lacks fitted columns: {missing}")
        return self.encode(self.impute(matrix.select([c.name for c in self.columns])))

    def to_dict(self) -> dict:
        return {
            "columns": [c.to_dict() for c in self.columns],
            "impute_values": self.impute_values,
            "scaling": {k: [float(a), float(b)] for k, (a, b) in self.scaling.items()},
            "vocab": self.vocab,
            "constant_columns": list(self.constant_columns),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FittedPreprocessor":
        return cls(
            tuple(ColumnInfo(**c) for c in d["columns"]),
            dict(d["impute_values"]),
            {k: (float(v[0]), float(v[1])) for k, v in d["scaling"].items()},
            {k: list(v) for k, v in d["vocab"].items()},
            tuple(d.get("constant_columns", ())),
        )

    def to_json(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_json(cls, path: str | Path) -> "FittedPreprocessor":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _fit_impute_values(matrix: FeatureMatrix, rows: np.ndarray) -> dict[str, Any]:
    values: dict[str, Any] = {}
    for c in matrix.columns:
        col = matrix.data[c.name][rows]
        if c.kind == "continuous":
            obs = col[~np.isnan(col)]
            if obs.size == 0:
                raise PreprocessError(f"column {c.name!r} is entirely missing in the fitting rows")
            values[c.name] = float(np.median(obs))
        else:
            obs = [v for v in col if v is not None]
            if not obs:
                raise PreprocessError(f"column {c.name!r} is entirely missing in the fitting rows")
            values[c.name] = _mode(obs)
    return values


def _rows(matrix: FeatureMatrix, fit_on) -> np.ndarray:
    rows = np.arange(matrix.n_rows) if fit_on is None else np.asarray(fit_on, dtype=int)
    if rows.size == 0:
        raise PreprocessError("fit_on must select at least one row")
    return rows


def fit_preprocessor(matrix: FeatureMatrix, fit_on=None) -> FittedPreprocessor:
    """Learn imputation, scaling and encoding from ``matrix`` rows ``fit_on`` only.

    Z-scores use the population (1/n) standard deviation; zero-variance
    continuous columns are flagged and emitted as zeros.
    """
    rows = _rows(matrix, fit_on)
    fit_rows = matrix.take(rows)
    impute_values = _fit_impute_values(fit_rows, np.arange(fit_rows.n_rows))
    stage = FittedPreprocessor(matrix.columns, impute_values, {}, {})
    imputed = stage.impute(fit_rows)
    scaling, vocab, constant = {}, {}, []
    for c in matrix.columns:
        col = imputed.data[c.name]
        if c.kind == "continuous":
            mean = float(np.mean(col))
            sd = float(np.std(col))
            if sd == 0.0:
                constant.append(c.name)
                log.warning("column %s has zero variance in the fitting rows; emitted as zeros", c.name)
                sd = 1.0
            scaling[c.name] = (mean, sd)
        else:
            vocab[c.name] = sorted(set(col))
    return FittedPreprocessor(matrix.columns, impute_values, scaling, vocab, tuple(constant))


def impute(matrix: FeatureMatrix, fit_on=None) -> FeatureMatrix:
    """Median (continuous) / mode (categorical, ties -> lexicographically smallest) imputation."""
    rows = _rows(matrix, fit_on)
    values = _fit_impute_values(matrix, rows)
    return FittedPreprocessor(matrix.columns, values, {}, {}).impute(matrix)


def normalize_and_encode(matrix: FeatureMatrix, fit_on=None) -> FeatureMatrix:
    """Z-score continuous columns and one-hot encode categorical ones using ``fit_on`` statistics.

    Expects an imputed matrix. Levels unseen in ``fit_on`` encode as all-zero indicators.
    """
    for c in matrix.columns:
        col = matrix.data[c.name]
        if (c.kind == "continuous" and np.isnan(col).any()) or (c.kind == "categorical" and any(v is None for v in col)):
            raise PreprocessError(f"column {c.name!r} has missing values; impute first")
    fitted = fit_preprocessor(matrix, fit_on)
    return fitted.encode(matrix)


# ---------------------------------------------------------------------------
# temporal gate


def baseline_only_filter(matrix: FeatureMatrix) -> tuple[FeatureMatrix, list[dict]]:
    """Keep only baseline-tagged columns; return the matrix and a removal manifest."""
    for c in matrix.columns:
        if c.temporal_tag is None:
            raise PreprocessError(f"column {c.name!r} has no temporal tag")
    keep = [c.name for c in matrix.columns if c.temporal_tag == "baseline"]
    removed = [
        {"column": c.name, "temporal_tag": c.temporal_tag, "reason": "non-baseline"}
        for c in matrix.columns
        if c.temporal_tag != "baseline"
    ]
    if not keep:
        log.warning("baseline-only filter removed every column")
    return matrix.select(keep), removed


# ---------------------------------------------------------------------------
# metabolic score


@dataclass(frozen=True)
class MetabolicScores:
    ids: tuple[str, ...]
    score: np.ndarray
    tertile: np.ndarray  # "high" | "medium" | "low"

    def counts(self) -> dict[str, int]:
        return {t: int(np.sum(self.tertile == t)) for t in ("high", "medium", "low")}


def _zscore(x: np.ndarray) -> np.ndarray:
    sd = x.std()
    if sd == 0:
        return np.zeros_like(x)
    return (x - x.mean()) / sd


def tertile_groups(scores, ids: Sequence[str]) -> np.ndarray:
    """Assign high/medium/low by descending score, ties ordered by id.

    Medium and low each receive floor(n/3) patients and high the remainder
    (67/65/65 at n = 197).
    """
    scores = np.asarray(scores, dtype=float)
    n = scores.size
    if n < 3:
        raise PreprocessError("tertiles need at least 3 patients")
    order = sorted(range(n), key=lambda i: (-scores[i], ids[i]))
    k = n // 3
    groups = np.empty(n, dtype=object)
    for rank, i in enumerate(order):
        groups[i] = "high" if rank < n - 2 * k else ("medium" if rank < n - k else "low")
    return groups


def metabolic_score(
    cohort: Cohort, nash: str = "nash_score", bmi: str = "bmi", liver_hu: str = "liver_hu"
) -> MetabolicScores:
    """z(NASH) + z(BMI) + z(-liver HU) with population z-statistics over the cohort."""
    if len(cohort) < 3:
        raise PreprocessError("metabolic tertiles need at least 3 patients")
    cols = []
    for name in (nash, bmi, liver_hu):
        x = cohort.numeric_column(name)
        if np.isnan(x).any():
            raise PreprocessError(f"{name} has missing values; impute before scoring")
        cols.append(x)
    score = _zscore(cols[0]) + _zscore(cols[1]) + _zscore(-cols[2])
    ids = cohort.ids
    return MetabolicScores(tuple(ids), score, tertile_groups(score, ids))


# ---------------------------------------------------------------------------
# labels


@dataclass(frozen=True)
class HorizonLabels:
    horizon_months: float
    labels: np.ndarray
    ids: tuple[str, ...] = ()


def make_horizon_labels(cohort: Cohort, horizon: float) -> HorizonLabels:
    """label = (months_to_progression <= horizon) and (recurrence_event == 1)."""
    if not horizon > 0:
        raise PreprocessError("horizon must be positive")
    labels = np.zeros(len(cohort), dtype=int)
    for i, r in enumerate(cohort.records):
        if r.recurrence_event == 1:
            if r.months_to_progression is None:
                raise CohortError(f"patient {r.id}: recurrence without months_to_progression")
            labels[i] = int(r.months_to_progression <= horizon)
    return HorizonLabels(horizon, labels, tuple(cohort.ids))


# ---------------------------------------------------------------------------
# splitting and resampling


def stratified_split(labels, train_fraction: float = 0.7, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Per-class shuffled split; each class contributes round(fraction * n_class) training rows."""
    y = np.asarray(labels.labels if isinstance(labels, HorizonLabels) else labels)
    if not 0.0 < train_fraction < 1.0:
        raise PreprocessError("train_fraction must lie strictly between 0 and 1")
    classes = np.unique(y)
    if classes.size < 2:
        raise PreprocessError("both classes must be present")
    rng = np.random.default_rng(seed)
    train, test = [], []
    for c in classes:
        idx = np.flatnonzero(y == c)
        if idx.size < 2:
            raise PreprocessError(f"class {c} has fewer than 2 members")
        idx = rng.permutation(idx)
        k = int(np.clip(np.floor(train_fraction * idx.size + 0.5), 1, idx.size - 1))
        train.append(idx[:k])
        test.append(idx[k:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


@dataclass(frozen=True)
class SmoteResult:
    X: np.ndarray
    y: np.ndarray
    synthetic: np.ndarray  # bool mask, True for generated rows


def smote_oversample(X, y, k: int = 5, seed: int = 0) -> SmoteResult:
    """Balance classes 1:1 by interpolating minority rows toward minority nearest neighbours.

    Each synthetic row is x + u * (nn - x) with u ~ U(0, 1) and nn drawn from the
    k nearest minority neighbours of a randomly chosen minority row x
    (Euclidean; distance ties resolved by row order). ``k`` is clamped to
    minority_count - 1.
    """
    if isinstance(X, FeatureMatrix):
        X = X.to_array()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    classes, counts = np.unique(y, return_counts=True)
    if classes.size != 2:
        raise PreprocessError("SMOTE needs exactly two classes")
    if k < 1:
        raise PreprocessError("k must be >= 1")
    minority = classes[np.argmin(counts)] if counts[0] != counts[1] else classes[1]
    min_idx = np.flatnonzero(y == minority)
    n_min, n_maj = min_idx.size, y.size - min_idx.size
    if n_min < 2:
        raise PreprocessError("minority class needs at least 2 members")
    n_new = n_maj - n_min
    if n_new == 0:
        return SmoteResult(X.copy(), y.copy(), np.zeros(y.size, dtype=bool))
    k = min(k, n_min - 1)
    P = X[min_idx]
    d2 = cdist(P, P, "sqeuclidean")
    np.fill_diagonal(d2, np.inf)
    neighbours = np.argsort(d2, axis=1, kind="stable")[:, :k]
    rng = np.random.default_rng(seed)
    base = rng.integers(0, n_min, n_new)
    pick = neighbours[base, rng.integers(0, k, n_new)]
    u = rng.random(n_new)[:, None]
    synth = P[base] + u * (P[pick] - P[base])
    return SmoteResult(
        np.vstack([X, synth]),
        np.concatenate([y, np.full(n_new, minority, dtype=y.dtype)]),
        np.concatenate([np.zeros(y.size, dtype=bool), np.ones(n_new, dtype=bool)]),
    )
