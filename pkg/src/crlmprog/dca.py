"""Decision curve analysis: net benefit against treat-all / treat-none references."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class DcaError(ValueError):
    pass


def default_grid() -> np.ndarray:
    """0.05, 0.10, ..., 0.95 (exact two-decimal values)."""
    return np.round(np.arange(1, 20) * 0.05, 2)


def _check(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels)
    if s.shape != y.shape or s.ndim != 1 or s.size == 0:
        raise DcaError("scores and labels must be aligned, non-empty 1-D arrays")
    if not np.isin(y, (0, 1)).all():
        raise DcaError("labels must be 0/1")
    return s, y.astype(int)


def _check_pt(pt: float) -> float:
    pt = float(pt)
    if not 0.0 < pt < 1.0:
        raise DcaError(f"threshold probability {pt} outside (0, 1)")
    return pt


def confusion_at(scores, labels, pt: float) -> tuple[int, int, int, int]:
    """(tp, fp, tn, fn) with positive iff score >= pt."""
    s, y = _check(scores, labels)
    pred = s >= pt
    return (int(np.sum(pred & (y == 1))), int(np.sum(pred & (y == 0))), int(np.sum(~pred & (y == 0))),
            int(np.sum(~pred & (y == 1))))


def net_benefit(scores, labels, pt: float) -> float:
    """NB = TP/n - FP/n * pt / (1 - pt)."""
    pt = _check_pt(pt)
    s, y = _check(scores, labels)
    tp, fp, _, _ = confusion_at(s, y, pt)
    n = len(y)
    return tp / n - fp / n * (pt / (1.0 - pt))


def treat_all_net_benefit(prevalence: float, pt: float) -> float:
    pt = _check_pt(pt)
    return prevalence - (1.0 - prevalence) * (pt / (1.0 - pt))


@dataclass(frozen=True)
class DecisionCurve:
    thresholds: np.ndarray
    net_benefit_model: np.ndarray
    net_benefit_treat_all: np.ndarray
    net_benefit_treat_none: np.ndarray
    prevalence: float

    def rows(self):
        return zip(self.thresholds, self.net_benefit_model, self.net_benefit_treat_all, self.net_benefit_treat_none)

    def to_csv(self, path: str | Path, header_comment: str | None = None) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["pt", "nb_model", "nb_all", "nb_none"])
            for r in self.rows():
                w.writerow([repr(float(v)) for v in r])


def decision_curve(scores, labels, pt_grid=None) -> DecisionCurve:
    grid = default_grid() if pt_grid is None else np.asarray(pt_grid, dtype=float)
    if grid.size == 0:
        raise DcaError("empty threshold grid")
    if np.any(np.diff(grid) <= 0):
        raise DcaError("threshold grid must be strictly ascending")
    for pt in grid:
        _check_pt(pt)
    s, y = _check(scores, labels)
    prev = float(y.mean())
    model = np.array([net_benefit(s, y, pt) for pt in grid])
    treat_all = np.array([treat_all_net_benefit(prev, pt) for pt in grid])
    return DecisionCurve(grid, model, treat_all, np.zeros_like(grid), prev)


@dataclass(frozen=True)
class TreatmentEfficiency:
    treated_per_1000: float
    beneficial_per_1000: float
    unnecessary_per_1000: float
    efficiency: float | None  # None when nobody is treated

    @property
    def undefined(self) -> bool:
        return self.efficiency is None


def efficiency_from_counts(tp: int, fp: int, n: int) -> TreatmentEfficiency:
    if n <= 0:
        raise DcaError("n must be positive")
    treated = tp + fp
    return TreatmentEfficiency(1000.0 * treated / n, 1000.0 * tp / n, 1000.0 * fp / n,
                               tp / treated if treated else None)


def treatment_efficiency(scores, labels, pt: float) -> TreatmentEfficiency:
    pt = _check_pt(pt)
    tp, fp, _, _ = confusion_at(scores, labels, pt)
    return efficiency_from_counts(tp, fp, len(np.asarray(labels)))
