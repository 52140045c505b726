"""Kaplan-Meier curves, log-rank tests, Breslow Cox regression and Harrell's concordance."""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import stats

Z_975 = float(stats.norm.ppf(0.975))
RISK_GROUPS = ("high", "medium", "low")


class SurvivalError(ValueError):
    pass


class NoUsablePairs(SurvivalError):
    pass


class CoxNonConvergence(ArithmeticError):
    """Monotone likelihood: a coefficient diverged."""


@dataclass(frozen=True)
class SurvivalDataset:
    time: np.ndarray
    event: np.ndarray
    group: np.ndarray | None = None

    def __post_init__(self):
        t = np.asarray(self.time, dtype=float)
        e = np.asarray(self.event)
        if t.ndim != 1 or t.shape != e.shape:
            raise SurvivalError(f"time {t.shape} and event {e.shape} must be aligned 1-D arrays")
        if t.size == 0:
            raise SurvivalError("empty survival data")
        if not np.isfinite(t).all():
            raise SurvivalError("non-finite survival times")
        if (t < 0).any():
            raise SurvivalError("negative survival times")
        if not np.isin(e, (0, 1)).all():
            raise SurvivalError("events must be 0/1")
        if ((t == 0) & (e == 1)).any():
            raise SurvivalError("events at time 0 are invalid")
        object.__setattr__(self, "time", t)
        object.__setattr__(self, "event", e.astype(int))
        if self.group is not None:
            g = np.asarray(self.group, dtype=object)
            if g.shape != t.shape:
                raise SurvivalError("group labels must align with times")
            object.__setattr__(self, "group", g)

    def __len__(self) -> int:
        return len(self.time)

    def subset(self, mask) -> "SurvivalDataset":
        mask = np.asarray(mask)
        return SurvivalDataset(self.time[mask], self.event[mask], None if self.group is None else self.group[mask])


# ---------------------------------------------------------------------------
# Kaplan-Meier


@dataclass(frozen=True)
class KmStep:
    time: float
    survival: float
    n_at_risk: int
    n_events: int
    greenwood_variance: float


@dataclass(frozen=True)
class KmCurve:
    steps: list[KmStep]
    median_survival: float | None

    def survival_at(self, t: float) -> float:
        s = 1.0
        for st in self.steps:
            if st.time > t:
                break
            s = st.survival
        return s

    def step_points(self) -> list[tuple[float, float]]:
        return [(0.0, 1.0)] + [(s.time, s.survival) for s in self.steps]


def kaplan_meier(data: SurvivalDataset) -> KmCurve:
    """Product-limit estimate with Greenwood variance, one step per distinct event time.

    Each factor is formed as (n - d) / n, so small-sample values are exact ratios.
    The Greenwood variance is reported as 0 once the curve reaches 0.
    """
    t, e = data.time, data.event
    steps = []
    s = 1.0
    gw = 0.0
    for u in np.unique(t[e == 1]):
        n = int(np.sum(t >= u))
        d = int(np.sum((t == u) & (e == 1)))
        s *= (n - d) / n
        if n > d:
            gw += d / (n * (n - d))
            var = s * s * gw
        else:
            var = 0.0
        steps.append(KmStep(float(u), s, n, d, var))
    median = next((st.time for st in steps if st.survival <= 0.5), None)
    return KmCurve(steps, median)


def number_at_risk(data: SurvivalDataset, times: Sequence[float]) -> list[int]:
    return [int(np.sum(data.time >= t)) for t in times]


def write_km_csv(curves: dict[str, KmCurve], path: str | Path, header_comment: str | None = None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["group", "time", "survival", "variance", "n_at_risk", "n_events"])
        for name, c in curves.items():
            w.writerow([name, "0.0", "1.0", "0.0", "", ""])
            for st in c.steps:
                w.writerow([name, repr(st.time), repr(st.survival), repr(st.greenwood_variance), st.n_at_risk,
                            st.n_events])


# ---------------------------------------------------------------------------
# log-rank


@dataclass(frozen=True)
class LogRankResult:
    chi_square: float
    p_value: float
    df: int
    groups: list
    observed: np.ndarray
    expected: np.ndarray


def log_rank_test(data: SurvivalDataset, groups=None, levels: Sequence | None = None) -> LogRankResult:
    """k-group log-rank test; chi-square with k - 1 degrees of freedom.

    ``groups`` defaults to ``data.group``. When ``levels`` is given every level must occur.
    """
    g = data.group if groups is None else np.asarray(groups, dtype=object)
    if g is None or len(g) != len(data):
        raise SurvivalError("group labels must be given for every subject")
    present = sorted(set(g.tolist()), key=str)
    if levels is not None:
        empty = [lv for lv in levels if lv not in present]
        if empty:
            raise SurvivalError(f"groups with zero subjects: {empty}")
        present = list(levels)
    if len(present) < 2:
        raise SurvivalError("log-rank test needs at least two non-empty groups")
    k = len(present)
    t, e = data.time, data.event
    member = np.array([[lab == lv for lab in g] for lv in present])
    O = np.zeros(k)
    E = np.zeros(k)
    V = np.zeros((k, k))
    for u in np.unique(t[e == 1]):
        at_risk = t >= u
        dead = (t == u) & (e == 1)
        n = at_risk.sum()
        d = dead.sum()
        nj = (member & at_risk).sum(axis=1).astype(float)
        dj = (member & dead).sum(axis=1).astype(float)
        O += dj
        E += d * nj / n
        if n > 1:
            f = d * (n - d) / (n * n * (n - 1))
            V += f * (n * np.diag(nj) - np.outer(nj, nj))
    diff = (O - E)[: k - 1]
    Vr = V[: k - 1, : k - 1]
    chi2 = float(diff @ np.linalg.pinv(Vr) @ diff) if np.any(Vr) else 0.0
    chi2 = max(chi2, 0.0)
    return LogRankResult(chi2, float(stats.chi2.sf(chi2, k - 1)), k - 1, present, O, E)


# ---------------------------------------------------------------------------
# Cox proportional hazards (Breslow ties)


def _risk_sums(time, event, X, beta):
    """Per-subject risk-set sums S0, S1, S2 over {j : t_j >= t_i}."""
    order = np.argsort(-time, kind="stable")
    ts = time[order]
    eta = X[order] @ beta
    shift = eta.max() if eta.size else 0.0
    w = np.exp(eta - shift)
    Xs = X[order]
    s0 = np.cumsum(w)
    s1 = np.cumsum(w[:, None] * Xs, axis=0)
    s2 = np.cumsum(w[:, None, None] * Xs[:, :, None] * Xs[:, None, :], axis=0)
    # ties: every member of a tied block sees the sums through the block's last row
    last = np.searchsorted(-ts, -ts, side="right") - 1
    return order, eta, shift, s0[last], s1[last], s2[last]


def partial_log_likelihood(time, event, X, beta) -> float:
    """Breslow partial log-likelihood."""
    time = np.asarray(time, dtype=float)
    event = np.asarray(event)
    X = np.asarray(X, dtype=float).reshape(len(time), -1)
    order, eta, shift, s0, _, _ = _risk_sums(time, event, X, np.asarray(beta, dtype=float))
    ev = event[order] == 1
    return float(np.sum(eta[ev] - shift - np.log(s0[ev])))


def _cox_derivatives(time, event, X, beta):
    order, eta, shift, s0, s1, s2 = _risk_sums(time, event, X, beta)
    ev = event[order] == 1
    Xs = X[order]
    ll = float(np.sum(eta[ev] - shift - np.log(s0[ev])))
    mean = s1[ev] / s0[ev, None]
    grad = np.sum(Xs[ev] - mean, axis=0)
    info = np.sum(s2[ev] / s0[ev, None, None] - mean[:, :, None] * mean[:, None, :], axis=0)
    return ll, grad, info


@dataclass(frozen=True)
class CoxModel:
    names: list[str]
    coefficients: np.ndarray
    standard_errors: np.ndarray
    log_likelihood: float
    c_index: float
    iterations: int
    converged: bool

    @property
    def hazard_ratios(self) -> np.ndarray:
        return np.exp(self.coefficients)

    @property
    def ci(self) -> tuple[np.ndarray, np.ndarray]:
        return (np.exp(self.coefficients - Z_975 * self.standard_errors),
                np.exp(self.coefficients + Z_975 * self.standard_errors))

    @property
    def p_values(self) -> np.ndarray:
        return 2.0 * stats.norm.sf(np.abs(self.coefficients / self.standard_errors))

    def to_dict(self) -> dict:
        lo, hi = self.ci
        rows = [
            {"covariate": n, "coefficient": float(b), "hazard_ratio": float(h), "ci_lower": float(a),
             "ci_upper": float(c), "se": float(s), "p_value": float(p)}
            for n, b, h, a, c, s, p in zip(self.names, self.coefficients, self.hazard_ratios, lo, hi,
                                           self.standard_errors, self.p_values)
        ]
        return {"covariates": rows, "log_likelihood": self.log_likelihood, "c_index": self.c_index,
                "iterations": self.iterations, "converged": self.converged, "ties": "breslow"}

    def to_text(self) -> str:
        lo, hi = self.ci
        w = max([9] + [len(n) for n in self.names])
        lines = [f"{'covariate':<{w}}  {'coef':>9}  {'HR':>9}  {'95% CI':>21}  {'p':>9}"]
        for n, b, h, a, c, p in zip(self.names, self.coefficients, self.hazard_ratios, lo, hi, self.p_values):
            lines.append(f"{n:<{w}}  {b:>9.4f}  {h:>9.3f}  {a:>9.3f} - {c:>9.3f}  {p:>9.3g}")
        lines.append(f"log-likelihood {self.log_likelihood:.4f}, C-index {self.c_index:.3f}"
                     + ("" if self.converged else " (NOT CONVERGED)"))
        return "\n".join(lines) + "\n"


def fit_cox(data: SurvivalDataset, X, names: Sequence[str] | None = None, ties: str = "breslow",
            max_iter: int = 100, tol: float = 1e-9) -> CoxModel:
    """Newton-Raphson on the Breslow partial likelihood with step halving.

    Converged when the log-likelihood changes by < tol (and the step is small). Raises CoxNonConvergence when any
    |beta| exceeds 50 or the information matrix collapses (monotone likelihood, e.g. perfect separation).
    """
    if ties != "breslow":
        raise SurvivalError("only Breslow ties are supported")
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] != len(data):
        raise SurvivalError(f"{X.shape[0]} covariate rows for {len(data)} subjects")
    if not np.isfinite(X).all():
        raise SurvivalError("non-finite covariates")
    if data.event.sum() == 0:
        raise SurvivalError("Cox regression needs at least one event")
    p = X.shape[1]
    names = [f"x{j}" for j in range(p)] if names is None else list(names)
    if np.abs(X).max(initial=0.0) > 1e3:
        warnings.warn("covariates exceed 1e3 in magnitude; standardize for stable fitting", stacklevel=2)
    t, e = data.time, data.event
    beta = np.zeros(p)
    ll, grad, info = _cox_derivatives(t, e, X, beta)
    info_scale = float(np.linalg.eigvalsh(info).max())
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        try:
            step = np.linalg.solve(info, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(info, grad, rcond=None)[0]
        scale = 1.0
        for _ in range(30):
            cand = beta + scale * step
            ll_new = partial_log_likelihood(t, e, X, cand)
            if ll_new >= ll:
                break
            scale *= 0.5
        else:
            converged = True  # no ascent possible at machine precision
            break
        beta = cand
        if np.abs(beta).max(initial=0.0) > 50:
            raise CoxNonConvergence(f"coefficient diverged (|beta| = {np.abs(beta).max():.1f}); "
                                    "likely perfect separation")
        change = ll_new - ll
        moved = float(np.abs(scale * step).max(initial=0.0))
        ll, grad, info = _cox_derivatives(t, e, X, beta)
        # a monotone likelihood keeps taking unit-sized steps while its gain vanishes
        if abs(change) < tol and moved < 1e-4:
            converged = True
            break
    # information that collapsed relative to beta = 0 means the maximum sits at infinity
    if info_scale > 0 and np.linalg.eigvalsh(info).min() < 1e-10 * info_scale:
        raise CoxNonConvergence(f"information matrix degenerate at |beta| = {np.abs(beta).max():.1f}; "
                                "likely perfect separation")
    try:
        cov = np.linalg.inv(info)
        se = np.sqrt(np.maximum(np.diag(cov), 0.0))
    except np.linalg.LinAlgError:
        se = np.full(p, np.inf)
    c = concordance_index(X @ beta, data)
    return CoxModel(names, beta, se, ll, c, it, converged)


# ---------------------------------------------------------------------------
# concordance and risk groups


def concordance_index(scores, data: SurvivalDataset) -> float:
    """Harrell's C: pairs with t_i < t_j and event_i usable; higher score for i is concordant."""
    s = np.asarray(scores, dtype=float)
    if s.shape != data.time.shape:
        raise SurvivalError("scores must align with subjects")
    t, e = data.time, data.event
    num = 0.0
    den = 0
    for i in np.flatnonzero(e == 1):
        later = t > t[i]
        m = int(later.sum())
        if not m:
            continue
        den += m
        num += np.sum(s[i] > s[later]) + 0.5 * np.sum(s[i] == s[later])
    if den == 0:
        raise NoUsablePairs("no usable pairs (no event precedes another subject's time)")
    return float(num / den)


def tertile_cutoffs(scores) -> tuple[float, float]:
    """Empirical 33rd and 67th percentiles."""
    lo, hi = np.percentile(np.asarray(scores, dtype=float), [33.0, 67.0])
    return float(lo), float(hi)


def risk_group_stratification(scores, cutoffs: tuple[float, float]) -> np.ndarray:
    """score >= high cutoff -> "high", >= low cutoff -> "medium", else "low" (ties go to the riskier side)."""
    lo, hi = (float(c) for c in cutoffs)
    if lo > hi:
        raise SurvivalError(f"cutoffs out of order: {lo} > {hi}")
    s = np.asarray(scores, dtype=float)
    out = np.full(s.shape, "low", dtype=object)
    out[s >= lo] = "medium"
    out[s >= hi] = "high"
    return out
