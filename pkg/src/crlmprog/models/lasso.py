"""L1-penalized logistic regression by proximal Newton steps with coordinate-descent inner solves.

Objective: mean logistic loss + lam * ||beta||_1, intercept unpenalized.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tree import ModelError, check_xy
from .trees import _names, _sigmoid


@dataclass(frozen=True)
class ConvergenceReport:
    iterations: int
    max_delta: float
    converged: bool


@dataclass(frozen=True)
class LassoLogisticModel:
    coefficients: np.ndarray
    intercept: float
    lam: float
    convergence: ConvergenceReport
    feature_names: list[str]
    feature_sd: np.ndarray
    kind = "lasso_logistic"

    def decision_function(self, X) -> np.ndarray:
        return self.intercept + check_xy(X)[0] @ self.coefficients

    def predict_proba(self, X) -> np.ndarray:
        return _sigmoid(self.decision_function(X))

    def predict(self, X) -> np.ndarray:
        return (self.predict_proba(X) > 0.5).astype(int)

    def raw_importance(self) -> np.ndarray:
        return np.abs(self.coefficients) * self.feature_sd

    def to_dict(self) -> dict:
        c = self.convergence
        return {
            "type": self.kind, "feature_names": self.feature_names,
            "coefficients": self.coefficients.tolist(), "intercept": self.intercept, "lambda": self.lam,
            "feature_sd": self.feature_sd.tolist(),
            "convergence": {"iterations": c.iterations, "max_delta": c.max_delta, "converged": c.converged},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LassoLogisticModel":
        return cls(np.array(d["coefficients"], dtype=float), float(d["intercept"]), float(d["lambda"]),
                   ConvergenceReport(**d["convergence"]), list(d["feature_names"]),
                   np.array(d["feature_sd"], dtype=float))


def lasso_objective(X, y, intercept: float, beta, lam: float) -> float:
    eta = intercept + X @ beta
    return float(np.mean(np.logaddexp(0.0, eta) - y * eta) + lam * np.abs(beta).sum())


def lambda_max(X, y) -> float:
    """Smallest penalty at which every coefficient is zero."""
    X, y = check_xy(X, y)
    return float(np.max(np.abs(X.T @ (y - y.mean()))) / len(y))


def _soft(z: float, t: float) -> float:
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


def _cd_quadratic(X, xsq_w, w, z, b0, beta, lam, tol, max_sweeps):
    """Coordinate descent on (1/2) sum w (z - b0 - X beta)^2 + lam ||beta||_1 (w already divided by n)."""
    beta = beta.copy()
    r = z - b0 - X @ beta
    wsum = w.sum()
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        delta = 0.0
        shift = float(w @ r) / wsum
        if shift:
            b0 += shift
            r -= shift
            delta = abs(shift)
        for j in range(X.shape[1]):
            a = xsq_w[j]
            if a <= 0.0:
                continue
            old = beta[j]
            g = float((w * X[:, j]) @ r) + a * old
            new = _soft(g, lam) / a
            if new != old:
                r -= (new - old) * X[:, j]
                beta[j] = new
                delta = max(delta, abs(new - old))
        if delta < tol:
            break
    return b0, beta, sweeps


def fit_lasso_logistic(
    X,
    y,
    lam: float,
    tol: float = 1e-6,
    max_iter: int = 10_000,
    *,
    feature_names=None,
    warm_start: tuple[float, np.ndarray] | None = None,
) -> LassoLogisticModel:
    """Converged when an outer step moves every coefficient (and the intercept) by < tol.

    Hitting max_iter total coordinate sweeps is reported in the convergence report, not raised.
    """
    X, y = check_xy(X, y)
    if lam < 0:
        raise ModelError("lambda must be >= 0")
    n, p = X.shape
    if warm_start is None:
        b0 = float(np.log(y.mean() / (1.0 - y.mean())))
        beta = np.zeros(p)
    else:
        b0, beta = float(warm_start[0]), np.array(warm_start[1], dtype=float)
    f_old = lasso_objective(X, y, b0, beta, lam)
    sweeps_used = 0
    delta = np.inf
    converged = False
    while sweeps_used < max_iter:
        eta = b0 + X @ beta
        prob = _sigmoid(eta)
        w = np.maximum(prob * (1.0 - prob), 1e-5)
        z = eta + (y - prob) / w
        w_n = w / n
        xsq_w = w_n @ (X * X)
        nb0, nbeta, sweeps = _cd_quadratic(X, xsq_w, w_n, z, b0, beta, lam, tol * 1e-2,
                                           max_iter - sweeps_used)
        sweeps_used += sweeps
        d0, d = nb0 - b0, nbeta - beta
        t = 1.0
        for _ in range(40):
            f_new = lasso_objective(X, y, b0 + t * d0, beta + t * d, lam)
            if f_new <= f_old:
                break
            t *= 0.5
        else:
            converged = True  # no descent possible at machine precision
            delta = 0.0
            break
        b0, beta = b0 + t * d0, beta + t * d
        delta = max(abs(t * d0), float(np.max(np.abs(t * d), initial=0.0)))
        f_old = f_new
        if delta < tol:
            converged = True
            break
    return LassoLogisticModel(beta, float(b0), float(lam), ConvergenceReport(sweeps_used, float(delta), converged),
                              _names(feature_names, p), X.std(axis=0))


def kkt_violation(model: LassoLogisticModel, X, y) -> float:
    """Largest subgradient-condition violation of the mean-loss objective."""
    X, y = check_xy(X, y)
    prob = model.predict_proba(X)
    g = X.T @ (prob - y) / len(y)
    beta = model.coefficients
    active = beta != 0
    viol = np.where(active, np.abs(g + model.lam * np.sign(beta)), np.maximum(np.abs(g) - model.lam, 0.0))
    return float(max(np.max(viol, initial=0.0), abs(float(np.mean(prob - y)))))


def lambda_grid(X, y, n_lambdas: int = 30, decades: float = 4.0) -> np.ndarray:
    lmax = lambda_max(X, y)
    return lmax * np.logspace(0.0, -decades, n_lambdas)


def stratified_folds(y, n_folds: int, seed: int) -> np.ndarray:
    """Fold id per row: each class is shuffled, then dealt round-robin."""
    y = np.asarray(y)
    rng = np.random.default_rng(seed)
    folds = np.empty(len(y), dtype=int)
    offset = 0
    for cls in np.unique(y):
        idx = np.flatnonzero(y == cls)
        idx = idx[rng.permutation(len(idx))]
        folds[idx] = (np.arange(len(idx)) + offset) % n_folds
        offset += len(idx)
    return folds


def select_lambda_cv(X, y, n_folds: int = 5, n_lambdas: int = 30, seed: int = 0, tol: float = 1e-6):
    """Return (best lambda, grid, mean CV AUC per lambda); ties prefer the larger lambda."""
    from ..evaluation import roc_auc

    X, y = check_xy(X, y)
    grid = lambda_grid(X, y, n_lambdas)
    folds = stratified_folds(y, n_folds, seed)
    scores = np.zeros((n_folds, len(grid)))
    for k in range(n_folds):
        tr, te = folds != k, folds == k
        if len(np.unique(y[tr])) < 2 or len(np.unique(y[te])) < 2:
            raise ModelError(f"fold {k} lacks one of the classes")
        warm = None
        for i, lam in enumerate(grid):
            m = fit_lasso_logistic(X[tr], y[tr], lam, tol=tol, warm_start=warm)
            warm = (m.intercept, m.coefficients)
            scores[k, i] = roc_auc(m.decision_function(X[te]), y[te]).auc
    mean = scores.mean(axis=0)
    best = int(np.argmax(mean))
    return float(grid[best]), grid, mean


def fit_lasso_cv(X, y, n_folds: int = 5, n_lambdas: int = 30, seed: int = 0, *, feature_names=None):
    lam, _, _ = select_lambda_cv(X, y, n_folds, n_lambdas, seed)
    return fit_lasso_logistic(X, y, lam, feature_names=feature_names)
