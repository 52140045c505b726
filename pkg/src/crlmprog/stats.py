"""Two-sample rank test and 2x2 odds ratio for small validation cohorts."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

EXACT_LIMIT = 400  # n1 * n2 at or below which the tie-free exact distribution is used


class StatsError(ValueError):
    pass


@dataclass(frozen=True)
class MannWhitneyResult:
    u_statistic: float  # pairs with a > b, ties counted one half
    p_value: float
    method: str  # "exact" or "normal-approximation"
    n1: int
    n2: int


def mann_whitney_u_statistic(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.sort(np.asarray(b, dtype=float))
    below = np.searchsorted(b, a, side="left")
    at_or_below = np.searchsorted(b, a, side="right")
    return float((below.sum() + at_or_below.sum()) / 2.0)


def exact_u_distribution(n1: int, n2: int) -> np.ndarray:
    """Counts of arrangements giving U = 0..n1*n2 (tie-free), by the standard recursion."""
    # f[i][j] holds the count vector for sample sizes (i, j)
    f = [[None] * (n2 + 1) for _ in range(n1 + 1)]
    for i in range(n1 + 1):
        for j in range(n2 + 1):
            if i == 0 or j == 0:
                v = np.zeros(i * j + 1, dtype=object)
                v[0] = 1
                f[i][j] = v
                continue
            v = np.zeros(i * j + 1, dtype=object)
            # largest observation from sample a adds j to U; from sample b adds 0
            prev_a = f[i - 1][j]
            v[j : j + len(prev_a)] += prev_a
            prev_b = f[i][j - 1]
            v[: len(prev_b)] += prev_b
            f[i][j] = v
    return f[n1][n2]


def _exact_p(u: float, n1: int, n2: int) -> float:
    counts = exact_u_distribution(n1, n2)
    total = sum(counts)
    lower = sum(counts[: int(math.floor(min(u, n1 * n2 - u))) + 1])
    return float(min(1.0, 2 * lower / total))


def mann_whitney_u(sample_a, sample_b) -> MannWhitneyResult:
    """Two-sided Mann-Whitney test; U counts pairs where a > b (ties 1/2).

    Exact null distribution when n1*n2 <= 400 and there are no ties; otherwise the normal
    approximation with tie-corrected variance and continuity correction.
    """
    a = np.asarray(sample_a, dtype=float)
    b = np.asarray(sample_b, dtype=float)
    if a.size == 0 or b.size == 0:
        raise StatsError("both samples must be non-empty")
    n1, n2 = a.size, b.size
    u = mann_whitney_u_statistic(a, b)
    pooled = np.concatenate([a, b])
    _, tie_counts = np.unique(pooled, return_counts=True)
    has_ties = bool((tie_counts > 1).any())
    if n1 * n2 <= EXACT_LIMIT and not has_ties:
        return MannWhitneyResult(u, _exact_p(u, n1, n2), "exact", n1, n2)
    n = n1 + n2
    mu = n1 * n2 / 2.0
    tie_term = float(np.sum(tie_counts**3 - tie_counts))
    var = n1 * n2 / 12.0 * ((n + 1) - tie_term / (n * (n - 1))) if n > 1 else 0.0
    if var <= 0:
        return MannWhitneyResult(u, 1.0, "normal-approximation", n1, n2)
    z = max(abs(u - mu) - 0.5, 0.0) / math.sqrt(var)
    return MannWhitneyResult(u, float(min(1.0, 2 * stats.norm.sf(z))), "normal-approximation", n1, n2)


@dataclass(frozen=True)
class OddsRatioResult:
    odds_ratio: float
    ci_lower: float
    ci_upper: float
    p_value: float
    correction_applied: bool


def odds_ratio_2x2(a: int, b: int, c: int, d: int) -> OddsRatioResult:
    """OR = ad / bc for the table [[a, b], [c, d]] with a 95% Wald interval on log OR.

    Any zero cell triggers the Haldane-Anscombe +0.5 correction on all four cells.
    """
    cells = [a, b, c, d]
    if any(x < 0 for x in cells):
        raise StatsError("counts must be nonnegative")
    if sum(cells) == 0:
        raise StatsError("all-zero table")
    corrected = any(x == 0 for x in cells)
    if corrected:
        a, b, c, d = (x + 0.5 for x in cells)
    a, b, c, d = (float(x) for x in (a, b, c, d))
    orv = (a * d) / (b * c)
    se = math.sqrt(1 / a + 1 / b + 1 / c + 1 / d)
    z = float(stats.norm.ppf(0.975))
    log_or = math.log(orv)
    p = float(2 * stats.norm.sf(abs(log_or) / se))
    return OddsRatioResult(orv, math.exp(log_or - z * se), math.exp(log_or + z * se), p, corrected)
