"""Naive reference implementations used as independent test oracles."""
from __future__ import annotations

import itertools
from collections import deque

import numpy as np
from scipy.optimize import minimize


def neighbours13():
    out = []
    for d in itertools.product((-1, 0, 1), repeat=3):
        if d == (0, 0, 0):
            continue
        first = [c for c in d if c != 0][0]
        if first > 0:
            out.append(d)
    return out


def _inside(shape, p):
    return all(0 <= c < n for c, n in zip(p, shape))


def naive_glcm(levels, ng, direction, distance=1, symmetric=True):
    P = np.zeros((ng, ng))
    shape = levels.shape
    for p in itertools.product(*(range(n) for n in shape)):
        q = tuple(c + distance * d for c, d in zip(p, direction))
        if not _inside(shape, q):
            continue
        a, b = levels[p], levels[q]
        if a > 0 and b > 0:
            P[a - 1, b - 1] += 1
            if symmetric:
                P[b - 1, a - 1] += 1
    return P


def naive_runs(levels, ng, direction):
    shape = levels.shape
    R = np.zeros((ng, max(shape)))
    for p in itertools.product(*(range(n) for n in shape)):
        lev = levels[p]
        if lev == 0:
            continue
        back = tuple(c - d for c, d in zip(p, direction))
        if _inside(shape, back) and levels[back] == lev:
            continue  # not a run start
        length = 1
        q = tuple(c + d for c, d in zip(p, direction))
        while _inside(shape, q) and levels[q] == lev:
            length += 1
            q = tuple(c + d for c, d in zip(q, direction))
        R[lev - 1, length - 1] += 1
    return R


def naive_zones(levels, ng):
    shape = levels.shape
    seen = np.zeros(shape, dtype=bool)
    n_vox = int((levels > 0).sum())
    Z = np.zeros((ng, max(n_vox, 1)))
    steps = [d for d in itertools.product((-1, 0, 1), repeat=3) if d != (0, 0, 0)]
    for p in itertools.product(*(range(n) for n in shape)):
        lev = levels[p]
        if lev == 0 or seen[p]:
            continue
        size = 0
        queue = deque([p])
        seen[p] = True
        while queue:
            cur = queue.popleft()
            size += 1
            for d in steps:
                q = tuple(c + s for c, s in zip(cur, d))
                if _inside(shape, q) and not seen[q] and levels[q] == lev:
                    seen[q] = True
                    queue.append(q)
        Z[lev - 1, size - 1] += 1
    return Z


def pair_count_auc(scores, labels):
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    conc = ties = 0
    for a in pos:
        for b in neg:
            if a > b:
                conc += 1
            elif a == b:
                ties += 1
    return (conc + 0.5 * ties) / (len(pos) * len(neg))


def lasso_objective(beta0, beta, X, y, lam):
    eta = beta0 + X @ beta
    return np.mean(np.logaddexp(0.0, eta) - y * eta) + lam * np.abs(beta).sum()


def numeric_lasso_minimum(X, y, lam):
    """Split-variable smooth reformulation (beta = u - v, u, v >= 0) solved by L-BFGS-B."""
    n, p = X.shape

    def f(z):
        b0, u, v = z[0], z[1 : p + 1], z[p + 1 :]
        eta = b0 + X @ (u - v)
        pr = 0.5 * (1.0 + np.tanh(0.5 * eta))
        val = np.mean(np.logaddexp(0.0, eta) - y * eta) + lam * (u.sum() + v.sum())
        g_eta = (pr - y) / n
        gb = X.T @ g_eta
        return val, np.concatenate([[g_eta.sum()], gb + lam, -gb + lam])

    z0 = np.zeros(2 * p + 1)
    bounds = [(None, None)] + [(0, None)] * (2 * p)
    res = minimize(f, z0, jac=True, method="L-BFGS-B", bounds=bounds, options={"maxiter": 20000, "ftol": 1e-15, "gtol": 1e-12})
    return res.fun


def brute_km(times, events):
    """Empirical product-limit evaluated directly from risk-set counts at each distinct event time."""
    out = []
    s = 1.0
    for t in sorted(set(t for t, e in zip(times, events) if e)):
        at_risk = sum(1 for u in times if u >= t)
        d = sum(1 for u, e in zip(times, events) if u == t and e)
        s *= (at_risk - d) / at_risk
        out.append((t, s))
    return out


def brute_cindex(scores, times, events):
    num = den = 0.0
    n = len(times)
    for i in range(n):
        for j in range(n):
            if events[i] and times[i] < times[j]:
                den += 1
                if scores[i] > scores[j]:
                    num += 1
                elif scores[i] == scores[j]:
                    num += 0.5
    return num / den


def naive_best_split(X, y):
    """Exhaustive root split by Gini: every feature, every cut between consecutive distinct values.

    The cut is reported as the lower of the two values.

    Returns (weighted child impurity, feature, threshold) with the lowest feature, then lowest
    threshold, winning exact ties.
    """
    def gini(lab):
        if not lab:
            return 0.0
        p = sum(lab) / len(lab)
        return 1.0 - p * p - (1 - p) * (1 - p)

    best = None
    n = len(y)
    for j in range(X.shape[1]):
        vals = sorted(set(X[:, j]))
        for a, b in zip(vals, vals[1:]):
            t = a
            left = [y[i] for i in range(n) if X[i, j] <= t]
            right = [y[i] for i in range(n) if X[i, j] > t]
            score = len(left) * gini(left) + len(right) * gini(right)
            if best is None or score < best[0] - 1e-12:
                best = (score, j, t)
    return best
