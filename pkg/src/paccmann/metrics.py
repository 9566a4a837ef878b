"""Regression metrics and the one-sided Mann-Whitney U test."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np
from scipy.stats import rankdata

from .errors import ConstantVector, EmptySample, LengthMismatch

EXACT_MAX_N = 8


@dataclass(frozen=True)
class Metrics:
    rmse: float
    pearson: float
    n: int


def rmse(predictions, targets) -> float:
    p, t = _paired(predictions, targets)
    return float(np.sqrt(np.mean((p - t) ** 2)))


def pearson(predictions, targets) -> float:
    p, t = _paired(predictions, targets)
    if np.all(p == p[0]) or np.all(t == t[0]):
        raise ConstantVector("Pearson correlation is undefined for a constant vector")
    dp, dt = p - p.mean(), t - t.mean()
    denom = math.sqrt(float(dp @ dp) * float(dt @ dt))
    return float(np.clip((dp @ dt) / denom, -1.0, 1.0))


def _paired(predictions, targets):
    p = np.asarray(predictions, dtype=np.float64).ravel()
    t = np.asarray(targets, dtype=np.float64).ravel()
    if p.size != t.size or p.size == 0:
        raise LengthMismatch(f"{p.size} predictions vs {t.size} targets")
    return p, t


def evaluate(predictions, targets) -> Metrics:
    return Metrics(rmse(predictions, targets), pearson(predictions, targets), len(np.ravel(targets)))


def mann_whitney_u(sample_a, sample_b, alternative="less", method="auto"):
    """U statistic of ``sample_a`` and a one-sided p-value.

    ``alternative="less"`` tests whether ``sample_a`` tends to be smaller than
    ``sample_b`` (p = P(U <= U_obs)); ``"greater"`` the reverse. Ties get
    midranks. ``method="auto"`` enumerates every rank assignment when both
    samples have at most 8 values, otherwise uses the tie-corrected normal
    approximation with continuity correction.
    """
    a = np.asarray(sample_a, dtype=np.float64).ravel()
    b = np.asarray(sample_b, dtype=np.float64).ravel()
    if a.size == 0 or b.size == 0:
        raise EmptySample("both samples must be non-empty")
    if alternative not in ("less", "greater"):
        raise ValueError("alternative must be 'less' or 'greater'")
    n1, n2 = a.size, b.size
    ranks = rankdata(np.concatenate([a, b]))
    u = float(ranks[:n1].sum() - n1 * (n1 + 1) / 2)
    if method == "auto":
        method = "exact" if max(n1, n2) <= EXACT_MAX_N else "asymptotic"
    if method == "exact":
        p = _exact_p(ranks, n1, u, alternative)
    elif method == "asymptotic":
        p = _normal_p(ranks, n1, n2, u, alternative)
    else:
        raise ValueError(f"unknown method {method!r}")
    return u, p


def _exact_p(ranks, n1, u_obs, alternative):
    offset = n1 * (n1 + 1) / 2
    hits = total = 0
    tol = 1e-9
    for combo in itertools.combinations(range(ranks.size), n1):
        u = ranks[list(combo)].sum() - offset
        total += 1
        if (alternative == "less" and u <= u_obs + tol) or (alternative == "greater" and u >= u_obs - tol):
            hits += 1
    return hits / total


def _normal_p(ranks, n1, n2, u_obs, alternative):
    n = n1 + n2
    _, counts = np.unique(ranks, return_counts=True)
    tie_term = float(np.sum(counts ** 3 - counts)) / (n * (n - 1)) if n > 1 else 0.0
    var = n1 * n2 / 12.0 * ((n + 1) - tie_term)
    mu = n1 * n2 / 2.0
    if var <= 0:
        return 1.0
    sd = math.sqrt(var)
    if alternative == "less":
        return NormalDist().cdf((u_obs - mu + 0.5) / sd)
    return 1.0 - NormalDist().cdf((u_obs - mu - 0.5) / sd)
