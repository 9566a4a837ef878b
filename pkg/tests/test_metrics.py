import math

import numpy as np
import pytest
from scipy.stats import mannwhitneyu

from paccmann.errors import ConstantVector, EmptySample, LengthMismatch
from paccmann.metrics import evaluate, mann_whitney_u, pearson, rmse


def test_rmse_pearson_examples():
    m = evaluate([0.2, 0.4, 0.9], [0.2, 0.4, 0.9])
    assert m.rmse == 0 and m.pearson == pytest.approx(1) and m.n == 3
    assert rmse([0, 1], [1, 0]) == 1 and pearson([0, 1], [1, 0]) == pytest.approx(-1)
    assert rmse([0.1, 0.2, 0.3], [0.2, 0.2, 0.2]) == pytest.approx(math.sqrt(0.02 / 3))
    assert rmse([0.1, 0.2, 0.3], [0.2, 0.2, 0.2]) == pytest.approx(0.0816, abs=1e-4)


def test_metric_errors():
    with pytest.raises(LengthMismatch):
        rmse([1, 2], [1])
    with pytest.raises(LengthMismatch):
        rmse([], [])
    with pytest.raises(ConstantVector):
        pearson([0.1, 0.2, 0.3], [0.2, 0.2, 0.2])


def test_mann_whitney_examples():
    assert mann_whitney_u([1, 2, 3], [4, 5, 6]) == (0.0, pytest.approx(0.05))
    assert mann_whitney_u([5], [1]) == (1.0, pytest.approx(1.0))
    assert mann_whitney_u([1, 2, 3], [1, 2, 3])[1] >= 0.5
    with pytest.raises(EmptySample):
        mann_whitney_u([], [1])


def test_exact_matches_scipy(rng):
    for _ in range(30):
        a = rng.integers(0, 6, size=rng.integers(1, 8))
        b = rng.integers(0, 6, size=rng.integers(1, 8))
        if len(set(a) | set(b)) == 1:
            continue
        u, p = mann_whitney_u(a, b, method="exact")
        ref = mannwhitneyu(a, b, alternative="less", method="exact")
        assert u == ref.statistic
        if len(set(a)) + len(set(b)) == len(a) + len(b):
            assert p == pytest.approx(ref.pvalue)


def test_normal_matches_scipy(rng):
    for _ in range(30):
        a, b = rng.normal(size=20), rng.normal(0.5, 1, size=25)
        for alt in ("less", "greater"):
            u, p = mann_whitney_u(a, b, alternative=alt, method="asymptotic")
            ref = mannwhitneyu(a, b, alternative=alt, method="asymptotic", use_continuity=True)
            assert u == ref.statistic and p == pytest.approx(ref.pvalue, rel=1e-9)
