"""Goodness-of-fit helpers for testing samplers against exact distributions."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from scipy import stats


@dataclass
class FrequencyResult:
    passed: bool
    statistic: float
    dof: int
    p_value: float
    alpha: float

    def __bool__(self):
        return self.passed


def frequency_test(samples, exact, alpha=0.01, min_expected=5.0):
    """Chi-square goodness of fit of discrete samples to an exact distribution.

    Cells with small expected counts are pooled; a sample outside the
    support fails outright.
    """
    samples = list(samples)
    n = len(samples)
    if n == 0:
        return FrequencyResult(False, float("inf"), 0, 0.0, alpha)
    counts = Counter(samples)
    support = {k: p for k, p in exact.items() if p > 0}
    if any(k not in support for k in counts):
        return FrequencyResult(False, float("inf"), 0, 0.0, alpha)
    obs, exp = [], []
    pool_o, pool_e = 0.0, 0.0
    for k in sorted(support, key=repr):
        e = support[k] * n
        if e < min_expected:
            pool_o += counts.get(k, 0)
            pool_e += e
        else:
            obs.append(counts.get(k, 0))
            exp.append(e)
    if pool_e > 0:
        obs.append(pool_o)
        exp.append(pool_e)
    if len(obs) < 2:
        return FrequencyResult(True, 0.0, 0, 1.0, alpha)
    scale = sum(obs) / sum(exp)
    exp = [e * scale for e in exp]
    stat = sum((o - e) ** 2 / e for o, e in zip(obs, exp))
    dof = len(obs) - 1
    p = float(stats.chi2.sf(stat, dof))
    return FrequencyResult(p >= alpha, float(stat), dof, p, alpha)
