"""Adaptive Simpson quadrature and exact Pólya-urn enumeration for conjugacy checks."""

import math
from fractions import Fraction

import numpy as np


def _simpson(f, a, fa, b, fb):
    m = 0.5 * (a + b)
    fm = f(m)
    return m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb)


def _adaptive(f, a, fa, b, fb, m, fm, whole, tol, depth):
    lm, flm, left = _simpson(f, a, fa, m, fm)
    rm, frm, right = _simpson(f, m, fm, b, fb)
    delta = left + right - whole
    if depth <= 0 or abs(delta) <= 15.0 * tol:
        return left + right + delta / 15.0
    return (_adaptive(f, a, fa, m, fm, lm, flm, left, tol / 2.0, depth - 1)
            + _adaptive(f, m, fm, b, fb, rm, frm, right, tol / 2.0, depth - 1))


def simpson(f, a, b, tol=1e-13, panels=200, depth=40):
    """Adaptive Simpson over [a, b], starting from equal panels so narrow peaks are seen."""
    edges = np.linspace(a, b, panels + 1)
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        flo, fhi = f(lo), f(hi)
        m, fm, whole = _simpson(f, lo, flo, hi, fhi)
        total += _adaptive(f, lo, flo, hi, fhi, m, fm, whole, tol / panels, depth)
    return total


def normal_posterior_by_quadrature(mu0, sd0, ys, sd):
    """Posterior mean and variance of mu, integrating the unnormalized posterior."""
    ys = np.asarray(ys, dtype=float)

    def log_post(mu):
        return (-0.5 * ((mu - mu0) / sd0) ** 2
                - 0.5 * float(np.sum(((ys - mu) / sd) ** 2)))

    # shift by the log density at the data-weighted center to keep values near 1
    center = (mu0 / sd0 ** 2 + ys.sum() / sd ** 2) / (1 / sd0 ** 2 + len(ys) / sd ** 2)
    ref = log_post(center)
    half = 50.0 * sd0
    a, b = mu0 - half, mu0 + half

    def moment(k):
        return simpson(lambda mu: mu ** k * math.exp(log_post(mu) - ref), a, b)

    z = moment(0)
    mean = moment(1) / z
    var = simpson(lambda mu: (mu - mean) ** 2 * math.exp(log_post(mu) - ref), a, b) / z
    return mean, var, z, ref


def polya_probability(alpha, zs):
    """Exact P(z_1..z_n) under a Dirichlet(alpha) prior, as a Fraction."""
    alpha = [Fraction(a) for a in alpha]
    counts = [0] * len(alpha)
    p = Fraction(1)
    total = sum(alpha)
    for t, z in enumerate(zs):
        p *= (alpha[z] + counts[z]) / (total + t)
        counts[z] += 1
    return p


def polya_predictive(alpha, history, k):
    """P(z_next = k | history) as a ratio of exact joint probabilities."""
    return polya_probability(alpha, list(history) + [k]) / polya_probability(alpha, history)
