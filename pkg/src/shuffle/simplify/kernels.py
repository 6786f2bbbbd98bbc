"""Scalar helper functions called from compiled IR.

Written against the math module only so numba can compile them.
"""

from __future__ import annotations

import math

import numpy as np

try:
    from numba.extending import register_jitable as _jitable
except ImportError:  # numba is optional; helpers stay plain Python
    def _jitable(fn):
        return fn

NEG_INF = -math.inf
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


@_jitable
def k_min(a, b):
    return a if a < b else b


@_jitable
def k_max(a, b):
    return a if a > b else b


@_jitable
def k_not(a):
    return 0 if a else 1


@_jitable
def k_pdiv(a, b):
    if b == 0.0:
        raise ZeroDivisionError("DivZero")
    return a / b


@_jitable
def k_ldiv(a, b):
    if b == NEG_INF:
        raise ZeroDivisionError("DivZero")
    return a - b


@_jitable
def k_logaddexp(a, b):
    if a == NEG_INF:
        return b
    if b == NEG_INF:
        return a
    if a > b:
        return a + math.log1p(math.exp(b - a))
    return b + math.log1p(math.exp(a - b))


@_jitable
def k_log(a):
    if a <= 0.0:
        return NEG_INF
    return math.log(a)


@_jitable
def k_exp(a):
    return math.exp(a)


@_jitable
def k_lgamma(a):
    return math.lgamma(a)


@_jitable
def k_flip_pdf(v, p):
    if v == 1:
        return p
    if v == 0:
        return 1.0 - p
    return 0.0


@_jitable
def k_flip_lp(v, p):
    return k_log(k_flip_pdf(v, p))


@_jitable
def k_normal_lp(x, m, s):
    z = (x - m) / s
    return -0.5 * z * z - math.log(s) - _HALF_LOG_2PI


@_jitable
def k_normal_pdf(x, m, s):
    return math.exp(k_normal_lp(x, m, s))


@_jitable
def k_categorical_pdf(v, ps, lo):
    k = int(v - lo)
    if k < 0 or k >= ps.shape[0]:
        return 0.0
    return ps[k]


@_jitable
def k_categorical_lp(v, ps, lo):
    return k_log(k_categorical_pdf(v, ps, lo))


@_jitable
def k_uniform_pdf(v, a, b, discrete):
    if v < a or v > b:
        return 0.0
    if discrete:
        return 1.0 / (b - a + 1.0)
    return 1.0 / (b - a)


@_jitable
def k_uniform_lp(v, a, b, discrete):
    return k_log(k_uniform_pdf(v, a, b, discrete))


@_jitable
def k_dirichlet_lp(theta, alpha):
    total = 0.0
    asum = 0.0
    tsum = 0.0
    for k in range(alpha.shape[0]):
        if theta[k] < 0.0:
            return NEG_INF
        tsum += theta[k]
        asum += alpha[k]
        total += (alpha[k] - 1.0) * k_log(theta[k]) - math.lgamma(alpha[k])
    if abs(tsum - 1.0) > 1e-9:
        return NEG_INF
    return total + math.lgamma(asum)


@_jitable
def k_dirichlet_pdf(theta, alpha):
    return math.exp(k_dirichlet_lp(theta, alpha))


@_jitable
def k_normal_marginal(mu0, sd0, p, s, q, logsd, n):
    """Log of the integral over mu of N(mu | mu0, sd0) * prod_i N(y_i | mu, sd_i).

    p, s, q are sums of 1/sd^2, y/sd^2 and y^2/sd^2; logsd is the sum of log sd_i.
    """
    w0 = 1.0 / (sd0 * sd0)
    prec = w0 + p
    b = s + mu0 * w0
    c = q + mu0 * mu0 * w0
    return (-n * _HALF_LOG_2PI - logsd - math.log(sd0) - 0.5 * math.log(prec)
            - 0.5 * (c - b * b / prec))


@_jitable
def k_normal_post_mean(mu0, sd0, p, s):
    w0 = 1.0 / (sd0 * sd0)
    return (mu0 * w0 + s) / (w0 + p)


@_jitable
def k_normal_post_sd(sd0, p):
    return math.sqrt(1.0 / (1.0 / (sd0 * sd0) + p))


@_jitable
def k_normal_predictive_lp(x, mu0, sd0, sd, n, total):
    """Log posterior predictive of x given n observations with sum `total` (known sd)."""
    p = n / (sd * sd)
    m = k_normal_post_mean(mu0, sd0, p, total / (sd * sd))
    v = 1.0 / (1.0 / (sd0 * sd0) + p) + sd * sd
    return k_normal_lp(x, m, math.sqrt(v))


@_jitable
def _ndtri_lower(p):
    """Inverse standard normal CDF for 0 < p <= 1/2 (Acklam's rational
    approximation refined by Newton steps; the residual is accurate here)."""
    c = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
         -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
    d = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
         3.754408661907416e+00)
    a = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
         1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
    b = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
         6.680131188771972e+01, -1.328068155288572e+01)
    if p < 0.02425:
        t = math.sqrt(-2.0 * math.log(p))
        x = (((((c[0] * t + c[1]) * t + c[2]) * t + c[3]) * t + c[4]) * t + c[5]) / \
            ((((d[0] * t + d[1]) * t + d[2]) * t + d[3]) * t + 1.0)
    else:
        t = p - 0.5
        r = t * t
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * t / \
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0)
    for _ in range(2):
        e = 0.5 * math.erfc(-x / math.sqrt(2.0)) - p
        x = x - e * math.sqrt(2.0 * math.pi) * math.exp(0.5 * x * x)
    return x


@_jitable
def k_ndtri(u):
    """Inverse standard normal CDF; the upper half is reflected (1 - u is exact there)."""
    if u <= 0.0:
        return NEG_INF
    if u >= 1.0:
        return math.inf
    if u > 0.5:
        return -_ndtri_lower(1.0 - u)
    return _ndtri_lower(u)


@_jitable
def k_sample_normal(m, sd, u):
    return m + sd * k_ndtri(u)


@_jitable
def k_dirichlet_marginal(alpha, counts):
    a = 0.0
    ac = 0.0
    out = 0.0
    for k in range(alpha.shape[0]):
        a += alpha[k]
        ac += alpha[k] + counts[k]
        out += math.lgamma(alpha[k] + counts[k]) - math.lgamma(alpha[k])
    return out + math.lgamma(a) - math.lgamma(ac)


def k_dirichlet_draw(out, alpha, counts, uniforms, offset):
    """Write a Dirichlet(alpha + counts) draw into `out` using uniforms[offset:]."""
    from scipy.special import gammaincinv
    post = np.asarray(alpha) + np.asarray(counts)
    g = gammaincinv(post, np.asarray(uniforms)[int(offset):int(offset) + post.shape[0]])
    out[:] = g / g.sum()
    return 0.0


@_jitable
def k_sample_logweights(w, u):
    top = NEG_INF
    for k in range(w.shape[0]):
        if w[k] > top:
            top = w[k]
    if top == NEG_INF:
        raise ValueError("UnsampleableDensity")
    total = 0.0
    for k in range(w.shape[0]):
        total += math.exp(w[k] - top)
    target = u * total
    acc = 0.0
    for k in range(w.shape[0]):
        acc += math.exp(w[k] - top)
        if acc > target:
            return k
    return w.shape[0] - 1


@_jitable
def k_sample_weights(w, u):
    total = 0.0
    for k in range(w.shape[0]):
        total += w[k]
    if total <= 0.0:
        raise ValueError("UnsampleableDensity")
    target = u * total
    acc = 0.0
    for k in range(w.shape[0]):
        acc += w[k]
        if acc > target:
            return k
    return w.shape[0] - 1


HELPERS = {name[2:]: fn for name, fn in list(globals().items())
           if name.startswith("k_") and callable(fn)}



def jitted(name):
    """The helper as callable from numba-compiled code (register_jitable makes it so)."""
    return HELPERS[name]
