"""Closed forms for the two conjugate families: Normal-Normal and Dirichlet-categorical."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List

import numpy as np
from scipy.special import gammaincinv, gammaln, ndtri

from ..surface import syntax as S

LOG_2PI = math.log(2.0 * math.pi)


# ---------------------------------------------------------------- Normal-Normal

def normal_posterior(mu0, sd0, ys, sds):
    """Posterior (mean, variance) of a Normal mean under a Normal prior.

    ys and sds are sequences of observations and their known standard deviations.
    """
    tau0 = 1.0 / np.square(sd0)
    tau_n = tau0 + sum(1.0 / np.square(s) for s in sds) if len(sds) else tau0
    weighted = tau0 * mu0 + sum(y / np.square(s) for y, s in zip(ys, sds))
    return weighted / tau_n, 1.0 / tau_n


def normal_posterior_stats(mu0, sd0, sd, n, total):
    """Same posterior from sufficient statistics (count and sum) with a shared sd."""
    tau0, tau = 1.0 / (sd0 * sd0), 1.0 / (sd * sd)
    tau_n = tau0 + n * tau
    return (tau0 * mu0 + tau * total) / tau_n, 1.0 / tau_n


def normal_log_marginal(mu0, sd0, ys, sds):
    """log of the integral over mu of N(mu; mu0, sd0) * prod N(y_i; mu, sd_i)."""
    tau0 = 1.0 / np.square(sd0)
    mean, var = normal_posterior(mu0, sd0, ys, sds)
    tau_n = 1.0 / var
    out = 0.5 * np.log(tau0) - 0.5 * np.log(tau_n) - 0.5 * (tau0 * np.square(mu0) - tau_n * np.square(mean))
    for y, s in zip(ys, sds):
        tau = 1.0 / np.square(s)
        out = out + 0.5 * np.log(tau) - 0.5 * LOG_2PI - 0.5 * tau * np.square(y)
    return out


def normal_log_marginal_stats(mu0, sd0, sd, n, total, total_sq):
    tau0, tau = 1.0 / (sd0 * sd0), 1.0 / (sd * sd)
    mean, var = normal_posterior_stats(mu0, sd0, sd, n, total)
    tau_n = 1.0 / var
    return (n * (0.5 * np.log(tau) - 0.5 * LOG_2PI) + 0.5 * np.log(tau0) - 0.5 * np.log(tau_n)
            - 0.5 * (tau * total_sq + tau0 * mu0 * mu0 - tau_n * mean * mean))


def normal_predictive(mu0, sd0, sd, n, total):
    """Posterior predictive (mean, variance) of a new observation."""
    mean, var = normal_posterior_stats(mu0, sd0, sd, n, total)
    return mean, var + sd * sd


def sample_normal(mean, var, u):
    return mean + np.sqrt(var) * ndtri(u)


# ---------------------------------------------------------------- Dirichlet-categorical

def log_multibeta(alpha):
    alpha = np.asarray(alpha, dtype=float)
    return gammaln(alpha).sum(axis=-1) - gammaln(alpha.sum(axis=-1))


def dirichlet_posterior(alpha, counts):
    return np.asarray(alpha, dtype=float) + np.asarray(counts, dtype=float)


def dirichlet_log_marginal(alpha, counts):
    """log of the integral over theta of Dir(theta; alpha) * prod Cat(z_i; theta)."""
    return log_multibeta(dirichlet_posterior(alpha, counts)) - log_multibeta(alpha)


def dirichlet_predictive(alpha, counts):
    post = dirichlet_posterior(alpha, counts)
    return post / post.sum(axis=-1, keepdims=True)


def sample_dirichlet(alpha, uniforms):
    """Inverse-transform Dirichlet draw: one Gamma(alpha_k) quantile per component."""
    g = gammaincinv(alpha, uniforms)
    return g / g.sum(axis=-1, keepdims=True)


# ---------------------------------------------------------------- pattern matching

def reads_var(node, var):
    return any(isinstance(n, S.Read) and n.var == var for n in S.walk(node)) \
        if not isinstance(node, tuple) else any(reads_var(x, var) for x in node)


@dataclass
class NormalNormal:
    var: str
    prior: tuple            # (Prim, quants)
    likelihoods: List[tuple] = field(default_factory=list)


@dataclass
class DirichletCategorical:
    var: str
    prior: tuple
    likelihoods: List[tuple] = field(default_factory=list)


def _is_var(p, var):
    return isinstance(p, S.Read) and p.var == var and p.index is None


def match(factors, var):
    """Recognize a prior and likelihood terms over `var` among (Prim, quants) factors.

    Returns NormalNormal, DirichletCategorical or None.
    """
    prior, liks, family = None, [], None
    for prim, quants in factors:
        if not isinstance(prim, S.Prim):
            return None
        args = prim.args
        if prim.name == "normal" and len(args) == 3:
            target, mean, sd = args
            if _is_var(target, var) and not reads_var((mean, sd), var):
                if prior is not None:
                    return None
                prior, fam = (prim, quants), "normal"
            elif _is_var(mean, var) and not reads_var((target, sd), var):
                liks.append((prim, quants))
                fam = "normal"
            else:
                return None
        elif prim.name == "dirichlet" and len(args) == 2:
            if not _is_var(args[0], var) or reads_var(args[1], var) or prior is not None:
                return None
            prior, fam = (prim, quants), "dirichlet"
        elif prim.name == "categorical" and len(args) == 2:
            if not _is_var(args[1], var) or reads_var(args[0], var):
                return None
            liks.append((prim, quants))
            fam = "dirichlet"
        else:
            return None
        if family not in (None, fam):
            return None
        family = fam
    if prior is None:
        return None
    if family == "normal":
        return NormalNormal(var, prior, liks)
    return DirichletCategorical(var, prior, liks)
