"""Log-domain probability arithmetic with an explicit -inf for zero."""

from __future__ import annotations

import math

import numpy as np
from scipy.special import logsumexp

NEG_INF = -math.inf


def from_linear(p):
    with np.errstate(divide="ignore"):
        return np.log(p)


def to_linear(lp):
    return np.exp(lp)


def log_mul(a, b):
    return np.add(a, b)


def log_add(a, b):
    return np.logaddexp(a, b)


def log_sum(values, axis=0):
    """Stable log of a sum of exponentials; all -inf gives -inf."""
    values = np.asarray(values, dtype=float)
    with np.errstate(divide="ignore"):
        return logsumexp(values, axis=axis)


class LogProb:
    """A scalar probability carried as its logarithm."""

    __slots__ = ("log",)

    def __init__(self, log):
        self.log = float(log)

    @classmethod
    def of(cls, p):
        return cls(NEG_INF if p == 0 else math.log(p))

    @property
    def value(self):
        return math.exp(self.log)

    def __mul__(self, other):
        return LogProb(self.log + other.log)

    def __truediv__(self, other):
        if other.log == NEG_INF:
            raise ZeroDivisionError("division by a zero probability")
        return LogProb(self.log - other.log)

    def __add__(self, other):
        return LogProb(np.logaddexp(self.log, other.log))

    def __repr__(self):
        return f"LogProb({self.log!r})"

    def __eq__(self, other):
        return isinstance(other, LogProb) and self.log == other.log

    def __hash__(self):
        return hash(self.log)
