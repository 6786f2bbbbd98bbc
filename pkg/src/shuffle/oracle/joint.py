"""Brute-force joint densities by direct interpretation of the model AST.

This module shares no evaluation code with the runtime, simplifier or
optimizer, so it can serve as their ground truth.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from ..data import Data, locations
from ..errors import StateSpaceTooLarge, ZeroConditional
from ..surface import syntax as S

MAX_STATES = 1 << 24


class _Undefined(Exception):
    pass


def _index(e, env, quants, data):
    if isinstance(e, S.Num):
        return e.value
    if isinstance(e, S.QVar):
        return quants[e.ident]
    if isinstance(e, S.Name):
        if e.ident in quants:
            return quants[e.ident]
        return _read(e.ident, 0, env)
    if isinstance(e, S.Read):
        i = 0 if e.index is None else _index(e.index, env, quants, data)
        return _read(e.var, i, env)
    if isinstance(e, S.Minus):
        return _index(e.base, env, quants, data) - e.amount
    if isinstance(e, S.DomMin):
        return data.bounds(e.domain)[0]
    if isinstance(e, S.DomMax):
        return data.bounds(e.domain)[1]
    raise TypeError(f"not an index: {e!r}")


def _read(var, i, env):
    if (var, i) not in env:
        raise _Undefined((var, i))
    return env[(var, i)]


_CMP = {"==": lambda a, b: a == b, "!=": lambda a, b: a != b, "<": lambda a, b: a < b,
        "<=": lambda a, b: a <= b, ">": lambda a, b: a > b, ">=": lambda a, b: a >= b}


def _holds(c, env, quants, data):
    if isinstance(c, S.BoolLit):
        return c.value
    if isinstance(c, S.Cmp):
        return _CMP[c.op](_index(c.left, env, quants, data), _index(c.right, env, quants, data))
    if isinstance(c, S.InDom):
        lo, hi = data.bounds(c.domain)
        return lo <= _index(c.expr, env, quants, data) <= hi
    if isinstance(c, S.Not):
        return not _holds(c.arg, env, quants, data)
    if isinstance(c, S.And):
        return _holds(c.left, env, quants, data) and _holds(c.right, env, quants, data)
    if isinstance(c, S.Or):
        return _holds(c.left, env, quants, data) or _holds(c.right, env, quants, data)
    raise TypeError(f"not a constraint: {c!r}")


def _param(p, env, quants, data):
    if isinstance(p, S.Real):
        return p.value
    if isinstance(p, S.ListLit):
        return [_param(x, env, quants, data) for x in p.items]
    if isinstance(p, S.ParamBin):
        a, b = _param(p.left, env, quants, data), _param(p.right, env, quants, data)
        return {"+": a + b, "-": a - b, "*": a * b}.get(p.op) if p.op != "/" else a / b
    return _index(p, env, quants, data)


def _prim(name, args):
    if name == "flip":
        v, p = args
        return p if v == 1 else (1.0 - p if v == 0 else 0.0)
    if name == "categorical":
        v, ps = args
        return ps[v] if 0 <= v < len(ps) else 0.0
    if name == "uniform":
        v, lo, hi = args
        return 1.0 / (hi - lo + 1) if lo <= v <= hi else 0.0
    raise StateSpaceTooLarge(f"{name} is continuous; the oracle only enumerates discrete models")


def density_value(term, env, quants, data):
    """Linear-space value of a model density body."""
    if isinstance(term, S.If):
        branch = term.then if _holds(term.cond, env, quants, data) else term.else_
        return density_value(branch, env, quants, data)
    if isinstance(term, S.Prim):
        return _prim(term.name, [_param(a, env, quants, data) for a in term.args])
    if isinstance(term, S.One):
        return 1.0
    if isinstance(term, S.Mul):
        return density_value(term.left, env, quants, data) * \
            density_value(term.right, env, quants, data)
    raise TypeError(f"unsupported model density body: {type(term).__name__}")


def _instances(defn, data):
    names = [q for q, _ in defn.quantifiers]
    ranges = [range(data.bounds(d)[0], data.bounds(d)[1] + 1) for _, d in defn.quantifiers]
    for vals in itertools.product(*ranges):
        yield dict(zip(names, vals))


def joint_value(model, data, env):
    """Product of every density definition over all its instances."""
    out = 1.0
    for d in model.densities:
        for quants in _instances(d, data):
            try:
                if not _holds(d.type.constraint, env, quants, data):
                    continue
                out *= density_value(d.body, env, quants, data)
            except _Undefined:
                return math.nan
            if out == 0.0:
                return 0.0
    return out


@dataclass
class JointTable:
    """Joint density over every complete discrete assignment."""
    locations: list
    states: np.ndarray  # one row per assignment, one column per location
    probs: np.ndarray

    @property
    def total(self):
        return float(self.probs.sum())

    def column(self, loc):
        return self.locations.index(loc)

    def as_dict(self):
        return {tuple(int(x) for x in row): float(p) for row, p in zip(self.states, self.probs)}

    def expand(self, names):
        """Location list for a mix of variable names and (var, index) pairs."""
        out = []
        for n in names:
            if isinstance(n, tuple):
                out.append(n)
            else:
                out.extend(loc for loc in self.locations if loc[0] == n)
        return out

    def mask(self, env):
        m = np.ones(len(self.probs), dtype=bool)
        for loc, val in env.items():
            m &= self.states[:, self.column(loc)] == val
        return m


def enumerate_joint(model, data=None, max_states=MAX_STATES):
    data = data or Data()
    locs = locations(model, data)
    ranges = []
    for var, _ in locs:
        target = model.variables[var].target
        if target == "Real":
            raise StateSpaceTooLarge(f"{var} is real-valued")
        lo, hi = data.bounds(target)
        ranges.append(range(lo, hi + 1))
    size = 1
    for r in ranges:
        size *= len(r)
    if size > max_states:
        raise StateSpaceTooLarge(f"{size} states exceed the limit of {max_states}")
    states = np.array(list(itertools.product(*ranges)), dtype=np.int64).reshape(size, len(locs))
    probs = np.empty(size)
    for k, row in enumerate(states):
        env = dict(zip(locs, (int(x) for x in row)))
        probs[k] = joint_value(model, data, env)
    return JointTable(locs, states, probs)


def _env_of(table, env):
    out = {}
    for k, v in env.items():
        out[k if isinstance(k, tuple) else (k, 0)] = v
    return out


def conditional(table, A, B, env):
    """P(A = env[A] | B = env[B]) as a ratio of marginals of the joint."""
    env = _env_of(table, env)
    a_locs, b_locs = table.expand(A), table.expand(B)
    for loc in a_locs + b_locs:
        if loc not in env:
            raise KeyError(f"environment does not fix {loc}")
    given = table.mask({loc: env[loc] for loc in b_locs})
    den = table.probs[given].sum()
    if den <= 0.0:
        raise ZeroConditional(f"P({', '.join(map(str, b_locs))}) = 0")
    both = given & table.mask({loc: env[loc] for loc in a_locs})
    return float(table.probs[both].sum() / den)


def distribution(table, A, env=None):
    """Conditional distribution of the A locations given the fixed values in env."""
    env = _env_of(table, env or {})
    a_locs = table.expand(A)
    given = table.mask(env)
    den = table.probs[given].sum()
    if den <= 0.0:
        raise ZeroConditional("conditioning event has probability 0")
    cols = [table.column(loc) for loc in a_locs]
    out = {}
    for row, p in zip(table.states[given][:, cols], table.probs[given]):
        key = tuple(int(x) for x in row)
        out[key] = out.get(key, 0.0) + float(p) / den
    return out
