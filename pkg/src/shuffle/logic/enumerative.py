"""Bounded exhaustive solver: a small-scope oracle for obligations."""

from __future__ import annotations

import itertools
import operator

from ..errors import BudgetExceeded
from . import formula as F

ERR = "ERR"

_CMP = {"==": operator.eq, "!=": operator.ne, "<": operator.lt, "<=": operator.le,
        ">": operator.gt, ">=": operator.ge}


class NeedRead(Exception):
    def __init__(self, key):
        self.key = key


class _Evaluator:
    """Compiles formulas to closures over a state dict.

    State keys: ("b", domain, which) for bounds, ("v", name) for integer
    variables, and `reads`, a dict from (var, index) to value.
    """

    def __init__(self, readinfo):
        self.readinfo = {r[0]: r for r in readinfo}

    def term(self, t):
        if isinstance(t, F.IConst):
            v = t.value
            return lambda s: v
        if isinstance(t, F.IVar):
            key = ("v", t.name)
            return lambda s: s[key]
        if isinstance(t, F.Bound):
            key = ("b", t.domain, t.which)
            return lambda s: s[key]
        if isinstance(t, F.ISub):
            base, amt = self.term(t.base), t.amount

            def sub(s):
                b = base(s)
                return ERR if b is ERR else b - amt
            return sub
        if isinstance(t, F.RRead):
            idx = self.term(t.index)
            var = t.var
            dom = self.readinfo[var][1]
            lo_key, hi_key = ("b", dom, "min"), ("b", dom, "max")

            def read(s):
                i = idx(s)
                if i is ERR:
                    return ERR
                if dom is None:
                    if i != 0:
                        return ERR
                elif not (s[lo_key] <= i <= s[hi_key]):
                    return ERR
                reads = s["reads"]
                key = (var, i)
                if key not in reads:
                    raise NeedRead(key)
                return reads[key]
            return read
        raise TypeError(t)

    def formula(self, f):
        if isinstance(f, F.BConst):
            v = f.value
            return lambda s: v
        if isinstance(f, F.ICmp):
            op, left, right = _CMP[f.op], self.term(f.left), self.term(f.right)

            def cmp(s):
                a = left(s)
                if a is ERR:
                    return ERR
                b = right(s)
                if b is ERR:
                    return ERR
                return op(a, b)
            return cmp
        if isinstance(f, F.FNot):
            arg = self.formula(f.arg)

            def not_(s):
                a = arg(s)
                return ERR if a is ERR else not a
            return not_
        if isinstance(f, F.FAnd):
            args = [self.formula(a) for a in f.args]

            def and_(s):
                for a in args:
                    v = a(s)
                    if v is not True:
                        return v
                return True
            return and_
        if isinstance(f, F.FOr):
            args = [self.formula(a) for a in f.args]

            def or_(s):
                for a in args:
                    v = a(s)
                    if v is not False:
                        return v
                return False
            return or_
        if isinstance(f, F.FImplies):
            left, right = self.formula(f.left), self.formula(f.right)

            def imp(s):
                a = left(s)
                if a is ERR:
                    return ERR
                return True if not a else right(s)
            return imp
        if isinstance(f, F.FIff):
            left, right = self.formula(f.left), self.formula(f.right)

            def iff(s):
                a = left(s)
                if a is ERR:
                    return ERR
                b = right(s)
                if b is ERR:
                    return ERR
                return a == b
            return iff
        if isinstance(f, F.NoErr):
            arg = self.formula(f.arg)
            return lambda s: arg(s) is not ERR
        if isinstance(f, (F.FExists, F.FForall)):
            body = self.formula(f.body)
            key = ("v", f.var)
            lo_key, hi_key = ("b", f.domain, "min"), ("b", f.domain, "max")
            exists = isinstance(f, F.FExists)

            def quant(s):
                saved = s.get(key, None)
                vals = []
                try:
                    for x in range(s[lo_key], s[hi_key] + 1):
                        s[key] = x
                        vals.append(body(s))
                finally:
                    if saved is None:
                        s.pop(key, None)
                    else:
                        s[key] = saved
                if ERR in vals:
                    return ERR
                return any(vals) if exists else all(vals)
            return quant
        raise TypeError(f)


def _domain_range(state, domain, cap):
    if domain is None:
        return range(-2, cap + 3)
    if domain == "Bool":
        return range(0, 2)
    return range(state[("b", domain, "min")], state[("b", domain, "max")] + 1)


def _value_range(state, t):
    if isinstance(t, F.IConst):
        return t.value
    return state[("b", t.domain, t.which)]


def solve(ob, cap=6, ceiling=5_000_000):
    """Return (valid, witness).  `valid` holds for all instances within `cap`."""
    ev = _Evaluator(ob.reads)
    groups = [ev.formula(g) for g in ob.groups]
    goal = ev.formula(ob.goal)
    domains = []
    for f in (*ob.groups, ob.goal):
        for d in F.domains_of(f):
            if d not in domains:
                domains.append(d)
    for _, d in ob.ivars:
        if d is not None and d != "Bool" and d not in domains:
            domains.append(d)
    for _, dom, lo, hi in ob.reads:
        for t in (lo, hi):
            if isinstance(t, F.Bound) and t.domain not in domains:
                domains.append(t.domain)
        if dom is not None and dom not in domains:
            domains.append(dom)
    budget = [0]

    def check_leaf(state):
        budget[0] += 1
        if budget[0] > ceiling:
            raise BudgetExceeded(f"more than {ceiling} instances at cap {cap}")
        for g in groups:
            if g(state) is not True:
                return True
        return goal(state) is True

    def explore(state):
        try:
            return check_leaf(state)
        except NeedRead as nr:
            var, idx = nr.key
            info = ev.readinfo[var]
            lo, hi = _value_range(state, info[2]), _value_range(state, info[3])
            reads = state["reads"]
            for val in range(lo, hi + 1):
                reads[nr.key] = val
                ok = explore(state)
                if not ok:
                    return False
                del reads[nr.key]
            return True

    ivars = list(ob.ivars)
    span = range(0, cap + 1)
    for bvals in itertools.product(span, repeat=2 * len(domains)):
        state = {"reads": {}}
        for k, d in enumerate(domains):
            state[("b", d, "min")] = bvals[2 * k]
            state[("b", d, "max")] = bvals[2 * k + 1]
        for ivals in _ivar_assignments(state, ivars, cap):
            for (name, _), v in zip(ivars, ivals):
                state[("v", name)] = v
            state["reads"] = {}
            if not explore(state):
                return False, _witness(state, domains, ivars)
    return True, None


def _ivar_assignments(state, ivars, cap):
    ranges = [_domain_range(state, d, cap) for _, d in ivars]
    return itertools.product(*ranges)


def _witness(state, domains, ivars):
    return {
        "bounds": {d: (state[("b", d, "min")], state[("b", d, "max")]) for d in domains},
        "quantifiers": {name: state[("v", name)] for name, _ in ivars},
        "reads": dict(state["reads"]),
    }


def evaluate(f, witness, readinfo=()):
    """Evaluate a formula under a witness; returns True, False or ERR."""
    ev = _Evaluator(readinfo)
    state = {"reads": dict(witness.get("reads", {}))}
    for d, (lo, hi) in witness.get("bounds", {}).items():
        state[("b", d, "min")] = lo
        state[("b", d, "max")] = hi
    for name, v in witness.get("quantifiers", {}).items():
        state[("v", name)] = v
    try:
        return ev.formula(f)(state)
    except NeedRead as nr:
        raise KeyError(nr.key) from None
