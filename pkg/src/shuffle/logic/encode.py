"""Translation from surface constraints and variable sets to formulas."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict

from ..errors import UnsupportedConstraint
from ..surface import syntax as S
from . import formula as F


@dataclass(frozen=True)
class SymbolicCtx:
    """Model plus the quantifiers in scope (the model type environment)."""
    model: S.Model
    gamma: Dict[str, str] = field(default_factory=dict)

    def bind(self, q, domain):
        g = dict(self.gamma)
        g[q] = domain
        return SymbolicCtx(self.model, g)

    def unbind(self, q):
        g = {k: v for k, v in self.gamma.items() if k != q}
        return SymbolicCtx(self.model, g)

    def var(self, name):
        decl = self.model.variables.get(name)
        if decl is None:
            raise UnsupportedConstraint(f"unknown random variable {name!r}")
        return decl

    def index_domain(self, name):
        return self.var(name).index_domain

    def is_domain(self, name):
        return name in self.model.domains or name in S.BUILTIN_DOMAINS

    def bound(self, domain, which):
        if domain in S.BUILTIN_DOMAINS:
            lo, hi = S.BUILTIN_DOMAINS[domain]
            return F.IConst(lo if which == "min" else hi)
        if domain not in self.model.domains:
            raise UnsupportedConstraint(f"unknown domain {domain!r}")
        return F.Bound(domain, which)

    def read_info(self, name):
        """(index domain, lowest value, highest value) of an integer-valued variable."""
        decl = self.var(name)
        if decl.target == "Real":
            raise UnsupportedConstraint(f"real-valued variable {name!r} read in a constraint")
        return decl.index_domain, self.bound(decl.target, "min"), self.bound(decl.target, "max")


# ---------------------------------------------------------------- surface -> formula

def enc_index(ctx, e, rename=None):
    rename = rename or {}
    if isinstance(e, S.Num):
        return F.IConst(e.value)
    if isinstance(e, (S.QVar, S.Name)):
        if e.ident in rename:
            return rename[e.ident]
        if isinstance(e, S.QVar) or e.ident in ctx.gamma:
            return F.IVar(e.ident)
        ctx.read_info(e.ident)
        return F.RRead(e.ident, F.IConst(0))
    if isinstance(e, S.Minus):
        base = enc_index(ctx, e.base, rename)
        if isinstance(base, F.IConst):
            return F.IConst(base.value - e.amount)
        if isinstance(base, F.ISub):
            return F.ISub(base.base, base.amount + e.amount)
        return F.ISub(base, e.amount)
    if isinstance(e, S.Read):
        ctx.read_info(e.var)
        idx = F.IConst(0) if e.index is None else enc_index(ctx, e.index, rename)
        return F.RRead(e.var, idx)
    if isinstance(e, S.DomMin):
        return ctx.bound(e.domain, "min")
    if isinstance(e, S.DomMax):
        return ctx.bound(e.domain, "max")
    raise UnsupportedConstraint(f"not an index expression: {type(e).__name__}")


def enc_constraint(ctx, c, rename=None):
    if isinstance(c, S.BoolLit):
        return F.BConst(c.value)
    if isinstance(c, S.Cmp):
        return _fold_cmp(c.op, enc_index(ctx, c.left, rename), enc_index(ctx, c.right, rename))
    if isinstance(c, S.InDom):
        t = enc_index(ctx, c.expr, rename)
        return F.conj(F.ICmp("<=", ctx.bound(c.domain, "min"), t),
                      F.ICmp("<=", t, ctx.bound(c.domain, "max")))
    if isinstance(c, S.Not):
        return F.neg(enc_constraint(ctx, c.arg, rename))
    if isinstance(c, S.And):
        return F.conj(enc_constraint(ctx, c.left, rename), enc_constraint(ctx, c.right, rename))
    if isinstance(c, S.Or):
        return F.disj(enc_constraint(ctx, c.left, rename), enc_constraint(ctx, c.right, rename))
    raise UnsupportedConstraint(f"not a constraint: {type(c).__name__}")


def _offset(t):
    if isinstance(t, F.IConst):
        return None, t.value
    if isinstance(t, F.ISub):
        return t.base, -t.amount
    return t, 0


_OPS = {"==": lambda a, b: a == b, "!=": lambda a, b: a != b, "<": lambda a, b: a < b,
        "<=": lambda a, b: a <= b, ">": lambda a, b: a > b, ">=": lambda a, b: a >= b}


def _fold_cmp(op, left, right):
    """Fold comparisons between offsets of one read-free base, such as `p - 1 < p`."""
    lb, lo = _offset(left)
    rb, ro = _offset(right)
    if lb == rb and not isinstance(lb, F.RRead):
        return F.BConst(_OPS[op](lo, ro))
    return F.ICmp(op, left, right)


# ---------------------------------------------------------------- membership

def set_vars(sets):
    """Variable names mentioned by a set list, in order."""
    out = []
    for c in sets:
        if isinstance(c, S.Choice):
            names = set_vars(c.then) + set_vars(c.else_)
        else:
            names = [c.var]
        for n in names:
            if n not in out:
                out.append(n)
    return out


def components(sets, var):
    """Components of a set list that may contain indices of `var`."""
    return [c for c in sets if var in set_vars((c,))]


def binder_hint(sets, var):
    for c in sets:
        if isinstance(c, S.Comp) and c.var == var:
            return c.binder
        if isinstance(c, S.Choice):
            h = binder_hint(c.then + c.else_, var)
            if h:
                return h
    return None


def surface_membership(ctx, sets, var, n):
    """Surface constraint over quantifier `n` true iff var[n] belongs to `sets`.

    For a scalar variable the constraint does not mention `n`.
    """
    dom = ctx.index_domain(var)
    parts = [_member(ctx, c, var, n, dom) for c in sets]
    parts = [p for p in parts if p != S.FALSE]
    if not parts:
        return S.FALSE
    out = parts[0]
    for p in parts[1:]:
        out = S.Or(out, p)
    return out


def _member(ctx, c, var, n, dom):
    if isinstance(c, S.Choice):
        t = surface_membership(ctx, c.then, var, n) if var in set_vars(c.then) else S.FALSE
        e = surface_membership(ctx, c.else_, var, n) if var in set_vars(c.else_) else S.FALSE
        return _or(_and(c.cond, t), _and(S.Not(c.cond), e))
    if c.var != var:
        return S.FALSE
    if isinstance(c, S.Whole):
        return S.TRUE
    if isinstance(c, S.Indexed):
        if dom is None:
            return S.TRUE
        return S.Cmp("==", S.QVar(n), c.index)
    if isinstance(c, S.Comp):
        cond = subst_qvar(c.cond, c.binder, S.QVar(n))
        if c.domain != dom:
            cond = _and(S.InDom(S.QVar(n), c.domain), cond)
        return cond
    raise UnsupportedConstraint(f"not a variable set: {type(c).__name__}")


def _and(a, b):
    if a == S.FALSE or b == S.FALSE:
        return S.FALSE
    if a == S.TRUE:
        return b
    if b == S.TRUE:
        return a
    return S.And(a, b)


def _or(a, b):
    if a == S.TRUE or b == S.TRUE:
        return S.TRUE
    if a == S.FALSE:
        return b
    if b == S.FALSE:
        return a
    return S.Or(a, b)


def subst_qvar(node, name, repl):
    """Substitute quantifier `name` in a surface constraint/index (no capture handling)."""
    def fn(n):
        if isinstance(n, (S.QVar, S.Name)) and n.ident == name:
            return repl
        return n
    if isinstance(node, S.Comp) and node.binder == name:
        return node
    return S.transform(node, fn)


def fresh_name(base, taken):
    if base not in taken:
        return base
    k = 1
    while f"{base}{k}" in taken:
        k += 1
    return f"{base}{k}"


def surface_names(*nodes):
    """All identifiers used as quantifiers or binders in surface nodes."""
    out = set()
    for node in nodes:
        items = node if isinstance(node, tuple) else (node,)
        for it in items:
            for n in S.walk(it):
                if isinstance(n, (S.QVar, S.Name)):
                    out.add(n.ident)
                elif isinstance(n, S.Comp):
                    out.add(n.binder)
    return out


def membership(ctx, sets, var, n):
    """Formula form of surface_membership."""
    return enc_constraint(ctx, surface_membership(ctx, sets, var, n))


# ---------------------------------------------------------------- obligations

def make_obligation(ctx, goal, under=F.TT, fresh=None, free=None, label="", extra=()):
    """Assemble an Obligation, adding the context side conditions.

    `fresh` maps fresh index variables to their index domains; `free` maps
    variables that are deliberately unconstrained (None) or re-ranged.
    """
    fresh = dict(fresh or {})
    free = dict(free or {})
    forms = [goal, under, *extra]
    names = []
    for f in forms:
        for v in F.free_ivars(f):
            if v not in names:
                names.append(v)
    ivars = []
    for v in names:
        if v in fresh:
            ivars.append((v, fresh[v]))
        elif v in free:
            ivars.append((v, free[v]))
        elif v in ctx.gamma:
            ivars.append((v, ctx.gamma[v]))
        else:
            raise UnsupportedConstraint(f"unbound quantifier {v!r}")
    reads, domains = [], []
    for f in forms:
        for r in F.reads_of(f):
            if r.var not in [x[0] for x in reads]:
                dom, lo, hi = ctx.read_info(r.var)
                reads.append((r.var, dom, lo, hi))
    for v, d in ivars:
        if d is not None and d not in domains and d not in S.BUILTIN_DOMAINS:
            domains.append(d)
    for f in forms:
        for d in F.domains_of(f):
            if d not in domains:
                domains.append(d)
    for _, dom, lo, hi in reads:
        for d in [dom] + [t.domain for t in (lo, hi) if isinstance(t, F.Bound)]:
            if d is not None and d not in domains:
                domains.append(d)
    bound_of = {d for _, d in ivars if d is not None}
    bgroup = []
    for d in domains:
        bgroup.append(F.ICmp(">=", F.Bound(d, "min"), F.IConst(0)))
        bgroup.append(F.ICmp(">=", F.Bound(d, "max"), F.IConst(0)))
    for d in domains:
        if d not in bound_of:
            bgroup.append(F.ICmp("<=", F.Bound(d, "min"), F.Bound(d, "max")))
    groups = []
    if bgroup:
        groups.append(F.FAnd(tuple(bgroup)) if len(bgroup) > 1 else bgroup[0])
    qparts = [_in_range(ctx, F.IVar(v), d) for v, d in ivars
              if d is not None and v not in fresh]
    if qparts:
        groups.append(F.conj(*qparts))
    implied = set()
    for p in qparts:
        implied.update(p.args if isinstance(p, F.FAnd) else (p,))
    under_parts = under.args if isinstance(under, F.FAnd) else (under,)
    under = F.conj(*[u for u in under_parts if u not in implied])
    if under != F.TT:
        groups.append(under)
    for e in extra:
        if e != F.TT:
            groups.append(e)
    for v, d in ivars:
        if v in fresh and d is not None:
            groups.append(_in_range(ctx, F.IVar(v), d))
    return F.Obligation(tuple(groups), goal, tuple(ivars), label, tuple(reads))


def _in_range(ctx, term, domain):
    return F.conj(F.ICmp("<=", ctx.bound(domain, "min"), term),
                  F.ICmp("<=", term, ctx.bound(domain, "max")))
