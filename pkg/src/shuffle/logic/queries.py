"""The decision procedures used by the type checker."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Any, Optional, Tuple

from ..surface import syntax as S
from . import enumerative
from . import formula as F
from . import smt
from .encode import (SymbolicCtx, binder_hint, components, enc_constraint, fresh_name,
                     make_obligation, membership, set_vars, surface_names)

ERROR_FREE = "error-free"
STRATIFIED = "stratified"
COMPUTABLE_CONSTRAINT = "computable-constraint"
COMPUTABLE_TARGETS = "computable-targets"


@dataclass
class Verdict:
    """Outcome of a query.

    kind is Valid, ValidUpToBound, CounterExample or Violation (the last
    only for ValidInfer, naming the failed condition).
    """
    kind: str
    witness: Optional[dict] = None
    condition: Optional[str] = None
    obligation: Optional[F.Obligation] = None
    detail: str = ""

    @property
    def valid(self):
        return self.kind in ("Valid", "ValidUpToBound")

    def __bool__(self):
        return self.valid


@dataclass(frozen=True)
class LogicQuery:
    """A query in one of the five forms, with its context."""
    kind: str  # Implication, SetEquiv, SetDisjoint, ValidInfer, BaseCase
    ctx: SymbolicCtx
    args: Tuple[Any, ...]
    under: Any = field(default=S.TRUE)


# ---------------------------------------------------------------- solvers

class EnumerativeSolver:
    name = "enumerative"

    def __init__(self, cap=6, ceiling=5_000_000):
        if cap < 1:
            raise ValueError("cap must be at least 1")
        self.cap = cap
        self.ceiling = ceiling

    def check(self, ob):
        ok, witness = enumerative.solve(ob, self.cap, self.ceiling)
        if ok:
            return Verdict("ValidUpToBound", obligation=ob)
        return Verdict("CounterExample", witness=witness, obligation=ob)


class ExternalSolver:
    name = "external"

    def __init__(self, path=None, timeout=30.0):
        self.path = path
        self.timeout = timeout

    def check(self, ob):
        ok, witness = smt.run_prover([ob], self.path, self.timeout, comment=ob.render())
        if ok:
            return Verdict("Valid", obligation=ob)
        return Verdict("CounterExample", witness=witness, obligation=ob)


class RecordingSolver:
    """Wraps a solver and keeps every obligation it is asked about."""

    def __init__(self, inner):
        self.inner = inner
        self.name = inner.name
        self.log = []

    def check(self, ob):
        v = self.inner.check(ob)
        self.log.append((ob, v))
        return v


class CachingSolver:
    """Memoizes verdicts by obligation (obligations are hashable values)."""

    def __init__(self, inner):
        self.inner = inner
        self.name = inner.name
        self.cache = {}

    def check(self, ob):
        if ob not in self.cache:
            self.cache[ob] = self.inner.check(ob)
        return self.cache[ob]


def default_solver():
    return EnumerativeSolver(6)


def _run(obligations, solver):
    solver = solver or default_solver()
    last = None
    for ob in obligations:
        v = solver.check(ob)
        if not v.valid:
            return v
        last = v
    return last or Verdict("Valid")


# ---------------------------------------------------------------- obligation builders

def _fresh_for(ctx, sets_list, var, extra_names=()):
    taken = set(ctx.gamma) | set(extra_names)
    for s in sets_list:
        taken |= surface_names(s)
    hint = None
    for s in sets_list:
        hint = hint or binder_hint(s, var)
    if hint and hint not in ctx.gamma and hint not in extra_names:
        return hint
    return fresh_name(hint or "n", taken)


def _enc_under(ctx, under):
    if under is None:
        return F.TT
    if isinstance(under, (F.BConst, F.ICmp, F.FNot, F.FAnd, F.FOr, F.FImplies, F.FIff,
                          F.FExists, F.FForall, F.NoErr)):
        return under
    return enc_constraint(ctx, under)


def _per_var(ctx, A, B, under, goal_fn, label, names=None):
    obs = []
    u = _enc_under(ctx, under)
    for v in names or set_vars(tuple(A) + tuple(B)):
        dom = ctx.index_domain(v)
        n = _fresh_for(ctx, (A, B), v)
        ma, mb = membership(ctx, A, v, n), membership(ctx, B, v, n)
        goal = goal_fn(ma, mb)
        if goal == F.TT:
            continue
        fresh = {n: dom} if dom is not None else {}
        obs.append(make_obligation(ctx, goal, u, fresh=fresh, label=f"{label} [{v}]"))
    return obs


def equiv_obligations(ctx, A, B, under=S.TRUE, names=None):
    def goal(ma, mb):
        return F.TT if ma == mb else F.FIff(ma, mb)
    return _per_var(ctx, A, B, under, goal, "set equivalence", names)


def disjoint_obligations(ctx, A, B, under=S.TRUE, names=None):
    def goal(ma, mb):
        both = F.conj(ma, mb)
        return F.TT if both == F.FF else F.neg(both)
    return _per_var(ctx, A, B, under, goal, "set disjointness", names)


def subset_obligations(ctx, A, B, under=S.TRUE, names=None):
    def goal(ma, mb):
        return F.TT if ma == mb else F.implies(ma, mb)
    return _per_var(ctx, A, B, under, goal, "set inclusion", names)


def empty_obligations(ctx, A, under=S.TRUE):
    def goal(ma, _):
        return F.neg(ma)
    return _per_var(ctx, A, (), under, goal, "set emptiness")


def implication_obligations(ctx, phi1, phi2, under=S.TRUE):
    f1, f2 = _enc_under(ctx, phi1), _enc_under(ctx, phi2)
    if f1 == f2 or f2 == F.TT:
        return []
    return [make_obligation(ctx, F.implies(f1, f2), _enc_under(ctx, under), label="implication")]


def base_case_obligations(ctx, q, domain, A, under=S.TRUE):
    # q stays bound so the sets encode it as a quantifier; `free` lifts its range.
    inner = ctx.bind(q, domain)
    below = F.ICmp("<", F.IVar(q), F.Bound(domain, "min"))
    obs = []
    u = _enc_under(inner, under)
    for v in set_vars(tuple(A)):
        dom = inner.index_domain(v)
        n = _fresh_for(inner, (A,), v, extra_names=(q,))
        goal = F.neg(membership(inner, A, v, n))
        if goal == F.TT:
            continue
        fresh = {n: dom} if dom is not None else {}
        obs.append(make_obligation(inner, goal, F.conj(below, u), fresh=fresh,
                                   free={q: None}, label=f"base case [{v}]"))
    if not obs and not set_vars(tuple(A)):
        return []
    return obs


# ---------------------------------------------------------------- public checks

def check_implication(ctx, phi1, phi2, solver=None, under=S.TRUE):
    return _run(implication_obligations(ctx, phi1, phi2, under), solver)


def check_set_equiv(ctx, A, B, under=S.TRUE, solver=None):
    return _run(equiv_obligations(ctx, tuple(A), tuple(B), under), solver)


def check_set_disjoint(ctx, A, B, under=S.TRUE, solver=None):
    return _run(disjoint_obligations(ctx, tuple(A), tuple(B), under), solver)


def check_subset(ctx, A, B, under=S.TRUE, solver=None):
    return _run(subset_obligations(ctx, tuple(A), tuple(B), under), solver)


def check_empty(ctx, A, under=S.TRUE, solver=None):
    return _run(empty_obligations(ctx, tuple(A), under), solver)


def check_base_case(ctx, q, domain, A, solver=None, under=S.TRUE):
    return _run(base_case_obligations(ctx, q, domain, tuple(A), under), solver)


# ---------------------------------------------------------------- ValidInfer

def guarded_reads(f, guard=F.TT, out=None):
    """Reads in evaluation order, each paired with the condition under which it is evaluated."""
    if out is None:
        out = []
    if isinstance(f, F.ICmp):
        for t in (f.left, f.right):
            for r in _term_reads(t):
                out.append((guard, r))
    elif isinstance(f, (F.FNot, F.NoErr)):
        guarded_reads(f.arg, guard, out)
    elif isinstance(f, F.FAnd):
        for k, a in enumerate(f.args):
            guarded_reads(a, F.conj(guard, *f.args[:k]), out)
    elif isinstance(f, F.FOr):
        for k, a in enumerate(f.args):
            guarded_reads(a, F.conj(guard, *[F.neg(x) for x in f.args[:k]]), out)
    elif isinstance(f, F.FImplies):
        guarded_reads(f.left, guard, out)
        guarded_reads(f.right, F.conj(guard, f.left), out)
    elif isinstance(f, F.FIff):
        guarded_reads(f.left, guard, out)
        guarded_reads(f.right, guard, out)
    elif isinstance(f, (F.FExists, F.FForall)):
        body = f.body
        for g, r in guarded_reads(body):
            out.append((F.conj(guard, F.in_range(F.IVar(f.var), f.domain), g), r))
    return out


def _term_reads(t):
    if isinstance(t, F.RRead):
        return _term_reads(t.index) + [t]
    if isinstance(t, F.ISub):
        return _term_reads(t.base)
    return []


def _read_in(ctx, B, read):
    """Formula: the read location belongs to the set list B."""
    dom = ctx.index_domain(read.var)
    n = "__idx"
    m = membership(ctx, B, read.var, n)
    return F.subst_ivar(m, n, read.index) if dom is not None else m


def _safe(g):
    return g if g == F.TT else F.conj(F.NoErr(g), g)


def _membership_obligations(ctx, sets, u, goal_fn, label, require_error_free=False):
    obs = []
    for v in set_vars(tuple(sets)):
        dom = ctx.index_domain(v)
        n = _fresh_for(ctx, (sets,), v)
        fresh = {n: dom} if dom is not None else {}
        for c in components(tuple(sets), v):
            m = membership(ctx, (c,), v, n)
            for goal in goal_fn(v, c, m):
                if goal != F.TT:
                    obs.append(make_obligation(ctx, goal, u, fresh=fresh, label=f"{label} [{v}]"))
    return obs


def valid_infer_obligations(ctx, A, B, phi):
    """Obligations grouped by condition name, in checking order."""
    A, B = tuple(A), tuple(B)
    f_phi = _enc_under(ctx, phi)
    out = []
    # error-free: phi, then each component of B and A, then union overlap
    ef = []
    if F.reads_of(f_phi):
        ef.append(make_obligation(ctx, F.NoErr(f_phi), label="error-free [constraint]"))
    for sets in (B, A):
        ef += _membership_obligations(
            ctx, sets, f_phi,
            lambda v, c, m: [F.NoErr(m)] if F.reads_of(m) else [], "error-free")
        for v in set_vars(sets):
            comps = components(sets, v)
            if len(comps) < 2:
                continue
            dom = ctx.index_domain(v)
            n = _fresh_for(ctx, (sets,), v)
            fresh = {n: dom} if dom is not None else {}
            for c1, c2 in itertools.combinations(comps, 2):
                both = F.conj(membership(ctx, (c1,), v, n), membership(ctx, (c2,), v, n))
                goal = F.neg(both)
                if goal != F.TT:
                    ef.append(make_obligation(ctx, goal, f_phi, fresh=fresh,
                                              label=f"error-free [disjoint union of {v}]"))
    out.append((ERROR_FREE, ef))
    # stratified: reads inside B's membership must themselves be in B
    st = _membership_obligations(
        ctx, B, f_phi,
        lambda v, c, m: [F.implies(_safe(g), _read_in(ctx, B, r)) for g, r in guarded_reads(m)],
        "stratified")
    out.append((STRATIFIED, st))
    # computable constraint: reads in phi must be in B
    cc = [make_obligation(ctx, F.implies(_safe(g), _read_in(ctx, B, r)),
                          label="computable constraint")
          for g, r in guarded_reads(f_phi)]
    out.append((COMPUTABLE_CONSTRAINT, cc))
    # computable targets: reads in A's membership must be in B
    ct = _membership_obligations(
        ctx, A, f_phi,
        lambda v, c, m: [F.implies(_safe(g), _read_in(ctx, B, r)) for g, r in guarded_reads(m)],
        "computable targets")
    out.append((COMPUTABLE_TARGETS, ct))
    return out


def stratification_order(ctx, B):
    """A total order of B's variable names in which every membership read
    precedes the variable it guards, or None when none exists."""
    B = tuple(B)
    names = set_vars(B)
    deps = {v: set() for v in names}
    for v in names:
        n = "__n"
        for r in F.reads_of(membership(ctx, B, v, n)):
            deps[v].add(r.var)
    if len(names) <= 7:
        for perm in itertools.permutations(names):
            pos = {v: k for k, v in enumerate(perm)}
            if all(d in pos and pos[d] < pos[v] for v in names for d in deps[v]):
                return list(perm)
        return None
    # Kahn's algorithm is exact for the same question on larger name sets
    order, remaining = [], {v: set(deps[v]) for v in names}
    while remaining:
        ready = [v for v in names if v in remaining and not (remaining[v] - set(order))]
        ready = [v for v in ready if v not in remaining[v]]
        if not ready:
            return None
        order.append(ready[0])
        del remaining[ready[0]]
    return order


def check_valid_infer(ctx, A, B, phi=S.TRUE, solver=None):
    solver = solver or default_solver()
    last = None
    for cond, obs in valid_infer_obligations(ctx, A, B, phi):
        for ob in obs:
            v = solver.check(ob)
            if not v.valid:
                return Verdict("Violation", v.witness, cond, ob, ob.label)
            last = v
        if cond == STRATIFIED and stratification_order(ctx, B) is None:
            return Verdict("Violation", None, STRATIFIED, None,
                           "no total order of the conditioned variables")
    return last or Verdict("Valid")


# ---------------------------------------------------------------- query objects

def obligations(query):
    k, ctx, a = query.kind, query.ctx, query.args
    if k == "Implication":
        return implication_obligations(ctx, a[0], a[1], query.under)
    if k == "SetEquiv":
        return equiv_obligations(ctx, tuple(a[0]), tuple(a[1]), query.under)
    if k == "SetDisjoint":
        return disjoint_obligations(ctx, tuple(a[0]), tuple(a[1]), query.under)
    if k == "Subset":
        return subset_obligations(ctx, tuple(a[0]), tuple(a[1]), query.under)
    if k == "ValidInfer":
        return [ob for _, obs in valid_infer_obligations(ctx, a[0], a[1], a[2]) for ob in obs]
    if k == "BaseCase":
        return base_case_obligations(ctx, a[0], a[1], tuple(a[2]), query.under)
    raise ValueError(f"unknown query kind {k!r}")


def emit_smtlib(query_or_obligations):
    """SMT-LIB 2 script, satisfiable iff the query is not valid."""
    if isinstance(query_or_obligations, LogicQuery):
        obs = obligations(query_or_obligations)
        title = f"{query_or_obligations.kind} query"
    elif isinstance(query_or_obligations, F.Obligation):
        obs = [query_or_obligations]
        title = query_or_obligations.label
    else:
        obs = list(query_or_obligations)
        title = "query"
    if not obs:
        obs = [F.Obligation((), F.TT, (), "trivially valid")]
    comment = title + "\n" + "\n".join(ob.render() for ob in obs)
    return smt.script_for(obs, comment)


def solve_enumerative(query, bound_cap=6, ceiling=5_000_000):
    solver = EnumerativeSolver(bound_cap, ceiling)
    if query.kind == "ValidInfer":
        a = query.args
        return check_valid_infer(query.ctx, a[0], a[1], a[2], solver)
    return _run(obligations(query), solver)


def solve_external(query, path=None, timeout=30.0):
    solver = ExternalSolver(path, timeout)
    if query.kind == "ValidInfer":
        a = query.args
        return check_valid_infer(query.ctx, a[0], a[1], a[2], solver)
    return _run(obligations(query), solver)
