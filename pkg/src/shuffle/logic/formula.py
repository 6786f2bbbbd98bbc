"""Integer/boolean formula IR shared by the enumerative and SMT back ends.

Evaluation is three-valued: a formula is true, false, or an error (a read of
a random variable outside its index domain).  Conjunction and disjunction
short-circuit from the left, so `i in D && x[i] == 1` never errs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple, Union


# ---------------------------------------------------------------- integer terms

@dataclass(frozen=True)
class IConst:
    value: int


@dataclass(frozen=True)
class IVar:
    name: str


@dataclass(frozen=True)
class Bound:
    domain: str
    which: str  # "min" or "max"


@dataclass(frozen=True)
class RRead:
    var: str
    index: "ITerm"


@dataclass(frozen=True)
class ISub:
    base: "ITerm"
    amount: int


ITerm = Union[IConst, IVar, Bound, RRead, ISub]


# ---------------------------------------------------------------- formulas

@dataclass(frozen=True)
class BConst:
    value: bool


@dataclass(frozen=True)
class ICmp:
    op: str  # == != < <= > >=
    left: ITerm
    right: ITerm


@dataclass(frozen=True)
class FNot:
    arg: "Formula"


@dataclass(frozen=True)
class FAnd:
    args: Tuple["Formula", ...]


@dataclass(frozen=True)
class FOr:
    args: Tuple["Formula", ...]


@dataclass(frozen=True)
class FImplies:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class FIff:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class FExists:
    var: str
    domain: str
    body: "Formula"


@dataclass(frozen=True)
class FForall:
    var: str
    domain: str
    body: "Formula"


@dataclass(frozen=True)
class NoErr:
    """True exactly when `arg` evaluates without error."""
    arg: "Formula"


Formula = Union[BConst, ICmp, FNot, FAnd, FOr, FImplies, FIff, FExists, FForall, NoErr]

TT = BConst(True)
FF = BConst(False)


def conj(*args):
    flat = []
    for a in args:
        if isinstance(a, FAnd):
            flat.extend(a.args)
        elif a == TT:
            continue
        else:
            flat.append(a)
    if any(a == FF for a in flat):
        return FF
    if not flat:
        return TT
    return flat[0] if len(flat) == 1 else FAnd(tuple(flat))


def disj(*args):
    flat = []
    for a in args:
        if isinstance(a, FOr):
            flat.extend(a.args)
        elif a == FF:
            continue
        else:
            flat.append(a)
    if any(a == TT for a in flat):
        return TT
    if not flat:
        return FF
    return flat[0] if len(flat) == 1 else FOr(tuple(flat))


def neg(a):
    if isinstance(a, BConst):
        return BConst(not a.value)
    if isinstance(a, FNot):
        return a.arg
    return FNot(a)


def implies(a, b):
    if a == TT:
        return b
    if a == FF or b == TT:
        return TT
    return FImplies(a, b)


def in_range(term, domain):
    return conj(ICmp("<=", Bound(domain, "min"), term), ICmp("<=", term, Bound(domain, "max")))


# ---------------------------------------------------------------- traversal

def iter_nodes(node):
    stack = [node]
    while stack:
        n = stack.pop()
        yield n
        if isinstance(n, (RRead,)):
            stack.append(n.index)
        elif isinstance(n, ISub):
            stack.append(n.base)
        elif isinstance(n, ICmp):
            stack.extend((n.left, n.right))
        elif isinstance(n, (FNot, NoErr)):
            stack.append(n.arg)
        elif isinstance(n, (FAnd, FOr)):
            stack.extend(n.args)
        elif isinstance(n, (FImplies, FIff)):
            stack.extend((n.left, n.right))
        elif isinstance(n, (FExists, FForall)):
            stack.append(n.body)


def free_ivars(node, bound=frozenset()):
    """Names of free integer variables, in first-occurrence order."""
    out = []

    def go(n, bound):
        if isinstance(n, IVar):
            if n.name not in bound and n.name not in out:
                out.append(n.name)
        elif isinstance(n, RRead):
            go(n.index, bound)
        elif isinstance(n, ISub):
            go(n.base, bound)
        elif isinstance(n, ICmp):
            go(n.left, bound)
            go(n.right, bound)
        elif isinstance(n, (FNot, NoErr)):
            go(n.arg, bound)
        elif isinstance(n, (FAnd, FOr)):
            for a in n.args:
                go(a, bound)
        elif isinstance(n, (FImplies, FIff)):
            go(n.left, bound)
            go(n.right, bound)
        elif isinstance(n, (FExists, FForall)):
            go(n.body, bound | {n.var})

    go(node, frozenset(bound))
    return out


def domains_of(node):
    """Domains whose bounds the formula mentions, in first-occurrence order."""
    out = []
    for n in iter_nodes(node):
        d = None
        if isinstance(n, Bound):
            d = n.domain
        elif isinstance(n, (FExists, FForall)):
            d = n.domain
        if d is not None and d not in out:
            out.append(d)
    return out


def reads_of(node):
    return [n for n in iter_nodes(node) if isinstance(n, RRead)]


def has_quantifier(node):
    return any(isinstance(n, (FExists, FForall)) for n in iter_nodes(node))


def subst_ivar(node, name, term):
    """Replace free IVar `name` by `term`."""
    def go(n):
        if isinstance(n, IVar):
            return term if n.name == name else n
        if isinstance(n, RRead):
            return RRead(n.var, go(n.index))
        if isinstance(n, ISub):
            return ISub(go(n.base), n.amount)
        if isinstance(n, ICmp):
            return ICmp(n.op, go(n.left), go(n.right))
        if isinstance(n, FNot):
            return FNot(go(n.arg))
        if isinstance(n, NoErr):
            return NoErr(go(n.arg))
        if isinstance(n, FAnd):
            return FAnd(tuple(go(a) for a in n.args))
        if isinstance(n, FOr):
            return FOr(tuple(go(a) for a in n.args))
        if isinstance(n, FImplies):
            return FImplies(go(n.left), go(n.right))
        if isinstance(n, FIff):
            return FIff(go(n.left), go(n.right))
        if isinstance(n, (FExists, FForall)):
            if n.var == name:
                return n
            return type(n)(n.var, n.domain, go(n.body))
        return n
    return go(node)


# ---------------------------------------------------------------- infix rendering

def render_term(t):
    if isinstance(t, IConst):
        return str(t.value)
    if isinstance(t, IVar):
        return t.name
    if isinstance(t, Bound):
        return f"{t.domain}_{t.which}"
    if isinstance(t, RRead):
        return f"{t.var}[{render_term(t.index)}]"
    if isinstance(t, ISub):
        if t.amount < 0:
            return f"{render_term(t.base)} + {-t.amount}"
        return f"{render_term(t.base)} - {t.amount}"
    raise TypeError(t)


def render(f):
    """Infix rendering used in SMT script comments and diagnostics."""
    if isinstance(f, BConst):
        return "true" if f.value else "false"
    if isinstance(f, ICmp):
        return f"{render_term(f.left)} {f.op} {render_term(f.right)}"
    if isinstance(f, FNot):
        return f"!{_wrap(f.arg)}"
    if isinstance(f, FAnd):
        return " && ".join(_wrap(a, FAnd) for a in f.args)
    if isinstance(f, FOr):
        return " || ".join(_wrap(a, FOr) for a in f.args)
    if isinstance(f, FImplies):
        return f"{_wrap(f.left)} => {_wrap(f.right)}"
    if isinstance(f, FIff):
        return f"{_wrap(f.left)} == {_wrap(f.right)}"
    if isinstance(f, (FExists, FForall)):
        q = "exists" if isinstance(f, FExists) else "forall"
        return f"{q} {f.var} in {f.domain}. {_wrap(f.body)}"
    if isinstance(f, NoErr):
        return f"noerr({render(f.arg)})"
    raise TypeError(f)


def _wrap(f, same=None):
    s = render(f)
    if isinstance(f, (BConst, ICmp, FNot, NoErr)) or (same is not None and isinstance(f, same)):
        return s
    return f"({s})"


def render_negated_goal(goal):
    """Render the negation of a goal the way the query listings read."""
    if isinstance(goal, FIff):
        return f"({render(goal.left)}) != ({render(goal.right)})"
    if isinstance(goal, FImplies):
        return f"({render(goal.left)}) && !({render(goal.right)})"
    return f"!({render(goal)})"


@dataclass(frozen=True)
class Obligation:
    """Valid iff, for every assignment satisfying all `groups`, `goal` is true.

    `ivars` maps each free integer variable to the domain it ranges over, or
    None when it is unconstrained (e.g. the quantifier of a base-case query).
    """
    groups: Tuple[Formula, ...]
    goal: Formula
    ivars: Tuple[Tuple[str, Optional[str]], ...]
    label: str = ""
    # (var, index domain or None, lowest value, highest value) per read variable
    reads: Tuple[Tuple[str, Optional[str], ITerm, ITerm], ...] = ()

    def render(self):
        parts = [f"({render(g)})" for g in self.groups]
        parts.append(render_negated_goal(self.goal))
        return " && ".join(parts)
