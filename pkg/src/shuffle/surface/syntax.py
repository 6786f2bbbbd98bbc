"""Abstract syntax shared by the model and inference languages.

All nodes are frozen dataclasses.  Source positions are carried in a `pos`
field that is excluded from equality, so structurally identical trees compare
equal regardless of where they came from.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, is_dataclass, replace
from typing import Optional, Tuple, Union

Pos = Optional[Tuple[int, int]]


def _pos():
    return field(default=None, compare=False, repr=False)


# ---------------------------------------------------------------- index terms

@dataclass(frozen=True)
class Num:
    value: int
    pos: Pos = _pos()


@dataclass(frozen=True)
class Name:
    """An identifier not yet resolved to a quantifier or a scalar variable."""
    ident: str
    pos: Pos = _pos()


@dataclass(frozen=True)
class QVar:
    ident: str
    pos: Pos = _pos()


@dataclass(frozen=True)
class Minus:
    """`base - n`; the grammar form q - n, generalised to any base."""
    base: "IndexExpr"
    amount: int
    pos: Pos = _pos()


@dataclass(frozen=True)
class Read:
    """Value of random variable `var` at `index` (None for scalar variables)."""
    var: str
    index: Optional["IndexExpr"]
    pos: Pos = _pos()


@dataclass(frozen=True)
class DomMin:
    domain: str
    pos: Pos = _pos()


@dataclass(frozen=True)
class DomMax:
    domain: str
    pos: Pos = _pos()


IndexExpr = Union[Num, Name, QVar, Minus, Read, DomMin, DomMax]


# ---------------------------------------------------------------- constraints

@dataclass(frozen=True)
class BoolLit:
    value: bool
    pos: Pos = _pos()


@dataclass(frozen=True)
class Cmp:
    op: str  # one of == != < <= > >=
    left: IndexExpr
    right: IndexExpr
    pos: Pos = _pos()


@dataclass(frozen=True)
class InDom:
    """Sugar for min(domain) <= expr && expr <= max(domain)."""
    expr: IndexExpr
    domain: str
    pos: Pos = _pos()


@dataclass(frozen=True)
class Not:
    arg: "Constraint"
    pos: Pos = _pos()


@dataclass(frozen=True)
class And:
    left: "Constraint"
    right: "Constraint"
    pos: Pos = _pos()


@dataclass(frozen=True)
class Or:
    left: "Constraint"
    right: "Constraint"
    pos: Pos = _pos()


Constraint = Union[BoolLit, Cmp, InDom, Not, And, Or]

TRUE = BoolLit(True)
FALSE = BoolLit(False)


# ---------------------------------------------------------------- variable sets

@dataclass(frozen=True)
class Whole:
    """Bare variable name: every index of the variable."""
    var: str
    pos: Pos = _pos()


@dataclass(frozen=True)
class Indexed:
    var: str
    index: IndexExpr
    pos: Pos = _pos()


@dataclass(frozen=True)
class Comp:
    var: str
    binder: str
    domain: str
    cond: Constraint
    pos: Pos = _pos()


@dataclass(frozen=True)
class Choice:
    cond: Constraint
    then: Tuple["VarSet", ...]
    else_: Tuple["VarSet", ...]
    pos: Pos = _pos()


VarSet = Union[Whole, Indexed, Comp, Choice]
VarSets = Tuple[VarSet, ...]


# ---------------------------------------------------------------- types

KINDS = ("density", "sampler", "kernel", "estimator")


@dataclass(frozen=True)
class DistTypeExpr:
    kind: str
    targets: VarSets
    conditioned: VarSets
    constraint: Constraint = TRUE
    pos: Pos = _pos()


# ---------------------------------------------------------------- parameters of primitives

@dataclass(frozen=True)
class Real:
    value: float
    pos: Pos = _pos()


@dataclass(frozen=True)
class ParamBin:
    op: str  # + - * /
    left: "ParamExpr"
    right: "ParamExpr"
    pos: Pos = _pos()


@dataclass(frozen=True)
class ListLit:
    items: Tuple["ParamExpr", ...]
    pos: Pos = _pos()


ParamExpr = Union[Real, Num, Name, QVar, Read, DomMin, DomMax, Minus, ParamBin, ListLit]


# ---------------------------------------------------------------- terms

@dataclass(frozen=True)
class Invoke:
    name: str
    args: Tuple[IndexExpr, ...]
    pos: Pos = _pos()


@dataclass(frozen=True)
class Mul:
    left: "Term"
    right: "Term"
    pos: Pos = _pos()


@dataclass(frozen=True)
class Div:
    left: "Term"
    right: "Term"
    pos: Pos = _pos()


@dataclass(frozen=True)
class Integrate:
    body: "Term"
    over: VarSets
    pos: Pos = _pos()


@dataclass(frozen=True)
class If:
    cond: Constraint
    then: "Term"
    else_: "Term"
    pos: Pos = _pos()


@dataclass(frozen=True)
class One:
    """The unit density 1.0."""
    pos: Pos = _pos()


@dataclass(frozen=True)
class Ind:
    """Independence coercion `(ind C) body`."""
    extra: VarSets
    body: "Term"
    pos: Pos = _pos()


@dataclass(frozen=True)
class Prim:
    """Primitive density (flip, normal, uniform, categorical, dirichlet)."""
    name: str
    args: Tuple[ParamExpr, ...]
    pos: Pos = _pos()


@dataclass(frozen=True)
class Sample:
    var: str
    index: Optional[IndexExpr]
    density: "Term"
    pos: Pos = _pos()


@dataclass(frozen=True)
class Return:
    pos: Pos = _pos()


@dataclass(frozen=True)
class Seq:
    first: "Term"
    second: "Term"
    pos: Pos = _pos()


@dataclass(frozen=True)
class Fix:
    kernel: "Term"
    pos: Pos = _pos()


@dataclass(frozen=True)
class Lift:
    body: "Term"
    pos: Pos = _pos()


@dataclass(frozen=True)
class ELift:
    body: "Term"
    pos: Pos = _pos()


@dataclass(frozen=True)
class Factor:
    estimator: "Term"
    density: "Term"
    pos: Pos = _pos()


@dataclass(frozen=True)
class UnitEst:
    """The unit estimator; `return_first` records the (return,1.0) spelling."""
    return_first: bool = False
    pos: Pos = _pos()


@dataclass(frozen=True)
class MacroParam:
    ident: str
    pos: Pos = _pos()


Term = Union[Invoke, Mul, Div, Integrate, If, One, Ind, Prim, Sample, Return,
             Seq, Fix, Lift, ELift, Factor, UnitEst, MacroParam]


# ---------------------------------------------------------------- declarations

@dataclass(frozen=True)
class Definition:
    modifier: str  # "plain", "rec" or "independent"
    name: str
    quantifiers: Tuple[Tuple[str, str], ...]
    type: DistTypeExpr
    body: Term
    pos: Pos = _pos()


@dataclass(frozen=True)
class MacroDef:
    name: str
    params: Tuple[str, ...]
    kinds: Tuple[str, ...]  # "varset" or "term" per parameter
    body: Term
    pos: Pos = _pos()


@dataclass(frozen=True)
class DomainDecl:
    name: str
    pos: Pos = _pos()


@dataclass(frozen=True)
class VarDecl:
    name: str
    index_domain: Optional[str]
    target: str  # a domain name, "Bool" or "Real"
    pos: Pos = _pos()


BUILTIN_DOMAINS = {"Bool": (0, 1)}


@dataclass(frozen=True)
class Model:
    items: Tuple[Union[DomainDecl, VarDecl, Definition], ...] = ()
    pos: Pos = _pos()

    @property
    def domains(self):
        return {d.name: d for d in self.items if isinstance(d, DomainDecl)}

    @property
    def variables(self):
        return {v.name: v for v in self.items if isinstance(v, VarDecl)}

    @property
    def densities(self):
        return [d for d in self.items if isinstance(d, Definition)]

    def density(self, name):
        for d in self.densities:
            if d.name == name:
                return d
        return None


def is_real(model, var):
    return model.variables[var].target == "Real"


# ---------------------------------------------------------------- generic traversal

def children(node):
    """Yield the direct AST children of `node` (flattening tuples)."""
    for f in fields(node):
        if f.name == "pos":
            continue
        yield from _flatten(getattr(node, f.name))


def _flatten(value):
    if isinstance(value, tuple):
        for v in value:
            yield from _flatten(v)
    elif is_dataclass(value):
        yield value


def walk(node):
    """Pre-order iteration over `node` and all descendants."""
    stack = [node]
    while stack:
        n = stack.pop()
        yield n
        stack.extend(reversed(list(children(n))))


def transform(node, fn):
    """Rebuild `node` bottom-up, replacing each subtree t by fn(t).

    `fn` may return a tuple when the node sits inside a tuple field; the
    tuple is spliced into the parent (used for macro varset parameters).
    """
    if isinstance(node, tuple):
        out = []
        for item in node:
            r = transform(item, fn)
            if isinstance(r, tuple) and not isinstance(item, tuple):
                out.extend(r)
            else:
                out.append(r)
        return tuple(out)
    if not is_dataclass(node):
        return node
    changes = {}
    for f in fields(node):
        if f.name == "pos":
            continue
        old = getattr(node, f.name)
        new = transform(old, fn) if isinstance(old, tuple) or is_dataclass(old) else old
        if new is not old:
            changes[f.name] = new
    if changes:
        node = replace(node, **changes)
    return fn(node)
