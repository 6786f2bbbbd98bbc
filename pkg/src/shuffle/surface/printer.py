"""Pretty-printer producing source text that parses back to an equal tree."""

from __future__ import annotations

from functools import singledispatch

from . import syntax as S


def pretty_print(node):
    """Render any AST node (or list of definitions) as source text."""
    if isinstance(node, (list, tuple)) and node and isinstance(node[0], (S.Definition, S.MacroDef)):
        return ";\n\n".join(_pp(d) for d in node) + "\n"
    if isinstance(node, tuple):
        return varsets(node)
    return _pp(node)


@singledispatch
def _pp(node):
    raise TypeError(f"cannot print {type(node).__name__}")


# ---------------------------------------------------------------- index and params

@_pp.register
def _(n: S.Num):
    return str(n.value)


@_pp.register(S.Name)
@_pp.register(S.QVar)
@_pp.register(S.MacroParam)
def _(n):
    return n.ident


@_pp.register
def _(n: S.Minus):
    if n.amount < 0:
        return f"{_pp(n.base)} + {-n.amount}"
    return f"{_pp(n.base)} - {n.amount}"


@_pp.register
def _(n: S.Read):
    return n.var if n.index is None else f"{n.var}[{_pp(n.index)}]"


@_pp.register
def _(n: S.DomMin):
    return f"min({n.domain})"


@_pp.register
def _(n: S.DomMax):
    return f"max({n.domain})"


@_pp.register
def _(n: S.Real):
    return repr(float(n.value))


@_pp.register
def _(n: S.ListLit):
    return "[" + ", ".join(_pp(x) for x in n.items) + "]"


_PARAM_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


@_pp.register
def _(n: S.ParamBin):
    prec = _PARAM_PREC[n.op]
    left = _pp(n.left)
    if isinstance(n.left, S.ParamBin) and _PARAM_PREC[n.left.op] < prec:
        left = f"({left})"
    right = _pp(n.right)
    if isinstance(n.right, S.ParamBin) and _PARAM_PREC[n.right.op] <= prec:
        right = f"({right})"
    return f"{left} {n.op} {right}"


# ---------------------------------------------------------------- constraints

@_pp.register
def _(n: S.BoolLit):
    return "true" if n.value else "false"


@_pp.register
def _(n: S.Cmp):
    return f"{_pp(n.left)} {n.op} {_pp(n.right)}"


@_pp.register
def _(n: S.InDom):
    return f"{_pp(n.expr)} in {n.domain}"


@_pp.register
def _(n: S.Not):
    inner = _pp(n.arg)
    if isinstance(n.arg, (S.And, S.Or)):
        inner = f"({inner})"
    return "!" + inner


@_pp.register
def _(n: S.And):
    left, right = _pp(n.left), _pp(n.right)
    if isinstance(n.left, S.Or):
        left = f"({left})"
    if isinstance(n.right, (S.Or, S.And)):
        right = f"({right})"
    return f"{left} && {right}"


@_pp.register
def _(n: S.Or):
    right = _pp(n.right)
    if isinstance(n.right, S.Or):
        right = f"({right})"
    return f"{_pp(n.left)} || {right}"


# ---------------------------------------------------------------- variable sets

def varsets(sets):
    return ", ".join(_pp(v) for v in sets)


@_pp.register
def _(n: S.Whole):
    return n.var


@_pp.register
def _(n: S.Indexed):
    return f"{n.var}[{_pp(n.index)}]"


@_pp.register
def _(n: S.Comp):
    return f"{n.var}{{{n.binder} in {n.domain}: {_pp(n.cond)}}}"


@_pp.register
def _(n: S.Choice):
    return f"({_pp(n.cond)} ? {varsets(n.then)} : {varsets(n.else_)})"


@_pp.register
def _(n: S.DistTypeExpr):
    inner = varsets(n.targets)
    cond = list(map(_pp, n.conditioned))
    if n.constraint != S.TRUE:
        cond.append(_pp(n.constraint))
    if cond:
        inner = f"{inner} | {', '.join(cond)}" if inner else f"| {', '.join(cond)}"
    return f"{n.kind}({inner})"


# ---------------------------------------------------------------- terms

_TIGHT = (S.Invoke, S.Prim, S.One, S.Return, S.UnitEst, S.MacroParam, S.Seq,
          S.Lift, S.ELift, S.If)


def _operand(t):
    """Render t where a unary-level term is required."""
    s = _pp(t)
    if isinstance(t, _TIGHT):
        return s
    if isinstance(t, S.Ind) and isinstance(t.body, _TIGHT + (S.Ind,)):
        return s
    return f"({s})"


def _seq_items(t):
    items = []
    while isinstance(t, S.Seq):
        items.append(t.second)
        t = t.first
    items.append(t)
    return list(reversed(items))


def _block(t):
    if isinstance(t, S.Seq):
        return "{ " + "; ".join(_pp(x) for x in _seq_items(t)) + " }"
    return "{ " + _pp(t) + " }"


@_pp.register
def _(n: S.Invoke):
    return f"{n.name}({', '.join(_pp(a) for a in n.args)})"


@_pp.register
def _(n: S.Prim):
    return f"{n.name}({', '.join(_pp(a) for a in n.args)})"


def _binop(n, op):
    left = _pp(n.left)
    if not isinstance(n.left, (S.Mul, S.Div)):
        left = _operand(n.left)
    return f"{left} {op} {_operand(n.right)}"


@_pp.register
def _(n: S.Mul):
    return _binop(n, "*")


@_pp.register
def _(n: S.Div):
    return _binop(n, "/")


@_pp.register
def _(n: S.Integrate):
    return f"int {_pp(n.body)} by {varsets(n.over)}"


@_pp.register
def _(n: S.If):
    return f"if ({_pp(n.cond)}) {_block(n.then)} else {_block(n.else_)}"


@_pp.register
def _(n: S.One):
    return "1.0"


@_pp.register
def _(n: S.Ind):
    return f"(ind {varsets(n.extra)}) {_operand(n.body)}"


@_pp.register
def _(n: S.Sample):
    target = n.var if n.index is None else f"{n.var}[{_pp(n.index)}]"
    return f"{target} := sample {_pp(n.density)}"


@_pp.register
def _(n: S.Return):
    return "return"


@_pp.register
def _(n: S.Seq):
    return _block(n)


@_pp.register
def _(n: S.Fix):
    k = n.kernel
    if isinstance(k, S.Invoke) and not k.args:
        return f"fix {k.name}"
    return f"fix {_operand(k)}"


@_pp.register
def _(n: S.Lift):
    return "lift " + _block(n.body)


@_pp.register
def _(n: S.ELift):
    return "elift " + _block(n.body)


@_pp.register
def _(n: S.Factor):
    return f"factor {_pp(n.estimator)} by {_pp(n.density)}"


@_pp.register
def _(n: S.UnitEst):
    return "(return, 1.0)" if n.return_first else "(1.0, return)"


# ---------------------------------------------------------------- declarations

@_pp.register
def _(n: S.Definition):
    mod = "" if n.modifier == "plain" else n.modifier + " "
    qs = ", ".join(f"{q} in {d}" for q, d in n.quantifiers)
    return f"def {mod}{n.name}({qs}) : {_pp(n.type)} =\n    {_pp(n.body)}"


@_pp.register
def _(n: S.MacroDef):
    return f"def macro {n.name}({', '.join(n.params)}) = {_pp(n.body)}"


@_pp.register
def _(n: S.DomainDecl):
    return f"domain {n.name}"


@_pp.register
def _(n: S.VarDecl):
    idx = f"[{n.index_domain}]" if n.index_domain else ""
    return f"variable {n.target}{idx} {n.name}"


@_pp.register
def _(n: S.Model):
    if not n.items:
        return "model { }\n"
    body = ";\n".join("  " + _pp(i).replace("\n", "\n  ") for i in n.items)
    return "model {\n" + body + "\n}\n"
