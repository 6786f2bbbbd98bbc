"""Capture-avoiding simultaneous substitution of index expressions for quantifiers."""

from __future__ import annotations

from dataclasses import fields, is_dataclass, replace

from . import syntax as S


def free_qvars(node):
    """Quantifier names occurring free in a resolved AST fragment."""
    out = set()

    def go(n, bound):
        if isinstance(n, tuple):
            for x in n:
                go(x, bound)
            return
        if isinstance(n, (S.QVar, S.Name)):
            if n.ident not in bound:
                out.add(n.ident)
            return
        if isinstance(n, S.Comp):
            go(n.cond, bound | {n.binder})
            return
        if not is_dataclass(n):
            return
        for f in fields(n):
            if f.name != "pos":
                go(getattr(n, f.name), bound)

    go(node, frozenset())
    return out


def _fresh(base, taken):
    k = 1
    while f"{base}{k}" in taken:
        k += 1
    return f"{base}{k}"


def substitute(node, mapping):
    """Replace free quantifiers by index expressions, all at once.

    Comprehension binders that would capture a free name of a replacement
    are renamed first.
    """
    if not mapping:
        return node
    danger = set()
    for e in mapping.values():
        danger |= free_qvars(e)
    return _sub(node, dict(mapping), danger)


def _sub(n, mapping, danger):
    if isinstance(n, tuple):
        return tuple(_sub(x, mapping, danger) for x in n)
    if isinstance(n, (S.QVar, S.Name)):
        return mapping.get(n.ident, n)
    if isinstance(n, S.Comp):
        inner = {k: v for k, v in mapping.items() if k != n.binder}
        binder, cond = n.binder, n.cond
        if binder in danger and inner:
            taken = danger | free_qvars(cond) | set(inner)
            new = _fresh(binder, taken)
            cond = _sub(cond, {binder: S.QVar(new)}, {new})
            binder = new
        return replace(n, binder=binder, cond=_sub(cond, inner, danger) if inner else cond)
    if not is_dataclass(n):
        return n
    changes = {}
    for f in fields(n):
        if f.name == "pos":
            continue
        old = getattr(n, f.name)
        if isinstance(old, tuple) or is_dataclass(old):
            changes[f.name] = _sub(old, mapping, danger)
    return replace(n, **changes) if changes else n
