"""Name resolution: bare identifiers become quantifier variables or scalar reads."""

from __future__ import annotations

from dataclasses import fields, is_dataclass, replace

from . import syntax as S


def resolve_index(node, scope):
    """Resolve Name nodes below `node` given the set of bound quantifier names."""
    if isinstance(node, tuple):
        return tuple(resolve_index(x, scope) for x in node)
    if isinstance(node, S.Name):
        if node.ident in scope:
            return S.QVar(node.ident, pos=node.pos)
        return S.Read(node.ident, None, pos=node.pos)
    if isinstance(node, S.Comp):
        return replace(node, cond=resolve_index(node.cond, scope | {node.binder}))
    if not is_dataclass(node):
        return node
    changes = {}
    for f in fields(node):
        if f.name == "pos":
            continue
        old = getattr(node, f.name)
        if isinstance(old, tuple) or is_dataclass(old):
            new = resolve_index(old, scope)
            if new != old or type(new) is not type(old):
                changes[f.name] = new
    return replace(node, **changes) if changes else node


def resolve_definition(defn):
    if isinstance(defn, S.MacroDef):
        return defn
    scope = frozenset(q for q, _ in defn.quantifiers)
    return replace(defn, type=resolve_index(defn.type, scope),
                   body=resolve_index(defn.body, scope))


def resolve_model(model):
    items = tuple(resolve_definition(i) if isinstance(i, S.Definition) else i
                  for i in model.items)
    return replace(model, items=items)


def resolve_program(defs):
    return [resolve_definition(d) for d in defs]
