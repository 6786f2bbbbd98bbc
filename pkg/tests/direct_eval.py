"""Direct evaluation of surface constraints and variable sets at a witness.

A witness is {"bounds": {domain: (lo, hi)}, "quantifiers": {name: value},
"reads": {(var, index): value}}.  Shares no code with the logic encoding.
"""

from shuffle.surface import syntax as S


def index_value(e, w, model):
    if isinstance(e, S.Num):
        return e.value
    if isinstance(e, (S.Name, S.QVar)):
        if e.ident in w["quantifiers"]:
            return w["quantifiers"][e.ident]
        return w["reads"].get((e.ident, 0), 0)
    if isinstance(e, S.Minus):
        return index_value(e.base, w, model) - e.amount
    if isinstance(e, S.Read):
        return w["reads"].get((e.var, index_value(e.index, w, model)), 0)
    if isinstance(e, (S.DomMin, S.DomMax)):
        lo, hi = S.BUILTIN_DOMAINS.get(e.domain) or w["bounds"][e.domain]
        return lo if isinstance(e, S.DomMin) else hi
    raise AssertionError(e)


def holds(c, w, model):
    if isinstance(c, S.BoolLit):
        return c.value
    if isinstance(c, S.Cmp):
        a, b = index_value(c.left, w, model), index_value(c.right, w, model)
        return {"==": a == b, "!=": a != b, "<": a < b, "<=": a <= b, ">": a > b,
                ">=": a >= b}[c.op]
    if isinstance(c, S.InDom):
        lo, hi = S.BUILTIN_DOMAINS.get(c.domain) or w["bounds"][c.domain]
        return lo <= index_value(c.expr, w, model) <= hi
    if isinstance(c, S.Not):
        return not holds(c.arg, w, model)
    if isinstance(c, S.And):
        return holds(c.left, w, model) and holds(c.right, w, model)
    if isinstance(c, S.Or):
        return holds(c.left, w, model) or holds(c.right, w, model)
    raise AssertionError(c)


def member(sets, var, n, w, model):
    dom = model.variables[var].index_domain
    count = 0
    for s in sets:
        if isinstance(s, S.Choice):
            count += member(s.then if holds(s.cond, w, model) else s.else_, var, n, w, model)
            continue
        if s.var != var:
            continue
        if dom is not None:
            # a witness that leaves the bounds free holds for any of them
            lo, hi = w["bounds"].get(dom, (0, 0))
            if not lo <= n <= hi:
                continue
        if isinstance(s, S.Whole):
            count += 1
        elif isinstance(s, S.Indexed):
            count += n == index_value(s.index, w, model)
        else:
            inner = dict(w, quantifiers=dict(w["quantifiers"], **{s.binder: n}))
            count += holds(s.cond, inner, model)
    return count
