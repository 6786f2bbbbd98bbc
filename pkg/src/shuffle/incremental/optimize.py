"""Reduction detection, hoisting and incremental update of nested loops.

A site is an outer loop over i containing (at any depth) an inner loop over j
whose body accumulates into scalars reset just before it:

    acc = 0; for j in lo..hi: if (g1 && g2 && ...) acc += e(j)

Guard conjuncts are classified as inner-only (mention j but nothing that
varies with the outer loop), a key link `K_out == K_in(j)`, the exclusion
`j != i`, or a prefix bound `j < i`; the inner range may also end at i - 1.
The transform keeps one accumulator (an array partitioned by the key when
there is a key link) outside the outer loop and updates it per iteration.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import List, Optional, Tuple

from ..errors import NotInvertible
from ..simplify import ir as I


@dataclass(frozen=True)
class ReductionSite:
    outer_var: str
    inner_var: str
    accumulators: Tuple[str, ...]
    guard: Tuple  # conjuncts of the inner guard
    keys: Optional[Tuple]  # (outer key expr, inner key expr) or None
    deltas: Tuple  # accumulated expressions, one per accumulator
    outer_path: Tuple[int, ...]  # statement path to the outer loop
    inner_path: Tuple[int, ...]  # path to the inner loop, relative to the outer loop body


# ---------------------------------------------------------------- helpers

def _conjuncts(c):
    if isinstance(c, I.Bin) and c.op == "and":
        return _conjuncts(c.left) + _conjuncts(c.right)
    return [c]


def _conj(cs):
    out = None
    for c in cs:
        out = c if out is None else I.Bin("and", out, c)
    return out


def _get(body, path):
    node = None
    for k in path:
        node = body[k]
        body = _children(node)
    return node


def _children(s):
    if isinstance(s, I.For):
        return s.body
    if isinstance(s, I.If):
        return s.then + s.else_
    return ()


def _splice(body, path, count, new):
    """body with `count` statements starting at path replaced by the list `new`."""
    k = path[0]
    if len(path) == 1:
        return body[:k] + tuple(new) + body[k + count:]
    s = body[k]
    if isinstance(s, I.For):
        s = replace(s, body=_splice(s.body, path[1:], count, new))
    else:
        n = len(s.then)
        if path[1] < n:
            s = replace(s, then=_splice(s.then, path[1:], count, new))
        else:
            s = replace(s, else_=_splice(s.else_, (path[1] - n,) + path[2:], count, new))
    return body[:k] + (s,) + body[k + 1:]


def _set(body, path, new):
    return _splice(body, path, 1, new)


def _walk_paths(body, prefix=()):
    for k, s in enumerate(body):
        yield prefix + (k,), s
        yield from _walk_paths(_children(s), prefix + (k,))


def _mentions(node, names):
    return bool(I.reads(node) & set(names))


def _reduction(inner):
    """(guard conjuncts, [(acc, delta)]) for an inner loop body of the reduction shape."""
    body = inner.body
    guard = []
    while len(body) == 1 and isinstance(body[0], I.If) and not body[0].else_:
        guard += _conjuncts(body[0].cond)
        body = body[0].then
    if not body or not all(isinstance(s, I.Accum) and s.index is None for s in body):
        return None
    accs = [(s.target, s.expr, s.op) for s in body]
    if len({a for a, _, _ in accs}) != len(accs):
        return None
    return guard, accs


def _is_reset(s, acc, op):
    return isinstance(s, I.Assign) and s.name == acc and \
        isinstance(s.expr, (I.Const, I.PConst)) and s.expr.value == I.IDENTITY.get(op, None)


# ---------------------------------------------------------------- detection

def detect(prog) -> List[ReductionSite]:
    """Every (outer loop, inner reduction loop) pair, outermost outer loop first."""
    sites = []
    for opath, outer in _walk_paths(prog.body):
        if not isinstance(outer, I.For):
            continue
        for ipath, inner in _walk_paths(outer.body):
            if not isinstance(inner, I.For):
                continue
            red = _reduction(inner)
            if red is None:
                continue
            guard, accs = red
            parent = outer.body if len(ipath) == 1 else _children(_get(outer.body, ipath[:-1]))
            k = ipath[-1]
            resets = parent[max(0, k - len(accs)):k]
            if not all(any(_is_reset(s, a, op) for s in resets) for a, _, op in accs):
                continue
            keys = None
            for c in guard:
                key = _key_link(c, inner.var)
                if key is not None:
                    keys = key
                    break
            sites.append(ReductionSite(outer.var, inner.var, tuple(a for a, _, _ in accs),
                                       tuple(guard), keys, tuple(d for _, d, _ in accs),
                                       opath, ipath))
    return sites


def _key_link(c, j):
    if not (isinstance(c, I.Bin) and c.op == "=="):
        return None
    a, b = c.left, c.right
    if _mentions(b, [j]) and not _mentions(a, [j]):
        a, b = b, a
    if _mentions(a, [j]) and not _mentions(b, [j]) and isinstance(a, I.Load):
        return (b, a)
    return None


# ---------------------------------------------------------------- transformation

def transform(prog, site):
    """Rewrite one site; raises NotInvertible when it cannot be updated incrementally."""
    outer = _get(prog.body, site.outer_path)
    inner = _get(outer.body, site.inner_path)
    i, j = outer.var, inner.var
    guard, accs = _reduction(inner)
    ops = {a: op for a, _, op in accs}
    if any(op not in ("+", "padd") or ops[a] != ops[accs[0][0]] for a, _, op in accs):
        raise NotInvertible("only sums can be updated incrementally")
    op = accs[0][2]
    if op == "padd":
        raise NotInvertible("linear-space probability sums are rebuilt, not updated")

    # variables that change inside the outer loop (other than through array stores)
    varying = {n.var for n in I.walk(outer.body) if isinstance(n, I.For)} | {i}
    varying |= {n.name for n in I.walk(outer.body) if isinstance(n, (I.Assign, I.Alloc))}
    stored = {}
    for n in I.walk(outer.body):
        if isinstance(n, (I.Store, I.SampleCat)):
            stored.setdefault(n.array, []).append(n.index)
        elif isinstance(n, I.Accum) and n.index is not None:
            stored.setdefault(n.target, []).append(n.index)
    varying -= {j}

    keys = None
    exclusion = prefix = False
    inner_only = []
    for c in guard:
        key = _key_link(c, j)
        if key is not None and keys is None and not _mentions(key[1], varying):
            keys = key
        elif c in (I.Bin("!=", I.Var(j), I.Var(i)), I.Bin("!=", I.Var(i), I.Var(j))):
            exclusion = True
        elif c in (I.Bin("<", I.Var(j), I.Var(i)), I.Bin(">", I.Var(i), I.Var(j))):
            prefix = True
        elif _mentions(c, varying):
            raise NotInvertible(f"guard {I.show_expr(c)} depends on the outer loop")
        else:
            inner_only.append(c)
    by_range = inner.hi == I.Bin("-", I.Var(i), I.Const(1))
    if by_range:
        prefix = True
    elif _mentions((inner.lo, inner.hi), varying):
        raise NotInvertible("inner range depends on the outer loop")
    if exclusion and prefix:
        raise NotInvertible("exclusion and prefix bound together")
    if (exclusion or prefix) and not (inner.lo == outer.lo and
                                      (by_range or inner.hi == outer.hi)):
        raise NotInvertible("inner and outer ranges differ")
    deltas = [d for _, d, _ in accs]
    if _mentions(tuple(deltas), varying) or (keys and _mentions(keys[1], varying)):
        raise NotInvertible("accumulated value depends on the outer loop")

    # arrays read by the reduction may only be written at index i (the outer variable)
    read_arrays = {n.array for n in I.walk(tuple(inner_only) + tuple(deltas) +
                                             ((keys[1],) if keys else ())) if isinstance(n, I.Load)}
    for a in read_arrays:
        for idx in stored.get(a, []):
            if not (exclusion or prefix) or idx != I.Var(i):
                raise NotInvertible(f"{a} is written inside the outer loop")
    if not (exclusion or prefix) and read_arrays & set(stored):
        raise NotInvertible("reduction inputs change inside the outer loop")

    names = I.writes(prog) | {n.name for n in I.walk(prog) if isinstance(n, I.Var)}
    fresh_k = [0]

    def fresh(base):
        while True:
            fresh_k[0] += 1
            name = f"{base}_inc{fresh_k[0]}"
            if name not in names:
                names.add(name)
                return name

    state = {a: fresh(f"{a}_acc") for a, _, _ in accs}
    if keys is not None:
        rng = prog.value_range(keys[1].array)
        if rng is None:
            raise NotInvertible(f"values of {keys[1].array} have no declared range")
        klo, khi = rng
        size = I.Bin("+", I.Bin("-", khi, klo), I.Const(1))
        kin_pos = I.Bin("-", keys[1], klo)

    def add(at, sign):
        """Statements adding (sign +1) or removing (-1) element `at` from the state."""
        sub = I.Var(at) if isinstance(at, str) else at
        stmts = []
        for a, d, _ in accs:
            dv = I.subst_var(d, j, sub)
            idx = I.subst_var(kin_pos, j, sub) if keys is not None else None
            stmts.append(I.Accum(state[a], "+" if sign > 0 else "-", dv, idx))
        cond = _conj([I.subst_var(c, j, sub) for c in inner_only])
        return [I.If(cond, tuple(stmts))] if cond is not None else stmts

    def read(a):
        if keys is None:
            return I.Var(state[a])
        kout = keys[0]
        pos = I.Bin("-", kout, klo)
        ok = I.Bin("and", I.Bin("<=", klo, kout), I.Bin("<=", kout, khi))
        return I.Select(ok, I.Load(state[a], pos), I.Const(0.0))

    def init():
        stmts = []
        for a, _, _ in accs:
            if keys is None:
                stmts.append(I.Assign(state[a], I.Const(0.0)))
            else:
                stmts.append(I.Alloc(state[a], size, I.Const(0.0)))
        return stmts

    # the resets and the inner loop become reads of the maintained state
    reads_ = [I.Assign(a, read(a)) for a, _, _ in accs]
    first_reset = site.inner_path[:-1] + (site.inner_path[-1] - len(accs),)
    new_outer_body = _splice(outer.body, first_reset, len(accs) + 1, reads_)

    pre = init()
    if exclusion:
        # one full pass for the first outer iteration, skipping it
        first = outer.lo
        body_j = add(j, +1)
        cond = I.Bin("!=", I.Var(j), first)
        pre.append(I.For(j, inner.lo, inner.hi, (I.If(cond, tuple(body_j)),)))
        peeled = [I.Assign(i, first)] + list(new_outer_body)
        prev = I.Bin("-", I.Var(i), I.Const(1))
        updates = add(prev, +1) + add(I.Var(i), -1)
        loop = I.For(i, I.Bin("+", first, I.Const(1)), outer.hi,
                     tuple(updates) + tuple(new_outer_body))
        replacement = pre + [I.If(I.Bin("<=", first, outer.hi), tuple(peeled + [loop]))]
    elif prefix:
        prev = I.Bin("-", I.Var(i), I.Const(1))
        updates = [I.If(I.Bin(">", I.Var(i), outer.lo), tuple(add(prev, +1)))]
        loop = I.For(i, outer.lo, outer.hi, tuple(updates) + tuple(new_outer_body))
        replacement = pre + [loop]
    else:
        pre.append(I.For(j, inner.lo, inner.hi, tuple(add(j, +1))))
        replacement = pre + [replace(outer, body=new_outer_body)]
    return replace(prog, body=_set(prog.body, site.outer_path, replacement))


def optimize(prog, max_rounds=None):
    """Apply detect + transform greedily, outermost site first, until nothing applies."""
    skipped = set()
    rounds = 0
    while True:
        sites = [s for s in detect(prog) if _site_key(prog, s) not in skipped]
        if not sites:
            return prog
        site = sites[0]
        try:
            prog = transform(prog, site)
        except NotInvertible:
            skipped.add(_site_key(prog, site))
        rounds += 1
        if max_rounds is not None and rounds >= max_rounds:
            return prog


def _site_key(prog, site):
    outer = _get(prog.body, site.outer_path)
    return (outer, _get(outer.body, site.inner_path))
