"""IR-to-IR passes: log-space conversion and conjugate closed forms."""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from . import ir as I

_LP = {"flip_pdf": "flip_lp", "normal_pdf": "normal_lp", "categorical_pdf": "categorical_lp",
       "uniform_pdf": "uniform_lp", "dirichlet_pdf": "dirichlet_lp"}


def _to_log(n):
    if isinstance(n, I.PConst):
        return I.Const(float(np.log(n.value)) if n.value > 0 else -np.inf)
    if isinstance(n, I.Bin) and n.op == "pmul":
        return I.Bin("+", n.left, n.right)
    if isinstance(n, I.Bin) and n.op == "pdiv":
        return I.Bin("ldiv", n.left, n.right)
    if isinstance(n, I.Call) and n.fn in _LP:
        return I.Call(_LP[n.fn], n.args)
    if isinstance(n, I.Accum) and n.op == "padd":
        return replace(n, op="logsumexp")
    if isinstance(n, I.Accum) and n.op == "pmul":
        return replace(n, op="+")
    if isinstance(n, I.SampleCat) and not n.log:
        return replace(n, log=True)
    return n


def to_logspace(prog):
    """Carry every probability as its logarithm: products add, sums use log-sum-exp."""
    if prog.space == "log":
        return prog
    return replace(I.map_expr(prog, _to_log), space="log")


# ---------------------------------------------------------------- conjugacy

def _addends(e):
    if isinstance(e, I.Bin) and e.op == "+":
        return _addends(e.left) + _addends(e.right)
    return [e]


def _sum(terms):
    out = None
    for t in terms:
        out = t if out is None else I.Bin("+", out, t)
    return out if out is not None else I.Const(0.0)


def _is_scalar(e, var):
    return isinstance(e, I.Load) and e.array == var and e.index == I.Const(0)


def _mentions(node, var):
    return var in I.reads(node)


class _Names:
    def __init__(self, prog):
        self.taken = {n.name for n in I.walk(prog) if isinstance(n, I.Var)} | I.writes(prog)
        self.k = 0

    def __call__(self, base):
        while True:
            self.k += 1
            name = f"{base}_c{self.k}"
            if name not in self.taken:
                self.taken.add(name)
                return name


def _accum_site(stmt, acc):
    """(path to the Accum of acc inside a loop nest, the Accum) or None."""
    if isinstance(stmt, I.Accum) and stmt.target == acc and stmt.index is None and \
            stmt.op == "+":
        return stmt
    if isinstance(stmt, I.For):
        found = [x for x in (_accum_site(s, acc) for s in stmt.body) if x is not None]
        if len(found) == 1:
            return found[0]
    return None


def _replace_stmt(stmt, old, new):
    """stmt with statement `old` replaced by the statement list `new`."""
    if isinstance(stmt, I.For):
        body = []
        for s in stmt.body:
            if s is old:
                body += new
            else:
                body.append(_replace_stmt(s, old, new))
        return replace(stmt, body=tuple(body))
    return stmt


def _analyse(body, expr, var):
    """Split an integrand into (prior calls, likelihood sites, other addends, kept body).

    A likelihood site is (call, loop statement or None, accumulator statement).
    """
    factors, rest = [], []
    loops = {}
    for k, s in enumerate(body):
        if isinstance(s, I.For):
            for acc in I.writes(s):
                loops.setdefault(acc, []).append(k)
    used = set()
    for a in _addends(expr):
        if isinstance(a, I.Call) and _mentions(a, var):
            factors.append((a, None, None))
        elif isinstance(a, I.Var) and a.name in loops and len(loops[a.name]) == 1 and \
                _mentions(body[loops[a.name][0]], var):
            k = loops[a.name][0]
            site = _accum_site(body[k], a.name)
            init = [s for s in body[:k] if isinstance(s, I.Assign) and s.name == a.name]
            if site is None or not isinstance(site.expr, I.Call) or k in used or \
                    init != [I.Assign(a.name, I.Const(0.0))]:
                return None
            used.add(k)
            factors.append((site.expr, k, site))
        elif _mentions(a, var):
            return None
        else:
            rest.append(a)
    for k, s in enumerate(body):
        if k not in used and _mentions(s, var):
            return None
    return factors, rest, used


def _normal(prog, var, body, expr, fresh):
    got = _analyse(body, expr, var)
    if got is None:
        return None
    factors, rest, _ = got
    prior, liks = None, []
    for call, k, site in factors:
        if call.fn != "normal_lp":
            return None
        x, m, s = call.args
        if _is_scalar(x, var) and not _mentions((m, s), var):
            if prior is not None or k is not None:
                return None
            prior = call
        elif _is_scalar(m, var) and not _mentions((x, s), var):
            liks.append((call, k, site))
        else:
            return None
    if prior is None:
        return None
    P, Sx, Q, L, n = (fresh(b) for b in ("prec", "wsum", "wsq", "logsd", "count"))
    out = [I.Assign(name, I.Const(0.0)) for name in (P, Sx, Q, L, n)]

    def stats(call):
        y, _, s = call.args
        sd, yv = fresh("sd"), fresh("y")
        w = I.Bin("/", I.Const(1.0), I.Bin("*", I.Var(sd), I.Var(sd)))
        return [I.Assign(sd, s), I.Assign(yv, y),
                I.Accum(P, "+", w),
                I.Accum(Sx, "+", I.Bin("*", I.Var(yv), w)),
                I.Accum(Q, "+", I.Bin("*", I.Bin("*", I.Var(yv), I.Var(yv)), w)),
                I.Accum(L, "+", I.Call("log", (I.Var(sd),))),
                I.Accum(n, "+", I.Const(1.0))]
    by_loop = {k: (call, site) for call, k, site in liks if k is not None}
    for k, s in enumerate(body):
        if k in by_loop:
            call, site = by_loop[k]
            out.append(_replace_stmt(s, site, stats(call)))
        elif not (isinstance(s, I.Assign) and any(s.name == site.target
                                                  for _, site in by_loop.values())):
            out.append(s)
    for call, k, _ in liks:
        if k is None:
            out += stats(call)
    mu0, sd0 = prior.args[1], prior.args[2]
    return out, rest, (mu0, sd0, P, Sx, Q, L, n)


def _dirichlet(prog, var, body, expr, fresh, size):
    got = _analyse(body, expr, var)
    if got is None:
        return None
    factors, rest, _ = got
    prior, liks = None, []
    for call, k, site in factors:
        if call.fn == "dirichlet_lp" and call.args[0] == I.Var(var) and \
                not _mentions(call.args[1], var) and k is None and prior is None:
            prior = call
        elif call.fn == "categorical_lp" and call.args[1] == I.Var(var) and \
                not _mentions((call.args[0], call.args[2]), var):
            liks.append((call, k, site))
        else:
            return None
    if prior is None:
        return None
    C = fresh("counts")
    out = [I.Alloc(C, size, I.Const(0.0))]

    def stats(call):
        z, _, lo = call.args
        return [I.Accum(C, "+", I.Const(1.0), I.Bin("-", z, lo))]
    by_loop = {k: (call, site) for call, k, site in liks if k is not None}
    for k, s in enumerate(body):
        if k in by_loop:
            call, site = by_loop[k]
            out.append(_replace_stmt(s, site, stats(call)))
        elif not (isinstance(s, I.Assign) and any(s.name == site.target
                                                  for _, site in by_loop.values())):
            out.append(s)
    for call, k, _ in liks:
        if k is None:
            out += stats(call)
    return out, rest, (prior.args[1], C)


def conjugate_rewrite(prog):
    """Replace real integrals and real samples by closed forms where a conjugate pair matches.

    Sufficient statistics (weighted count, sum, sum of squares; category counts)
    are computed by explicit loops.  Unmatched nodes are left in place.
    """
    prog = to_logspace(prog)
    fresh = _Names(prog)
    sizes = dict(prog.shapes)

    def rewrite_list(stmts):
        out = []
        for s in stmts:
            out += rewrite(s)
        return tuple(out)

    def rewrite(s):
        if isinstance(s, I.For):
            return [replace(s, body=rewrite_list(s.body))]
        if isinstance(s, I.If):
            return [replace(s, then=rewrite_list(s.then), else_=rewrite_list(s.else_))]
        if isinstance(s, I.RealIntegral):
            body = list(rewrite_list(s.body))
            got = _normal(prog, s.var, body, s.expr, fresh)
            if got is not None:
                out, rest, args = got
                args = tuple(I.Var(a) if isinstance(a, str) else a for a in args)
                return out + [I.Assign(s.result,
                                       _sum(rest + [I.Call("normal_marginal", args)]))]
            size = sizes.get(s.var)
            if size is not None:
                got = _dirichlet(prog, s.var, body, s.expr, fresh, size)
                if got is not None:
                    out, rest, (alpha, C) = got
                    return out + [I.Assign(s.result, _sum(
                        rest + [I.Call("dirichlet_marginal", (alpha, I.Var(C)))]))]
            return [replace(s, body=tuple(body))]
        if isinstance(s, I.RealSample):
            body = list(rewrite_list(s.body))
            expr = s.expr
            while isinstance(expr, I.Bin) and expr.op == "ldiv" and \
                    not _mentions(expr.right, s.var):
                expr = expr.left  # a normalizing constant does not change the draw
            s = replace(s, expr=expr)
            got = _normal(prog, s.var, body, s.expr, fresh)
            if got is not None:
                out, _, (mu0, sd0, P, Sx, Q, L, n) = got
                mean = I.Call("normal_post_mean", (mu0, sd0, I.Var(P), I.Var(Sx)))
                sd = I.Call("normal_post_sd", (sd0, I.Var(P)))
                return out + [I.Store(s.var, I.Const(0),
                                      I.Call("sample_normal", (mean, sd, I.Load("U", s.u)))),
                              I.Accum("ucount", "+", I.Const(1))]
            size = sizes.get(s.var)
            if size is not None:
                got = _dirichlet(prog, s.var, body, s.expr, fresh, size)
                if got is not None:
                    out, _, (alpha, C) = got
                    dummy = fresh("drawn")
                    return out + [I.Assign(dummy, I.Call("dirichlet_draw", (
                        I.Var(s.var), alpha, I.Var(C), I.Var("U"), s.u))),
                        I.Accum("ucount", "+", size)]
            return [replace(s, body=tuple(body))]
        return [s]

    return replace(prog, body=rewrite_list(prog.body))
