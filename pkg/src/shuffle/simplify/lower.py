"""Syntax-directed lowering of checked definitions into the loop IR."""

from __future__ import annotations

import numpy as np

from ..errors import LoweringError
from ..logic.encode import SymbolicCtx, set_vars, surface_membership
from ..surface import syntax as S
from ..surface.resolve import resolve_definition
from . import ir as I

_PDF = {"flip": "flip_pdf", "normal": "normal_pdf", "categorical": "categorical_pdf",
        "uniform": "uniform_pdf", "dirichlet": "dirichlet_pdf"}


def canonical_rec_factor(defn):
    """The non-recursive factor f of a body f(q) * d(q - 1), or None."""
    q0 = defn.quantifiers[0][0]
    b = defn.body
    if not isinstance(b, S.Mul):
        return None
    for this, other in ((b.right, b.left), (b.left, b.right)):
        if isinstance(this, S.Invoke) and this.name == defn.name and \
                this.args and this.args[0] == S.Minus(S.QVar(q0), 1) and \
                all(a == S.QVar(qn) for a, (qn, _) in zip(this.args[1:], defn.quantifiers[1:])) \
                and not any(isinstance(n, S.Invoke) and n.name == defn.name
                            for n in S.walk(other)):
            return other
    return None


def _sub(a, b):
    return I.Bin("-", a, b)


def _add(a, b):
    return I.Bin("+", a, b)


class Lowerer:
    def __init__(self, model, defs=()):
        self.model = model
        self.defs = {d.name: resolve_definition(d) for d in model.densities}
        for d in defs:
            if isinstance(d, S.Definition):
                self.defs[d.name] = resolve_definition(d)
        self.ctx = SymbolicCtx(model, {})
        self.count = 0
        self.uses_u = False
        self.uses_iters = False
        self.stack = []

    def fresh(self, base):
        self.count += 1
        return f"{base}_{self.count}"

    # ------------------------------------------------------------ indices

    def dom_lo(self, d):
        return I.Const(S.BUILTIN_DOMAINS[d][0]) if d in S.BUILTIN_DOMAINS else I.Var(f"min_{d}")

    def dom_hi(self, d):
        return I.Const(S.BUILTIN_DOMAINS[d][1]) if d in S.BUILTIN_DOMAINS else I.Var(f"max_{d}")

    def var_lo(self, var):
        d = self.model.variables[var].index_domain
        return I.Const(0) if d is None else self.dom_lo(d)

    def var_size(self, var):
        d = self.model.variables[var].index_domain
        if d is None:
            return I.Const(1)
        return _add(_sub(self.dom_hi(d), self.dom_lo(d)), I.Const(1))

    def target_lo(self, var):
        t = self.model.variables[var].target
        return I.Const(0.0) if t == "Real" else self.dom_lo(t)

    def target_hi(self, var):
        return self.dom_hi(self.model.variables[var].target)

    def offset(self, var, idx):
        """Array position of var[idx]."""
        if self.model.variables[var].index_domain is None:
            return I.Const(0)
        lo = self.var_lo(var)
        if isinstance(idx, I.Const) and isinstance(lo, I.Const):
            return I.Const(idx.value - lo.value)
        return _sub(idx, lo)

    def index(self, e, q):
        if isinstance(e, S.Num):
            return I.Const(e.value)
        if isinstance(e, S.QVar):
            return q[e.ident]
        if isinstance(e, S.Name):
            return q[e.ident] if e.ident in q else I.Load(e.ident, I.Const(0))
        if isinstance(e, S.Read):
            idx = I.Const(0) if e.index is None else self.index(e.index, q)
            return I.Load(e.var, self.offset(e.var, idx))
        if isinstance(e, S.Minus):
            return _sub(self.index(e.base, q), I.Const(e.amount))
        if isinstance(e, S.DomMin):
            return self.dom_lo(e.domain)
        if isinstance(e, S.DomMax):
            return self.dom_hi(e.domain)
        raise LoweringError("Syntax", f"not an index expression: {type(e).__name__}")

    def cond(self, c, q):
        if isinstance(c, S.BoolLit):
            return I.Const(1 if c.value else 0)
        if isinstance(c, S.Cmp):
            return I.Bin(c.op, self.index(c.left, q), self.index(c.right, q))
        if isinstance(c, S.InDom):
            v = self.index(c.expr, q)
            return I.Bin("and", I.Bin("<=", self.dom_lo(c.domain), v),
                         I.Bin("<=", v, self.dom_hi(c.domain)))
        if isinstance(c, S.Not):
            return I.Bin("==", self.cond(c.arg, q), I.Const(0))
        if isinstance(c, S.And):
            return I.Bin("and", self.cond(c.left, q), self.cond(c.right, q))
        if isinstance(c, S.Or):
            return I.Bin("or", self.cond(c.left, q), self.cond(c.right, q))
        raise LoweringError("Syntax", f"not a constraint: {type(c).__name__}")

    def param(self, p, q, out):
        if isinstance(p, S.Real):
            return I.Const(float(p.value))
        if isinstance(p, S.ListLit):
            name = self.fresh("list")
            out.append(I.Alloc(name, I.Const(len(p.items))))
            for k, item in enumerate(p.items):
                out.append(I.Store(name, I.Const(k), self.param(item, q, out)))
            return I.Var(name)
        if isinstance(p, S.ParamBin):
            return I.Bin(p.op, self.param(p.left, q, out), self.param(p.right, q, out))
        if isinstance(p, S.Read) and p.index is None and \
                self.model.variables[p.var].index_domain is not None:
            return I.Var(p.var)
        return self.index(p, q)

    # ------------------------------------------------------------ densities (linear space)

    def density(self, t, q):
        """(statements, probability expression)."""
        out = []
        e = self._dens(t, q, out)
        return out, e

    def _dens(self, t, q, out):
        if isinstance(t, S.One):
            return I.PConst(1.0)
        if isinstance(t, S.Ind):
            return self._dens(t.body, q, out)
        if isinstance(t, S.Mul):
            return I.Bin("pmul", self._dens(t.left, q, out), self._dens(t.right, q, out))
        if isinstance(t, S.Div):
            return I.Bin("pdiv", self._dens(t.left, q, out), self._dens(t.right, q, out))
        if isinstance(t, S.If):
            tmp = self.fresh("t")
            a, ea = self.density(t.then, q)
            b, eb = self.density(t.else_, q)
            out.append(I.If(self.cond(t.cond, q), tuple(a + [I.Assign(tmp, ea)]),
                            tuple(b + [I.Assign(tmp, eb)])))
            return I.Var(tmp)
        if isinstance(t, S.Prim):
            return self._prim(t, q, out)
        if isinstance(t, S.Invoke):
            return self._invoke_density(t, q, out)
        if isinstance(t, S.Integrate):
            return self._integrate(t, q, out)
        raise LoweringError("Syntax", f"{type(t).__name__} is not a density")

    def _prim(self, t, q, out):
        if t.name not in _PDF:
            raise LoweringError("UnknownPrimitive", t.name)
        args = [self.param(a, q, out) for a in t.args]
        target = t.args[0]
        if t.name == "categorical":
            lo = self.target_lo(target.var) if isinstance(target, S.Read) else I.Const(0)
            args = [args[0], args[1], lo]
        if t.name == "uniform":
            discrete = isinstance(target, S.Read) and \
                self.model.variables[target.var].target != "Real"
            args = args + [I.Const(1 if discrete else 0)]
        return I.Call(_PDF[t.name], tuple(args))

    def _bind(self, d, args, q, out):
        qq = {}
        for (qn, _), a in zip(d.quantifiers, args):
            name = self.fresh(qn)
            out.append(I.Assign(name, self.index(a, q)))
            qq[qn] = I.Var(name)
        return qq

    def _invoke_density(self, t, q, out):
        d = self.defs.get(t.name)
        if d is None:
            raise LoweringError("Syntax", f"unknown definition {t.name}")
        qq = self._bind(d, t.args, q, out)
        if d.modifier != "rec":
            if t.name in self.stack:
                raise LoweringError("Recursion", f"{t.name} is recursive")
            self.stack.append(t.name)
            try:
                return self._dens(d.body, qq, out)
            finally:
                self.stack.pop()
        factor = canonical_rec_factor(d)
        if factor is None:
            raise LoweringError("Recursion", f"{t.name} does not recurse on q - 1")
        q0, dom = d.quantifiers[0]
        acc = self.fresh("prod")
        k = self.fresh(q0)
        inner = dict(qq)
        inner[q0] = I.Var(k)
        self.stack.append(t.name)
        try:
            body, e = self.density(factor, inner)
        finally:
            self.stack.pop()
        out.append(I.Assign(acc, I.PConst(1.0)))
        out.append(I.For(k, self.dom_lo(dom), I.Bin("min", qq[q0], self.dom_hi(dom)),
                         tuple(body + [I.Accum(acc, "pmul", e)])))
        return I.Var(acc)

    def _integrate(self, t, q, out):
        names = set_vars(t.over)
        real = [v for v in names if self.model.variables[v].target == "Real"]
        if real:
            if len(real) != 1 or len(names) != 1:
                raise LoweringError("IntractableIntegral", "mixed real and discrete integral")
            res = self.fresh("int")
            body, e = self.density(t.body, q)
            out.append(I.RealIntegral(res, real[0], tuple(body), e))
            return I.Var(res)
        acc = self.fresh("sum")
        if len(t.over) == 1 and isinstance(t.over[0], S.Whole) and \
                self.model.variables[names[0]].index_domain is None:
            var = names[0]
            save, c = self.fresh("save"), self.fresh(var)
            body, e = self.density(t.body, q)
            out += [I.Assign(save, I.Load(var, I.Const(0))), I.Assign(acc, I.PConst(0.0)),
                    I.For(c, self.target_lo(var), self.target_hi(var),
                          tuple([I.Store(var, I.Const(0), I.Var(c))] + body +
                                [I.Accum(acc, "padd", e)])),
                    I.Store(var, I.Const(0), I.Var(save))]
            return I.Var(acc)
        return self._integrate_general(t, names, q, out, acc)

    def _integrate_general(self, t, names, q, out, acc):
        """Mixed-radix enumeration of every assignment to the member locations."""
        total = self.fresh("states")
        per = []
        for var in names:
            lst, m, save = self.fresh(f"{var}_locs"), self.fresh(f"{var}_n"), \
                self.fresh(f"{var}_save")
            n = self.fresh("n")
            qq = dict(q)
            qq["__n"] = _add(I.Var(n), self.var_lo(var))
            member = self.cond(surface_membership(self.ctx, t.over, var, "__n"), qq)
            size = self.var_size(var)
            out += [I.Alloc(lst, size), I.Assign(m, I.Const(0)), I.Alloc(save, size),
                    I.For(n, I.Const(0), _sub(size, I.Const(1)),
                          (I.Store(save, I.Var(n), I.Load(var, I.Var(n))),
                           I.If(member, (I.Store(lst, I.Var(m), I.Var(n)),
                                         I.Accum(m, "+", I.Const(1))))))]
            per.append((var, lst, m, save, size))
        out.append(I.Assign(total, I.Const(1)))
        for var, lst, m, _, _ in per:
            k = self.fresh("k")
            width = _add(_sub(self.target_hi(var), self.target_lo(var)), I.Const(1))
            out.append(I.For(k, I.Const(1), I.Var(m), (I.Accum(total, "*", width),)))
        c, r = self.fresh("c"), self.fresh("r")
        decode = [I.Assign(r, I.Var(c))]
        for var, lst, m, _, _ in per:
            k = self.fresh("k")
            width = _add(_sub(self.target_hi(var), self.target_lo(var)), I.Const(1))
            decode.append(I.For(k, I.Const(0), _sub(I.Var(m), I.Const(1)), (
                I.Store(var, I.Load(lst, I.Var(k)),
                        _add(self.target_lo(var), I.Bin("%", I.Var(r), width))),
                I.Assign(r, I.Bin("//", I.Var(r), width)))))
        body, e = self.density(t.body, q)
        out += [I.Assign(acc, I.PConst(0.0)),
                I.For(c, I.Const(0), _sub(I.Var(total), I.Const(1)),
                      tuple(decode + body + [I.Accum(acc, "padd", e)]))]
        for var, _, _, save, size in per:
            n = self.fresh("n")
            out.append(I.For(n, I.Const(0), _sub(size, I.Const(1)),
                             (I.Store(var, I.Var(n), I.Load(save, I.Var(n))),)))
        return I.Var(acc)

    # ------------------------------------------------------------ samplers and estimators

    def draw(self):
        self.uses_u = True
        return I.Load("U", I.Var("ucount"))

    def sampler(self, t, q):
        out = []
        self._samp(t, q, out)
        return out

    def _samp(self, t, q, out):
        if isinstance(t, S.Return):
            return
        if isinstance(t, S.Seq):
            self._samp(t.first, q, out)
            self._samp(t.second, q, out)
        elif isinstance(t, (S.Lift, S.ELift)):
            self._samp(t.body, q, out)
        elif isinstance(t, S.If):
            out.append(I.If(self.cond(t.cond, q), tuple(self.sampler(t.then, q)),
                            tuple(self.sampler(t.else_, q))))
        elif isinstance(t, S.Fix):
            self.uses_iters = True
            it = self.fresh("iter")
            out.append(I.For(it, I.Const(1), I.Var("iters"), tuple(self.sampler(t.kernel, q))))
        elif isinstance(t, S.Invoke):
            d = self.defs.get(t.name)
            if d is None or d.type.kind not in ("sampler", "kernel"):
                raise LoweringError("Syntax", f"{t.name} is not a sampler")
            qq = self._bind(d, t.args, q, out)
            self._samp(d.body, qq, out)
        elif isinstance(t, S.Sample):
            self._sample(t, q, out)
        else:
            raise LoweringError("Syntax", f"{type(t).__name__} is not a sampler")

    def _sample(self, t, q, out):
        decl = self.model.variables[t.var]
        if decl.target == "Real" or (t.index is None and decl.index_domain is not None):
            body, e = self.density(t.density, q)
            out.append(I.RealSample(t.var, tuple(body), e, I.Var("ucount")))
            self.uses_u = True
            return
        loc = self.fresh("loc")
        idx = I.Const(0) if t.index is None else self.index(t.index, q)
        out.append(I.Assign(loc, self.offset(t.var, idx)))
        w, c = self.fresh("w"), self.fresh(t.var)
        lo, hi = self.target_lo(t.var), self.target_hi(t.var)
        body, e = self.density(t.density, q)
        out += [I.Alloc(w, _add(_sub(hi, lo), I.Const(1)), I.PConst(0.0)),
                I.For(c, lo, hi, tuple([I.Store(t.var, I.Var(loc), I.Var(c))] + body +
                                       [I.Store(w, _sub(I.Var(c), lo), e)])),
                I.SampleCat(t.var, I.Var(loc), w, lo, self.draw(), log=False),
                I.Accum("ucount", "+", I.Const(1))]

    def estimator(self, t, q, weight, out):
        if isinstance(t, S.UnitEst):
            return
        if isinstance(t, S.ELift):
            self._samp(t.body, q, out)
        elif isinstance(t, S.Factor):
            self.estimator(t.estimator, q, weight, out)
            body, e = self.density(t.density, q)
            out += body + [I.Accum(weight, "pmul", e)]
        elif isinstance(t, S.If):
            a, b = [], []
            self.estimator(t.then, q, weight, a)
            self.estimator(t.else_, q, weight, b)
            out.append(I.If(self.cond(t.cond, q), tuple(a), tuple(b)))
        elif isinstance(t, S.Invoke):
            d = self.defs.get(t.name)
            if d is None or d.type.kind != "estimator":
                raise LoweringError("Syntax", f"{t.name} is not an estimator")
            self.estimator(d.body, self._bind(d, t.args, q, out), weight, out)
        else:
            raise LoweringError("Syntax", f"{type(t).__name__} is not an estimator")

    # ------------------------------------------------------------ programs

    def program(self, defn):
        defn = resolve_definition(defn)
        self.defs.setdefault(defn.name, defn)
        q = {qn: I.Var(qn) for qn, _ in defn.quantifiers}
        kind = defn.type.kind
        self.stack.append(defn.name)
        if kind == "density":
            body, e = self.density(defn.body, q)
            body.append(I.Return(e))
        elif kind in ("sampler", "kernel"):
            body = self.sampler(defn.body, q)
            body.append(I.Return(I.PConst(1.0)))
        else:
            body = [I.Assign("weight", I.PConst(1.0))]
            self.estimator(defn.body, q, "weight", body)
            body.append(I.Return(I.Var("weight")))
        self.stack.pop()
        if self.uses_u:
            body.insert(0, I.Assign("ucount", I.Const(0)))
        scalars = []
        for d in self.model.domains:
            scalars += [f"min_{d}", f"max_{d}"]
        scalars += [qn for qn, _ in defn.quantifiers]
        if self.uses_iters:
            scalars.append("iters")
        arrays = list(self.model.variables) + (["U"] if self.uses_u else [])
        ranges = tuple((v.name, self.target_lo(v.name), self.target_hi(v.name))
                       for v in self.model.variables.values() if v.target != "Real")
        outputs = tuple(set_vars(defn.type.targets)) if kind != "density" else ()
        shapes = tuple((v, self.var_size(v)) for v in self.model.variables)
        return I.IRProgram(defn.name, tuple(scalars), tuple(arrays), tuple(body), "linear",
                           ranges, outputs, shapes)


def lower(model, defn, defs=(), space="log", rewrite=True):
    """Lower a checked definition to an IRProgram.

    space="linear" stops before the log-space pass; rewrite=False skips
    conjugacy.  An IRProgram given as defn is returned unchanged.
    """
    from .rewrite import conjugate_rewrite, to_logspace
    if isinstance(defn, I.IRProgram):
        return defn
    prog = Lowerer(model, defs).program(defn)
    if space == "linear":
        return prog
    prog = to_logspace(prog)
    if not rewrite:
        return prog
    prog = conjugate_rewrite(prog)
    for n in I.walk(prog):
        if isinstance(n, I.RealIntegral):
            raise LoweringError("IntractableIntegral",
                                f"no closed form for the integral over {n.var}")
        if isinstance(n, I.RealSample):
            raise LoweringError("UnsampleableDensity", f"no closed-form sampler for {n.var}")
    return prog


def bind_inputs(prog, model, data, env=None, replica=0, quants=None, uniforms=None,
                iters=100):
    """Input dictionary for run_ir from a Data object and optionally one Env replica.

    Unset discrete entries take the least target value, unset reals 0.
    """
    inputs = {}
    for d in model.domains:
        lo, hi = data.bounds(d)
        inputs[f"min_{d}"], inputs[f"max_{d}"] = lo, hi
    for v in model.variables.values():
        size = 1
        lo = 0
        if v.index_domain is not None:
            lo, hi = data.bounds(v.index_domain)
            size = hi - lo + 1
        fill = 0.0 if v.target == "Real" else float(data.bounds(v.target)[0])
        arr = np.full(size, fill)
        if env is not None:
            vals, ok = env.values[v.name][replica], env.defined[v.name][replica]
            arr = np.where(ok, vals, fill).astype(float)
        else:
            for (var, idx), val in data.observed.items():
                if var == v.name:
                    arr[idx - lo] = val
        inputs[v.name] = arr
    for k, val in (quants or {}).items():
        inputs[k] = val
    if "U" in prog.arrays:
        inputs["U"] = np.zeros(1) if uniforms is None else np.asarray(uniforms, dtype=float)
    if "iters" in prog.scalars:
        inputs["iters"] = iters
    return inputs
