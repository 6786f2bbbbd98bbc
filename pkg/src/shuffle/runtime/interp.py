"""Batched interpreter for densities, samplers, kernels and estimators.

Every value is an array with one entry per replica, so R independent
executions (chains, particles) run together and merge by replica index.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln

from ..data import Data
from ..errors import RuntimeFault
from ..logic.encode import SymbolicCtx, set_vars, surface_membership
from ..simplify import conjugate as C
from ..surface import syntax as S
from ..surface.resolve import resolve_definition
from .logprob import log_sum

_CMP = {"==": np.equal, "!=": np.not_equal, "<": np.less, "<=": np.less_equal,
        ">": np.greater, ">=": np.greater_equal}
_HALF_LOG_2PI = 0.5 * math.log(2 * math.pi)


def _where(d):
    pos = getattr(d, "pos", None)
    return f"line {pos[0]}, column {pos[1]}" if pos else None


class Interpreter:
    def __init__(self, model, defs=(), data=None, fix_iters=100):
        self.model = model
        self.data = data or Data()
        self.fix_iters = fix_iters
        self.defs = {}
        for d in model.densities:
            self.defs[d.name] = resolve_definition(d)
        for d in defs:
            if isinstance(d, S.Definition):
                self.defs[d.name] = resolve_definition(d)
        self.ctx = SymbolicCtx(model, {})
        self._membership = {}
        self._rec = {}

    # ------------------------------------------------------------ helpers

    def _b(self, x, env):
        return np.broadcast_to(np.asarray(x), (env.replicas,))

    def definition(self, name):
        d = self.defs.get(name)
        if d is None:
            raise RuntimeFault("EnvMiss", f"unknown definition {name!r}")
        return d

    def bind(self, d, args, env, q):
        return {qn: self._b(self.index(a, env, q), env) for (qn, _), a in zip(d.quantifiers, args)}

    # ------------------------------------------------------------ index and constraints

    def index(self, e, env, q):
        if isinstance(e, S.Num):
            return e.value
        if isinstance(e, S.QVar):
            return q[e.ident]
        if isinstance(e, S.Name):
            return q[e.ident] if e.ident in q else env.read(e.ident, 0)
        if isinstance(e, S.Read):
            i = 0 if e.index is None else self.index(e.index, env, q)
            return env.read(e.var, i)
        if isinstance(e, S.Minus):
            return self.index(e.base, env, q) - e.amount
        if isinstance(e, S.DomMin):
            return self.data.bounds(e.domain)[0]
        if isinstance(e, S.DomMax):
            return self.data.bounds(e.domain)[1]
        raise RuntimeFault("EnvMiss", f"not an index expression: {type(e).__name__}")

    def holds(self, c, env, q):
        if isinstance(c, S.BoolLit):
            return np.full(env.replicas, c.value)
        if isinstance(c, S.Cmp):
            return self._b(_CMP[c.op](self.index(c.left, env, q), self.index(c.right, env, q)), env)
        if isinstance(c, S.InDom):
            lo, hi = self.data.bounds(c.domain)
            v = self.index(c.expr, env, q)
            return self._b((lo <= v) & (v <= hi), env)
        if isinstance(c, S.Not):
            return ~self.holds(c.arg, env, q)
        if isinstance(c, S.And):
            return self.holds(c.left, env, q) & self.holds(c.right, env, q)
        if isinstance(c, S.Or):
            return self.holds(c.left, env, q) | self.holds(c.right, env, q)
        raise RuntimeFault("EnvMiss", f"not a constraint: {type(c).__name__}")

    def param(self, p, env, q):
        if isinstance(p, S.Real):
            return p.value
        if isinstance(p, S.ListLit):
            return np.stack([self._b(self.param(x, env, q), env).astype(float) for x in p.items],
                            axis=1)
        if isinstance(p, S.ParamBin):
            a, b = self.param(p.left, env, q), self.param(p.right, env, q)
            if p.op == "+":
                return a + b
            if p.op == "-":
                return a - b
            if p.op == "*":
                return a * b
            return a / b
        if isinstance(p, S.Read) and p.index is None and \
                self.model.variables[p.var].index_domain is not None:
            return env.read_vector(p.var)
        return self.index(p, env, q)

    def membership(self, over, var, idx, env, q):
        key = (over, var)
        if key not in self._membership:
            self._membership[key] = surface_membership(self.ctx, over, var, "__n")
        qq = dict(q)
        qq["__n"] = idx
        return self.holds(self._membership[key], env, qq)

    # ------------------------------------------------------------ densities

    def density(self, t, env, q=None):
        """Log density, one value per replica."""
        q = q or {}
        m = getattr(self, "_d_" + type(t).__name__, None)
        if m is None:
            raise RuntimeFault("EnvMiss", f"{type(t).__name__} is not a density", _where(t))
        return m(t, env, q)

    def _d_One(self, t, env, q):
        return np.zeros(env.replicas)

    def _d_Ind(self, t, env, q):
        return self.density(t.body, env, q)

    def _d_Mul(self, t, env, q):
        return self.density(t.left, env, q) + self.density(t.right, env, q)

    def _d_Div(self, t, env, q):
        num = self.density(t.left, env, q)
        den = self.density(t.right, env, q)
        if np.any(den == -np.inf):
            raise RuntimeFault("DivZero", "division by a zero density", _where(t))
        return num - den

    def _d_If(self, t, env, q):
        c = self.holds(t.cond, env, q)
        if c.all():
            return self.density(t.then, env, q)
        if not c.any():
            return self.density(t.else_, env, q)
        return np.where(c, self.density(t.then, env, q), self.density(t.else_, env, q))

    def _d_Prim(self, t, env, q):
        args = [self.param(a, env, q) for a in t.args]
        target = t.args[0]
        lo = 0
        if isinstance(target, S.Read):
            rng = env.target_range(target.var)
            lo = rng[0] if rng else 0
        return self._b(prim_logpdf(t.name, args, lo), env).astype(float)

    def _d_Invoke(self, t, env, q):
        d = self.definition(t.name)
        if d.type.kind != "density":
            raise RuntimeFault("EnvMiss", f"{t.name} is a {d.type.kind}, not a density", _where(t))
        qv = self.bind(d, t.args, env, q)
        if d.modifier == "rec":
            return self._rec_density(d, qv, env)
        return self.density(d.body, env, qv)

    def rec_split(self, d):
        """(non-recursive factor, ok) for the canonical body f(q) * d(q - 1)."""
        if d.name not in self._rec:
            q0 = d.quantifiers[0][0]
            found = None
            b = d.body
            if isinstance(b, S.Mul):
                for this, other in ((b.right, b.left), (b.left, b.right)):
                    if isinstance(this, S.Invoke) and this.name == d.name and \
                            this.args[0] == S.Minus(S.QVar(q0), 1) and \
                            all(a == S.QVar(qn) for a, (qn, _) in zip(this.args[1:], d.quantifiers[1:])) \
                            and not any(isinstance(n, S.Invoke) and n.name == d.name
                                        for n in S.walk(other)):
                        found = other
                        break
            self._rec[d.name] = found
        return self._rec[d.name]

    def _rec_density(self, d, qv, env):
        q0, dom = d.quantifiers[0]
        lo, hi = self.data.bounds(dom)
        a = qv[q0]
        factor = self.rec_split(d)
        if factor is not None:
            total = np.zeros(env.replicas)
            top = min(int(a.max()), hi)
            for k in range(lo, top + 1):
                on = a >= k
                qq = dict(qv)
                qq[q0] = np.full(env.replicas, k)
                total = total + np.where(on, self.density(factor, env, qq), 0.0)
            return total
        inr = (a >= lo) & (a <= hi)
        if not inr.any():
            return np.zeros(env.replicas)
        qq = dict(qv)
        qq[q0] = np.where(inr, a, lo)
        return np.where(inr, self.density(d.body, env, qq), 0.0)

    def _d_Integrate(self, t, env, q):
        names = set_vars(t.over)
        real = [v for v in names if self.model.variables[v].target == "Real"]
        if real:
            return self._conjugate_integral(t, real, env, q)
        cands = []
        for var in names:
            for idx in env.indices(var):
                m = self.membership(t.over, var, idx, env, q)
                if m.any():
                    cands.append((var, idx, m))
        if not cands:
            return self.density(t.body, env, q)
        ranges = [range(env.target_range(v)[0], env.target_range(v)[1] + 1) for v, _, _ in cands]
        originals = [env.column(v, i) for v, i, _ in cands]
        terms = []
        for combo in _product(ranges):
            e2 = env
            valid = np.ones(env.replicas, dtype=bool)
            for (var, idx, m), val, orig in zip(cands, combo, originals):
                e2 = e2.write_column(var, idx, val, m)
                if not m.all():
                    valid &= m | (orig == val)
            lp = self.density(t.body, e2, q)
            terms.append(np.where(valid, lp, -np.inf))
        return log_sum(np.stack(terms), axis=0)

    # ------------------------------------------------------------ conjugate integrals

    def mentions(self, t, var, seen=None):
        """Whether t depends on the value of var (following invocations)."""
        seen = seen if seen is not None else set()
        if isinstance(t, S.Integrate) and S.Whole(var) in t.over:
            return False
        if isinstance(t, (S.Read, S.Whole, S.Indexed, S.Comp)) and t.var == var:
            return True
        if isinstance(t, S.Name) and t.ident == var:
            return True
        if isinstance(t, S.Invoke) and t.name not in seen:
            seen.add(t.name)
            d = self.defs.get(t.name)
            if d is not None and self.mentions(d.body, var, seen):
                return True
        return any(self.mentions(c, var, seen) for c in S.children(t))

    def expand(self, t, env, q, sign=1, out=None):
        """Flatten products, quotients and invocations into signed atomic factors."""
        out = [] if out is None else out
        if isinstance(t, S.Mul):
            self.expand(t.left, env, q, sign, out)
            self.expand(t.right, env, q, sign, out)
        elif isinstance(t, S.Div):
            self.expand(t.left, env, q, sign, out)
            self.expand(t.right, env, q, -sign, out)
        elif isinstance(t, S.Ind):
            self.expand(t.body, env, q, sign, out)
        elif isinstance(t, S.Invoke) and self.definition(t.name).type.kind == "density":
            d = self.definition(t.name)
            qv = self.bind(d, t.args, env, q)
            if d.modifier == "rec":
                factor = self.rec_split(d)
                q0, dom = d.quantifiers[0]
                a = qv[q0]
                if factor is None or not (a == a[0]).all():
                    out.append((sign, t, q))
                    return out
                lo, hi = self.data.bounds(dom)
                for k in range(lo, min(int(a[0]), hi) + 1):
                    qq = dict(qv)
                    qq[q0] = np.full(env.replicas, k)
                    self.expand(factor, env, qq, sign, out)
            else:
                self.expand(d.body, env, qv, sign, out)
        else:
            out.append((sign, t, q))
        return out

    def _split_factors(self, t, var, env, q):
        rest = np.zeros(env.replicas)
        involved = []
        for sign, f, fq in self.expand(t, env, q):
            if self.mentions(f, var):
                if sign < 0:
                    return None, rest
                involved.append((f, fq))
            else:
                rest = rest + sign * self.density(f, env, fq)
        return involved, rest

    def _conjugate_integral(self, t, real, env, q):
        if len(t.over) != 1 or not isinstance(t.over[0], S.Whole) or len(real) != 1:
            raise RuntimeFault("IntractableIntegral", "only a single whole real variable can be "
                               "integrated", _where(t))
        var = real[0]
        involved, rest = self._split_factors(t.body, var, env, q)
        form = C.match(involved, var) if involved is not None else None
        if form is None:
            raise RuntimeFault("IntractableIntegral",
                               f"no closed form for the integral over {var}", _where(t))
        return rest + self._log_marginal(form, env)

    def _normal_args(self, form, env):
        prim, pq = form.prior
        mu0 = self._b(self.param(prim.args[1], env, pq), env).astype(float)
        sd0 = self._b(self.param(prim.args[2], env, pq), env).astype(float)
        ys, sds = [], []
        for lik, lq in form.likelihoods:
            ys.append(self._b(self.param(lik.args[0], env, lq), env).astype(float))
            sds.append(self._b(self.param(lik.args[2], env, lq), env).astype(float))
        return mu0, sd0, ys, sds

    def _dirichlet_args(self, form, env):
        prim, pq = form.prior
        alpha = np.asarray(self.param(prim.args[1], env, pq), dtype=float)
        if alpha.ndim == 1:
            alpha = np.broadcast_to(alpha, (env.replicas, alpha.shape[0]))
        counts = np.zeros_like(alpha)
        rows = np.arange(env.replicas)
        for lik, lq in form.likelihoods:
            target = lik.args[0]
            lo = env.target_range(target.var)[0] if isinstance(target, S.Read) else 0
            z = self._b(self.param(target, env, lq), env).astype(np.int64) - lo
            if ((z < 0) | (z >= alpha.shape[1])).any():
                raise RuntimeFault("EnvMiss", "category outside the Dirichlet support")
            np.add.at(counts, (rows, z), 1.0)
        return alpha, counts

    def _log_marginal(self, form, env):
        if isinstance(form, C.NormalNormal):
            return C.normal_log_marginal(*self._normal_args(form, env))
        alpha, counts = self._dirichlet_args(form, env)
        return C.dirichlet_log_marginal(alpha, counts)

    # ------------------------------------------------------------ samplers and kernels

    def sample(self, t, env, rs, q=None):
        """Run a sampler or kernel; returns the new environment."""
        q = q or {}
        m = getattr(self, "_s_" + type(t).__name__, None)
        if m is None:
            raise RuntimeFault("EnvMiss", f"{type(t).__name__} is not a sampler", _where(t))
        return m(t, env, rs, q)

    def _s_Return(self, t, env, rs, q):
        return env

    def _s_Seq(self, t, env, rs, q):
        first_rs, second_rs = rs.split()
        env = self.sample(t.first, env, second_rs, q)
        return self.sample(t.second, env, first_rs, q)

    def _s_If(self, t, env, rs, q):
        c = self.holds(t.cond, env, q)
        if c.all():
            return self.sample(t.then, env, rs, q)
        if not c.any():
            return self.sample(t.else_, env, rs, q)
        return self.sample(t.then, env, rs, q).merge(c, self.sample(t.else_, env, rs, q))

    def _s_Lift(self, t, env, rs, q):
        return self.sample(t.body, env, rs, q)

    def _s_Fix(self, t, env, rs, q):
        return self.run_fix(t.kernel, env, rs, self.fix_iters, q)

    def _s_Invoke(self, t, env, rs, q):
        d = self.definition(t.name)
        if d.type.kind not in ("sampler", "kernel"):
            raise RuntimeFault("EnvMiss", f"{t.name} is a {d.type.kind}, not a sampler", _where(t))
        return self.sample(d.body, env, rs, self.bind(d, t.args, env, q))

    def sampled_vars(self, t, seen=None):
        seen = seen if seen is not None else set()
        out = []
        for n in S.walk(t):
            if isinstance(n, S.Sample) and n.var not in out:
                out.append(n.var)
            if isinstance(n, S.Invoke) and n.name not in seen and n.name in self.defs:
                seen.add(n.name)
                d = self.defs[n.name]
                if d.type.kind in ("sampler", "kernel"):
                    out += [v for v in self.sampled_vars(d.body, seen) if v not in out]
        return out

    def run_fix(self, kernel, env, rs, iters, q=None):
        q = q or {}
        for var in self.sampled_vars(kernel):
            env = env.initialize(var)
        for _ in range(iters):
            step, rs = rs.split()
            env = self.sample(kernel, env, step, q)
        return env

    def _s_Sample(self, t, env, rs, q):
        decl = self.model.variables[t.var]
        idx = 0 if t.index is None else self._b(self.index(t.index, env, q), env)
        if decl.target == "Real" or (t.index is None and decl.index_domain is not None):
            return self._sample_closed_form(t, env, rs, q)
        lo, hi = env.target_range(t.var)
        lps = []
        for c in range(lo, hi + 1):
            lps.append(self.density(t.density, env.write(t.var, idx, c), q))
        lp = np.stack(lps, axis=1)
        top = lp.max(axis=1, keepdims=True)
        if not np.isfinite(top).all():
            raise RuntimeFault("UnsampleableDensity", f"density for {t.var} is zero everywhere",
                               _where(t))
        w = np.exp(lp - top)
        cdf = np.cumsum(w, axis=1)
        u = rs.draw(0)[:, None] * cdf[:, -1:]
        choice = np.argmax(cdf > u, axis=1)
        return env.write(t.var, idx, lo + choice)

    def _sample_closed_form(self, t, env, rs, q):
        involved, _ = self._split_factors(t.density, t.var, env, q)
        form = C.match(involved, t.var) if involved is not None else None
        if form is None:
            raise RuntimeFault("UnsampleableDensity",
                               f"no inverse transform for the density of {t.var}", _where(t))
        if isinstance(form, C.NormalNormal):
            mean, var = C.normal_posterior(*self._normal_args(form, env))
            return env.write(t.var, 0, C.sample_normal(mean, var, rs.draw(0)))
        alpha, counts = self._dirichlet_args(form, env)
        post = C.dirichlet_posterior(alpha, counts)
        u = np.stack([rs.draw(k) for k in range(post.shape[1])], axis=1)
        theta = C.sample_dirichlet(post, u)
        for k, idx in enumerate(env.indices(t.var)):
            env = env.write_column(t.var, idx, theta[:, k])
        return env

    # ------------------------------------------------------------ estimators

    def estimate(self, t, env, rs, q=None):
        """Run an estimator; returns (log weight per replica, environment)."""
        q = q or {}
        if isinstance(t, S.UnitEst):
            return np.zeros(env.replicas), env
        if isinstance(t, S.ELift):
            return np.zeros(env.replicas), self.sample(t.body, env, rs, q)
        if isinstance(t, S.Factor):
            w, env = self.estimate(t.estimator, env, rs, q)
            return w + self.density(t.density, env, q), env
        if isinstance(t, S.If):
            c = self.holds(t.cond, env, q)
            wt, et = self.estimate(t.then, env, rs, q)
            wf, ef = self.estimate(t.else_, env, rs, q)
            return np.where(c, wt, wf), et.merge(c, ef)
        if isinstance(t, S.Invoke):
            d = self.definition(t.name)
            if d.type.kind != "estimator":
                raise RuntimeFault("EnvMiss", f"{t.name} is not an estimator", _where(t))
            return self.estimate(d.body, env, rs, self.bind(d, t.args, env, q))
        raise RuntimeFault("EnvMiss", f"{type(t).__name__} is not an estimator", _where(t))


def _product(ranges):
    import itertools
    return itertools.product(*ranges)


def prim_logpdf(name, args, lo=0):
    """Log density of a primitive; args[0] is the value scored."""
    with np.errstate(divide="ignore", invalid="ignore"):
        if name == "flip":
            v, p = args
            v = np.asarray(v)
            return np.where(v == 1, np.log(p), np.where(v == 0, np.log1p(-np.asarray(p)), -np.inf))
        if name == "categorical":
            v, ps = args
            ps = np.asarray(ps, dtype=float)
            k = np.asarray(v, dtype=np.int64) - lo
            if ps.ndim == 1:
                ok = (k >= 0) & (k < ps.shape[0])
                return np.where(ok, np.log(ps[np.clip(k, 0, ps.shape[0] - 1)]), -np.inf)
            kk = np.broadcast_to(k, (ps.shape[0],))
            ok = (kk >= 0) & (kk < ps.shape[1])
            vals = ps[np.arange(ps.shape[0]), np.clip(kk, 0, ps.shape[1] - 1)]
            return np.where(ok, np.log(vals), -np.inf)
        if name == "uniform":
            v, a, b = args
            v = np.asarray(v)
            if v.dtype.kind in "iu":
                return np.where((a <= v) & (v <= b), -np.log(np.asarray(b) - a + 1.0), -np.inf)
            return np.where((a <= v) & (v <= b), -np.log(np.asarray(b) - a), -np.inf)
        if name == "normal":
            v, m, s = args
            s = np.asarray(s, dtype=float)
            z = (np.asarray(v, dtype=float) - m) / s
            return -0.5 * z * z - np.log(s) - _HALF_LOG_2PI
        if name == "dirichlet":
            theta, alpha = args
            theta = np.asarray(theta, dtype=float)
            alpha = np.asarray(alpha, dtype=float)
            if alpha.ndim == 1:
                alpha = np.broadcast_to(alpha, theta.shape)
            on = (np.abs(theta.sum(axis=-1) - 1.0) <= 1e-9) & (theta >= 0).all(axis=-1)
            lp = gammaln(alpha.sum(axis=-1)) - gammaln(alpha).sum(axis=-1) + \
                ((alpha - 1.0) * np.log(theta)).sum(axis=-1)
            return np.where(on, lp, -np.inf)
    raise RuntimeFault("UnsampleableDensity", f"unknown primitive {name!r}")
