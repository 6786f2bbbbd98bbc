"""Type inference and checking for inference programs."""

from __future__ import annotations

from collections import Counter
from dataclasses import replace

from ..errors import ShuffleTypeError, UnsupportedConstraint
from ..logic import queries as Q
from ..logic.encode import (SymbolicCtx, _and, components, set_vars, surface_membership)
from ..surface import syntax as S
from ..surface.printer import pretty_print
from ..surface.subst import free_qvars, substitute
from .types import (ANY, AssumptionLog, DistType, Independence, ReachesAll, Signature,
                    TypeEnv, show_sets, show_type)


def location(name, node=None):
    pos = getattr(node, "pos", None)
    if pos:
        return f"{name} (line {pos[0]}, column {pos[1]})"
    return name


def conj(*cs):
    out = S.TRUE
    for c in cs:
        out = _and(out, c)
    return out


def same_sets(A, B):
    return Counter(A) == Counter(B)


def syntactic_subset(A, B):
    for c in A:
        if c in B:
            continue
        if not isinstance(c, S.Choice) and S.Whole(c.var) in B:
            continue
        return False
    return True


def flatten_seq(t):
    if isinstance(t, S.Seq):
        return flatten_seq(t.first) + flatten_seq(t.second)
    return [t]


def model_signatures(model):
    return {d.name: Signature(d.name, d.quantifiers, d.type, model=True)
            for d in model.densities}


class Checker:
    """Applies the typing rules, asking the logic module for every side condition."""

    def __init__(self, model, solver=None, log=None):
        self.model = model
        self.recorder = Q.RecordingSolver(solver or Q.default_solver())
        self.solver = Q.CachingSolver(self.recorder)
        self.log = log if log is not None else AssumptionLog()
        self.env = TypeEnv(defs=model_signatures(model))
        self.where = "<program>"

    # ------------------------------------------------------------ logic helpers

    def ctx(self, env):
        return SymbolicCtx(self.model, dict(env.gamma))

    def run(self, obligations):
        return Q._run(obligations, self.solver)

    def fail(self, rule, message, node=None, premise=None, verdict=None, expected=None,
             actual=None):
        witness = verdict.witness if verdict is not None else None
        raise ShuffleTypeError(rule, message, location(self.where, node), premise, witness,
                               expected, actual)

    def require(self, verdict, rule, message, node=None, premise=None, expected=None,
                actual=None):
        if not verdict.valid:
            self.fail(rule, message, node, premise, verdict, expected, actual)

    def equiv(self, env, A, B, under):
        if same_sets(A, B):
            return Q.Verdict("Valid")
        return self.run(Q.equiv_obligations(self.ctx(env), tuple(A), tuple(B), under))

    def subset(self, env, A, B, under):
        if syntactic_subset(A, B):
            return Q.Verdict("Valid")
        return self.run(Q.subset_obligations(self.ctx(env), tuple(A), tuple(B), under))

    def disjoint(self, env, A, B, under):
        if not set(set_vars(tuple(A))) & set(set_vars(tuple(B))):
            return Q.Verdict("Valid")
        return self.run(Q.disjoint_obligations(self.ctx(env), tuple(A), tuple(B), under))

    def implies(self, env, phi1, phi2):
        if phi1 == phi2 or phi2 == S.TRUE:
            return Q.Verdict("Valid")
        return self.run(Q.implication_obligations(self.ctx(env), phi1, phi2))

    def difference(self, env, A, B, under):
        """A set list denoting A - B under `under`."""
        A, B = tuple(A), tuple(B)
        if not B or not A:
            return A
        if syntactic_subset(A, B):
            return ()
        ctx = self.ctx(env)
        touched = set(set_vars(A)) & set(set_vars(B))
        if not touched:
            return A
        kept = [c for c in A if not set(set_vars((c,))) & touched]
        out = list(kept)
        for v in set_vars(A):
            comps = components(A, v)
            if all(c in kept for c in comps):
                continue
            if v in touched:
                if self.run(Q.subset_obligations(ctx, A, B, under, names=[v])).valid:
                    continue
                plain = all(not isinstance(c, S.Choice) for c in comps)
                if plain and self.run(Q.disjoint_obligations(ctx, A, B, under, names=[v])).valid:
                    out.extend(c for c in comps if c not in out)
                    continue
            n = Q._fresh_for(ctx, (A, B), v)
            mem = surface_membership(ctx, A, v, n)
            if v in touched:
                mem = _and(mem, S.Not(surface_membership(ctx, B, v, n)))
            dom = ctx.index_domain(v)
            if dom is None:
                out.append(S.Choice(mem, (S.Whole(v),), ()))
            else:
                out.append(S.Comp(v, n, dom, mem))
        return tuple(out)

    def valid_infer(self, env, t, rule, node=None):
        if t.conditioned is ANY:
            return
        v = Q.check_valid_infer(self.ctx(env), t.targets, t.conditioned, t.constraint,
                                self.solver)
        if not v.valid:
            self.fail(rule, f"type {show_type(t)} is not valid ({v.condition}: {v.detail})",
                      node, premise=f"ValidInfer/{v.condition}", verdict=v, actual=show_type(t))

    # ------------------------------------------------------------ inference

    def infer(self, env, term):
        method = getattr(self, "_t_" + type(term).__name__, None)
        if method is None:
            self.fail("SYNTAX", f"{type(term).__name__} cannot be typed here", term)
        try:
            return method(env, term)
        except UnsupportedConstraint as exc:
            self.fail("CONSTRAINT", str(exc), term)

    @staticmethod
    def unit_as(t, kind):
        """`return` types as sampler( | ANY) but is also the identity kernel."""
        if (kind == "kernel" and t.kind == "sampler" and not t.targets
                and t.conditioned is ANY):
            return replace(t, kind="kernel")
        return t

    def expect(self, t, kind, rule, node, what="operand"):
        if t.kind != kind:
            self.fail(rule, f"{what} must be a {kind}, found {show_type(t)}", node,
                      premise="kind", expected=kind, actual=show_type(t))

    def _t_Invoke(self, env, t):
        sig = env.lookup(t.name)
        if sig is None:
            self.fail("INV", f"unknown definition {t.name!r}", t, premise="lookup")
        if len(t.args) != len(sig.quantifiers):
            self.fail("INV", f"{t.name} expects {len(sig.quantifiers)} argument(s), "
                      f"got {len(t.args)}", t, premise="arity")
        unbound = free_qvars(t.args) - set(env.gamma)
        if unbound:
            self.fail("INV", f"unbound quantifier(s) {sorted(unbound)} in arguments", t,
                      premise="scope")
        mapping = {q: a for (q, _), a in zip(sig.quantifiers, t.args)}
        ty = substitute(sig.type, mapping)
        if sig.hypothesis_of is not None:
            for (q, _), a in list(zip(sig.quantifiers, t.args))[1:]:
                if a != S.QVar(q):
                    self.fail("DEF-REC", f"recursive call must pass {q} unchanged", t,
                              premise="recursion on first argument")
            smaller = S.Cmp("<", t.args[0], S.QVar(sig.hypothesis_of))
            v = self.implies(env, S.TRUE, smaller)
            self.require(v, "DEF-REC", f"recursive call argument {pretty_print(t.args[0])} "
                         f"is not smaller than {sig.hypothesis_of}", t, premise="q' < q")
        else:
            extra = [S.InDom(a, d) for a, (_, d) in zip(t.args, sig.quantifiers)]
            ty = replace(ty, constraint=conj(ty.constraint, *extra))
        self.valid_infer(env, ty, "INV", t)
        return ty

    def _t_Prim(self, env, t):
        if not t.args or not isinstance(t.args[0], S.Read):
            self.fail("MODEL", f"{t.name} needs a target variable as first argument", t)
        first = t.args[0]
        target = S.Whole(first.var) if first.index is None else S.Indexed(first.var, first.index)
        cond = []
        for a in t.args[1:]:
            for n in S.walk(a):
                if isinstance(n, S.Read):
                    c = S.Whole(n.var) if n.index is None else S.Indexed(n.var, n.index)
                    if c not in cond:
                        cond.append(c)
        return DistType("density", (target,), tuple(cond))

    def _t_One(self, env, t):
        return DistType("density", (), ANY)

    def _t_Return(self, env, t):
        return DistType("sampler", (), ANY)

    def _t_UnitEst(self, env, t):
        return DistType("estimator", (), ANY)

    def _t_Mul(self, env, t):
        t1, t2 = self.infer(env, t.left), self.infer(env, t.right)
        self.expect(t1, "density", "DMUL", t)
        self.expect(t2, "density", "DMUL", t)
        phi = conj(t1.constraint, t2.constraint)
        A1, B1, A2, B2 = t1.targets, t1.conditioned, t2.targets, t2.conditioned
        if B1 is ANY and B2 is ANY:
            return DistType("density", A1 + A2, ANY, phi)
        if B1 is ANY:
            B1 = A2 + B2
        if B2 is ANY:
            self.require(self.subset(env, A2, B1, phi), "DMUL",
                         "right operand targets must be conditioned on by the left", t,
                         premise="A2 within B1")
            B2 = self.difference(env, B1, A2, phi)
        v = self.equiv(env, A2 + B2, B1, phi)
        self.require(v, "DMUL", "left operand must be conditioned on exactly the targets and "
                     "conditioned set of the right operand", t, premise="B1 = A2 u B2",
                     expected=show_sets(A2 + B2), actual=show_sets(B1))
        out = DistType("density", A1 + A2, B2, phi)
        self.valid_infer(env, out, "DMUL", t)
        return out

    def _t_Div(self, env, t):
        t1, t2 = self.infer(env, t.left), self.infer(env, t.right)
        self.expect(t1, "density", "DDIV", t)
        self.expect(t2, "density", "DDIV", t)
        phi = conj(t1.constraint, t2.constraint)
        A1, B1, A2, B2 = t1.targets, t1.conditioned, t2.targets, t2.conditioned
        if B1 is ANY and B2 is ANY:
            B1 = B2 = ()
        elif B1 is ANY:
            B1 = B2
        elif B2 is ANY:
            B2 = B1
        v = self.subset(env, A2, A1, phi)
        self.require(v, "DDIV", "divisor targets must be targets of the dividend", t,
                     premise="A2 within A1", expected=show_sets(A1), actual=show_sets(A2))
        rest = self.difference(env, A1, A2, phi)
        if self.equiv(env, B2, B1, phi).valid:
            out = DistType("density", rest, A2 + B1, phi)
            rule = "DDIV"
        else:
            v = self.equiv(env, B2, rest + B1, phi)
            self.require(v, "DDIV", "divisor must be conditioned on the dividend's conditioned "
                         "set, or on it and the remaining targets", t, premise="B2 = B1",
                         expected=show_sets(B1), actual=show_sets(B2))
            out = DistType("density", rest, B1, phi)
            rule = "DDIV2"
        self.valid_infer(env, out, rule, t)
        return out

    def _t_Integrate(self, env, t):
        d = self.infer(env, t.body)
        self.expect(d, "density", "DINT", t, "integrand")
        v = self.subset(env, t.over, d.targets, d.constraint)
        self.require(v, "DINT", f"cannot integrate over {show_sets(t.over)}: not a target of "
                     f"{show_type(d)}", t, premise="V within A", expected=show_sets(d.targets),
                     actual=show_sets(t.over))
        return replace(d, targets=self.difference(env, d.targets, t.over, d.constraint))

    def _t_Ind(self, env, t):
        d = self.infer(env, t.body)
        return self.coerce_independent(env, d, t.extra, t, "ind")

    def coerce_independent(self, env, d, extra, node, source):
        """Extend the conditioned set of d by `extra`, logging the independence assumption."""
        extra = tuple(extra)
        if not extra:
            return d
        B = () if d.conditioned is ANY else d.conditioned
        C = self.difference(env, extra, B, d.constraint)
        if not C:
            return d
        v = self.disjoint(env, d.targets, C, d.constraint)
        self.require(v, "IND", f"{show_sets(C)} overlaps the targets of {show_type(d)}", node,
                     premise="A and C disjoint", actual=show_sets(C))
        out = d if d.conditioned is ANY else replace(d, conditioned=d.conditioned + C)
        self.valid_infer(env, out, "IND", node)
        self.log.append(Independence(d.constraint, d.targets, C, B,
                                     location(self.where, node), source))
        return out

    def _t_If(self, env, t):
        tt, tf = self.infer(env, t.then), self.infer(env, t.else_)
        tt, tf = self.unit_as(tt, tf.kind), self.unit_as(tf, tt.kind)
        if tt.kind != tf.kind:
            self.fail("IF", f"branches have kinds {tt.kind} and {tf.kind}", t, premise="kind")
        if same_sets(tt.targets, tf.targets):
            A = tt.targets
        else:
            A = (S.Choice(t.cond, tt.targets, tf.targets),)
        if tt.conditioned is ANY and tf.conditioned is ANY:
            B = ANY
        else:
            Bt = tf.conditioned if tt.conditioned is ANY else tt.conditioned
            Bf = tt.conditioned if tf.conditioned is ANY else tf.conditioned
            B = Bt if same_sets(Bt, Bf) else (S.Choice(t.cond, Bt, Bf),)
        full = S.Or(_and(t.cond, tt.constraint), _and(S.Not(t.cond), tf.constraint))
        out = DistType(tt.kind, A, B, full)
        if B is ANY:
            return out
        self.valid_infer(env, out, "IF", t)
        if tt.constraint == tf.constraint:
            out = replace(out, constraint=tt.constraint)
        return out

    def _t_Sample(self, env, t):
        decl = self.model.variables.get(t.var)
        if decl is None:
            self.fail("SLIFT", f"unknown random variable {t.var!r}", t, premise="scope")
        if t.index is None:
            target = S.Whole(t.var)
        else:
            if decl.index_domain is None:
                self.fail("SLIFT", f"{t.var} is not indexed", t, premise="scope")
            target = S.Indexed(t.var, t.index)
        d = self.infer(env, t.density)
        self.expect(d, "density", "SLIFT", t, "sampled term")
        v = self.equiv(env, (target,), d.targets, d.constraint)
        self.require(v, "SLIFT", f"sampled density {show_type(d)} does not target "
                     f"{show_sets((target,))}", t, premise="A = v[a]",
                     expected=show_sets((target,)), actual=show_sets(d.targets))
        return replace(d, kind="sampler", targets=(target,))

    def _t_Seq(self, env, t):
        s1, s2 = self.infer(env, t.first), self.infer(env, t.second)
        s1, s2 = self.unit_as(s1, s2.kind), self.unit_as(s2, s1.kind)
        if s1.kind == "sampler" and s2.kind == "sampler":
            return self.sbind(env, s1, s2, t)
        if s1.kind == "kernel" and s2.kind == "kernel":
            return self.kcombine(env, s1, s2, t)
        self.fail("SBIND", f"cannot sequence a {s1.kind} with a {s2.kind}", t, premise="kind")

    def sbind(self, env, s1, s2, node):
        phi = conj(s1.constraint, s2.constraint)
        A1, B1, A2, B2 = s1.targets, s1.conditioned, s2.targets, s2.conditioned
        if B1 is ANY and B2 is ANY:
            return DistType("sampler", A1 + A2, ANY, phi)
        if B1 is ANY:
            self.require(self.subset(env, A1, B2, phi), "SBIND",
                         "second sampler must condition on the first one's targets", node,
                         premise="A1 within B2")
            B1 = self.difference(env, B2, A1, phi)
        if B2 is ANY:
            B2 = A1 + B1
        v = self.equiv(env, B2, A1 + B1, phi)
        self.require(v, "SBIND", "second sampler must be conditioned on exactly the first "
                     "one's targets and conditioned set", node, premise="B2 = A1 u B1",
                     expected=show_sets(A1 + B1), actual=show_sets(B2))
        out = DistType("sampler", A1 + A2, B1, phi)
        self.valid_infer(env, out, "SBIND", node)
        return out

    def kcombine(self, env, k1, k2, node):
        phi = conj(k1.constraint, k2.constraint)
        A1, B1, A2, B2 = k1.targets, k1.conditioned, k2.targets, k2.conditioned
        if B1 is ANY and B2 is ANY:
            return DistType("kernel", A1 + A2, ANY, phi)
        if B1 is ANY:
            B1 = self.difference(env, B2, A1, phi) + A2
        if B2 is ANY:
            B2 = A1 + self.difference(env, B1, A2, phi)
        C = self.difference(env, B1, A2, phi)
        v = self.equiv(env, B2, A1 + C, phi)
        self.require(v, "KCOMBINE", "kernels do not update complementary targets", node,
                     premise="B2 = A1 u (B1 - A2)", expected=show_sets(A1 + C),
                     actual=show_sets(B2))
        out = DistType("kernel", A1 + A2, C, phi)
        self.valid_infer(env, out, "KCOMBINE", node)
        return out

    def _t_Lift(self, env, t):
        for n in S.walk(t.body):
            if isinstance(n, S.Sample):
                decl = self.model.variables.get(n.var)
                if decl is not None and decl.target == "Real":
                    self.fail("KLIFT", f"lifted sampler targets real-valued {n.var}", n,
                              premise="finite target domain")
        mark = len(self.log.entries)
        try:
            s = self.infer(env, t.body)
            self.expect(s, "sampler", "KLIFT", t, "lifted term")
            k = replace(s, kind="kernel")
        except ShuffleTypeError:
            parts = flatten_seq(t.body)
            if len(parts) < 2:
                raise
            del self.log.entries[mark:]
            k = None
            for part in parts:
                s = self.infer(env, part)
                self.expect(s, "sampler", "KLIFT", part, "lifted term")
                kp = replace(s, kind="kernel")
                k = kp if k is None else self.kcombine(env, k, kp, part)
        self.log.append(ReachesAll(pretty_print(t), location(self.where, t), k.targets))
        return k

    def _t_Fix(self, env, t):
        k = self.infer(env, t.kernel)
        self.expect(k, "kernel", "KFIX", t)
        return replace(k, kind="sampler")

    def _t_ELift(self, env, t):
        s = self.infer(env, t.body)
        self.expect(s, "sampler", "ELIFT", t)
        return replace(s, kind="estimator")

    def _t_Factor(self, env, t):
        e = self.infer(env, t.estimator)
        d = self.infer(env, t.density)
        self.expect(e, "estimator", "EFACT", t)
        self.expect(d, "density", "EFACT", t, "weight")
        phi = conj(e.constraint, d.constraint)
        A, B, C, D = e.targets, e.conditioned, d.targets, d.conditioned
        if B is ANY and D is ANY:
            B, D = (), A
        elif B is ANY:
            B = self.difference(env, D, A, phi)
        elif D is ANY:
            D = A + B
        v = self.equiv(env, D, A + B, phi)
        self.require(v, "EFACT", "weight must be conditioned on exactly the estimator's "
                     "targets and conditioned set", t, premise="D = A u B",
                     expected=show_sets(A + B), actual=show_sets(D))
        out = DistType("estimator", A, B + C, phi)
        self.valid_infer(env, out, "EFACT", t)
        return out

    # ------------------------------------------------------------ definitions

    def coerce(self, env, actual, declared, rule, node):
        """Accept `actual` where `declared` is required (rule L1)."""
        actual = self.unit_as(actual, declared.kind)
        if actual.kind != declared.kind:
            self.fail(rule, f"body is a {actual.kind}, declared {declared.kind}", node,
                      premise="kind", expected=show_type(declared), actual=show_type(actual))
        phi = declared.constraint
        v = self.equiv(env, actual.targets, declared.targets, phi)
        self.require(v, rule, "body targets differ from the declared targets", node,
                     premise="A1 = A2", expected=show_type(declared), actual=show_type(actual))
        if actual.conditioned is not ANY:
            v = self.equiv(env, actual.conditioned, declared.conditioned, phi)
            self.require(v, rule, "body conditioned set differs from the declared one", node,
                         premise="B1 = B2", expected=show_type(declared),
                         actual=show_type(actual))
        v = self.implies(env, phi, actual.constraint)
        self.require(v, rule, "declared constraint does not imply the body constraint", node,
                     premise="phi2 => phi1", expected=show_type(declared),
                     actual=show_type(actual))

    def check_names(self, defn):
        model = self.model
        doms = set(model.domains) | set(S.BUILTIN_DOMAINS)
        for q, d in defn.quantifiers:
            if d not in doms:
                self.fail("SCOPE", f"unknown domain {d!r}", defn)
        for n in S.walk(defn.type):
            self._check_node_names(n, doms)
        for n in S.walk(defn.body):
            self._check_node_names(n, doms)
            if isinstance(n, S.Sample) and n.var not in model.variables:
                self.fail("SCOPE", f"unknown random variable {n.var!r}", n)

    def _check_node_names(self, n, doms):
        var = getattr(n, "var", None)
        if isinstance(n, (S.Whole, S.Indexed, S.Comp, S.Read)):
            decl = self.model.variables.get(var)
            if decl is None:
                self.fail("SCOPE", f"unknown random variable {var!r}", n)
            if isinstance(n, S.Indexed) and decl.index_domain is None:
                self.fail("SCOPE", f"{var} is not indexed", n)
        if isinstance(n, (S.Comp, S.InDom, S.DomMin, S.DomMax)) and n.domain not in doms:
            self.fail("SCOPE", f"unknown domain {n.domain!r}", n)

    def check_definition(self, env, defn):
        """Check one definition; return the extended environment."""
        self.where = defn.name
        self.check_names(defn)
        declared = defn.type
        rule = {"rec": "DEF-REC", "independent": "DEF-IND"}.get(defn.modifier, "DEF")
        gamma = dict(env.gamma)
        for q, d in defn.quantifiers:
            gamma[q] = d
        inner = env.with_gamma(gamma)
        in_dom = [S.InDom(S.QVar(q), d) for q, d in defn.quantifiers]
        full = replace(declared, constraint=conj(declared.constraint, *in_dom))
        self.valid_infer(inner, full, rule, defn)
        body_env = inner
        if defn.modifier == "rec":
            if not defn.quantifiers:
                self.fail("DEF-REC", "a recursive definition needs a quantifier", defn)
            (q, d), rest = defn.quantifiers[0], defn.quantifiers[1:]
            taken = set(gamma) | {n.ident for n in S.walk(declared) if isinstance(n, S.QVar)}
            q2 = q + "'"
            while q2 in taken:
                q2 += "'"
            hyp = substitute(declared, {q: S.QVar(q2)})
            hyp = replace(hyp, constraint=conj(hyp.constraint, S.Cmp("<", S.QVar(q2), S.QVar(q))))
            body_env = inner.extend(Signature(defn.name, ((q2, d),) + tuple(rest), hyp,
                                              hypothesis_of=q))
        actual = self.infer(body_env, defn.body)
        if defn.modifier == "independent" and actual.conditioned is not ANY:
            v = self.subset(inner, actual.conditioned, declared.conditioned, full.constraint)
            self.require(v, "DEF-IND", "body is conditioned on variables outside the declared "
                         "conditioned set", defn, premise="B_body within B",
                         expected=show_type(declared), actual=show_type(actual))
            extra = self.difference(inner, declared.conditioned, actual.conditioned,
                                    full.constraint)
            actual = self.coerce_independent(inner, actual, extra, defn, "independent")
        self.coerce(inner, actual, full, rule, defn)
        if defn.modifier == "rec":
            q, d = defn.quantifiers[0]
            v = Q._run(Q.base_case_obligations(self.ctx(inner), q, d, declared.targets,
                                               declared.constraint), self.solver)
            self.require(v, "DEF-REC", f"targets are not empty below min({d})", defn,
                         premise="BaseCase")
        return env.extend(Signature(defn.name, defn.quantifiers, declared))


def infer_type(model, env, log, term, solver=None, where="<term>"):
    """Type a single term; returns (type, log)."""
    ck = Checker(model, solver, log)
    ck.where = where
    env = env or ck.env
    return ck.infer(env, term), ck.log


def coerce(model, t1, t2, env=None, solver=None):
    ck = Checker(model, solver)
    ck.coerce(env or ck.env, t1, t2, "L1", None)
    return True


def coerce_independent(model, log, t, extra, env=None, solver=None):
    ck = Checker(model, solver, log)
    return ck.coerce_independent(env or ck.env, t, extra, None, "ind"), ck.log


def check_definition(model, env, log, defn, solver=None):
    ck = Checker(model, solver, log)
    return ck.check_definition(env or ck.env, defn)
