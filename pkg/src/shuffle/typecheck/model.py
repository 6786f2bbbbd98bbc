"""Model validity: per-density conditions and a schedule witness."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List

from ..errors import ModelError, UnsupportedConstraint
from ..logic import formula as F
from ..logic import queries as Q
from ..logic.encode import SymbolicCtx, enc_constraint, enc_index, membership, set_vars
from ..surface import syntax as S
from ..surface.printer import pretty_print
from ..surface.subst import substitute

RECOGNIZED = ("flip", "normal", "dirichlet", "categorical")


@dataclass(frozen=True)
class ScheduleStep:
    name: str
    quantifiers: tuple = ()

    def __str__(self):
        if not self.quantifiers:
            return self.name
        qs = ", ".join(q for q, _ in self.quantifiers)
        rng = ", ".join(f"{q} in {d}" for q, d in self.quantifiers)
        return f"{self.name}({qs}) for {rng}"


@dataclass
class ValidModel:
    schedule: List[ScheduleStep]
    assumptions: List[dict] = field(default_factory=list)
    verified: List[str] = field(default_factory=list)

    def schedule_text(self):
        return [str(s) for s in self.schedule]


def _ctx(model, defn):
    return SymbolicCtx(model, {q: d for q, d in defn.quantifiers})


def _fail(condition, defn, detail="", verdict=None):
    raise ModelError(condition, getattr(defn, "name", str(defn)), detail,
                     verdict.witness if verdict is not None else None)


def _check_declarations(model):
    doms = set(model.domains) | set(S.BUILTIN_DOMAINS)
    for v in model.variables.values():
        if v.index_domain is not None and v.index_domain not in doms:
            _fail("Declarations", v.name, f"unknown index domain {v.index_domain!r}")
        if v.target not in doms and v.target != "Real":
            _fail("Declarations", v.name, f"unknown target set {v.target!r}")
    for d in model.densities:
        if d.type.kind != "density":
            _fail("Declarations", d, "model definitions must be densities")
        for _, dom in d.quantifiers:
            if dom not in doms:
                _fail("Declarations", d, f"unknown domain {dom!r}")
        for n in S.walk(d.type):
            var = getattr(n, "var", None)
            if isinstance(n, (S.Whole, S.Indexed, S.Comp, S.Read)) and var not in model.variables:
                _fail("Declarations", d, f"unknown random variable {var!r}")


def _locations(ctx, term, guard, out):
    """Collect (guard, var, index formula) for every variable location a body reads."""
    if isinstance(term, S.If):
        f = enc_constraint(ctx, term.cond)
        for g, r in Q.guarded_reads(f, guard):
            out.append((g, r.var, r.index))
        safe = F.conj(F.NoErr(f), f)
        _locations(ctx, term.then, F.conj(guard, safe), out)
        _locations(ctx, term.else_, F.conj(guard, F.conj(F.NoErr(f), F.neg(f))), out)
        return
    if isinstance(term, S.Prim):
        for a in term.args:
            for n in S.walk(a):
                if isinstance(n, S.Read):
                    idx = F.IConst(0) if n.index is None else enc_index(ctx, n.index)
                    out.append((guard, n.var, idx))
        return
    for child in S.children(term):
        if isinstance(child, S.Read):
            idx = F.IConst(0) if child.index is None else enc_index(ctx, child.index)
            out.append((guard, child.var, idx))
        elif not isinstance(child, (S.DistTypeExpr,)):
            _locations(ctx, child, guard, out)


def _self_contained(model, defn, solver):
    ctx = _ctx(model, defn)
    scope = defn.type.targets + defn.type.conditioned
    phi = enc_constraint(ctx, defn.type.constraint)
    locs = []
    _locations(ctx, defn.body, F.TT, locs)
    for guard, var, idx in locs:
        if var not in set_vars(scope):
            _fail("SelfContained", defn, f"body reads {var}, outside its targets and "
                  "conditioned set")
        goal = F.implies(guard, Q._read_in(ctx, scope, F.RRead(var, idx)))
        if goal == F.TT:
            continue
        v = solver.check(Q.make_obligation(ctx, goal, phi, label=f"self-contained [{var}]"))
        if not v.valid:
            _fail("SelfContained", defn, f"body may read {var} outside its targets and "
                  "conditioned set", v)
    for n in S.walk(defn.body):
        if isinstance(n, S.Invoke):
            _fail("SelfContained", defn, "model densities cannot invoke definitions")


def _unique(model, defn, solver):
    if not defn.quantifiers:
        return
    ctx = _ctx(model, defn)
    taken = {q for q, _ in defn.quantifiers} | {n.ident for n in S.walk(defn.type)
                                                 if isinstance(n, S.QVar)}
    ren = {}
    for q, _ in defn.quantifiers:
        q2 = q + "'"
        while q2 in taken:
            q2 += "'"
        ren[q] = q2
    other = substitute(defn.type, {q: S.QVar(q2) for q, q2 in ren.items()})
    ctx2 = ctx
    for q, d in defn.quantifiers:
        ctx2 = ctx2.bind(ren[q], d)
    differ = F.disj(*[F.ICmp("!=", F.IVar(q), F.IVar(ren[q])) for q, _ in defn.quantifiers])
    under = F.conj(enc_constraint(ctx2, defn.type.constraint),
                   enc_constraint(ctx2, other.constraint), differ)
    v = Q._run(Q.disjoint_obligations(ctx2, defn.type.targets, other.targets, under), solver)
    if not v.valid:
        _fail("Unique", defn, "two instances define the same variable", v)


def _normalized(defn):
    """True when the body is a guarded choice of recognized primitives on the target."""
    targets = defn.type.targets
    if len(targets) != 1 or isinstance(targets[0], (S.Comp, S.Choice)):
        return False
    t = targets[0]
    want = S.Read(t.var, None if isinstance(t, S.Whole) else t.index)

    def ok(term):
        if isinstance(term, S.If):
            return ok(term.then) and ok(term.else_)
        if isinstance(term, S.Prim):
            if term.name not in RECOGNIZED or not term.args or term.args[0] != want:
                return False
            if term.name == "flip":
                p = term.args[1] if len(term.args) == 2 else None
                return isinstance(p, S.Real) and 0.0 <= p.value <= 1.0 or \
                    (p is not None and not isinstance(p, S.Real))
            return True
        return False
    return ok(defn.body)


def _linear(model, defs, solver):
    for k, d2 in enumerate(defs):
        for d1 in defs[:k]:
            shared = set(set_vars(d1.type.targets)) & set(set_vars(d2.type.targets))
            if not shared:
                continue
            ctx = _ctx(model, d1)
            taken = set(ctx.gamma)
            ren = {}
            for q, d in d2.quantifiers:
                q2 = q
                while q2 in taken:
                    q2 += "'"
                taken.add(q2)
                ren[q] = q2
                ctx = ctx.bind(q2, d)
            t2 = substitute(d2.type, {q: S.QVar(q2) for q, q2 in ren.items()})
            under = F.conj(enc_constraint(ctx, d1.type.constraint),
                           enc_constraint(ctx, t2.constraint))
            v = Q._run(Q.disjoint_obligations(ctx, d1.type.targets, t2.targets, under),
                       solver)
            if not v.valid:
                _fail("Linear", d2, f"also defines variables of {d1.name} "
                      f"({', '.join(sorted(shared))})", v)


def _complete(model, defs, solver):
    base = SymbolicCtx(model, {})
    for var in model.variables.values():
        owners = [d for d in defs if var.name in set_vars(d.type.targets)]
        if not owners:
            _fail("Complete", var.name, "no density defines this variable")
        n = "n'"
        alts = []
        for d in owners:
            ctx = _ctx(model, d)
            f = F.conj(enc_constraint(ctx, d.type.constraint),
                       membership(ctx, d.type.targets, var.name, n))
            for q, dom in reversed(d.quantifiers):
                if dom in S.BUILTIN_DOMAINS:
                    lo, hi = S.BUILTIN_DOMAINS[dom]
                    f = F.disj(*[F.subst_ivar(f, q, F.IConst(x)) for x in range(lo, hi + 1)])
                else:
                    f = F.FExists(q, dom, f)
            alts.append(f)
        goal = F.disj(*alts)
        if goal == F.TT:
            continue
        fresh = {n: var.index_domain} if var.index_domain else {}
        ob = Q.make_obligation(base, goal, fresh=fresh, label=f"complete [{var.name}]")
        v = solver.check(ob)
        if not v.valid:
            _fail("Complete", var.name, "some index has no defining density", v)


def _serial_self(model, defn, solver):
    ctx = _ctx(model, defn)
    A, B = defn.type.targets, defn.type.conditioned
    phi = enc_constraint(ctx, defn.type.constraint)
    for var in set(set_vars(A)) & set(set_vars(B)):
        dom = ctx.index_domain(var)
        if dom is None:
            _fail("Serial", defn, f"{var} conditions on itself")
        goal = F.implies(F.conj(membership(ctx, A, var, "a'"), membership(ctx, B, var, "b'")),
                         F.ICmp("<", F.IVar("b'"), F.IVar("a'")))
        ob = Q.make_obligation(ctx, goal, phi, fresh={"a'": dom, "b'": dom},
                               label=f"serial [{var}]")
        v = solver.check(ob)
        if not v.valid:
            _fail("Serial", defn, f"{var} is conditioned on indices not below its targets", v)


def _schedule(model, defs):
    owners = {}
    for d in defs:
        for v in set_vars(d.type.targets):
            owners.setdefault(v, []).append(d.name)
    deps = {}
    for d in defs:
        deps[d.name] = {o for v in set_vars(d.type.conditioned) for o in owners.get(v, [])
                        if o != d.name}
    order, done = [], set()
    while len(order) < len(defs):
        ready = [d for d in defs if d.name not in done and deps[d.name] <= done]
        if not ready:
            left = [d.name for d in defs if d.name not in done]
            _fail("Serial", left[0], f"cyclic dependencies among {', '.join(left)}")
        order.append(ScheduleStep(ready[0].name, ready[0].quantifiers))
        done.add(ready[0].name)
    return order


def check_model(model, solver=None):
    """Return ValidModel with a schedule, or raise ModelError."""
    solver = Q.CachingSolver(solver or Q.default_solver())
    _check_declarations(model)
    defs = model.densities
    result = ValidModel([])
    try:
        for d in defs:
            ctx = _ctx(model, d)
            t = d.type
            v = Q._run(Q.disjoint_obligations(ctx, t.targets, t.conditioned, t.constraint),
                       solver)
            if not v.valid:
                _fail("Disjoint", d, "targets and conditioned set overlap", v)
            _unique(model, d, solver)
            _self_contained(model, d, solver)
            v = Q.check_valid_infer(ctx, t.targets, t.conditioned, t.constraint, solver)
            if not v.valid:
                _fail("ValidInfer", d, f"{v.condition}: {v.detail}", v)
            if _normalized(d):
                result.verified.append(d.name)
            else:
                result.assumptions.append({"kind": "Normalized", "definition": d.name,
                                           "type": pretty_print(t)})
        _linear(model, defs, solver)
        _complete(model, defs, solver)
        for d in defs:
            _serial_self(model, d, solver)
        result.schedule = _schedule(model, defs)
    except UnsupportedConstraint as exc:
        raise ModelError("Declarations", "<model>", str(exc)) from None
    return result
