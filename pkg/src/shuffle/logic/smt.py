"""SMT-LIB 2 emission over 64-bit bitvectors and an external prover runner."""

from __future__ import annotations

import os
import re
import shutil
import subprocess
import tempfile

from ..errors import SolverUnavailable
from . import formula as F

PROVER_ENV = "SHUFFLE_PROVER"
WIDTH = 64
GUARD = 1 << 32  # bounds stay far from overflow of the 64-bit encoding


def _bv(n):
    return f"(_ bv{n % (1 << WIDTH)} {WIDTH})"


def _sym(name):
    return "|" + name.replace("|", "_").replace("\\", "_") + "|"


_CMP = {"==": "=", "<": "bvslt", "<=": "bvsle", ">": "bvsgt", ">=": "bvsge"}


class _Encoder:
    def __init__(self, readinfo):
        self.readinfo = {r[0]: r for r in readinfo}
        self.consts = []       # declared constant symbols
        self.funs = []         # read variables used
        self.read_terms = []   # (var, encoded index, index term, bound vars) occurrences

    def const(self, name):
        if name not in self.consts:
            self.consts.append(name)
        return _sym(name)

    def term(self, t, bound):
        """Return (value, error) SMT strings for an integer term."""
        if isinstance(t, F.IConst):
            return _bv(t.value), "false"
        if isinstance(t, F.IVar):
            return (_sym(t.name) if t.name in bound else self.const(t.name)), "false"
        if isinstance(t, F.Bound):
            return self.const(f"{t.domain}_{t.which}"), "false"
        if isinstance(t, F.ISub):
            v, e = self.term(t.base, bound)
            return f"(bvsub {v} {_bv(t.amount)})", e
        if isinstance(t, F.RRead):
            iv, ie = self.term(t.index, bound)
            dom = self.readinfo[t.var][1]
            if dom is None:
                oob = f"(not (= {iv} {_bv(0)}))"
            else:
                lo = self.const(f"{dom}_min")
                hi = self.const(f"{dom}_max")
                oob = f"(or (bvslt {iv} {lo}) (bvsgt {iv} {hi}))"
            if t.var not in self.funs:
                self.funs.append(t.var)
            self.read_terms.append((t.var, iv, t.index, frozenset(bound)))
            return f"({_sym('rv_' + t.var)} {iv})", _or(ie, oob)
        raise TypeError(t)

    def formula(self, f, bound=frozenset()):
        """Return (value, error) SMT strings for a formula."""
        if isinstance(f, F.BConst):
            return ("true" if f.value else "false"), "false"
        if isinstance(f, F.ICmp):
            lv, le = self.term(f.left, bound)
            rv, re_ = self.term(f.right, bound)
            if f.op == "!=":
                val = f"(not (= {lv} {rv}))"
            else:
                val = f"({_CMP[f.op]} {lv} {rv})"
            return val, _or(le, re_)
        if isinstance(f, F.FNot):
            v, e = self.formula(f.arg, bound)
            return f"(not {v})", e
        if isinstance(f, F.FAnd):
            return self._fold(f.args, bound, conj=True)
        if isinstance(f, F.FOr):
            return self._fold(f.args, bound, conj=False)
        if isinstance(f, F.FImplies):
            lv, le = self.formula(f.left, bound)
            rv, re_ = self.formula(f.right, bound)
            return f"(=> {lv} {rv})", _or(le, _and(lv, re_))
        if isinstance(f, F.FIff):
            lv, le = self.formula(f.left, bound)
            rv, re_ = self.formula(f.right, bound)
            return f"(= {lv} {rv})", _or(le, re_)
        if isinstance(f, F.NoErr):
            _, e = self.formula(f.arg, bound)
            return f"(not {e})", "false"
        if isinstance(f, (F.FExists, F.FForall)):
            inner = bound | {f.var}
            bv, be = self.formula(f.body, inner)
            x = _sym(f.var)
            lo = self.const(f"{f.domain}_min")
            hi = self.const(f"{f.domain}_max")
            rng = f"(and (bvsle {lo} {x}) (bvsle {x} {hi}))"
            decl = f"(({x} (_ BitVec {WIDTH})))"
            if isinstance(f, F.FExists):
                val = f"(exists {decl} (and {rng} {bv}))"
            else:
                val = f"(forall {decl} (=> {rng} {bv}))"
            err = "false" if be == "false" else f"(exists {decl} (and {rng} {be}))"
            return val, err
        raise TypeError(f)

    def _fold(self, args, bound, conj):
        parts = [self.formula(a, bound) for a in args]
        val = "(and " if conj else "(or "
        val += " ".join(v for v, _ in parts) + ")"
        # error if some argument errs while every earlier one let evaluation continue
        err, prefix = "false", []
        for v, e in parts:
            guard = _and_all(prefix)
            err = _or(err, _and(guard, e))
            prefix.append(v if conj else f"(not {v})")
        return val, err


def _or(a, b):
    if a == "false":
        return b
    if b == "false":
        return a
    return f"(or {a} {b})"


def _and(a, b):
    if a == "true":
        return b
    if b == "true":
        return a
    if a == "false" or b == "false":
        return "false"
    return f"(and {a} {b})"


def _and_all(items):
    out = "true"
    for x in items:
        out = _and(out, x)
    return out


def to_smtlib(obligations, comment=None):
    """Render obligations as one script: sat iff some obligation is violated."""
    obligations = list(obligations)
    readinfo = []
    for ob in obligations:
        for r in ob.reads:
            if r[0] not in [x[0] for x in readinfo]:
                readinfo.append(r)
    enc = _Encoder(readinfo)
    violations, quantified = [], False
    for ob in obligations:
        parts = []
        for g in ob.groups:
            v, e = enc.formula(g)
            parts.append(_and(v, f"(not {e})" if e != "false" else "true"))
        gv, ge = enc.formula(ob.goal)
        parts.append(_or(ge, f"(not {gv})"))
        violations.append(parts)
        quantified = quantified or any(F.has_quantifier(x) for x in (*ob.groups, ob.goal))
        for name, dom in ob.ivars:
            enc.const(name)
    lines = []
    if comment:
        for c in comment.splitlines():
            lines.append(f"; {c}")
    if quantified:
        logic = "UFBV" if enc.funs else "BV"
    else:
        logic = "QF_UFBV" if enc.funs else "QF_BV"
    lines.append(f"(set-logic {logic})")
    for c in enc.consts:
        lines.append(f"(declare-const {_sym(c)} (_ BitVec {WIDTH}))")
    for v in enc.funs:
        lines.append(f"(declare-fun {_sym('rv_' + v)} ((_ BitVec {WIDTH})) (_ BitVec {WIDTH}))")
    # overflow guard: every constant stays within +-2^32
    for c in enc.consts:
        s = _sym(c)
        lines.append(f"(assert (and (bvsge {s} {_bv(-GUARD)}) (bvsle {s} {_bv(GUARD)})))")
    # read values lie in the target domain of the variable
    info = {r[0]: r for r in readinfo}
    for v in enc.funs:
        _, _, lo, hi = info[v]
        lo_s = _bv(lo.value) if isinstance(lo, F.IConst) else enc.const(f"{lo.domain}_{lo.which}")
        hi_s = _bv(hi.value) if isinstance(hi, F.IConst) else enc.const(f"{hi.domain}_{hi.which}")
        f = _sym("rv_" + v)
        if quantified:
            lines.append(f"(assert (forall ((|x| (_ BitVec {WIDTH}))) "
                         f"(and (bvsle {lo_s} ({f} |x|)) (bvsle ({f} |x|) {hi_s}))))")
        else:
            seen = set()
            for var, iv, _, bnd in enc.read_terms:
                if var == v and not bnd and iv not in seen:
                    seen.add(iv)
                    lines.append(f"(assert (and (bvsle {lo_s} ({f} {iv})) (bvsle ({f} {iv}) {hi_s})))")
    if len(violations) == 1:
        for p in violations[0]:
            if p != "true":
                lines.append(f"(assert {p})")
    else:
        alts = [_and_all(parts) for parts in violations]
        lines.append("(assert (or " + " ".join(alts) + "))")
    lines.append("(check-sat)")
    return "\n".join(lines) + "\n", enc


def script_for(obligations, comment=None):
    return to_smtlib(obligations, comment)[0]


def prover_path(path=None):
    path = path or os.environ.get(PROVER_ENV) or "z3"
    found = shutil.which(path) or (path if os.path.isfile(path) else None)
    return found


_VALUE_RE = re.compile(r"\(\s*(\|[^|]*\||\([^()]*\)|[^\s()]+)\s+#(x[0-9a-fA-F]+|b[01]+)\s*\)")


def run_prover(obligations, path=None, timeout=30.0, comment=None):
    """Run an external prover; return (valid, witness or None)."""
    exe = prover_path(path)
    if exe is None:
        raise SolverUnavailable(f"prover {path or os.environ.get(PROVER_ENV) or 'z3'!r} not found")
    script, enc = to_smtlib(obligations, comment)
    names = [_sym(c) for c in enc.consts]
    read_apps = []
    for var, iv, idx, bnd in enc.read_terms:
        if not bnd:
            read_apps.append((var, iv, idx))
    query = names + [f"({_sym('rv_' + v)} {iv})" for v, iv, _ in read_apps]
    extra = f"(get-value ({' '.join(query)}))\n" if query else ""
    with tempfile.NamedTemporaryFile("w", suffix=".smt2", delete=False) as fh:
        fh.write(script + extra)
        fname = fh.name
    try:
        proc = subprocess.run([exe, fname], capture_output=True, text=True, timeout=timeout)
    except subprocess.TimeoutExpired:
        raise SolverUnavailable(f"prover timed out after {timeout}s") from None
    except OSError as exc:
        raise SolverUnavailable(f"cannot run prover: {exc}") from None
    finally:
        os.unlink(fname)
    out = proc.stdout.strip().splitlines()
    verdict = out[0].strip() if out else ""
    if verdict == "unsat":
        return True, None
    if verdict != "sat":
        raise SolverUnavailable(f"prover answered {verdict or proc.stderr.strip()!r}")
    values = {}
    for m in _VALUE_RE.finditer("\n".join(out[1:])):
        key, lit = m.group(1), m.group(2)
        n = int(lit[1:], 16) if lit[0] == "x" else int(lit[1:], 2)
        if n >= 1 << (WIDTH - 1):
            n -= 1 << WIDTH
        values[key.replace("|", "")] = n
    return False, _witness(obligations, enc, values, read_apps)


def _witness(obligations, enc, values, read_apps):
    bounds, quants = {}, {}
    for c in enc.consts:
        v = values.get(c)
        if v is None:
            continue
        m = re.fullmatch(r"(.*)_(min|max)", c)
        if m and not any(c == n for ob in obligations for n, _ in ob.ivars):
            lo, hi = bounds.get(m.group(1), (0, 0))
            bounds[m.group(1)] = (v, hi) if m.group(2) == "min" else (lo, v)
        else:
            quants[c] = v
    witness = {"bounds": bounds, "quantifiers": quants, "reads": {}}
    for var, iv, idx in read_apps:
        val = values.get(f"(rv_{var} {iv})".replace("|", ""))
        if val is None:
            continue
        concrete = _eval_index(idx, witness)
        if concrete is not None:
            witness["reads"][(var, concrete)] = val
    return witness


def _eval_index(t, w):
    if isinstance(t, F.IConst):
        return t.value
    if isinstance(t, F.IVar):
        return w["quantifiers"].get(t.name)
    if isinstance(t, F.Bound):
        lo, hi = w["bounds"].get(t.domain, (None, None))
        return lo if t.which == "min" else hi
    if isinstance(t, F.ISub):
        b = _eval_index(t.base, w)
        return None if b is None else b - t.amount
    if isinstance(t, F.RRead):
        i = _eval_index(t.index, w)
        return w["reads"].get((t.var, i))
    return None
