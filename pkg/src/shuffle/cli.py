"""Command-line driver: check, run, bench, emit-smt and dump-ir.

Exit codes: 0 success, 1 input/type/model error, 2 prover unavailable,
3 runtime or lowering error.  No output file is written on a nonzero exit.
"""

from __future__ import annotations

import argparse
import importlib.util
import itertools
import json
import statistics
import sys
import time
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .data import Data, DataError, load_data
from .errors import (LoweringError, ModelError, ParseError, RuntimeFault, ShuffleTypeError,
                     SolverUnavailable, UnsupportedConstraint)
from .logic import queries as Q
from .logic.encode import set_vars
from .surface import collect_macros, parse_inference, parse_model, resolve_model
from .surface import syntax as S

SCHEMA = 1


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    model: str
    inference: List[str]
    data: Optional[str] = None
    entry: Optional[str] = None
    samples: int = 1
    fix_iters: int = 100
    burn_in: int = 0
    seed: int = 0
    opt: bool = True
    solver: str = "enumerative:6"
    out: Optional[str] = None
    args: tuple = ()

    def __post_init__(self):
        if self.samples < 1:
            raise UsageError("--samples must be at least 1")
        if self.fix_iters < 0 or self.burn_in < 0:
            raise UsageError("--fix-iters and --burn-in must be non-negative")


# ---------------------------------------------------------------- loading

def make_solver(spec):
    kind, _, arg = (spec or "enumerative").partition(":")
    if kind == "enumerative":
        cap = int(arg) if arg else 6
        if cap < 1:
            raise UsageError("enumerative cap must be at least 1")
        return Q.EnumerativeSolver(cap)
    if kind == "external":
        return Q.ExternalSolver(arg or None)
    raise UsageError(f"unknown solver {spec!r} (use enumerative[:cap] or external[:path])")


def _read(path):
    try:
        with open(path) as fh:
            return fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def load_model(path):
    try:
        return resolve_model(parse_model(_read(path)))
    except ParseError as exc:
        raise ParseError(f"{path}: {exc}") from None


def load_program(paths):
    defs, macros = [], {}
    for path in paths:
        try:
            items = parse_inference(_read(path), macros)
        except ParseError as exc:
            raise ParseError(f"{path}: {exc}") from None
        macros.update(collect_macros(items))
        defs += items
    return defs


def check_all(model, defs, solver):
    from .typecheck import check_model, check_program
    result = check_model(model, solver)
    return check_program(model, defs, solver, model_result=result)


def _find(defs, model, name):
    for d in defs:
        if isinstance(d, S.Definition) and d.name == name:
            return d
    d = model.density(name)
    if d is None:
        raise UsageError(f"no definition named {name!r}")
    return d


def _quant_args(defn, pairs, data):
    given = {}
    for p in pairs:
        k, _, v = p.partition("=")
        try:
            given[k.strip()] = int(v)
        except ValueError:
            raise UsageError(f"--arg expects name=integer, got {p!r}") from None
    out = []
    for q, dom in defn.quantifiers:
        if q in given:
            out.append(given.pop(q))
        else:
            out.append(data.bounds(dom)[1])  # default: the largest index
    if given:
        raise UsageError(f"{defn.name} has no quantifier {', '.join(given)}")
    return out


def _write(path, text):
    if path is None:
        sys.stdout.write(text)
        return
    with open(path, "w") as fh:
        fh.write(text)


# ---------------------------------------------------------------- commands

def cmd_check(ns):
    solver = make_solver(ns.solver)
    model = load_model(ns.model)
    defs = load_program(ns.inference)
    report = check_all(model, defs, solver)
    doc = report.to_json()
    doc["model"] = ns.model
    doc["inference"] = list(ns.inference)
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    sys.stdout.write(report.to_text())
    if ns.out:
        _write(ns.out, text)
    elif ns.json:
        sys.stdout.write(text)
    return 0


def _location_values(env, var, r):
    vals = env.values[var][r]
    if env.model.variables[var].index_domain is None:
        v = vals[0]
        return float(v) if vals.dtype == float else int(v)
    return [float(v) if vals.dtype == float else int(v) for v in vals]


def _summary(env, targets, weights=None):
    out = {}
    for var in targets:
        vals = env.values[var].astype(float)
        if weights is None:
            mean = vals.mean(axis=0)
        else:
            mean = (weights[:, None] * vals).sum(axis=0)
        out[var] = float(mean[0]) if env.model.variables[var].index_domain is None \
            else [float(x) for x in mean]
    return out


def run_entry(cfg: RunConfig, solver=None):
    """Execute cfg.entry; returns the JSON-ready result document."""
    from .runtime import Env, Interpreter, RandomSource
    model = load_model(cfg.model)
    defs = load_program(cfg.inference)
    check_all(model, defs, solver or make_solver(cfg.solver))
    data = load_data(cfg.data, model) if cfg.data else Data()
    if not cfg.entry:
        raise UsageError("--entry is required")
    defn = _find(defs, model, cfg.entry)
    args = _quant_args(defn, cfg.args, data)
    term = S.Invoke(defn.name, tuple(S.Num(a) for a in args))
    kind = defn.type.kind
    targets = set_vars(defn.type.targets)
    doc = {"schema": SCHEMA, "entry": defn.name, "kind": kind, "seed": cfg.seed,
           "arguments": dict(zip([q for q, _ in defn.quantifiers], args))}
    if kind == "density":
        env1 = Env.from_data(model, data)
        missing = [(v, i) for v in targets for i in env1.indices(v)
                   if not env1.defined[v][0, i - env1.lo(v)]]
        if any(model.variables[v].target == "Real" for v, _ in missing):
            raise UsageError("unobserved real targets: give them values in the data file")
        ranges = [range(env1.target_range(v)[0], env1.target_range(v)[1] + 1)
                  for v, _ in missing]
        rows = list(itertools.product(*ranges))
        if len(rows) > 1 << 16:
            raise UsageError("density table too large; observe more target values")
        env = Env.from_data(model, data, len(rows))
        for k, (v, i) in enumerate(missing):
            env = env.write_column(v, i, np.array([row[k] for row in rows]))
        interp = Interpreter(model, defs, data)
        lp = interp.density(term, env)
        doc["table"] = [{"assignment": {f"{v}[{i}]" if model.variables[v].index_domain
                                        else v: val for (v, i), val in zip(missing, row)},
                         "log_density": float(x), "density": float(np.exp(x))}
                        for row, x in zip(rows, lp)]
        return doc
    R = cfg.samples
    env = Env.from_data(model, data, R)
    rs = RandomSource(cfg.seed, R)
    interp = Interpreter(model, defs, data, cfg.fix_iters + cfg.burn_in)
    if kind in ("sampler", "kernel"):
        if kind == "kernel":
            env = interp.run_fix(term, env, rs, cfg.fix_iters + cfg.burn_in)
        else:
            env = interp.sample(term, env, rs)
        doc["samples"] = [{v: _location_values(env, v, r) for v in targets} for r in range(R)]
        doc["summary"] = {"mean": _summary(env, targets)}
        return doc
    logw, env = interp.estimate(term, env, rs)
    w = np.exp(logw - np.max(logw)) if np.isfinite(logw).any() else np.zeros(R)
    total = w.sum()
    if total == 0:
        raise RuntimeFault("DivZero", "every particle has zero weight")
    wn = w / total
    doc["samples"] = [dict({v: _location_values(env, v, r) for v in targets},
                           log_weight=float(logw[r])) for r in range(R)]
    doc["summary"] = {"weighted_mean": _summary(env, targets, wn),
                      "effective_sample_size": float(1.0 / np.sum(wn * wn))}
    return doc


def cmd_run(ns):
    cfg = RunConfig(ns.model, ns.inference, ns.data, ns.entry, ns.samples, ns.fix_iters,
                    ns.burn_in, ns.seed, not ns.no_opt, ns.solver, ns.out, tuple(ns.arg or ()))
    doc = run_entry(cfg)
    text = json.dumps(doc, indent=1, sort_keys=True) + "\n"
    if "summary" in doc:
        sys.stdout.write(json.dumps({"entry": doc["entry"], "summary": doc["summary"]},
                                    sort_keys=True) + "\n")
    if cfg.out:
        _write(cfg.out, text)
    elif "table" in doc:
        sys.stdout.write(text)
    return 0


def _bench_case(ns):
    from . import incremental as INC
    rng = np.random.default_rng(ns.seed)
    n = ns.size
    if ns.target == "prefix":
        return INC.prefix_sum_program(), {"N": n, "A": rng.random(n), "B": np.zeros(n)}
    if ns.target == "keyed":
        m = max(1, ns.keys)
        return INC.appendix_program(), {"N": n, "M": m, "x": rng.integers(0, m, n),
                                        "y": rng.integers(0, m, n), "a": rng.random(n),
                                        "b": np.zeros(n)}
    if ns.target == "gmm":
        k = max(1, ns.keys)
        centers = np.linspace(-3.0 * k, 3.0 * k, k)
        x = centers[rng.integers(0, k, n)] + rng.normal(size=n)
        return INC.gmm_gibbs_program(), {"N": n, "K": k, "mu0": 0.0, "sd0": 10.0, "sd": 1.0,
                                         "alpha": 1.0, "x": x, "z": rng.integers(0, k, n),
                                         "U": rng.random(n)}
    raise UsageError(f"unknown benchmark {ns.target!r}")


def bench(prog, inputs, runs=20, jit=True, baseline="no-opt"):
    """Mean and standard deviation of wall time for optimized and baseline programs."""
    from .incremental import optimize
    from .simplify.ir import compile_ir
    variants = {"opt": optimize(prog)}
    variants["baseline"] = prog if baseline == "no-opt" else variants["opt"]
    out = {}
    for label, p in variants.items():
        fn = compile_ir(p, jit)
        result = fn(inputs)  # warm-up (and compilation)
        times = []
        for _ in range(runs):
            t0 = time.perf_counter()
            fn(inputs)
            times.append(time.perf_counter() - t0)
        out[label] = {"mean_s": statistics.fmean(times),
                      "stdev_s": statistics.stdev(times) if len(times) > 1 else 0.0,
                      "ops": result.ops}
    out["ratio"] = out["baseline"]["mean_s"] / out["opt"]["mean_s"]
    out["baseline_mode"] = baseline
    return out


def cmd_bench(ns):
    if ns.runs < 1:
        raise UsageError("--runs must be at least 1")
    prog, inputs = _bench_case(ns)
    jit = not ns.no_jit and importlib.util.find_spec("numba") is not None
    res = bench(prog, inputs, ns.runs, jit, "opt" if ns.no_opt else "no-opt")
    res.update({"jit": jit, "schema": SCHEMA, "target": ns.target, "size": ns.size, "runs": ns.runs})
    lines = [f"{'mode':<10}{'mean (s)':>14}{'stdev (s)':>14}{'ops':>14}"]
    for label in ("baseline", "opt"):
        r = res[label]
        name = res["baseline_mode"] if label == "baseline" else "opt"
        lines.append(f"{name:<10}{r['mean_s']:>14.6g}{r['stdev_s']:>14.3g}{r['ops']:>14}")
    lines.append(f"ratio {res['ratio']:.3g}")
    sys.stdout.write("\n".join(lines) + "\n")
    if ns.out:
        _write(ns.out, json.dumps(res, indent=2, sort_keys=True) + "\n")
    return 0


def cmd_emit_smt(ns):
    solver = Q.RecordingSolver(make_solver(ns.solver))
    model = load_model(ns.model)
    defs = load_program(ns.inference)
    check_all(model, defs, solver)
    seen, parts = set(), []
    for ob, verdict in solver.log:
        if ob in seen:
            continue
        seen.add(ob)
        parts.append(f"; verdict under {solver.name}: {verdict.kind}\n" + Q.emit_smtlib(ob))
    _write(ns.out, "(reset)\n".join(parts))
    return 0


def cmd_dump_ir(ns):
    from .incremental import optimize
    from .simplify import dumps, lower
    model = load_model(ns.model)
    defs = load_program(ns.inference)
    check_all(model, defs, make_solver(ns.solver))
    names = [ns.entry] if ns.entry else [d.name for d in defs if isinstance(d, S.Definition)]
    out = []
    for name in names:
        prog = lower(model, _find(defs, model, name), defs)
        if not ns.no_opt:
            prog = optimize(prog)
        out.append(dumps(prog))
    _write(ns.out, "\n".join(out))
    return 0


# ---------------------------------------------------------------- entry point

def build_parser():
    p = argparse.ArgumentParser(prog="shuffle", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, entry=False):
        sp.add_argument("model", help="model source (.shm)")
        sp.add_argument("inference", nargs="*", help="inference sources (.shi), in order")
        sp.add_argument("--solver", default="enumerative:6",
                        help="enumerative[:cap] or external[:path] (default enumerative:6)")
        sp.add_argument("--out", help="output file (default: standard output)")
        if entry:
            sp.add_argument("--entry", help="definition to use")

    sp = sub.add_parser("check", help="type-check and print the assumption log")
    common(sp)
    sp.add_argument("--json", action="store_true", help="also print the JSON report")
    sp.set_defaults(fn=cmd_check)

    sp = sub.add_parser("run", help="run a definition on data")
    common(sp, entry=True)
    sp.add_argument("--data", help="JSON data file")
    sp.add_argument("--samples", type=int, default=1, help="replicas (chains or particles)")
    sp.add_argument("--fix-iters", type=int, default=100, help="kernel iterations per fix")
    sp.add_argument("--burn-in", type=int, default=0, help="extra kernel iterations per fix")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--no-opt", action="store_true", help="accepted for symmetry; run uses "
                    "the interpreter")
    sp.add_argument("--arg", action="append", help="quantifier value, name=integer")
    sp.set_defaults(fn=cmd_run)

    sp = sub.add_parser("bench", help="time optimized against unoptimized IR")
    sp.add_argument("target", choices=["prefix", "keyed", "gmm"])
    sp.add_argument("--size", type=int, default=1 << 14)
    sp.add_argument("--keys", type=int, default=4, help="key values or clusters")
    sp.add_argument("--runs", type=int, default=20)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--no-opt", action="store_true",
                    help="compare the optimized program with itself")
    sp.add_argument("--no-jit", action="store_true", help="run the IR as plain Python")
    sp.add_argument("--out")
    sp.set_defaults(fn=cmd_bench)

    sp = sub.add_parser("emit-smt", help="write every checked obligation as SMT-LIB")
    common(sp)
    sp.set_defaults(fn=cmd_emit_smt)

    sp = sub.add_parser("dump-ir", help="print lowered (and optimized) IR")
    common(sp, entry=True)
    sp.add_argument("--no-opt", action="store_true", help="skip incrementalization")
    sp.set_defaults(fn=cmd_dump_ir)
    return p


def main(argv=None):
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        return ns.fn(ns)
    except SolverUnavailable as exc:
        err, code = f"prover unavailable: {exc}", 2
    except (RuntimeFault, LoweringError) as exc:
        err, code = f"runtime error: {exc}", 3
    except ShuffleTypeError as exc:
        err, code = f"type error: {exc}", 1
    except ModelError as exc:
        err, code = f"invalid model: {exc}", 1
    except (ParseError, DataError, UsageError, UnsupportedConstraint) as exc:
        err, code = f"error: {exc}", 1
    sys.stderr.write(err + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
