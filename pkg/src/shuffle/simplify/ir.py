"""Loop/reduction intermediate form, its text dump and an op-counting executor.

Programs are trees of frozen dataclasses.  Execution compiles the tree to a
Python function (optionally jitted with numba) that also counts executed
statements, which is the operation count used for complexity checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, is_dataclass, replace
from typing import Dict, Tuple

import numpy as np

from ..errors import RuntimeFault
from . import kernels as K

# ---------------------------------------------------------------- expressions


@dataclass(frozen=True)
class Const:
    value: object


@dataclass(frozen=True)
class PConst:
    """A probability constant in linear space (becomes its log under to_logspace)."""
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Load:
    array: str
    index: object


@dataclass(frozen=True)
class Bin:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    fn: str
    args: Tuple = ()


@dataclass(frozen=True)
class Select:
    cond: object
    then: object
    else_: object


# ---------------------------------------------------------------- statements


@dataclass(frozen=True)
class Assign:
    name: str
    expr: object


@dataclass(frozen=True)
class Store:
    array: str
    index: object
    expr: object


@dataclass(frozen=True)
class Alloc:
    name: str
    size: object
    fill: object = Const(0.0)


@dataclass(frozen=True)
class Accum:
    """target[index] op= expr; op is + - * logsumexp padd pmul."""
    target: str
    op: str
    expr: object
    index: object = None


@dataclass(frozen=True)
class For:
    var: str
    lo: object
    hi: object  # inclusive
    body: Tuple = ()


@dataclass(frozen=True)
class If:
    cond: object
    then: Tuple = ()
    else_: Tuple = ()


@dataclass(frozen=True)
class SampleCat:
    """array[index] := lo + inverse-CDF draw from log weights w[0..size-1] at uniform u."""
    array: str
    index: object
    weights: str
    lo: object
    u: object
    log: bool = True


@dataclass(frozen=True)
class RealIntegral:
    """result := log of the integral of exp(expr) over a real variable (body computes expr)."""
    result: str
    var: str
    body: Tuple
    expr: object


@dataclass(frozen=True)
class RealSample:
    """var := a draw proportional to exp(expr) (body computes expr)."""
    var: str
    body: Tuple
    expr: object
    u: object


@dataclass(frozen=True)
class Return:
    expr: object


IDENTITY = {"+": 0, "-": 0, "*": 1, "padd": 0.0, "pmul": 1.0, "logsumexp": -math.inf}


@dataclass(frozen=True)
class IRProgram:
    name: str
    scalars: Tuple[str, ...] = ()
    arrays: Tuple[str, ...] = ()
    body: Tuple = ()
    space: str = "log"
    value_ranges: Tuple = ()  # ((array, lo expr, hi expr), ...) for integer-valued arrays
    outputs: Tuple[str, ...] = ()
    shapes: Tuple = ()  # ((array, size expr), ...)

    def shape(self, array):
        for a, size in self.shapes:
            if a == array:
                return size
        return None

    def value_range(self, array):
        for a, lo, hi in self.value_ranges:
            if a == array:
                return lo, hi
        return None


# ---------------------------------------------------------------- traversal


def children(node):
    for f in fields(node):
        v = getattr(node, f.name)
        if isinstance(v, tuple):
            for x in v:
                if is_dataclass(x):
                    yield x
        elif is_dataclass(v):
            yield v


def walk(node):
    stack = list(reversed(node)) if isinstance(node, tuple) else [node]
    while stack:
        n = stack.pop()
        yield n
        stack.extend(reversed(list(children(n))))


def map_expr(node, fn):
    """Rebuild node bottom-up applying fn to every sub-node."""
    if isinstance(node, tuple):
        return tuple(map_expr(x, fn) for x in node)
    if not is_dataclass(node):
        return node
    changes = {}
    for f in fields(node):
        v = getattr(node, f.name)
        nv = map_expr(v, fn) if (is_dataclass(v) or isinstance(v, tuple)) else v
        if nv is not v:
            changes[f.name] = nv
    node = replace(node, **changes) if changes else node
    return fn(node)


def reads(node):
    """Names of variables and arrays read by an expression or statement tree."""
    out = set()
    for n in walk(node):
        if isinstance(n, Var):
            out.add(n.name)
        elif isinstance(n, Load):
            out.add(n.array)
        elif isinstance(n, Accum):
            out.add(n.target)
    return out


def writes(node):
    """Names assigned, stored, accumulated or allocated anywhere in node."""
    out = set()
    for n in walk(node):
        if isinstance(n, (Assign, Alloc)):
            out.add(n.name)
        elif isinstance(n, (Store, SampleCat)):
            out.add(n.array)
        elif isinstance(n, Accum):
            out.add(n.target)
        elif isinstance(n, For):
            out.add(n.var)
        elif isinstance(n, RealIntegral):
            out.add(n.result)
        elif isinstance(n, RealSample):
            out.add(n.var)
    return out


def subst_var(node, name, expr):
    return map_expr(node, lambda n: expr if isinstance(n, Var) and n.name == name else n)


# ---------------------------------------------------------------- text dump

_INFIX = {"+", "-", "*", "/", "//", "%", "==", "!=", "<", "<=", ">", ">=", "and", "or",
          "pmul", "pdiv", "ldiv"}


def show_expr(e):
    if isinstance(e, Const):
        v = e.value
        if isinstance(v, float) and math.isinf(v):
            return "-inf" if v < 0 else "inf"
        return repr(v)
    if isinstance(e, PConst):
        return f"p{e.value!r}"
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Load):
        return f"{e.array}[{show_expr(e.index)}]"
    if isinstance(e, Bin):
        if e.op in _INFIX:
            sym = {"pmul": "*p", "pdiv": "/p", "ldiv": "/log"}.get(e.op, e.op)
            return f"({show_expr(e.left)} {sym} {show_expr(e.right)})"
        return f"{e.op}({show_expr(e.left)}, {show_expr(e.right)})"
    if isinstance(e, Call):
        return f"{e.fn}({', '.join(show_expr(a) for a in e.args)})"
    if isinstance(e, Select):
        return f"({show_expr(e.then)} if {show_expr(e.cond)} else {show_expr(e.else_)})"
    raise TypeError(f"not an IR expression: {e!r}")


def _dump(stmts, depth, out):
    pad = "  " * depth
    for s in stmts:
        if isinstance(s, Assign):
            out.append(f"{pad}{s.name} = {show_expr(s.expr)}")
        elif isinstance(s, Store):
            out.append(f"{pad}{s.array}[{show_expr(s.index)}] = {show_expr(s.expr)}")
        elif isinstance(s, Alloc):
            out.append(f"{pad}{s.name} = alloc({show_expr(s.size)}, {show_expr(s.fill)})")
        elif isinstance(s, Accum):
            tgt = s.target if s.index is None else f"{s.target}[{show_expr(s.index)}]"
            out.append(f"{pad}{tgt} {s.op}= {show_expr(s.expr)}")
        elif isinstance(s, For):
            out.append(f"{pad}for {s.var} in {show_expr(s.lo)}..{show_expr(s.hi)}:")
            _dump(s.body, depth + 1, out)
        elif isinstance(s, If):
            out.append(f"{pad}if {show_expr(s.cond)}:")
            _dump(s.then, depth + 1, out)
            if s.else_:
                out.append(f"{pad}else:")
                _dump(s.else_, depth + 1, out)
        elif isinstance(s, SampleCat):
            out.append(f"{pad}{s.array}[{show_expr(s.index)}] = {show_expr(s.lo)} + "
                       f"sample_categorical({s.weights}, {show_expr(s.u)})"
                       + ("" if s.log else " [linear weights]"))
        elif isinstance(s, RealIntegral):
            out.append(f"{pad}{s.result} = integrate over {s.var}:")
            _dump(s.body, depth + 1, out)
            out.append(f"{pad}  => {show_expr(s.expr)}")
        elif isinstance(s, RealSample):
            out.append(f"{pad}{s.var} = sample over {s.var} at {show_expr(s.u)}:")
            _dump(s.body, depth + 1, out)
            out.append(f"{pad}  => {show_expr(s.expr)}")
        elif isinstance(s, Return):
            out.append(f"{pad}return {show_expr(s.expr)}")
        else:
            raise TypeError(f"not an IR statement: {s!r}")


def dumps(prog):
    """Deterministic, diff-stable text form, one statement per line."""
    head = [f"program {prog.name} [{prog.space}]",
            f"  scalars: {', '.join(prog.scalars) or '-'}",
            f"  arrays: {', '.join(prog.arrays) or '-'}"]
    if prog.value_ranges:
        head.append("  ranges: " + ", ".join(f"{a} in {show_expr(lo)}..{show_expr(hi)}"
                                           for a, lo, hi in prog.value_ranges))
    body = []
    _dump(prog.body, 1, body)
    return "\n".join(head + body) + "\n"


# ---------------------------------------------------------------- code generation

def _ident(name):
    return "v_" + "".join(c if c.isalnum() else "_" for c in name)


class _Gen:
    def __init__(self):
        self.lines = []
        self.helpers = set()

    def helper(self, name):
        self.helpers.add(name)
        return "_k_" + name

    def e(self, x):
        if isinstance(x, Const):
            v = x.value
            if isinstance(v, bool):
                return "1" if v else "0"
            if isinstance(v, float) and math.isinf(v):
                return "NEG_INF" if v < 0 else "POS_INF"
            return repr(v)
        if isinstance(x, PConst):
            return repr(float(x.value))
        if isinstance(x, Var):
            return _ident(x.name)
        if isinstance(x, Load):
            return f"{_ident(x.array)}[{self.idx(x.index)}]"
        if isinstance(x, Bin):
            a, b = self.e(x.left), self.e(x.right)
            if x.op in ("+", "-", "*", "/", "//", "%", "==", "!=", "<", "<=", ">", ">="):
                return f"({a} {x.op} {b})"
            if x.op == "and":
                return f"({a} and {b})"
            if x.op == "or":
                return f"({a} or {b})"
            if x.op == "pmul":
                return f"({a} * {b})"
            if x.op in ("min", "max", "pdiv", "ldiv"):
                return f"{self.helper(x.op)}({a}, {b})"
            raise TypeError(f"unknown operator {x.op}")
        if isinstance(x, Call):
            return f"{self.helper(x.fn)}({', '.join(self.e(a) for a in x.args)})"
        if isinstance(x, Select):
            return f"({self.e(x.then)} if {self.e(x.cond)} else {self.e(x.else_)})"
        raise TypeError(f"not an IR expression: {x!r}")

    def idx(self, x):
        if isinstance(x, Const) and isinstance(x.value, int):
            return str(x.value)
        return f"int({self.e(x)})"

    def emit(self, depth, text):
        self.lines.append("    " * depth + text)

    def stmts(self, body, depth):
        if not body:
            self.emit(depth, "pass")
        for s in body:
            self.stmt(s, depth)

    def stmt(self, s, d):
        if isinstance(s, For):
            self.emit(d, f"for {_ident(s.var)} in range({self.idx(s.lo)}, {self.idx(s.hi)} + 1):")
            self.emit(d + 1, "ops += 1")
            self.stmts(s.body, d + 1)
            return
        self.emit(d, "ops += 1")
        if isinstance(s, Assign):
            self.emit(d, f"{_ident(s.name)} = {self.e(s.expr)}")
        elif isinstance(s, Store):
            self.emit(d, f"{_ident(s.array)}[{self.idx(s.index)}] = {self.e(s.expr)}")
        elif isinstance(s, Alloc):
            self.emit(d, f"{_ident(s.name)} = np.full({self.idx(s.size)}, {self.e(s.fill)}, "
                      "dtype=np.float64)")
        elif isinstance(s, Accum):
            tgt = _ident(s.target) if s.index is None else \
                f"{_ident(s.target)}[{self.idx(s.index)}]"
            v = self.e(s.expr)
            if s.op in ("+", "padd"):
                self.emit(d, f"{tgt} += {v}")
            elif s.op == "-":
                self.emit(d, f"{tgt} -= {v}")
            elif s.op in ("*", "pmul"):
                self.emit(d, f"{tgt} *= {v}")
            elif s.op == "logsumexp":
                self.emit(d, f"{tgt} = {self.helper('logaddexp')}({tgt}, {v})")
            else:
                raise TypeError(f"unknown accumulation {s.op}")
        elif isinstance(s, If):
            self.emit(d, f"if {self.e(s.cond)}:")
            self.stmts(s.then, d + 1)
            if s.else_:
                self.emit(d, "else:")
                self.stmts(s.else_, d + 1)
        elif isinstance(s, SampleCat):
            self.emit(d, f"{_ident(s.array)}[{self.idx(s.index)}] = {self.e(s.lo)} + "
                      f"{self.helper('sample_logweights' if s.log else 'sample_weights')}"
                      f"({_ident(s.weights)}, {self.e(s.u)})")
        elif isinstance(s, RealIntegral):
            self.emit(d, f"raise {self.helper('intractable')}()")
        elif isinstance(s, RealSample):
            self.emit(d, f"raise {self.helper('unsampleable')}()")
        elif isinstance(s, Return):
            self.emit(d, f"return {self.e(s.expr)}, ops")
        else:
            raise TypeError(f"not an IR statement: {s!r}")


class IntractableSignal(Exception):
    pass


class UnsampleableSignal(Exception):
    pass


def _intractable():
    return IntractableSignal()


def _unsampleable():
    return UnsampleableSignal()


@dataclass
class IRResult:
    value: float
    arrays: Dict[str, np.ndarray]
    ops: int


@dataclass
class Compiled:
    prog: IRProgram
    fn: object
    source: str
    jit: bool = False

    def __call__(self, inputs):
        args = []
        arrays = {}
        for a in self.prog.arrays:
            arr = np.array(inputs[a], dtype=np.float64, copy=True).reshape(-1)
            arrays[a] = arr
            args.append(arr)
        for s in self.prog.scalars:
            args.append(inputs[s])
        try:
            value, ops = self.fn(*args)
        except ZeroDivisionError:
            raise RuntimeFault("DivZero", "division by a zero density") from None
        except IntractableSignal:
            raise RuntimeFault("IntractableIntegral", "integral over a real variable has no "
                               "closed form") from None
        except UnsampleableSignal:
            raise RuntimeFault("UnsampleableDensity", "no closed-form sampler") from None
        except ValueError:
            raise RuntimeFault("UnsampleableDensity", "all weights are zero") from None
        except IndexError as exc:
            raise RuntimeFault("EnvMiss", f"array access out of range: {exc}") from None
        return IRResult(float(value), arrays, int(ops))


_CACHE: Dict[tuple, Compiled] = {}


def compile_ir(prog, jit=False):
    """Compile prog to a callable taking {name: value} and returning IRResult."""
    key = (prog, jit)
    if key in _CACHE:
        return _CACHE[key]
    g = _Gen()
    params = [_ident(a) for a in prog.arrays] + [_ident(s) for s in prog.scalars]
    g.emit(0, f"def _ir_fn({', '.join(params)}):")
    g.emit(1, "ops = 0")
    g.stmts(prog.body, 1)
    g.emit(1, "return 0.0, ops")
    source = "\n".join(g.lines) + "\n"
    scope = {"np": np, "math": math, "NEG_INF": -math.inf, "POS_INF": math.inf}
    for h in g.helpers:
        fn = {"intractable": _intractable, "unsampleable": _unsampleable}.get(h)
        if fn is None:
            fn = K.HELPERS[h]
        scope["_k_" + h] = K.jitted(h) if jit and h not in ("intractable", "unsampleable") \
            else fn
    exec(compile(source, f"<ir {prog.name}>", "exec"), scope)
    fn = scope["_ir_fn"]
    if jit:
        import numba
        fn = numba.njit(cache=False)(fn)
    out = Compiled(prog, fn, source, jit)
    _CACHE[key] = out
    return out


def run_ir(prog, inputs, jit=False):
    """Execute prog on inputs (arrays copied); returns IRResult with final arrays and op count."""
    return compile_ir(prog, jit)(inputs)

