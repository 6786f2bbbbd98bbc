"""Recursive-descent parser for models (.shm) and inference programs (.shi)."""

from __future__ import annotations

from ..errors import ParseError
from . import syntax as S
from .lexer import tokenize

PRIMITIVES = ("flip", "normal", "uniform", "categorical", "dirichlet")
CMP_OPS = ("==", "!=", "<", "<=", ">", ">=")


class _Backtrack(Exception):
    pass


class Parser:
    def __init__(self, source, macros=None):
        self.toks = tokenize(source)
        self.i = 0
        self.macros = dict(macros or {})
        self.macro_params = None  # name -> kind while parsing a macro body
        self.furthest = (0, set())

    # ------------------------------------------------------------ token helpers

    def peek(self, k=0):
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text, k=0):
        t = self.peek(k)
        return t.text == text and t.kind in ("op", "keyword")

    def at_kind(self, kind, k=0):
        return self.peek(k).kind == kind

    def advance(self):
        t = self.peek()
        self.i += 1
        return t

    def accept(self, text):
        if self.at(text):
            return self.advance()
        self._note(text)
        return None

    def expect(self, text):
        t = self.accept(text)
        if t is None:
            self.fail(f"unexpected {self.peek().text!r}")
        return t

    def ident(self):
        if self.at_kind("ident"):
            return self.advance()
        self._note("identifier")
        self.fail(f"unexpected {self.peek().text!r}")

    def _note(self, expected):
        far, exp = self.furthest
        if self.i > far:
            self.furthest = (self.i, {expected})
        elif self.i == far:
            exp.add(expected)

    def fail(self, message, tok=None):
        tok = tok or self.peek()
        far, exp = self.furthest
        expected = exp if far == self.i else ()
        raise ParseError(message, tok.line, tok.col, expected)

    def attempt(self, fn):
        """Run fn; on ParseError restore the position and return None."""
        saved = self.i
        try:
            return fn()
        except (ParseError, _Backtrack):
            self.i = saved
            return None

    # ------------------------------------------------------------ top level

    def model(self):
        start = self.expect("model")
        self.expect("{")
        items, seen = [], {}
        while not self.at("}"):
            item = self.model_item()
            if item.name in seen:
                raise ParseError(f"duplicate name {item.name!r}", *item.pos)
            seen[item.name] = item
            items.append(item)
            if not self.accept(";"):
                break
        self.expect("}")
        if not self.at_kind("eof"):
            self.fail("trailing input after model")
        return S.Model(tuple(items), pos=start.pos)

    def model_item(self):
        t = self.peek()
        if self.accept("domain"):
            return S.DomainDecl(self.ident().text, pos=t.pos)
        if self.accept("variable"):
            target = self.ident().text
            index = None
            if self.accept("["):
                index = self.ident().text
                self.expect("]")
            return S.VarDecl(self.ident().text, index, target, pos=t.pos)
        if self.at("def"):
            return self.definition()
        self._note("domain")
        self._note("variable")
        self._note("def")
        self.fail(f"unexpected {t.text!r}")

    def program(self):
        items, seen = [], set()
        while not self.at_kind("eof"):
            item = self.definition()
            if item.name in seen:
                raise ParseError(f"duplicate name {item.name!r}", *item.pos)
            seen.add(item.name)
            items.append(item)
            if isinstance(item, S.MacroDef):
                self.macros[item.name] = item
            if not self.accept(";"):
                break
        if not self.at_kind("eof"):
            self.fail(f"unexpected {self.peek().text!r}")
        return items

    def definition(self):
        start = self.expect("def")
        if self.accept("macro"):
            return self.macro_def(start)
        modifier = "plain"
        if self.accept("rec"):
            modifier = "rec"
        elif self.accept("independent"):
            modifier = "independent"
        name = self.ident().text
        self.expect("(")
        quants = []
        if not self.at(")"):
            while True:
                q = self.ident().text
                self.expect("in")
                quants.append((q, self.ident().text))
                if not self.accept(","):
                    break
        self.expect(")")
        self.expect(":")
        dtype = self.dist_type()
        self.expect("=")
        body = self.term()
        return S.Definition(modifier, name, tuple(quants), dtype, body, pos=start.pos)

    def macro_def(self, start):
        name = self.ident().text
        self.expect("(")
        params = []
        if not self.at(")"):
            while True:
                params.append(self.ident().text)
                if not self.accept(","):
                    break
        self.expect(")")
        if len(set(params)) != len(params):
            raise ParseError(f"repeated macro parameter in {name!r}", *start.pos)
        self.expect("=")
        self.macro_params = {p: None for p in params}
        try:
            body = self.term()
            kinds = self.macro_params
        finally:
            self.macro_params = None
        for node in S.walk(body):
            if isinstance(node, S.Invoke) and node.name == name:
                raise ParseError(f"macro {name!r} cannot be recursive", *start.pos)
        return S.MacroDef(name, tuple(params), tuple(kinds[p] or "term" for p in params),
                          body, pos=start.pos)

    def _use_param(self, name, kind, tok):
        prev = self.macro_params[name]
        if prev is not None and prev != kind:
            raise ParseError(f"macro parameter {name!r} used as both {prev} and {kind}",
                             tok.line, tok.col)
        self.macro_params[name] = kind

    # ------------------------------------------------------------ types

    def dist_type(self):
        t = self.peek()
        if not (t.kind == "keyword" and t.text in S.KINDS):
            for k in S.KINDS:
                self._note(k)
            self.fail(f"unexpected {t.text!r}")
        kind = self.advance().text
        self.expect("(")
        targets, phi = self.type_items()
        conditioned = ()
        if phi is None and self.accept("|"):
            conditioned, phi = self.type_items()
        self.expect(")")
        return S.DistTypeExpr(kind, targets, conditioned,
                              S.TRUE if phi is None else phi, pos=t.pos)

    def type_items(self):
        """Comma-separated varsets, optionally ending in a constraint."""
        sets = []
        if self.at(")") or self.at("|"):
            return (), None
        while True:
            vs = self.attempt(self._varset_item)
            if vs is None:
                return tuple(sets), self.constraint()
            sets.append(vs)
            if not self.accept(","):
                return tuple(sets), None

    def _varset_item(self):
        vs = self.varset()
        if not (self.at(",") or self.at(")") or self.at("|")):
            raise _Backtrack()
        return vs

    # ------------------------------------------------------------ variable sets

    def varsets(self):
        out = [self.varset()]
        while self.at(","):
            saved = self.i
            self.advance()
            vs = self.attempt(self.varset)
            if vs is None:
                self.i = saved
                break
            out.append(vs)
        return tuple(out)

    def varset(self):
        t = self.peek()
        if self.at("("):
            self.advance()
            cond = self.constraint()
            self.expect("?")
            then = self.varsets()
            self.expect(":")
            else_ = self.varsets()
            self.expect(")")
            return S.Choice(cond, then, else_, pos=t.pos)
        name = self.ident().text
        if self.macro_params is not None and name in self.macro_params:
            self._use_param(name, "varset", t)
            return S.MacroParam(name, pos=t.pos)
        if self.accept("{"):
            binder = self.ident().text
            self.expect("in")
            dom = self.ident().text
            self.expect(":")
            cond = self.constraint()
            self.expect("}")
            return S.Comp(name, binder, dom, cond, pos=t.pos)
        if self.accept("["):
            idx = self.index()
            self.expect("]")
            return S.Indexed(name, idx, pos=t.pos)
        return S.Whole(name, pos=t.pos)

    # ------------------------------------------------------------ constraints

    def constraint(self):
        left = self.conj()
        while self.at("||"):
            t = self.advance()
            left = S.Or(left, self.conj(), pos=t.pos)
        return left

    def conj(self):
        left = self.cunary()
        while self.at("&&"):
            t = self.advance()
            left = S.And(left, self.cunary(), pos=t.pos)
        return left

    def cunary(self):
        t = self.peek()
        if self.accept("!"):
            return S.Not(self.cunary(), pos=t.pos)
        if self.accept("true"):
            return S.BoolLit(True, pos=t.pos)
        if self.accept("false"):
            return S.BoolLit(False, pos=t.pos)
        if self.at("("):
            cmp = self.attempt(self.comparison)
            if cmp is not None:
                return cmp
            self.advance()
            inner = self.constraint()
            self.expect(")")
            return inner
        return self.comparison()

    def comparison(self):
        t = self.peek()
        left = self.index()
        if self.accept("in"):
            return S.InDom(left, self.ident().text, pos=t.pos)
        op = self.peek()
        if op.kind == "op" and op.text in CMP_OPS:
            self.advance()
            return S.Cmp(op.text, left, self.index(), pos=t.pos)
        for o in CMP_OPS + ("in",):
            self._note(o)
        self.fail(f"unexpected {op.text!r}")

    # ------------------------------------------------------------ index expressions

    def index(self):
        base = self.index_atom()
        while self.at("-") or self.at("+"):
            sign = self.advance()
            if not self.at_kind("int"):
                self._note("integer")
                self.fail(f"unexpected {self.peek().text!r}")
            n = int(self.advance().text)
            base = S.Minus(base, n if sign.text == "-" else -n, pos=base.pos)
        return base

    def index_atom(self):
        t = self.peek()
        if self.at_kind("int"):
            self.advance()
            return S.Num(int(t.text), pos=t.pos)
        if self.accept("min") or self.accept("max"):
            self.expect("(")
            dom = self.ident().text
            self.expect(")")
            return (S.DomMin if t.text == "min" else S.DomMax)(dom, pos=t.pos)
        if self.accept("("):
            inner = self.index()
            self.expect(")")
            return inner
        if self.at_kind("ident"):
            self.advance()
            if self.accept("["):
                idx = self.index()
                self.expect("]")
                return S.Read(t.text, idx, pos=t.pos)
            return S.Name(t.text, pos=t.pos)
        self._note("integer")
        self._note("identifier")
        self.fail(f"unexpected {t.text!r}")

    # ------------------------------------------------------------ terms

    def term(self):
        left = self.unary()
        while self.at("*") or self.at("/"):
            t = self.advance()
            right = self.unary()
            left = (S.Mul if t.text == "*" else S.Div)(left, right, pos=t.pos)
        return left

    def unary(self):
        if self.at("(") and self.at("ind", 1):
            t = self.advance()
            self.advance()
            extra = () if self.at(")") else self.varsets()
            self.expect(")")
            return S.Ind(extra, self.unary(), pos=t.pos)
        return self.primary()

    def block(self):
        self.expect("{")
        body = self.seq()
        self.expect("}")
        return body

    def seq(self):
        left = self.term()
        while self.at(";"):
            t = self.advance()
            if self.at("}"):
                break
            left = S.Seq(left, self.term(), pos=t.pos)
        return left

    def primary(self):
        t = self.peek()
        if self.accept("int"):
            body = self.term()
            self.expect("by")
            return S.Integrate(body, self.varsets(), pos=t.pos)
        if self.accept("if"):
            cond = self.constraint()
            then = self.block()
            self.accept("else")
            return S.If(cond, then, self.block(), pos=t.pos)
        if self.accept("return"):
            return S.Return(pos=t.pos)
        if self.accept("fix"):
            if self.at_kind("ident") and not self.at("(", 1):
                name = self.advance()
                return S.Fix(S.Invoke(name.text, (), pos=name.pos), pos=t.pos)
            return S.Fix(self.unary(), pos=t.pos)
        if self.accept("lift"):
            return S.Lift(self.block(), pos=t.pos)
        if self.accept("elift"):
            return S.ELift(self.block(), pos=t.pos)
        if self.accept("factor"):
            est = self.term()
            self.expect("by")
            return S.Factor(est, self.term(), pos=t.pos)
        if t.kind in ("real", "int"):
            self.advance()
            if float(t.text) != 1.0:
                self.fail("the only density literal is 1.0", t)
            return S.One(pos=t.pos)
        if self.at("{"):
            return self.block()
        if self.at("("):
            return self.paren_term()
        if t.kind == "ident":
            return self.named_term()
        self._note("term")
        self.fail(f"unexpected {t.text!r}")

    def paren_term(self):
        t = self.advance()
        nxt, after = self.peek(), self.peek(1)
        if nxt.kind in ("real", "int") and after.text == "," and self.at("return", 2):
            self.advance(), self.advance(), self.advance()
            self.expect(")")
            return S.UnitEst(False, pos=t.pos)
        if self.at("return") and after.text == "," and self.peek(2).kind in ("real", "int"):
            self.advance(), self.advance(), self.advance()
            self.expect(")")
            return S.UnitEst(True, pos=t.pos)
        inner = self.term()
        self.expect(")")
        return inner

    def named_term(self):
        t = self.advance()
        name = t.text
        if self.at("(") or self.at("["):
            if self.at("["):
                self.advance()
                idx = self.index()
                self.expect("]")
                self.expect(":=")
                self.expect("sample")
                return S.Sample(name, idx, self.term(), pos=t.pos)
            if name in PRIMITIVES:
                return S.Prim(name, self.param_args(), pos=t.pos)
            if name in self.macros:
                return self.expand_macro(self.macros[name], t)
            self.advance()
            args = []
            if not self.at(")"):
                while True:
                    args.append(self.index())
                    if not self.accept(","):
                        break
            self.expect(")")
            return S.Invoke(name, tuple(args), pos=t.pos)
        if self.accept(":="):
            self.expect("sample")
            return S.Sample(name, None, self.term(), pos=t.pos)
        if self.macro_params is not None and name in self.macro_params:
            self._use_param(name, "term", t)
            return S.MacroParam(name, pos=t.pos)
        self._note("(")
        self._note(":=")
        self.fail(f"unexpected {self.peek().text!r}")

    # ------------------------------------------------------------ primitive parameters

    def param_args(self):
        self.expect("(")
        args = []
        if not self.at(")"):
            while True:
                args.append(self.param())
                if not self.accept(","):
                    break
        self.expect(")")
        return tuple(args)

    def param(self):
        left = self.param_term()
        while self.at("+") or self.at("-"):
            t = self.advance()
            left = S.ParamBin(t.text, left, self.param_term(), pos=t.pos)
        return left

    def param_term(self):
        left = self.param_atom()
        while self.at("*") or self.at("/"):
            t = self.advance()
            left = S.ParamBin(t.text, left, self.param_atom(), pos=t.pos)
        return left

    def param_atom(self):
        t = self.peek()
        if t.kind == "real":
            self.advance()
            return S.Real(float(t.text), pos=t.pos)
        if t.kind == "int":
            self.advance()
            return S.Num(int(t.text), pos=t.pos)
        if self.accept("-"):
            inner = self.param_atom()
            if isinstance(inner, S.Real):
                return S.Real(-inner.value, pos=t.pos)
            if isinstance(inner, S.Num):
                return S.Num(-inner.value, pos=t.pos)
            return S.ParamBin("-", S.Num(0), inner, pos=t.pos)
        if self.accept("["):
            items = []
            if not self.at("]"):
                while True:
                    items.append(self.param())
                    if not self.accept(","):
                        break
            self.expect("]")
            return S.ListLit(tuple(items), pos=t.pos)
        if self.accept("("):
            inner = self.param()
            self.expect(")")
            return inner
        return self.index_atom()

    # ------------------------------------------------------------ macros

    def expand_macro(self, macro, tok):
        self.expect("(")
        args = []
        arity = ParseError(f"macro {macro.name!r} expects {len(macro.params)} argument(s)",
                           tok.line, tok.col)
        for k, kind in enumerate(macro.kinds):
            if k:
                if self.at(")"):
                    raise arity
                self.expect(",")
            if kind == "varset":
                args.append((self.varset(),))
            else:
                args.append(self.term())
        if not self.at(")"):
            raise arity
        self.expect(")")
        return substitute_macro(macro, args)


def _free_names(node):
    names = set()
    for n in S.walk(node) if not isinstance(node, tuple) else (m for x in node for m in S.walk(x)):
        if isinstance(n, (S.Name, S.QVar)):
            names.add(n.ident)
    return names


def substitute_macro(macro, args):
    """Expand a macro body, renaming body binders that would capture argument names."""
    free = set()
    for a in args:
        free |= _free_names(a)
    body = macro.body
    binders = {n.binder for n in S.walk(body) if isinstance(n, S.Comp)}
    clashes = binders & free
    if clashes:
        taken = free | binders
        renames = {}
        for b in sorted(clashes):
            k = 1
            while f"{b}_{k}" in taken:
                k += 1
            renames[b] = f"{b}_{k}"
            taken.add(renames[b])
        body = _rename_binders(body, renames)
    table = dict(zip(macro.params, args))

    def sub(node):
        if isinstance(node, S.MacroParam):
            return table[node.ident]
        return node

    return S.transform(body, sub)


def _rename_binders(body, renames):
    def inner_rename(binder, new):
        def fn(n):
            if isinstance(n, S.Name) and n.ident == binder:
                return S.Name(new, pos=n.pos)
            return n
        return fn

    def fn(node):
        if isinstance(node, S.Comp) and node.binder in renames:
            new = renames[node.binder]
            cond = S.transform(node.cond, inner_rename(node.binder, new))
            return S.Comp(node.var, new, node.domain, cond, pos=node.pos)
        return node

    return S.transform(body, fn)


def parse_model(source):
    """Parse model source text into a Model."""
    return Parser(source).model()


def parse_inference(source, macros=None):
    """Parse inference source into a list of definitions (macro defs included).

    `macros` maps names to MacroDef from earlier sources, e.g. a prelude.
    """
    return Parser(source, macros).program()


def collect_macros(items):
    return {d.name: d for d in items if isinstance(d, S.MacroDef)}


def parse_index(source):
    p = Parser(source)
    out = p.index()
    if not p.at_kind("eof"):
        p.fail("trailing input")
    return out


def parse_constraint(source):
    p = Parser(source)
    out = p.constraint()
    if not p.at_kind("eof"):
        p.fail("trailing input")
    return out


def parse_varsets(source):
    p = Parser(source)
    out = p.varsets()
    if not p.at_kind("eof"):
        p.fail("trailing input")
    return out


def parse_term(source, macros=None):
    p = Parser(source, macros)
    out = p.seq()
    if not p.at_kind("eof"):
        p.fail("trailing input")
    return out


def parse_type(source):
    p = Parser(source)
    out = p.dist_type()
    if not p.at_kind("eof"):
        p.fail("trailing input")
    return out
