"""Tokenizer: C-like identifiers, integer and real literals, `//` comments."""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..errors import ParseError

KEYWORDS = {
    "model", "domain", "variable", "def", "rec", "independent", "macro", "in",
    "int", "by", "if", "else", "ind", "sample", "return", "fix", "lift",
    "elift", "factor", "true", "false", "min", "max",
    "density", "sampler", "kernel", "estimator",
}

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>//[^\n]*)
  | (?P<real>\d+\.\d*(?:[eE][-+]?\d+)?|\d+[eE][-+]?\d+|\.\d+(?:[eE][-+]?\d+)?)
  | (?P<int>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>:=|==|!=|<=|>=|&&|\|\||[-+*/<>!(){}\[\],;:|?=])
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str  # ident, keyword, int, real, op, eof
    text: str
    line: int
    col: int

    @property
    def pos(self):
        return (self.line, self.col)


def tokenize(source):
    tokens = []
    line, line_start, i = 1, 0, 0
    n = len(source)
    while i < n:
        m = _TOKEN_RE.match(source, i)
        if m is None:
            raise ParseError(f"unexpected character {source[i]!r}", line, i - line_start + 1)
        kind = m.lastgroup
        text = m.group()
        if kind not in ("ws", "comment"):
            if kind == "ident" and text in KEYWORDS:
                kind = "keyword"
            tokens.append(Token(kind, text, line, i - line_start + 1))
        newlines = text.count("\n")
        if newlines:
            line += newlines
            line_start = i + text.rindex("\n") + 1
        i = m.end()
    tokens.append(Token("eof", "<end of input>", line, i - line_start + 1))
    return tokens
