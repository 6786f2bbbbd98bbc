"""Exception hierarchy shared by every stage of the toolkit."""

from __future__ import annotations


class ShuffleError(Exception):
    """Base class for all toolkit errors."""


class ParseError(ShuffleError):
    """Malformed source text, with a 1-based line/column and expected tokens."""

    def __init__(self, message, line=None, column=None, expected=()):
        self.line = line
        self.column = column
        self.expected = tuple(sorted(set(expected)))
        where = f"line {line}, column {column}: " if line is not None else ""
        hint = f" (expected one of: {', '.join(self.expected)})" if self.expected else ""
        super().__init__(f"{where}{message}{hint}")


class SolverUnavailable(ShuffleError):
    """The external prover is missing, timed out, or answered `unknown`."""


class UnsupportedConstraint(ShuffleError):
    """A constraint uses a term outside the integer constraint grammar."""


class BudgetExceeded(ShuffleError):
    """The enumerative solver hit its instantiation ceiling."""


class ModelError(ShuffleError):
    """A model fails one of the validity conditions."""

    def __init__(self, condition, definition, detail="", witness=None):
        self.condition = condition
        self.definition = definition
        self.detail = detail
        self.witness = witness
        msg = f"model invalid ({condition}) at {definition}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class TypeError_(ShuffleError):
    """A typing rule premise failed.

    `rule` names the rule (DMUL, DEF-REC, ...), `premise` the failed side
    condition, `witness` a counterexample assignment when one exists.
    """

    def __init__(self, rule, message, location=None, premise=None, witness=None,
                 expected=None, actual=None):
        self.rule = rule
        self.location = location
        self.premise = premise
        self.witness = witness
        self.expected = expected
        self.actual = actual
        where = f" at {location}" if location else ""
        super().__init__(f"[{rule}]{where}: {message}")


# Public alias; the trailing underscore only avoids shadowing the builtin
# inside this module.
ShuffleTypeError = TypeError_


class RuntimeFault(ShuffleError):
    """A runtime error value escaped evaluation.

    kind is one of EnvMiss, DivZero, IntractableIntegral, UnsampleableDensity.
    """

    def __init__(self, kind, message="", location=None):
        self.kind = kind
        self.location = location
        where = f" at {location}" if location else ""
        super().__init__(f"{kind}{where}: {message}" if message else f"{kind}{where}")


class LoweringError(ShuffleError):
    """A definition cannot be lowered to the loop IR."""

    def __init__(self, kind, message=""):
        self.kind = kind
        super().__init__(f"{kind}: {message}" if message else kind)


class NotInvertible(ShuffleError):
    """A reduction site cannot be updated incrementally."""


class StateSpaceTooLarge(ShuffleError):
    """The oracle refuses to enumerate more than its state ceiling."""


class ZeroConditional(ShuffleError):
    """Conditioning event has probability zero."""
