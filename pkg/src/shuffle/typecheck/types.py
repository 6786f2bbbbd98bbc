"""Distribution types, the type environment, and the assumption log."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

from ..surface import syntax as S
from ..surface.printer import pretty_print

KINDS = ("density", "sampler", "kernel", "estimator")

# A type whose conditioned set is ANY fits every conditioned set; it is
# produced by the unit terms 1.0, return and (1.0, return).
ANY = None


def DistType(kind, targets=(), conditioned=(), constraint=S.TRUE):
    return S.DistTypeExpr(kind, tuple(targets),
                          None if conditioned is ANY else tuple(conditioned), constraint)


def with_(t, **changes):
    return replace(t, **changes)


def show_type(t):
    if t.conditioned is ANY:
        return pretty_print(replace(t, conditioned=())) + " [any conditioned set]"
    return pretty_print(t)


def show_sets(sets):
    return pretty_print(tuple(sets)) if sets else "{}"


@dataclass(frozen=True)
class Signature:
    """A bound definition: quantifiers, type, and whether it is a recursion hypothesis."""
    name: str
    quantifiers: Tuple[Tuple[str, str], ...]
    type: S.DistTypeExpr
    hypothesis_of: Optional[str] = None  # quantifier the hypothesis must decrease
    model: bool = False


@dataclass
class TypeEnv:
    gamma: Dict[str, str] = field(default_factory=dict)
    defs: Dict[str, Signature] = field(default_factory=dict)

    def lookup(self, name):
        return self.defs.get(name)

    def extend(self, sig):
        defs = dict(self.defs)
        defs[sig.name] = sig
        return TypeEnv(dict(self.gamma), defs)

    def with_gamma(self, gamma):
        return TypeEnv(dict(gamma), dict(self.defs))


@dataclass(frozen=True)
class Independence:
    """A ⫫ C | B under φ, asserted by an ind coercion or an independent definition."""
    constraint: S.Constraint
    targets: Tuple
    independent: Tuple
    given: Tuple
    location: str
    source: str

    def to_json(self):
        return {
            "kind": "Independence",
            "constraint": pretty_print(self.constraint),
            "targets": show_sets(self.targets),
            "independent_of": show_sets(self.independent),
            "given": show_sets(self.given),
            "location": self.location,
            "source": self.source,
        }

    def text(self):
        given = f" | {show_sets(self.given)}" if self.given else ""
        where = "" if self.constraint == S.TRUE else f" when {pretty_print(self.constraint)}"
        return (f"{self.location}: independence {show_sets(self.targets)} _||_ "
                f"{show_sets(self.independent)}{given}{where} ({self.source})")


@dataclass(frozen=True)
class ReachesAll:
    """The lifted sampler reaches every value of its output space."""
    term: str
    location: str
    targets: Tuple = ()

    def to_json(self):
        return {"kind": "ReachesAll", "sampler": self.term, "targets": show_sets(self.targets),
                "location": self.location}

    def text(self):
        return f"{self.location}: ReachesAll for sampler {self.term}"


@dataclass
class AssumptionLog:
    entries: List = field(default_factory=list)

    def append(self, entry):
        # a macro argument used twice is typed twice but asserts one assumption
        if entry not in self.entries:
            self.entries.append(entry)

    def independence(self):
        return [e for e in self.entries if isinstance(e, Independence)]

    def reaches_all(self):
        return [e for e in self.entries if isinstance(e, ReachesAll)]

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)
