"""Whole-program checking and the report it produces."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import List, Optional

from ..surface import syntax as S
from ..surface.printer import pretty_print
from ..surface.resolve import resolve_definition
from .checker import Checker, location
from .types import AssumptionLog


@dataclass
class TypedDefinition:
    name: str
    type: S.DistTypeExpr
    location: str
    modifier: str = "plain"


@dataclass
class Report:
    definitions: List[TypedDefinition] = field(default_factory=list)
    log: AssumptionLog = field(default_factory=AssumptionLog)
    model_assumptions: List[dict] = field(default_factory=list)
    macros: List[str] = field(default_factory=list)
    schedule: Optional[List[str]] = None

    def type_of(self, name):
        for d in self.definitions:
            if d.name == name:
                return d.type
        raise KeyError(name)

    def to_json(self):
        doc = {
            "schema": 1,
            "definitions": [{"name": d.name, "type": pretty_print(d.type),
                             "location": d.location} for d in self.definitions],
            "assumptions": [e.to_json() for e in self.log],
            "model_assumptions": list(self.model_assumptions),
        }
        if self.macros:
            doc["macros"] = list(self.macros)
        if self.schedule is not None:
            doc["schedule"] = list(self.schedule)
        return doc

    def to_text(self):
        lines = []
        if self.schedule is not None:
            lines.append("model schedule: " + "; ".join(self.schedule))
        for d in self.definitions:
            lines.append(f"{d.name} : {pretty_print(d.type)}")
        if self.log.entries:
            lines.append("assumptions:")
            lines += ["  " + e.text() for e in self.log]
        if self.model_assumptions:
            lines.append("model assumptions:")
            lines += [f"  Normalized: {a['definition']} : {a['type']}"
                      for a in self.model_assumptions]
        return "\n".join(lines) + "\n"

    def dumps(self):
        return json.dumps(self.to_json(), indent=2, sort_keys=True)


def check_program(model, defs, solver=None, model_result=None):
    """Check definitions left to right; return a Report or raise the first TypeError."""
    ck = Checker(model, solver)
    env = ck.env
    report = Report(log=ck.log)
    if model_result is not None:
        report.model_assumptions = list(model_result.assumptions)
        report.schedule = model_result.schedule_text()
    for d in defs:
        if isinstance(d, S.MacroDef):
            report.macros.append(d.name)
            continue
        d = resolve_definition(d)
        env = ck.check_definition(env, d)
        report.definitions.append(TypedDefinition(d.name, d.type, location(d.name, d),
                                                  d.modifier))
    return report
