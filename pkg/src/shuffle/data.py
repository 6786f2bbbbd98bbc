"""Data files: concrete domain bounds and observed values."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, Tuple

from .errors import ShuffleError


class DataError(ShuffleError):
    """A data file is malformed or inconsistent with the model."""


@dataclass
class Data:
    domains: Dict[str, Tuple[int, int]] = field(default_factory=dict)
    observed: Dict[Tuple[str, int], float] = field(default_factory=dict)

    def bounds(self, name):
        if name == "Bool":
            return 0, 1
        if name not in self.domains:
            raise DataError(f"no bounds given for domain {name!r}")
        return self.domains[name]

    def to_json(self):
        obs = {}
        for (var, idx), val in sorted(self.observed.items()):
            obs.setdefault(var, {})[str(idx)] = val
        return {"domains": {d: {"min": lo, "max": hi} for d, (lo, hi) in self.domains.items()},
                "observed": obs}


def data_from_dict(doc, model=None):
    doms = {}
    for name, b in (doc.get("domains") or {}).items():
        try:
            lo, hi = int(b["min"]), int(b["max"])
        except (KeyError, TypeError, ValueError):
            raise DataError(f"domain {name!r} needs integer min and max") from None
        doms[name] = (lo, hi)
    data = Data(doms)
    for var, vals in (doc.get("observed") or {}).items():
        if isinstance(vals, dict):
            for k, v in vals.items():
                data.observed[(var, int(k))] = v
        elif isinstance(vals, list):
            base = 0
            if model is not None:
                decl = model.variables.get(var)
                if decl is not None and decl.index_domain:
                    base = data.bounds(decl.index_domain)[0]
            for k, v in enumerate(vals):
                data.observed[(var, base + k)] = v
        else:
            data.observed[(var, 0)] = vals
    if model is not None:
        check_data(model, data)
    return data


def load_data(path, model=None):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON: {exc}") from None
    return data_from_dict(doc, model)


def check_data(model, data):
    """Observed values must name declared variables, valid indices and valid values."""
    for (var, idx), val in data.observed.items():
        decl = model.variables.get(var)
        if decl is None:
            raise DataError(f"observed value for undeclared variable {var!r}")
        if decl.index_domain is None:
            if idx != 0:
                raise DataError(f"{var} is not indexed")
        else:
            lo, hi = data.bounds(decl.index_domain)
            if not lo <= idx <= hi:
                raise DataError(f"{var}[{idx}] is outside {decl.index_domain}")
        if decl.target != "Real":
            lo, hi = data.bounds(decl.target)
            if val != int(val) or not lo <= int(val) <= hi:
                raise DataError(f"{var}[{idx}] = {val} is outside {decl.target}")
            data.observed[(var, idx)] = int(val)
        else:
            data.observed[(var, idx)] = float(val)


def locations(model, data):
    """Every (variable, index) location of the model under the data's bounds."""
    out = []
    for v in model.variables.values():
        if v.index_domain is None:
            out.append((v.name, 0))
        else:
            lo, hi = data.bounds(v.index_domain)
            out.extend((v.name, i) for i in range(lo, hi + 1))
    return out
