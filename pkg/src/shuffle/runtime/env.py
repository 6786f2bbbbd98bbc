"""Batched environments: one row per replica, one column per variable index."""

from __future__ import annotations

import numpy as np

from ..data import Data
from ..errors import RuntimeFault


class Env:
    """Values of every random variable for R independent replicas.

    `values[var]` has shape (R, size) with column k holding index lo + k;
    `defined[var]` marks which entries hold a value.
    """

    def __init__(self, model, data, replicas, values, defined):
        self.model = model
        self.data = data
        self.replicas = replicas
        self.values = values
        self.defined = defined

    @classmethod
    def empty(cls, model, data=None, replicas=1):
        data = data or Data()
        values, defined = {}, {}
        for v in model.variables.values():
            size = 1
            if v.index_domain is not None:
                lo, hi = data.bounds(v.index_domain)
                size = max(hi - lo + 1, 0)
            dtype = float if v.target == "Real" else np.int64
            values[v.name] = np.zeros((replicas, size), dtype=dtype)
            defined[v.name] = np.zeros((replicas, size), dtype=bool)
        return cls(model, data, replicas, values, defined)

    @classmethod
    def from_data(cls, model, data, replicas=1):
        env = cls.empty(model, data, replicas)
        for (var, idx), val in data.observed.items():
            col = idx - env.lo(var)
            env.values[var][:, col] = val
            env.defined[var][:, col] = True
        return env

    # ------------------------------------------------------------ layout

    def lo(self, var):
        d = self.model.variables[var].index_domain
        return 0 if d is None else self.data.bounds(d)[0]

    def size(self, var):
        return self.values[var].shape[1]

    def target_range(self, var):
        t = self.model.variables[var].target
        if t == "Real":
            return None
        return self.data.bounds(t)

    def indices(self, var):
        lo = self.lo(var)
        return range(lo, lo + self.size(var))

    # ------------------------------------------------------------ access

    def _cols(self, var, idx):
        cols = np.asarray(idx, dtype=np.int64) - self.lo(var)
        if cols.ndim == 0:
            cols = np.full(self.replicas, int(cols))
        bad = (cols < 0) | (cols >= self.size(var))
        if bad.any():
            raise RuntimeFault("EnvMiss", f"{var}[{int(cols[bad][0]) + self.lo(var)}] is out of "
                               "its index domain")
        return cols

    def read(self, var, idx=0):
        cols = self._cols(var, idx)
        rows = np.arange(self.replicas)
        ok = self.defined[var][rows, cols]
        if not ok.all():
            raise RuntimeFault("EnvMiss", f"{var}[{int(cols[~ok][0]) + self.lo(var)}] is unset")
        return self.values[var][rows, cols]

    def read_vector(self, var):
        if not self.defined[var].all():
            raise RuntimeFault("EnvMiss", f"{var} is not fully set")
        return self.values[var]

    def is_set(self, var, idx):
        return self.defined[var][:, idx - self.lo(var)]

    def write(self, var, idx, vals):
        """A new Env with var[idx] := vals (per replica)."""
        cols = self._cols(var, idx)
        rows = np.arange(self.replicas)
        values, defined = dict(self.values), dict(self.defined)
        nv = self.values[var].copy()
        nd = self.defined[var].copy()
        nv[rows, cols] = vals
        nd[rows, cols] = True
        values[var], defined[var] = nv, nd
        return Env(self.model, self.data, self.replicas, values, defined)

    def write_column(self, var, idx, vals, mask=None):
        """Set one column (same index for all replicas), optionally only where mask holds."""
        col = idx - self.lo(var)
        values, defined = dict(self.values), dict(self.defined)
        nv = self.values[var].copy()
        nd = self.defined[var].copy()
        if mask is None:
            nv[:, col] = vals
            nd[:, col] = True
        else:
            nv[:, col] = np.where(mask, vals, nv[:, col])
            nd[:, col] |= mask
        values[var], defined[var] = nv, nd
        return Env(self.model, self.data, self.replicas, values, defined)

    def merge(self, mask, other):
        """Rows of self where mask holds, rows of other elsewhere."""
        values, defined = {}, {}
        m = mask[:, None]
        for var in self.values:
            a, b = self.values[var], other.values[var]
            values[var] = a if a is b else np.where(m, a, b)
            da, db = self.defined[var], other.defined[var]
            defined[var] = da if da is db else np.where(m, da, db)
        return Env(self.model, self.data, self.replicas, values, defined)

    def copy(self):
        return Env(self.model, self.data, self.replicas,
                   {k: v.copy() for k, v in self.values.items()},
                   {k: v.copy() for k, v in self.defined.items()})

    def initialize(self, var, value=None):
        """Set every unset entry of var to `value` (default: the least target value)."""
        if value is None:
            rng = self.target_range(var)
            value = 0.0 if rng is None else rng[0]
        values, defined = dict(self.values), dict(self.defined)
        values[var] = np.where(self.defined[var], self.values[var], value).astype(
            self.values[var].dtype)
        defined[var] = np.ones_like(self.defined[var])
        return Env(self.model, self.data, self.replicas, values, defined)

    def replica(self, r):
        """Plain dict {(var, index): value} of one replica's set entries."""
        out = {}
        for var, arr in self.values.items():
            lo = self.lo(var)
            for k in range(arr.shape[1]):
                if self.defined[var][r, k]:
                    v = arr[r, k]
                    out[(var, lo + k)] = float(v) if arr.dtype == float else int(v)
        return out

    def column(self, var, idx=0):
        return self.values[var][:, idx - self.lo(var)]
