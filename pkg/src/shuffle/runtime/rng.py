"""Counter-based, splittable random sources, one stream per replica."""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_LEFT = np.uint64(0xA0761D6478BD642F)
_RIGHT = np.uint64(0xE7037ED1A0B428DB)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _mix(z):
    """SplitMix64 finalizer on a uint64 array (wrapping arithmetic)."""
    z = z.copy()
    z ^= z >> np.uint64(30)
    z *= _M1
    z ^= z >> np.uint64(27)
    z *= _M2
    z ^= z >> np.uint64(31)
    return z


class RandomSource:
    """A deterministic stream of uniforms keyed by (seed, replica, split path).

    `draw(k)` is the k-th uniform of the stream and has no side effects, so
    a source can be handed to several evaluations and replayed exactly.
    """

    __slots__ = ("keys",)

    def __init__(self, seed=0, replicas=1, keys=None):
        if keys is None:
            with np.errstate(over="ignore"):
                base = _mix(np.array([np.uint64(seed & 0xFFFFFFFFFFFFFFFF)], dtype=np.uint64))
                idx = np.arange(1, replicas + 1, dtype=np.uint64)
                keys = _mix(_mix(base + idx * _GOLDEN))
        self.keys = keys

    @property
    def replicas(self):
        return len(self.keys)

    def split(self):
        with np.errstate(over="ignore"):
            return (RandomSource(keys=_mix(self.keys ^ _LEFT)),
                    RandomSource(keys=_mix(self.keys ^ _RIGHT)))

    def draw(self, k=0):
        """Uniforms in [0, 1), one per replica."""
        with np.errstate(over="ignore"):
            z = _mix(_mix(self.keys + np.uint64(k + 1) * _GOLDEN))
        return (z >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))

    def select(self, mask):
        return RandomSource(keys=self.keys[mask])


def split(rs):
    return rs.split()
