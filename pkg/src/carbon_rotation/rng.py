"""Counter-based uniforms: one independent stream per (seed, path) pair.

Draw ``n`` of path ``p`` is a pure function of ``(seed, p, n)``, so results
do not depend on how paths are batched or distributed over workers.  The
mixer is the SplitMix64 finalizer applied to a keyed counter.
"""
from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_PATH_SALT = np.uint64(0xD1B54A32D192ED03)


def _mix64(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def path_keys(seed: int, paths) -> np.ndarray:
    seed_key = _mix64(np.array([seed & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64) + _GOLDEN)
    p = np.asarray(paths, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return _mix64(_mix64(p * _PATH_SALT + seed_key) ^ seed_key)


def uniforms(keys: np.ndarray, counter: int) -> np.ndarray:
    """Uniform(0, 1) draw number ``counter`` for each path key; never 0 or 1."""
    c = np.uint64(counter)
    with np.errstate(over="ignore"):
        z = _mix64(keys + (c + np.uint64(1)) * _GOLDEN)
        z = _mix64(z ^ keys)
    return ((z >> np.uint64(11)).astype(np.float64) + 0.5) * (1.0 / 9007199254740992.0)


def exponentials(keys: np.ndarray, counter: int, rate: float) -> np.ndarray:
    """Exponential(rate) draws; ``inf`` everywhere when ``rate == 0``."""
    if rate == 0:
        return np.full(keys.shape, np.inf)
    return -np.log(uniforms(keys, counter)) / rate
