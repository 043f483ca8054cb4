"""Small argument checks reused across modules."""

from __future__ import annotations

import numbers

import numpy as np

from .errors import DegenerateCaseError

DEFAULT_BUDGET = 10**8
SEED_MAX = 2**64


def check_count(value, name, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {type(value).__name__}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_seed(seed):
    if isinstance(seed, bool) or not isinstance(seed, numbers.Integral):
        raise TypeError(f"seed must be an integer, got {type(seed).__name__}")
    if not 0 <= seed < SEED_MAX:
        raise ValueError(f"seed must lie in [0, 2**64), got {seed}")
    return int(seed)


def check_time(t, name="t"):
    t = float(t)
    if not np.isfinite(t) or t < 0:
        raise ValueError(f"{name} must be a finite non-negative time, got {t}")
    return t


def check_power(p, allow_degenerate=False):
    p = check_count(p, "p", minimum=0)
    if p < 2 and not allow_degenerate:
        raise DegenerateCaseError(
            f"p={p} has no fluctuation to study: w_0(t) is identically 0 and "
            "w_1(t) equals b_0(t) for every n; use p >= 2"
        )
    return p


def check_budget(budget):
    return check_count(budget, "budget", minimum=1)


def check_entries(entries):
    """Return a float array whose last axis holds circulant first rows."""
    arr = np.asarray(entries, dtype=float)
    if arr.ndim == 0 or arr.shape[-1] == 0:
        raise ValueError("entries must have a non-empty last axis")
    if not np.all(np.isfinite(arr)):
        raise ValueError("entries must be finite")
    return arr
