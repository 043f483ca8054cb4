"""Circulant samples, trace powers and the fluctuation statistic w_p(t).

The matrix built from a first row ``b`` has ``(i, j)`` element
``b[(j - i) % n] / sqrt(n)``. Its eigenvalues are
``lam_k = n**-0.5 * sum_j b_j exp(2 pi i j k / n)``, so the trace of the
p-th power is available either spectrally (one FFT) or by summing
``b_{i_1}...b_{i_p}`` over the index set A_p.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import (
    DEFAULT_BUDGET,
    check_budget,
    check_count,
    check_entries,
    check_power,
    check_time,
)
from .combinatorics import double_factorial, iter_a_p
from .errors import GridError
from .observables import Observable, write_observables_csv

ROUTES = ("spectral", "combinatorial")
CENTERINGS = ("exact", "empirical", "auto")
REALNESS_TOL = 1e-9


@dataclass(frozen=True)
class CirculantSample:
    entries: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        arr = check_entries(self.entries)
        if arr.ndim != 1:
            raise ValueError(f"entries must be one-dimensional, got shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    @property
    def n(self):
        return len(self.entries)

    def matrix(self):
        n = self.n
        i, j = np.indices((n, n))
        return self.entries[(j - i) % n] / math.sqrt(n)


@dataclass(frozen=True)
class TracePower:
    n: int
    p: int
    value: float
    route: str


def sample_at(ensemble, replica, t):
    if not 0 <= replica < ensemble.replicas:
        raise IndexError(f"replica {replica} out of range [0, {ensemble.replicas})")
    return CirculantSample(entries=np.array(ensemble.at(t)[replica]), t=float(t))


# --- spectral route -----------------------------------------------------------

def eigenvalues(entries):
    """Eigenvalues along the last axis, ordered by Fourier index k."""
    x = check_entries(entries)
    n = x.shape[-1]
    # ifft carries exp(+2 pi i jk/n) / n
    return np.fft.ifft(x, axis=-1) * math.sqrt(n)


def spectral_traces(entries, p):
    """``Tr C^p`` for every first row along the last axis of ``entries``."""
    p = check_count(p, "p", minimum=0)
    x = check_entries(entries)
    n = x.shape[-1]
    if p == 0:
        return np.full(x.shape[:-1], float(n))
    lam = eigenvalues(x)
    acc = lam.copy()
    for _ in range(p - 1):
        acc *= lam
    total = acc.sum(axis=-1)
    bound = REALNESS_TOL * (np.abs(lam) ** p).sum(axis=-1)
    if np.any(np.abs(total.imag) > np.maximum(bound, 1e-300)):
        raise FloatingPointError("spectral trace has a non-negligible imaginary part")
    return total.real


def trace_power_spectral(sample, p):
    value = float(spectral_traces(sample.entries, p))
    return TracePower(n=sample.n, p=p, value=value, route="spectral")


# --- combinatorial route ---------------------------------------------------------

def index_sums(entries, p, budget=DEFAULT_BUDGET):
    """``sum over A_p of b_{i_1}...b_{i_p}`` for every row of ``entries``."""
    x = check_entries(entries)
    p = check_count(p, "p")
    total = np.zeros(x.shape[:-1])
    for block in iter_a_p(x.shape[-1], p, check_budget(budget)):
        total += x[..., block].prod(axis=-1).sum(axis=-1)
    return total


def trace_power_combinatorial(sample, p, budget=DEFAULT_BUDGET):
    p = check_count(p, "p")
    n = sample.n
    value = n ** (1 - p / 2) * float(index_sums(sample.entries, p, budget))
    return TracePower(n=n, p=p, value=value, route="combinatorial")


def expected_trace_power_exact(n, p, t, budget=DEFAULT_BUDGET):
    """``E[Tr C_n(t)^p]`` by summing Gaussian moments over A_p.

    A tuple contributes ``t^(p/2) * prod (2k_q - 1)!!`` when every distinct
    index appears an even number ``2k_q`` of times, and nothing otherwise.
    """
    n = check_count(n, "n")
    p = check_count(p, "p", minimum=0)
    t = check_time(t)
    if p == 0:
        return float(n)
    if p % 2:
        return 0.0
    weight = 0
    for block in iter_a_p(n, p, budget):
        s = np.sort(block, axis=1)
        run = np.ones(len(s), dtype=np.int64)
        w = np.ones(len(s), dtype=np.int64)
        for j in range(1, p + 1):
            if j < p:
                same = s[:, j] == s[:, j - 1]
            else:
                same = np.zeros(len(s), dtype=bool)
            ended = ~same
            # closing a run of length r multiplies by (r-1)!! if r is even
            closed = run[ended]
            factor = np.where(closed % 2 == 0, _dfact_table(p)[closed - 1], 0)
            w[ended] *= factor
            run = np.where(same, run + 1, 1)
        weight += int(w.sum())
    return n ** (1 - p / 2) * weight * t ** (p // 2)


def _dfact_table(p):
    return np.array([double_factorial(k) for k in range(p + 1)], dtype=np.int64)


# --- exact finite-n covariance ------------------------------------------------------

def _bm_moment(k, t):
    return 0.0 if k % 2 else double_factorial(k - 1) * t ** (k // 2)


def real_bm_power_covariance(p, q, t1, t2):
    """``Cov(B(t1)^p, B(t2)^q)`` for one standard Brownian motion."""
    if t1 > t2:
        p, q, t1, t2 = q, p, t2, t1
    joint = sum(
        math.comb(q, r) * _bm_moment(p + r, t1) * _bm_moment(q - r, t2 - t1)
        for r in range(q + 1)
    )
    return joint - _bm_moment(p, t1) * _bm_moment(q, t2)


def exact_fluctuation_covariance(n, p, q, t1, t2):
    """Exact ``Cov(w_p(t1), w_q(t2))`` at dimension n.

    For i.i.d. Gaussian rows the Fourier coefficients are independent:
    ``lam_0`` (and ``lam_{n/2}`` for even n) is a real standard Brownian
    motion and each conjugate pair ``k, n-k`` is a circular complex one with
    ``E|lam_k(t)|^2 = t``. Rotation invariance kills every complex cross term
    except ``p == q``, which contributes ``2 p! min(t1, t2)^p`` per pair.
    """
    n = check_count(n, "n")
    p = check_count(p, "p", minimum=0)
    q = check_count(q, "q", minimum=0)
    t1, t2 = check_time(t1, "t1"), check_time(t2, "t2")
    real_modes = 2 if n % 2 == 0 else 1
    complex_pairs = (n - 1) // 2
    cov = real_modes * real_bm_power_covariance(p, q, t1, t2)
    if p == q and p > 0:
        cov += complex_pairs * 2 * math.factorial(p) * min(t1, t2) ** p
    return cov / n


# --- fluctuation series -----------------------------------------------------------

@dataclass(frozen=True)
class FluctuationSeries:
    """Values ``w_p(t)`` indexed ``values[replica, time_index]``."""

    p: int
    times: tuple
    values: np.ndarray = field(repr=False)
    centering: str
    centering_values: tuple
    route: str
    n: int
    seed: int | None = None
    source: tuple = ()

    @property
    def replicas(self):
        return self.values.shape[0]

    def column(self, t):
        try:
            k = self.times.index(float(t))
        except ValueError:
            raise GridError(f"time {t!r} not in series times {self.times}") from None
        return Observable(p=self.p, t=float(t), values=self.values[:, k],
                          source=self.source, n=self.n, seed=self.seed)

    def observables(self):
        return [self.column(t) for t in self.times]

    def to_csv(self, path, header=True, extra_meta=None):
        meta = {"n": self.n, "R": self.replicas, "seed": self.seed,
                "centering": self.centering, "route": self.route,
                "centering_values": list(self.centering_values)}
        meta.update(extra_meta or {})
        write_observables_csv(path, self.observables(), meta, header=header)


def resolve_centering(centering, n, p, budget=DEFAULT_BUDGET):
    """Pick exact centering when the A_p enumeration fits the budget."""
    if centering not in CENTERINGS:
        raise ValueError(f"centering must be one of {CENTERINGS}, got {centering!r}")
    if centering != "auto":
        return centering
    if p % 2 or p == 0 or n ** (p - 1) <= budget:
        return "exact"
    return "empirical"


def fluctuation_values(entries, p, centering_value, route="spectral", budget=DEFAULT_BUDGET):
    """``n^-1/2 (Tr C^p - centering_value)`` per row of ``entries``."""
    x = check_entries(entries)
    n = x.shape[-1]
    if route == "spectral":
        return (spectral_traces(x, p) - centering_value) / math.sqrt(n)
    if route == "combinatorial":
        if p == 0:
            return np.full(x.shape[:-1], (n - centering_value) / math.sqrt(n))
        # n^(1-p/2) / sqrt(n) folded into one factor keeps w_1 = b_0 exact
        scale = n ** ((1 - p) / 2)
        return scale * (index_sums(x, p, budget) - centering_value / n ** (1 - p / 2))
    raise ValueError(f"route must be one of {ROUTES}, got {route!r}")


def fluctuation_series(ensemble, p, times=None, centering="auto", route="spectral",
                       budget=DEFAULT_BUDGET, allow_degenerate=False):
    """Compute w_p(t) for every replica of ``ensemble`` at each requested time.

    Degenerate powers 0 and 1 need ``allow_degenerate=True`` and always use
    the combinatorial route, where both are exact (0 and b_0(t)).
    """
    p = check_power(p, allow_degenerate=allow_degenerate)
    if p < 2:
        route = "combinatorial"
    if route not in ROUTES:
        raise ValueError(f"route must be one of {ROUTES}, got {route!r}")
    times = ensemble.grid.times if times is None else tuple(float(t) for t in times)
    n = ensemble.n_entries
    mode = resolve_centering(centering, n, p, budget)

    columns, centers = [], []
    for t in times:
        x = ensemble.at(t)
        if mode == "exact":
            c = expected_trace_power_exact(n, p, t, budget)
        elif route == "spectral":
            c = float(spectral_traces(x, p).mean())
        else:
            c = float((n ** (1 - p / 2) * index_sums(x, p, budget)).mean())
        centers.append(c)
        columns.append(fluctuation_values(x, p, c, route, budget))
    values = np.column_stack(columns) if columns else np.zeros((ensemble.replicas, 0))
    values.setflags(write=False)
    return FluctuationSeries(p=p, times=times, values=values, centering=mode,
                             centering_values=tuple(centers), route=route, n=n,
                             seed=ensemble.seed, source=ensemble.fingerprint())
