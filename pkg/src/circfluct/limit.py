"""Covariance kernel of the limiting Gaussian processes N_p(t) and exact draws.

``K((p, t1), (q, t2))`` is zero for ``p != q`` and
``min(t1, t2)**p * p! * sum_s f_p(s)`` otherwise. With the normalized
density the sum is 1; the ``"display"`` convention keeps the unnormalized
alternating sum, whose total is ``(p-1)!``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import lapack

from ._validation import check_count, check_power, check_seed, check_time
from .combinatorics import eulerian_total
from .errors import NotPositiveSemidefiniteError
from .observables import Observable, write_observables_csv

CONVENTIONS = ("normalized", "display")


@lru_cache(maxsize=None)
def _density_total(p, convention):
    return float(eulerian_total(p, convention))


def kernel_value(p, q, t1, t2, convention="normalized"):
    p = check_power(p)
    q = check_power(q)
    t1, t2 = check_time(t1, "t1"), check_time(t2, "t2")
    if convention not in CONVENTIONS:
        raise ValueError(f"convention must be one of {CONVENTIONS}, got {convention!r}")
    if p != q:
        return 0.0
    return min(t1, t2) ** p * math.factorial(p) * _density_total(p, convention)


@dataclass(frozen=True)
class CovarianceKernel:
    """Callable ``K(a, b)`` on labels ``a = (p, t)``."""

    convention: str = "normalized"

    def __post_init__(self):
        if self.convention not in CONVENTIONS:
            raise ValueError(f"convention must be one of {CONVENTIONS}")

    def __call__(self, a, b):
        return kernel_value(a[0], b[0], a[1], b[1], self.convention)

    def variance(self, p, t):
        return kernel_value(p, p, t, t, self.convention)


@dataclass(frozen=True)
class KernelMatrix:
    """Gram matrix plus a PSD certificate ``matrix ~= factor @ factor.T``."""

    labels: tuple
    matrix: np.ndarray = field(repr=False)
    factor: np.ndarray = field(repr=False)
    rank: int
    jitter: float
    residual: float
    min_eigenvalue: float


def _pivoted_cholesky(a):
    c, piv, rank, info = lapack.dpstrf(a, lower=1)
    if info < 0:
        raise ValueError(f"dpstrf: illegal argument {-info}")
    low = np.tril(c)[:, :rank]
    factor = np.zeros((a.shape[0], rank))
    factor[piv - 1] = low
    return factor, piv - 1, rank


def kernel_matrix(labels, kernel=None, tol=1e-10):
    """Gram matrix of ``kernel`` over ``labels`` with a pivoted Cholesky check.

    A diagonal jitter of ``1e-12 * trace / dim`` is tried once before the
    matrix is declared indefinite.
    """
    labels = tuple((check_power(p), check_time(t)) for p, t in labels)
    if not labels:
        raise ValueError("need at least one label")
    kernel = kernel or CovarianceKernel()
    d = len(labels)
    gram = np.array([[kernel(a, b) for b in labels] for a in labels])
    scale = max(1.0, float(np.abs(gram).max()))
    min_eig = float(np.linalg.eigvalsh(gram).min())

    jitter = 0.0
    for attempt in range(2):
        work = gram + jitter * np.eye(d)
        factor, piv, rank = _pivoted_cholesky(np.array(work, order="F"))
        residual = float(np.abs(work - factor @ factor.T).max()) if d else 0.0
        if residual <= tol * scale:
            return KernelMatrix(labels, gram, factor, rank, jitter, residual, min_eig)
        jitter = 1e-12 * float(np.trace(gram)) / d
    bad = int(piv[rank]) if rank < d else None
    raise NotPositiveSemidefiniteError(
        f"Gram matrix is indefinite (min eigenvalue {min_eig:.3e}, residual {residual:.3e})",
        pivot=bad, min_eigenvalue=min_eig)


@dataclass(frozen=True)
class LimitSample:
    labels: tuple
    values: np.ndarray = field(repr=False)
    seed: int
    convention: str = "normalized"

    @property
    def replicas(self):
        return self.values.shape[0]

    def column(self, p, t):
        k = self.labels.index((p, float(t)))
        return Observable(p=p, t=float(t), values=self.values[:, k],
                          source=("limit", self.labels, self.replicas, self.seed),
                          seed=self.seed)

    def observables(self):
        return [self.column(p, t) for p, t in self.labels]

    def to_csv(self, path, header=True):
        meta = {"R": self.replicas, "seed": self.seed, "convention": self.convention,
                "kind": "gaussian-limit"}
        write_observables_csv(path, self.observables(), meta, header=header)


def labels_from_grid(powers, times):
    return tuple((p, float(t)) for p in powers for t in times)


def sample_limit_process(labels, replicas, seed, convention="normalized"):
    """Exact multivariate normal draws of ``N_p(t)`` at the given labels."""
    replicas = check_count(replicas, "replicas")
    seed = check_seed(seed)
    km = kernel_matrix(labels, CovarianceKernel(convention))
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    z = rng.standard_normal((replicas, km.rank))
    values = z @ km.factor.T
    values.setflags(write=False)
    return LimitSample(labels=km.labels, values=values, seed=seed, convention=convention)
