"""Moment estimators, Wick predictions, normality checks and tightness fits."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps

from .circulant import fluctuation_series
from .combinatorics import pair_partitions
from .limit import CovarianceKernel
from .observables import check_paired

SE_METHODS = ("bootstrap", "analytic")
MAX_MIXED_ORDER = 6


@dataclass(frozen=True)
class MomentEstimate:
    statistic: str
    value: float
    std_error: float
    replicas: int
    prediction: float | None = None
    labels: tuple = ()

    @property
    def z_score(self):
        if self.prediction is None:
            return None
        if self.std_error == 0:
            return 0.0 if self.value == self.prediction else math.inf
        return (self.value - self.prediction) / self.std_error

    def within(self, k, target=None):
        target = self.prediction if target is None else target
        return abs(self.value - target) <= k * self.std_error


def _bootstrap_se(columns, statistic, n_boot, seed):
    r = columns.shape[0]
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    draws = np.empty(n_boot)
    for b in range(n_boot):
        draws[b] = statistic(columns[rng.integers(0, r, size=r)])
    return float(draws.std(ddof=1))


def _covariance(cols):
    x, y = cols[:, 0], cols[:, 1]
    return float(((x - x.mean()) * (y - y.mean())).sum() / (len(x) - 1))


def _product_mean(cols):
    return float(cols.prod(axis=1).mean())


def empirical_covariance(a, b, *, kernel=None, se_method="bootstrap", n_boot=500, seed=0):
    """Sample covariance of two replica-paired observables.

    ``prediction`` is the limit kernel value for the same labels, when both
    powers are at least 2.
    """
    check_paired([a, b])
    if a.replicas < 100:
        raise ValueError(f"need at least 100 replicas, got {a.replicas}")
    cols = np.column_stack([a.values, b.values])
    value = _covariance(cols)
    if se_method == "bootstrap":
        se = _bootstrap_se(cols, _covariance, n_boot, seed)
    elif se_method == "analytic":
        prod = (cols[:, 0] - cols[:, 0].mean()) * (cols[:, 1] - cols[:, 1].mean())
        se = float(prod.std(ddof=1) / math.sqrt(len(prod)))
    else:
        raise ValueError(f"se_method must be one of {SE_METHODS}")
    prediction = None
    if a.p >= 2 and b.p >= 2:
        prediction = (kernel or CovarianceKernel())(a.label, b.label)
    return MomentEstimate("covariance", value, se, a.replicas, prediction,
                          (a.label, b.label))


def wick_moment(kernel, labels):
    """Sum over pair partitions of products of kernel values."""
    labels = list(labels)
    if len(labels) % 2:
        return 0.0
    total = 0.0
    for pairing in pair_partitions(len(labels)):
        term = 1.0
        for y, z in pairing.pairs:
            term *= kernel(labels[y], labels[z])
            if term == 0.0:
                break
        total += term
    return total


def mixed_moment(observables, *, kernel=None, n_boot=500, seed=0):
    """Replica mean of ``prod_i w_{p_i}(t_i)`` with a bootstrap SE."""
    observables = check_paired(observables)
    if len(observables) > MAX_MIXED_ORDER:
        raise ValueError(f"mixed moments are limited to order {MAX_MIXED_ORDER}")
    cols = np.column_stack([o.values for o in observables])
    value = _product_mean(cols)
    se = _bootstrap_se(cols, _product_mean, n_boot, seed)
    labels = tuple(o.label for o in observables)
    prediction = None
    if all(o.p >= 2 for o in observables):
        prediction = wick_moment(kernel or CovarianceKernel(), labels)
    elif any(o.p == 0 for o in observables):
        prediction = 0.0
    return MomentEstimate(f"mixed_moment_{len(observables)}", value, se,
                          len(cols), prediction, labels)


@dataclass(frozen=True)
class NormalityReport:
    replicas: int
    predicted_variance: float
    sample_variance: float
    skewness: float
    skewness_se: float
    excess_kurtosis: float
    kurtosis_se: float
    ks_statistic: float
    ks_pvalue: float
    degenerate: bool = False

    def passes(self, k=4.0, alpha=0.01):
        return (not self.degenerate
                and self.ks_pvalue >= alpha
                and abs(self.skewness) <= k * self.skewness_se
                and abs(self.excess_kurtosis) <= k * self.kurtosis_se)


def normality_diagnostics(samples, predicted_variance):
    """Skewness, excess kurtosis and a KS test against ``N(0, predicted)``.

    Standard errors are the normal-theory values ``sqrt(6/R)`` and
    ``sqrt(24/R)``; the KS p-value uses the asymptotic distribution.
    """
    x = np.asarray(samples, dtype=float)
    r = len(x)
    if r < 1000:
        raise ValueError(f"normality diagnostics need at least 1000 samples, got {r}")
    var = float(x.var(ddof=1))
    skew_se, kurt_se = math.sqrt(6 / r), math.sqrt(24 / r)
    if var == 0 or predicted_variance <= 0:
        nan = float("nan")
        return NormalityReport(r, predicted_variance, var, nan, skew_se, nan, kurt_se,
                               nan, nan, degenerate=True)
    ks = sps.kstest(x, "norm", args=(0.0, math.sqrt(predicted_variance)), method="asymp")
    return NormalityReport(
        replicas=r,
        predicted_variance=float(predicted_variance),
        sample_variance=var,
        skewness=float(sps.skew(x)),
        skewness_se=skew_se,
        excess_kurtosis=float(sps.kurtosis(x)),
        kurtosis_se=kurt_se,
        ks_statistic=float(ks.statistic),
        ks_pvalue=float(ks.pvalue),
    )


@dataclass(frozen=True)
class ScalingFit:
    """Log-log fit of ``E|w_p(t) - w_p(s)|^4`` against ``|t - s|``.

    ``implied_constant`` is the smallest M with ``moment <= M |t-s|^2`` at
    every fitted pair, i.e. the bound with exponent 4 and 1 + beta = 2.
    """

    p: int
    gaps: tuple
    moments: tuple
    moment_errors: tuple
    slope: float
    intercept: float
    slope_std_error: float
    implied_constant: float
    horizon: float
    zero_gap_moments: tuple = field(default=())


def increment_moment_scaling(ensemble, p, time_pairs, centering="auto", route="spectral"):
    pairs = [(float(s), float(t)) for s, t in time_pairs]
    times = tuple(sorted({x for pair in pairs for x in pair}))
    series = fluctuation_series(ensemble, p, times, centering=centering, route=route)
    col = {t: series.values[:, k] for k, t in enumerate(times)}

    gaps, moments, errors, zeros = [], [], [], []
    for s, t in pairs:
        d4 = (col[t] - col[s]) ** 4
        if s == t:
            zeros.append(float(d4.mean()))
            continue
        gaps.append(abs(t - s))
        moments.append(float(d4.mean()))
        errors.append(float(d4.std(ddof=1) / math.sqrt(len(d4))))
    if len(set(gaps)) < 4:
        raise ValueError(f"need at least 4 distinct nonzero gaps |t-s|, got {sorted(set(gaps))}")
    if min(moments) <= 0:
        raise ValueError("a fourth moment is zero; cannot fit on a log scale")
    fit = sps.linregress(np.log(gaps), np.log(moments))
    m_t = max(m / g ** 2 for m, g in zip(moments, gaps))
    return ScalingFit(p=p, gaps=tuple(gaps), moments=tuple(moments),
                      moment_errors=tuple(errors), slope=float(fit.slope),
                      intercept=float(fit.intercept), slope_std_error=float(fit.stderr),
                      implied_constant=float(m_t), horizon=max(times),
                      zero_gap_moments=tuple(zeros))

