"""The acceptance suite: numbered criteria, each returning a CriterionResult.

Every criterion reads its parameters from an :class:`ExperimentConfig` and all
randomness is derived from the config seed. Runtimes are checked against the
per-criterion limits but never written into rendered reports, so two runs of
the suite with one config render byte-identical output.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .brownian import TimeGrid, generate_ensemble
from .circulant import (
    CirculantSample,
    exact_fluctuation_covariance,
    fluctuation_series,
    trace_power_combinatorial,
    trace_power_spectral,
)
from .combinatorics import (
    cluster_count_scaling,
    count_by_level,
    count_level,
    density_limit_check,
    eulerian_density,
)
from .config import ExperimentConfig
from .limit import CovarianceKernel, kernel_matrix, sample_limit_process
from .statistics import (
    empirical_covariance,
    increment_moment_scaling,
    mixed_moment,
    normality_diagnostics,
)

RECORD_FIELDS = ("statistic", "estimate", "std_error", "prediction", "z_score",
                 "n", "R", "seed", "convention")

DEFAULT_ODD_LABELS = (
    ((2, 1.0), (2, 1.0), (2, 1.0)),
    ((2, 0.5), (2, 1.0), (3, 1.0)),
    ((3, 0.5), (3, 1.0), (2, 1.0)),
)


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    records: list = field(default_factory=list)
    runtime: float = 0.0
    runtime_limit: float | None = None

    @property
    def within_time(self):
        return self.runtime_limit is None or self.runtime <= self.runtime_limit

    @property
    def ok(self):
        return self.passed and self.within_time

    def line(self):
        status = "PASS" if self.ok else "FAIL"
        timing = "" if self.within_time else f" [runtime {self.runtime:.1f}s > {self.runtime_limit:.0f}s]"
        return f"[{status}] criterion {self.number:2d} {self.name}: {self.detail}{timing}"


def record(statistic, estimate, std_error=None, prediction=None, n=None, r=None,
           seed=None, convention="normalized"):
    z = None
    if prediction is not None and std_error:
        z = (estimate - prediction) / std_error
    return {"statistic": statistic, "estimate": estimate, "std_error": std_error,
            "prediction": prediction, "z_score": z, "n": n, "R": r, "seed": seed,
            "convention": convention}


def _estimate_record(est, n, seed, convention):
    rec = record(est.statistic + str(list(est.labels)), est.value, est.std_error,
                 est.prediction, n, est.replicas, seed, convention)
    return rec


class Context:
    """Shared state for one suite run: config plus lazily built ensembles."""

    def __init__(self, config):
        self.config = config
        self.acc = config.acceptance
        self.seed = config.seed
        self.convention = config.statistics.convention
        self.kernel = CovarianceKernel(self.convention)
        self.k = self.acc.se_multiplier
        self._main = None
        self._series = {}

    def derived_seed(self, offset):
        return (self.seed + offset) % 2 ** 64

    def main_ensemble(self):
        if self._main is None:
            grid = TimeGrid((0.0, 0.5, 1.0))
            self._main = generate_ensemble(self.acc.n, grid, self.acc.replicas, self.seed,
                                           threads=self.config.ensemble.threads)
        return self._main

    def series(self, p, allow_degenerate=False, route="spectral"):
        key = (p, route)
        if key not in self._series:
            self._series[key] = fluctuation_series(
                self.main_ensemble(), p, centering="exact", route=route,
                budget=self.config.budgets.enumeration, allow_degenerate=allow_degenerate)
        return self._series[key]

    def obs(self, p, t):
        return self.series(p).column(t)

    def bootstrap(self, offset):
        return dict(n_boot=self.config.statistics.bootstrap, seed=self.derived_seed(offset))


def criterion_1(ctx):
    acc = ctx.acc
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(ctx.derived_seed(101))))
    worst = 0.0
    for _ in range(acc.trace_samples):
        n = int(rng.integers(acc.trace_n[0], acc.trace_n[1] + 1))
        p = int(rng.integers(acc.trace_p[0], acc.trace_p[1] + 1))
        sample = CirculantSample(rng.standard_normal(n))
        a = trace_power_spectral(sample, p).value
        b = trace_power_combinatorial(sample, p, ctx.config.budgets.enumeration).value
        rel = abs(a - b) / max(abs(a), abs(b), np.finfo(float).tiny)
        worst = max(worst, rel)
    passed = worst <= acc.trace_rtol
    rec = record("max_relative_trace_discrepancy", worst, prediction=0.0, r=acc.trace_samples,
                 seed=ctx.seed)
    return passed, f"max relative discrepancy {worst:.2e} over {acc.trace_samples} samples " \
                   f"(tolerance {acc.trace_rtol:g})", [rec]


def criterion_2(ctx):
    acc = ctx.acc
    budget = ctx.config.budgets.enumeration
    bad = []
    checked = 0
    for p in range(1, acc.count_p_max + 1):
        for n in range(1, acc.count_n_max + 1):
            levels = count_by_level(n, p, budget=budget)
            direct = [count_level(n, p, s, budget) for s in range(p)]
            checked += 1
            if int(levels.sum()) != n ** (p - 1) or [int(c) for c in levels] != direct \
                    or sum(direct) != n ** (p - 1):
                bad.append((n, p))
    rec = record("count_mismatches", float(len(bad)), prediction=0.0, r=checked, seed=ctx.seed)
    detail = f"{checked} (n, p) cases, |A_p| = n^(p-1) and level sums exact"
    if bad:
        detail = f"mismatches at {bad[:5]}"
    return not bad, detail, [rec]


def criterion_3(ctx):
    acc = ctx.acc
    n = acc.density_n
    budget = ctx.config.budgets.enumeration
    report = density_limit_check(3, [n], budget)
    recs, ok = [], True
    for s in (1, 2):
        ratio = report.ratio(n, s, "A_ps")
        f = eulerian_density(3, s)
        ok &= abs(ratio - f) <= acc.density_tol
        recs.append(record(f"|A_3,{s}|/n^2", ratio, prediction=f, n=n, seed=ctx.seed))
    a21 = int(count_by_level(n, 2, budget=budget)[1])
    ratio2 = a21 / n
    ok &= abs(ratio2 - 1.0) <= acc.density_p2_tol
    recs.append(record("|A_2,1|/n", ratio2, prediction=1.0, n=n, seed=ctx.seed))
    worst = max(abs(r["estimate"] - r["prediction"]) for r in recs)
    return ok, f"n={n}, largest |ratio - f_p(s)| = {worst:.4f}", recs


def _band_check(ctx, est, k=None):
    k = ctx.k if k is None else k
    return abs(est.value - est.prediction) <= k * est.std_error


def criterion_4(ctx):
    est = empirical_covariance(ctx.obs(2, 1.0), ctx.obs(2, 1.0), kernel=ctx.kernel,
                               **ctx.bootstrap(4))
    exact = exact_fluctuation_covariance(ctx.acc.n, 2, 2, 1.0, 1.0)
    rec = _estimate_record(est, ctx.acc.n, ctx.seed, ctx.convention)
    return _band_check(ctx, est), f"Var w_2(1) = {est.value:.4f} +- {est.std_error:.4f}, " \
        f"limit {est.prediction:g}, exact finite-n {exact:.4f}", [rec]


def criterion_5(ctx):
    n = ctx.acc.n
    est = empirical_covariance(ctx.obs(3, 1.0), ctx.obs(3, 1.0), kernel=ctx.kernel,
                               **ctx.bootstrap(5))
    exact = exact_fluctuation_covariance(n, 3, 3, 1.0, 1.0)
    drift = ctx.acc.drift_band * est.prediction
    passed = abs(est.value - est.prediction) <= ctx.k * est.std_error + drift
    recs = [_estimate_record(est, n, ctx.seed, ctx.convention),
            record("exact_finite_n_variance_w3", exact, prediction=est.prediction, n=n,
                   seed=ctx.seed, convention=ctx.convention)]
    return passed, f"Var w_3(1) = {est.value:.4f} +- {est.std_error:.4f}, limit " \
        f"{est.prediction:g}, band {ctx.k:g} SE + {drift:.2f} drift; " \
        f"exact finite-n value {exact:.4f}", recs


def criterion_6(ctx):
    est = empirical_covariance(ctx.obs(2, 1.0), ctx.obs(3, 1.0), kernel=ctx.kernel,
                               **ctx.bootstrap(6))
    rec = _estimate_record(est, ctx.acc.n, ctx.seed, ctx.convention)
    return _band_check(ctx, est), f"Cov(w_2(1), w_3(1)) = {est.value:.4f} +- " \
        f"{est.std_error:.4f}, z = {est.z_score:.2f}", [rec]


def criterion_7(ctx):
    est = empirical_covariance(ctx.obs(2, 0.5), ctx.obs(2, 1.0), kernel=ctx.kernel,
                               **ctx.bootstrap(7))
    rec = _estimate_record(est, ctx.acc.n, ctx.seed, ctx.convention)
    return _band_check(ctx, est), f"Cov(w_2(0.5), w_2(1)) = {est.value:.4f} +- " \
        f"{est.std_error:.4f}, prediction {est.prediction:g}", [rec]


def criterion_8(ctx):
    acc = ctx.acc
    recs, parts, passed = [], [], True
    four = [ctx.obs(2, 1.0)] * 4
    est = mixed_moment(four, kernel=ctx.kernel, **ctx.bootstrap(8))
    ok = _band_check(ctx, est, acc.wick_se_multiplier)
    passed &= ok
    recs.append(_estimate_record(est, acc.n, ctx.seed, ctx.convention))
    parts.append(f"E[w_2^4] = {est.value:.3f} +- {est.std_error:.3f} vs {est.prediction:g}")
    for j, labels in enumerate(acc.odd_moment_labels or DEFAULT_ODD_LABELS):
        est = mixed_moment([ctx.obs(p, t) for p, t in labels], kernel=ctx.kernel,
                           **ctx.bootstrap(80 + j))
        ok = _band_check(ctx, est)
        passed &= ok
        recs.append(_estimate_record(est, acc.n, ctx.seed, ctx.convention))
        parts.append(f"z{list(labels)} = {est.z_score:.2f}")
    return passed, "; ".join(parts), recs


def criterion_9(ctx):
    acc = ctx.acc
    n = acc.normality_n
    seed = ctx.derived_seed(9)
    ens = generate_ensemble(n, TimeGrid((0.0, 1.0)), acc.replicas, seed,
                            threads=ctx.config.ensemble.threads)
    recs, parts, passed = [], [], True
    for p in (2, 3):
        w = fluctuation_series(ens, p, (1.0,), centering="exact").values[:, 0]
        rep = normality_diagnostics(w, ctx.kernel.variance(p, 1.0))
        ok = rep.passes(k=ctx.k, alpha=acc.normality_alpha)
        passed &= ok
        recs += [
            record(f"skewness_w{p}", rep.skewness, rep.skewness_se, 0.0, n, rep.replicas, seed,
                   ctx.convention),
            record(f"excess_kurtosis_w{p}", rep.excess_kurtosis, rep.kurtosis_se, 0.0, n,
                   rep.replicas, seed, ctx.convention),
            record(f"ks_pvalue_w{p}", rep.ks_pvalue, None, None, n, rep.replicas, seed,
                   ctx.convention),
        ]
        parts.append(f"w_{p}: KS p={rep.ks_pvalue:.3f}, skew z={rep.skewness / rep.skewness_se:.2f}, "
                     f"exkurt z={rep.excess_kurtosis / rep.kurtosis_se:.2f}")
    return passed, f"n={n}; " + "; ".join(parts), recs


def criterion_10(ctx):
    counts_cfg = ctx.config.counts
    budget = ctx.config.budgets.enumeration
    fit = cluster_count_scaling(counts_cfg.cluster_p, counts_cfg.cluster_n, budget)
    even = cluster_count_scaling(counts_cfg.cluster_p, counts_cfg.cluster_n, budget,
                                 multiplicity="even")
    limit = fit.bound_exponent + ctx.acc.cluster_slack
    passed = fit.slope <= limit
    recs = [record(f"B_count_n={n}", float(c), n=n, seed=ctx.seed)
            for n, c in zip(fit.n_values, fit.counts)]
    recs.append(record("B_count_slope", fit.slope, prediction=fit.bound_exponent, seed=ctx.seed))
    recs.append(record("B_count_slope_even_multiplicity", even.slope,
                       prediction=fit.bound_exponent, seed=ctx.seed))
    detail = (f"counts {list(fit.counts)} at n={list(fit.n_values)}, slope {fit.slope:.3f} "
              f"vs limit {limit:g}; even-multiplicity counts {list(even.counts)} "
              f"(slope {even.slope:.3f})")
    return passed, detail, recs


def criterion_11(ctx):
    tc = ctx.config.tightness
    seed = ctx.derived_seed(11)
    base = tc.base_time
    pairs = [(base, round(base + g, 12)) for g in tc.gaps]
    times = tuple(sorted({0.0, *[x for pr in pairs for x in pr]}))
    ens = generate_ensemble(tc.n, TimeGrid(times), tc.replicas, seed,
                            threads=ctx.config.ensemble.threads)
    fit = increment_moment_scaling(ens, tc.p, pairs, centering="exact")
    passed = fit.slope >= ctx.acc.tightness_min_slope
    recs = [record(f"E|dw|^4_gap={g:g}", m, e, n=tc.n, r=tc.replicas, seed=seed)
            for g, m, e in zip(fit.gaps, fit.moments, fit.moment_errors)]
    recs.append(record("increment_slope", fit.slope, fit.slope_std_error, 2.0, tc.n,
                       tc.replicas, seed))
    recs.append(record("implied_constant", fit.implied_constant, n=tc.n, r=tc.replicas,
                       seed=seed))
    return passed, f"p={tc.p}, n={tc.n}: slope {fit.slope:.3f} +- {fit.slope_std_error:.3f} " \
        f"(minimum {ctx.acc.tightness_min_slope:g}), M_T ~ {fit.implied_constant:.3f}", recs


def criterion_12(ctx):
    ens = ctx.main_ensemble()
    w0 = ctx.series(0, allow_degenerate=True, route="combinatorial")
    w1 = ctx.series(1, allow_degenerate=True, route="combinatorial")
    zero_ok = bool(np.all(w0.values == 0.0))
    b0 = np.column_stack([ens.at(t)[:, 0] for t in w1.times])
    one_ok = bool(np.array_equal(w1.values, b0))
    moment = mixed_moment([w0.column(1.0), w1.column(1.0)], n_boot=10, seed=ctx.seed)
    moment_ok = moment.value == 0.0
    n, r = ens.n_entries, ens.replicas
    recs = [record("max|w_0|", float(np.abs(w0.values).max()), prediction=0.0, n=n, r=r,
                   seed=ctx.seed),
            record("max|w_1 - b_0|", float(np.abs(w1.values - b0).max()), prediction=0.0, n=n,
                   r=r, seed=ctx.seed),
            record("E[w_0 w_1]", moment.value, prediction=0.0, n=n, r=r, seed=ctx.seed)]
    detail = f"w_0 identically 0: {zero_ok}; w_1 == b_0 per replica: {one_ok}; " \
             f"mixed moment with w_0 exactly 0: {moment_ok}"
    return zero_ok and one_ok and moment_ok, detail, recs


def criterion_13(ctx):
    labels = ctx.config.limit.labels
    seed = ctx.derived_seed(13)
    km = kernel_matrix(labels, ctx.kernel)
    sample = sample_limit_process(labels, ctx.acc.limit_replicas, seed, ctx.convention)
    cols = sample.observables()
    recs, worst, passed = [], 0.0, True
    recs.append(record("psd_residual", km.residual, prediction=0.0, r=len(labels), seed=seed,
                       convention=ctx.convention))
    for i in range(len(cols)):
        for j in range(i, len(cols)):
            est = empirical_covariance(cols[i], cols[j], kernel=ctx.kernel, se_method="analytic")
            z = abs(est.z_score)
            worst = max(worst, z)
            passed &= _band_check(ctx, est)
            recs.append(_estimate_record(est, None, seed, ctx.convention))
    entries = len(cols) * (len(cols) + 1) // 2
    return passed, f"{len(labels)} labels, rank {km.rank}, residual {km.residual:.1e}; " \
        f"{entries} covariance entries, max |z| = {worst:.2f}", recs


CRITERIA = {
    1: ("trace-route equivalence", criterion_1, 10.0),
    2: ("exact counting", criterion_2, 60.0),
    3: ("density limits", criterion_3, None),
    4: ("variance of w_2", criterion_4, 120.0),
    5: ("variance of w_3", criterion_5, None),
    6: ("cross-covariance vanishing", criterion_6, None),
    7: ("two-time covariance", criterion_7, None),
    8: ("joint Gaussianity", criterion_8, None),
    9: ("normality diagnostics", criterion_9, None),
    10: ("cluster-count bound", criterion_10, 300.0),
    11: ("tightness scaling", criterion_11, None),
    12: ("degenerate powers", criterion_12, None),
    13: ("kernel PSD and closed loop", criterion_13, None),
}
DETERMINISM = 14


def run_criterion(number, ctx):
    name, fn, limit = CRITERIA[number]
    start = time.perf_counter()
    passed, detail, recs = fn(ctx)
    elapsed = time.perf_counter() - start
    return CriterionResult(number, name, bool(passed), detail, recs, elapsed, limit)


def run_criteria(config, numbers=None, on_result=None):
    ctx = Context(config)
    results = []
    for number in (numbers or sorted(CRITERIA)):
        result = run_criterion(number, ctx)
        results.append(result)
        if on_result:
            on_result(result)
    return results


def _clean(value):
    if isinstance(value, float) and not math.isfinite(value):
        return repr(value)
    return value


def render_json(results, generated=None):
    criteria = [{"criterion": r.number, "name": r.name, "passed": r.passed, "detail": r.detail,
                 "records": [{k: _clean(rec[k]) for k in RECORD_FIELDS} for rec in r.records]}
                for r in results]
    payload = {"criteria": criteria}
    if generated:
        payload["generated"] = generated
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def render_csv(results):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("criterion", "passed") + RECORD_FIELDS)
    for r in results:
        for rec in r.records:
            writer.writerow([r.number, r.passed] + ["" if rec[k] is None else
                                                    (repr(rec[k]) if isinstance(rec[k], float)
                                                     else rec[k]) for k in RECORD_FIELDS])
    return buf.getvalue()


def determinism_check(config, first, numbers=None):
    """Rerun the criteria and compare rendered reports byte for byte."""
    start = time.perf_counter()
    second = run_criteria(config, numbers)
    same_json = render_json(first) == render_json(second)
    same_csv = render_csv(first) == render_csv(second)
    detail = f"rerun of {len(second)} criteria: JSON identical {same_json}, CSV identical {same_csv}"
    return CriterionResult(DETERMINISM, "determinism", same_json and same_csv, detail, [],
                           time.perf_counter() - start, None)


def run_acceptance(config=None, on_result=None, determinism=True):
    """Run criteria 1-13 and, optionally, the determinism rerun as criterion 14."""
    config = config or ExperimentConfig()
    results = run_criteria(config, on_result=on_result)
    if determinism:
        det = determinism_check(config, results)
        if on_result:
            on_result(det)
        results.append(det)
    return results
