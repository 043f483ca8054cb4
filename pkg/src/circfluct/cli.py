"""Command-line front end: ``circfluct <subcommand> [--config PATH] ...``.

Exit codes: 0 all checks pass, 1 a statistical check failed, 2 usage or
config error, 3 an enumeration budget was exceeded.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import acceptance
from .brownian import TimeGrid, generate_ensemble, save_ensemble_csv, save_ensemble_npz
from .circulant import fluctuation_series
from .combinatorics import cluster_count_scaling, density_limit_check
from .config import load_config
from .errors import BudgetExceededError, CircFluctError, ConfigError
from .limit import CovarianceKernel, kernel_matrix, sample_limit_process
from .observables import timestamp_line
from .statistics import empirical_covariance, increment_moment_scaling, mixed_moment

EXIT_OK, EXIT_STAT, EXIT_USAGE, EXIT_BUDGET = 0, 1, 2, 3

log = logging.getLogger("circfluct")

COUNT_COLUMNS = ("n", "p", "s", "variant", "count", "ratio", "f_p(s)", "abs_error")


# --- report writing -----------------------------------------------------------------

def _cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return value


def _json_value(value):
    if isinstance(value, float) and not math.isfinite(value):
        return repr(value)
    if isinstance(value, (np.integer, np.floating)):
        return value.item()
    return value


def _generated():
    return timestamp_line()[len("# generated "):]


def write_table(path, columns, rows, header=True):
    buf = io.StringIO()
    if header:
        buf.write(timestamp_line() + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row[c]) for c in columns])
    Path(path).write_text(buf.getvalue())


def write_json(path, payload, header=True):
    if header:
        payload = {"generated": _generated(), **payload}
    text = json.dumps(payload, indent=2, sort_keys=True, default=_json_value)
    Path(path).write_text(text + "\n")


def write_records(out, stem, records, header, meta):
    """Write records as ``stem.csv`` and ``stem.json`` under ``out``."""
    cleaned = [{k: _json_value(rec[k]) for k in acceptance.RECORD_FIELDS} for rec in records]
    write_table(out / f"{stem}.csv", acceptance.RECORD_FIELDS, cleaned, header)
    write_json(out / f"{stem}.json", {"meta": meta, "records": cleaned}, header)


def _meta(cfg, **extra):
    meta = {"seed": cfg.seed, "convention": cfg.statistics.convention, "config": cfg.source}
    meta.update(extra)
    return meta


# --- plots ----------------------------------------------------------------------------

def _pyplot():
    import matplotlib

    matplotlib.use("svg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "circfluct"
    return plt


def _save_svg(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None})


def plot_covariance(records, path):
    plt = _pyplot()
    rows = [r for r in records if r["prediction"] is not None]
    fig, ax = plt.subplots(figsize=(5, 4))
    pred = [r["prediction"] for r in rows]
    ax.errorbar(pred, [r["estimate"] for r in rows], yerr=[4 * r["std_error"] for r in rows],
                fmt="o", ms=3, capsize=2, label="estimate, 4 SE")
    lo, hi = min(pred + [0.0]), max(pred + [1.0])
    ax.plot([lo, hi], [lo, hi], "k--", lw=0.8, label="prediction")
    ax.set_xlabel("limit covariance")
    ax.set_ylabel("empirical covariance")
    ax.legend()
    _save_svg(fig, path)
    plt.close(fig)


def plot_scaling(fit, path):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 4))
    gaps = np.array(fit.gaps)
    ax.loglog(gaps, fit.moments, "o", label="E|dw|^4")
    ax.loglog(gaps, np.exp(fit.intercept) * gaps ** fit.slope, "-",
              label=f"fit, slope {fit.slope:.2f}")
    ax.loglog(gaps, fit.implied_constant * gaps ** 2, "k--", lw=0.8, label="M |t-s|^2")
    ax.set_xlabel("|t - s|")
    ax.set_ylabel("fourth moment of increment")
    ax.legend()
    _save_svg(fig, path)
    plt.close(fig)


# --- subcommands ------------------------------------------------------------------------

def _ensemble(cfg, n=None, replicas=None, times=None):
    ens_cfg = cfg.ensemble
    return generate_ensemble(n or ens_cfg.n, TimeGrid(times or ens_cfg.times),
                             replicas or ens_cfg.replicas, cfg.seed, threads=ens_cfg.threads)


def _series(cfg, ensemble):
    fl = cfg.fluctuation
    return {p: fluctuation_series(ensemble, p, centering=fl.centering, route=fl.route,
                                  budget=cfg.budgets.enumeration,
                                  allow_degenerate=fl.allow_degenerate)
            for p in fl.powers}


def cmd_simulate(cfg, args, out):
    ens = _ensemble(cfg)
    for p, series in _series(cfg, ens).items():
        path = out / f"series_p{p}.csv"
        series.to_csv(path, header=args.header, extra_meta={"convention": cfg.statistics.convention})
        log.info("wrote %s", path)
    if args.save_ensemble:
        if args.save_ensemble == "npz":
            save_ensemble_npz(ens, out / "ensemble.npz")
        else:
            save_ensemble_csv(ens, out / "ensemble.csv")
    return EXIT_OK


def _positive_labels(cfg):
    return [(p, t) for p in cfg.fluctuation.powers if p >= 2
            for t in cfg.ensemble.times if t > 0]


def cmd_covariance(cfg, args, out):
    ens = _ensemble(cfg)
    series = _series(cfg, ens)
    kernel = CovarianceKernel(cfg.statistics.convention)
    st = cfg.statistics
    labels = _positive_labels(cfg)
    records, failed = [], 0
    for i, a in enumerate(labels):
        for b in labels[i:]:
            est = empirical_covariance(series[a[0]].column(a[1]), series[b[0]].column(b[1]),
                                       kernel=kernel, se_method=st.se_method,
                                       n_boot=st.bootstrap, seed=cfg.seed)
            rec = acceptance.record(f"cov[{a}, {b}]", est.value, est.std_error, est.prediction,
                                    ens.n_entries, est.replicas, cfg.seed, st.convention)
            records.append(rec)
            if not est.within(st.se_multiplier):
                failed += 1
            print(f"cov{a}{b}: {est.value:.4f} +- {est.std_error:.4f} "
                  f"(prediction {est.prediction:g}, z {est.z_score:+.2f})")
    write_records(out, "covariance", records, args.header, _meta(cfg, n=ens.n_entries))
    if args.plots:
        plot_covariance(records, out / "covariance.svg")
    return EXIT_STAT if failed else EXIT_OK


def cmd_moments(cfg, args, out):
    label_sets = cfg.moments.labels
    if not label_sets:
        raise ConfigError("moments.labels: no mixed moments configured")
    powers = sorted({p for labels in label_sets for p, _ in labels})
    times = sorted({0.0, *[t for labels in label_sets for _, t in labels]})
    ens = _ensemble(cfg, times=tuple(times))
    fl = cfg.fluctuation
    series = {p: fluctuation_series(ens, p, centering=fl.centering, route=fl.route,
                                    budget=cfg.budgets.enumeration,
                                    allow_degenerate=fl.allow_degenerate) for p in powers}
    kernel = CovarianceKernel(cfg.statistics.convention)
    records, failed = [], 0
    for labels in label_sets:
        est = mixed_moment([series[p].column(t) for p, t in labels], kernel=kernel,
                           n_boot=cfg.statistics.bootstrap, seed=cfg.seed)
        records.append(acceptance.record(f"E{list(labels)}", est.value, est.std_error,
                                         est.prediction, ens.n_entries, est.replicas, cfg.seed,
                                         cfg.statistics.convention))
        if est.prediction is not None and not est.within(cfg.statistics.se_multiplier):
            failed += 1
        print(f"E{list(labels)}: {est.value:.4f} +- {est.std_error:.4f} "
              f"(Wick {est.prediction})")
    write_records(out, "moments", records, args.header, _meta(cfg, n=ens.n_entries))
    return EXIT_STAT if failed else EXIT_OK


def cmd_counts(cfg, args, out):
    cc = cfg.counts
    budget = cfg.budgets.enumeration
    report = density_limit_check(cc.p, cc.n, budget)
    rows = [{"n": r.n, "p": r.p, "s": r.s, "variant": r.variant, "count": r.count,
             "ratio": r.ratio, "f_p(s)": r.f_ps, "abs_error": r.abs_error} for r in report.rows]
    write_table(out / "counts.csv", COUNT_COLUMNS, rows, args.header)
    gap_rows = [{"n": n, "s": s, "mode": mode, "gap": gap,
                 "gap_over_n^(p-2)": report.gap_ratios[n, s, mode]}
                for (n, s, mode), gap in sorted(report.gaps.items())]
    write_table(out / "distinct_gaps.csv", ("n", "s", "mode", "gap", "gap_over_n^(p-2)"),
                gap_rows, args.header)
    cluster_rows = []
    for rule in ("at_least_two", "even"):
        fit = cluster_count_scaling(cc.cluster_p, cc.cluster_n, budget, multiplicity=rule)
        for n, c in zip(fit.n_values, fit.counts):
            cluster_rows.append({"ps": " ".join(map(str, fit.ps)), "multiplicity": rule, "n": n,
                                 "count": c, "slope": fit.slope,
                                 "bound_exponent": fit.bound_exponent})
        print(f"|B_{fit.ps}| ({rule}): {list(fit.counts)} at n={list(fit.n_values)}, "
              f"slope {fit.slope:.3f}, exponent bound {fit.bound_exponent:g}")
    write_table(out / "clusters.csv",
                ("ps", "multiplicity", "n", "count", "slope", "bound_exponent"),
                cluster_rows, args.header)
    for r in rows:
        if r["variant"] == "A_ps":
            print(f"n={r['n']} p={r['p']} s={r['s']}: count {r['count']}, ratio {r['ratio']:.4f}, "
                  f"f_p(s) {r['f_p(s)']:.4f}")
    return EXIT_OK


def cmd_limit(cfg, args, out):
    labels = cfg.limit.labels
    convention = cfg.statistics.convention
    km = kernel_matrix(labels, CovarianceKernel(convention))
    names = [f"({p}, {t:g})" for p, t in km.labels]
    rows = [dict(zip(["label"] + names, [names[i]] + list(km.matrix[i])))
            for i in range(len(names))]
    write_table(out / "kernel_matrix.csv", ["label"] + names, rows, args.header)
    write_json(out / "psd_certificate.json", {
        "labels": [list(x) for x in km.labels], "rank": km.rank, "jitter": km.jitter,
        "residual": km.residual, "min_eigenvalue": km.min_eigenvalue,
        "factor": km.factor.tolist(), "convention": convention, "seed": cfg.seed,
    }, args.header)
    sample = sample_limit_process(labels, cfg.limit.replicas, cfg.seed, convention)
    sample.to_csv(out / "limit_samples.csv", header=args.header)
    print(f"kernel over {len(labels)} labels: rank {km.rank}, residual {km.residual:.2e}, "
          f"min eigenvalue {km.min_eigenvalue:.3e}; {sample.replicas} samples written")
    return EXIT_OK


def cmd_tightness(cfg, args, out):
    tc = cfg.tightness
    pairs = [(tc.base_time, round(tc.base_time + g, 12)) for g in tc.gaps]
    times = tuple(sorted({0.0, *[x for pr in pairs for x in pr]}))
    ens = generate_ensemble(tc.n, TimeGrid(times), tc.replicas, cfg.seed,
                            threads=cfg.ensemble.threads)
    fit = increment_moment_scaling(ens, tc.p, pairs, centering=cfg.fluctuation.centering,
                                   route=cfg.fluctuation.route)
    records = [acceptance.record(f"E|dw|^4[gap={g:g}]", m, e, None, tc.n, tc.replicas, cfg.seed,
                                 cfg.statistics.convention)
               for g, m, e in zip(fit.gaps, fit.moments, fit.moment_errors)]
    records.append(acceptance.record("slope", fit.slope, fit.slope_std_error, 2.0, tc.n,
                                     tc.replicas, cfg.seed, cfg.statistics.convention))
    records.append(acceptance.record("implied_constant", fit.implied_constant, None, None, tc.n,
                                     tc.replicas, cfg.seed, cfg.statistics.convention))
    write_records(out, "tightness", records, args.header, _meta(cfg, n=tc.n, p=tc.p))
    if args.plots:
        plot_scaling(fit, out / "tightness.svg")
    print(f"p={tc.p} n={tc.n}: slope {fit.slope:.3f} +- {fit.slope_std_error:.3f}, "
          f"M_T {fit.implied_constant:.3f}")
    return EXIT_OK if fit.slope >= cfg.acceptance.tightness_min_slope else EXIT_STAT


def cmd_verify(cfg, args, out):
    results = acceptance.run_acceptance(cfg, on_result=lambda r: print(r.line(), flush=True))
    generated = _generated() if args.header else None
    (out / "acceptance.json").write_text(acceptance.render_json(results, generated))
    text = acceptance.render_csv(results)
    if args.header:
        text = timestamp_line() + "\n" + text
    (out / "acceptance.csv").write_text(text)
    failed = [r.number for r in results if not r.ok]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed"
          + (f"; failed: {failed}" if failed else ""))
    return EXIT_STAT if failed else EXIT_OK


COMMANDS = {
    "simulate": (cmd_simulate, "simulate w_p(t) ensembles and write series CSVs"),
    "covariance": (cmd_covariance, "empirical covariances against the limit kernel"),
    "moments": (cmd_moments, "mixed moments against Wick predictions"),
    "counts": (cmd_counts, "index-family counts, density ratios and cluster counts"),
    "limit": (cmd_limit, "kernel matrix, PSD certificate and exact limit samples"),
    "tightness": (cmd_tightness, "fourth-moment increment scaling fit"),
    "verify": (cmd_verify, "run the acceptance suite"),
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="experiment TOML (default: packaged)")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--out", type=Path, help="output directory (default: output.dir)")
    common.add_argument("--threads", type=int, help="worker threads for path generation")
    common.add_argument("--no-header", dest="header", action="store_false",
                        help="omit timestamp lines so reruns are byte-identical")
    common.add_argument("--convention", choices=("normalized", "display"),
                        help="f_p normalization used by every prediction")
    common.add_argument("--plots", action="store_true", default=None,
                        help="also write SVG charts")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="circfluct", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=help_text)
        if name == "simulate":
            p.add_argument("--replicas", type=int, help="override ensemble.replicas")
            p.add_argument("--n", type=int, help="override ensemble.n")
            p.add_argument("--save-ensemble", choices=("npz", "csv"),
                           help="also dump the Brownian paths")
    return parser


def apply_overrides(cfg, args):
    if args.seed is not None:
        if not 0 <= args.seed < 2 ** 64:
            raise ConfigError(f"--seed: expected an integer in [0, 2**64), got {args.seed}")
        cfg = cfg.replace(seed=args.seed)
    if args.threads is not None:
        if args.threads < 1:
            raise ConfigError(f"--threads: must be >= 1, got {args.threads}")
        cfg = cfg.with_section("ensemble", threads=args.threads)
    if args.convention:
        cfg = cfg.with_section("statistics", convention=args.convention)
    for key in ("replicas", "n"):
        value = getattr(args, key, None)
        if value is not None:
            if value < 1:
                raise ConfigError(f"--{key}: must be >= 1, got {value}")
            cfg = cfg.with_section("ensemble", **{key: value})
    return cfg


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = apply_overrides(load_config(args.config), args)
        if args.plots is None:
            args.plots = cfg.output.plots
        out = args.out or Path(cfg.output.dir)
        out.mkdir(parents=True, exist_ok=True)
        handler, _ = COMMANDS[args.command]
        return handler(cfg, args, out)
    except BudgetExceededError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (ConfigError, CircFluctError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
