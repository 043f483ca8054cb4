"""Experiment configuration: one TOML file with nested sections.

Unknown keys and bad values raise :class:`ConfigError` naming the offending
``section.key``; TOML syntax errors keep the parser's line and column.
"""

from __future__ import annotations

import dataclasses
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ._validation import DEFAULT_BUDGET, SEED_MAX
from .errors import ConfigError


def _labels(value, where):
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{where}: expected a non-empty list of [p, t] pairs")
    out = []
    for item in value:
        if (not isinstance(item, list) or len(item) != 2 or isinstance(item[0], bool)
                or not isinstance(item[0], int) or not isinstance(item[1], (int, float))):
            raise ConfigError(f"{where}: bad label {item!r}, expected [p, t]")
        if item[0] < 0 or item[1] < 0:
            raise ConfigError(f"{where}: label {item!r} needs p >= 0 and t >= 0")
        out.append((int(item[0]), float(item[1])))
    return tuple(out)


def _label_sets(value, where):
    if not isinstance(value, list):
        raise ConfigError(f"{where}: expected a list of label lists")
    return tuple(_labels(v, f"{where}[{k}]") for k, v in enumerate(value))


@dataclass(frozen=True)
class EnsembleSection:
    n: int = 201
    replicas: int = 10000
    times: tuple = (0.0, 0.25, 0.5, 1.0)
    threads: int = 1


@dataclass(frozen=True)
class FluctuationSection:
    powers: tuple = (2, 3)
    centering: str = "auto"
    route: str = "spectral"
    allow_degenerate: bool = False


@dataclass(frozen=True)
class BudgetSection:
    enumeration: int = DEFAULT_BUDGET


@dataclass(frozen=True)
class StatisticsSection:
    bootstrap: int = 500
    se_method: str = "bootstrap"
    se_multiplier: float = 4.0
    convention: str = "normalized"


@dataclass(frozen=True)
class CountsSection:
    p: int = 3
    n: tuple = (50, 100, 200)
    cluster_p: tuple = (2, 2, 2)
    cluster_n: tuple = (4, 6, 8, 10, 12)


@dataclass(frozen=True)
class TightnessSection:
    p: int = 2
    n: int = 101
    replicas: int = 10000
    base_time: float = 0.5
    gaps: tuple = (0.05, 0.1, 0.2, 0.4)


@dataclass(frozen=True)
class MomentsSection:
    labels: tuple = ()


@dataclass(frozen=True)
class LimitSection:
    labels: tuple = ((2, 0.25), (2, 0.5), (2, 1.0), (3, 0.5), (3, 1.0),
                     (4, 0.5), (4, 1.0), (5, 1.0))
    replicas: int = 100000


@dataclass(frozen=True)
class OutputSection:
    dir: str = "circfluct-out"
    plots: bool = False


@dataclass(frozen=True)
class AcceptanceSection:
    se_multiplier: float = 4.0
    wick_se_multiplier: float = 5.0
    trace_samples: int = 200
    trace_n: tuple = (4, 64)
    trace_p: tuple = (1, 5)
    trace_rtol: float = 1e-8
    count_n_max: int = 200
    count_p_max: int = 4
    density_n: int = 200
    density_tol: float = 0.02
    density_p2_tol: float = 0.01
    n: int = 201
    replicas: int = 10000
    drift_band: float = 0.10
    normality_n: int = 1001
    normality_alpha: float = 0.01
    cluster_slack: float = 0.5
    tightness_min_slope: float = 1.8
    odd_moment_labels: tuple = ()
    limit_replicas: int = 100000


SECTIONS = {
    "ensemble": EnsembleSection,
    "fluctuation": FluctuationSection,
    "budgets": BudgetSection,
    "statistics": StatisticsSection,
    "counts": CountsSection,
    "tightness": TightnessSection,
    "moments": MomentsSection,
    "limit": LimitSection,
    "output": OutputSection,
    "acceptance": AcceptanceSection,
}

CHOICES = {
    ("fluctuation", "centering"): ("exact", "empirical", "auto"),
    ("fluctuation", "route"): ("spectral", "combinatorial"),
    ("statistics", "se_method"): ("bootstrap", "analytic"),
    ("statistics", "convention"): ("normalized", "display"),
}

LABEL_KEYS = {("limit", "labels"): _labels,
              ("moments", "labels"): _label_sets,
              ("acceptance", "odd_moment_labels"): _label_sets}

# keys that may be zero; every other integer is a positive count
NONNEGATIVE = {("ensemble", "threads"), ("fluctuation", "powers")}


def _coerce(section, key, value, default):
    where = f"{section}.{key}"
    if (section, key) in LABEL_KEYS:
        return LABEL_KEYS[section, key](value, where)
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true or false, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        floor = 0 if (section, key.split("[")[0]) in NONNEGATIVE else 1
        if value < floor:
            raise ConfigError(f"{where}: must be >= {floor}, got {value}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        if value <= 0:
            raise ConfigError(f"{where}: must be positive, got {value}")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string, got {value!r}")
        choices = CHOICES.get((section, key))
        if choices and value not in choices:
            raise ConfigError(f"{where}: must be one of {', '.join(choices)}, got {value!r}")
        return value
    if isinstance(default, tuple):
        if not isinstance(value, list) or not value:
            raise ConfigError(f"{where}: expected a non-empty list, got {value!r}")
        kind = type(default[0]) if default else float
        return tuple(_coerce(section, f"{key}[{k}]", v, kind(1)) if kind is int
                     else _number(where, k, v) for k, v in enumerate(value))
    raise ConfigError(f"{where}: unsupported value {value!r}")


def _number(where, k, v):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}[{k}]: expected a number, got {v!r}")
    if v < 0:
        raise ConfigError(f"{where}[{k}]: must be >= 0, got {v}")
    return float(v)


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    ensemble: EnsembleSection = field(default_factory=EnsembleSection)
    fluctuation: FluctuationSection = field(default_factory=FluctuationSection)
    budgets: BudgetSection = field(default_factory=BudgetSection)
    statistics: StatisticsSection = field(default_factory=StatisticsSection)
    counts: CountsSection = field(default_factory=CountsSection)
    tightness: TightnessSection = field(default_factory=TightnessSection)
    moments: MomentsSection = field(default_factory=MomentsSection)
    limit: LimitSection = field(default_factory=LimitSection)
    output: OutputSection = field(default_factory=OutputSection)
    acceptance: AcceptanceSection = field(default_factory=AcceptanceSection)
    source: str = "<defaults>"

    @classmethod
    def from_dict(cls, data, source="<dict>"):
        data = dict(data)
        seed = data.pop("seed", 0)
        if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < SEED_MAX:
            raise ConfigError(f"seed: expected an integer in [0, 2**64), got {seed!r}")
        sections = {}
        for name, value in data.items():
            if name not in SECTIONS:
                raise ConfigError(f"{name}: unknown section or key "
                                  f"(expected seed or one of {', '.join(SECTIONS)})")
            if not isinstance(value, dict):
                raise ConfigError(f"{name}: expected a table")
            kind = SECTIONS[name]
            defaults = {f.name: f.default for f in dataclasses.fields(kind)}
            values = {}
            for key, raw in value.items():
                if key not in defaults:
                    raise ConfigError(f"{name}.{key}: unknown key "
                                      f"(expected one of {', '.join(defaults)})")
                values[key] = _coerce(name, key, raw, defaults[key])
            sections[name] = kind(**values)
        config = cls(seed=seed, source=source, **sections)
        config.check()
        return config

    def check(self):
        fl = self.fluctuation
        if not fl.allow_degenerate:
            for k, p in enumerate(fl.powers):
                if p < 2:
                    raise ConfigError(f"fluctuation.powers[{k}]: p={p} needs "
                                      "fluctuation.allow_degenerate = true")
        times = self.ensemble.times
        if times[0] != 0.0 or any(b <= a for a, b in zip(times, times[1:])):
            raise ConfigError("ensemble.times: must start at 0 and increase strictly")
        if self.tightness.p < 2:
            raise ConfigError(f"tightness.p: must be >= 2, got {self.tightness.p}")
        if self.counts.p < 2:
            raise ConfigError(f"counts.p: must be >= 2, got {self.counts.p}")
        for k, (p, _) in enumerate(self.limit.labels):
            if p < 2:
                raise ConfigError(f"limit.labels[{k}]: p must be >= 2, got {p}")

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def with_section(self, name, **changes):
        return dataclasses.replace(self, **{name: dataclasses.replace(getattr(self, name), **changes)})

    def to_dict(self):
        out = dataclasses.asdict(self)
        out.pop("source")
        return out


def loads(text, source="<string>"):
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    return ExperimentConfig.from_dict(data, source=source)


def load_config(path=None):
    """Read a config file, or the packaged default when ``path`` is None."""
    if path is None:
        text = resources.files("circfluct").joinpath("data/default.toml").read_text()
        return loads(text, source="default.toml")
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
    return loads(text, source=str(path))
