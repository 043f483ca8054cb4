"""Acceptance suite on the shipped default config, one test per criterion.

Tolerances live in the packaged default config and are pinned here so an
edited config cannot silently loosen them.
"""

import pytest

from circfluct import acceptance
from circfluct.config import load_config

pytestmark = pytest.mark.acceptance

PINNED = {
    "se_multiplier": 4.0,
    "wick_se_multiplier": 5.0,
    "trace_samples": 200,
    "trace_n": (4, 64),
    "trace_p": (1, 5),
    "trace_rtol": 1e-8,
    "count_n_max": 200,
    "count_p_max": 4,
    "density_n": 200,
    "density_tol": 0.02,
    "density_p2_tol": 0.01,
    "n": 201,
    "replicas": 10_000,
    "drift_band": 0.10,
    "normality_alpha": 0.01,
    "cluster_slack": 0.5,
    "tightness_min_slope": 1.8,
    "limit_replicas": 100_000,
}

LINES = []


@pytest.fixture(scope="module")
def results():
    cfg = load_config()
    out = {}

    def keep(result):
        out[result.number] = result
        LINES.append(result.line())

    acceptance.run_acceptance(cfg, on_result=keep)
    return out


def test_tolerances_pinned():
    cfg = load_config()
    for key, value in PINNED.items():
        assert getattr(cfg.acceptance, key) == value, key
    assert cfg.tightness.n == 101 and cfg.tightness.replicas == 10_000
    assert cfg.tightness.gaps == (0.05, 0.1, 0.2, 0.4) and cfg.tightness.p == 2
    assert cfg.counts.cluster_p == (2, 2, 2) and cfg.counts.cluster_n == (4, 6, 8, 10, 12)
    assert len(cfg.limit.labels) == 8 and len({p for p, _ in cfg.limit.labels}) > 1
    assert cfg.statistics.convention == "normalized"


@pytest.mark.parametrize("number", range(1, 15))
def test_criterion(results, number):
    result = results[number]
    print(result.line())
    assert result.ok, result.line()
