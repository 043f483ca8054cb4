"""Trace fluctuations of random circulant matrices with Brownian entries."""

from .brownian import (
    IncrementPair,
    PathEnsemble,
    TimeGrid,
    generate_ensemble,
    increment_decompose,
)
from .circulant import (
    CirculantSample,
    FluctuationSeries,
    TracePower,
    exact_fluctuation_covariance,
    expected_trace_power_exact,
    fluctuation_series,
    sample_at,
    trace_power_combinatorial,
    trace_power_spectral,
)
from .combinatorics import (
    cluster_decompose,
    density_limit_check,
    enumerate_B,
    enumerate_index_family,
    eulerian_density,
    pair_partitions,
    wick_gaussian_product_moment,
)
from .limit import CovarianceKernel, kernel_matrix, kernel_value, sample_limit_process
from .statistics import (
    empirical_covariance,
    increment_moment_scaling,
    mixed_moment,
    normality_diagnostics,
    wick_moment,
)

__version__ = "0.1.0"
