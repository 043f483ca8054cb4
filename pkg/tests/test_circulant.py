import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from circfluct.brownian import TimeGrid, generate_ensemble
from circfluct.circulant import (
    CirculantSample,
    eigenvalues,
    exact_fluctuation_covariance,
    expected_trace_power_exact,
    fluctuation_series,
    index_sums,
    real_bm_power_covariance,
    resolve_centering,
    sample_at,
    spectral_traces,
    trace_power_combinatorial,
    trace_power_spectral,
)
from circfluct.combinatorics import double_factorial
from circfluct.errors import BudgetExceededError, DegenerateCaseError, GridError
from circfluct.observables import read_observables_csv

finite = st.floats(-3, 3, allow_nan=False, allow_infinity=False)


def dense_trace(entries, p):
    c = CirculantSample(entries).matrix()
    return float(np.trace(np.linalg.matrix_power(c, p)))


def brute_index_sum(entries, p):
    n = len(entries)
    return sum(math.prod(entries[i] for i in idx)
               for idx in itertools.product(range(n), repeat=p) if sum(idx) % n == 0)


def test_matrix_layout():
    c = CirculantSample([1.0, 2.0, 3.0]).matrix() * math.sqrt(3)
    np.testing.assert_array_equal(c, [[1, 2, 3], [3, 1, 2], [2, 3, 1]])


def test_eigenvalues_match_dft_definition(rng):
    x = rng.standard_normal(9)
    k = np.arange(9)
    direct = np.exp(2j * np.pi * np.outer(k, k) / 9) @ x / 3
    np.testing.assert_allclose(eigenvalues(x), direct, atol=1e-12)
    dense = np.linalg.eigvals(CirculantSample(x).matrix())
    def key(z):
        return sorted(zip(np.round(z.real, 8), np.round(z.imag, 8)))

    np.testing.assert_allclose(key(eigenvalues(x)), key(dense), atol=1e-7)


@settings(max_examples=60, deadline=None)
@given(data=st.data(), n=st.integers(1, 9), p=st.integers(1, 5))
def test_three_trace_routes_agree(data, n, p):
    x = data.draw(arrays(np.float64, n, elements=finite))
    sample = CirculantSample(x)
    dense = dense_trace(x, p)
    scale = 1 + np.sum(np.abs(eigenvalues(x)) ** p)
    assert abs(trace_power_spectral(sample, p).value - dense) <= 1e-9 * scale
    assert abs(trace_power_combinatorial(sample, p).value - dense) <= 1e-9 * scale


@pytest.mark.parametrize("n,p", [(1, 3), (4, 2), (5, 3), (6, 4), (3, 5)])
def test_index_sum_against_full_product_filter(n, p, rng):
    x = rng.standard_normal(n)
    assert index_sums(x, p) == pytest.approx(brute_index_sum(x, p), rel=1e-12, abs=1e-12)


def test_batched_index_sums(rng):
    x = rng.standard_normal((3, 2, 5))
    out = index_sums(x, 3)
    assert out.shape == (3, 2)
    assert out[1, 0] == pytest.approx(brute_index_sum(x[1, 0], 3))


def test_trace_zero_power_is_dimension():
    np.testing.assert_array_equal(spectral_traces(np.ones((2, 6)), 0), [6.0, 6.0])


def test_budget_enforced():
    with pytest.raises(BudgetExceededError):
        index_sums(np.ones(50), 4, budget=1000)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 7, 10])
@pytest.mark.parametrize("p", [0, 1, 2, 3, 4, 6])
def test_expected_trace_matches_fourier_closed_form(n, p):
    # only the real Fourier modes (k = 0 and k = n/2) have nonzero p-th moments
    t = 0.7
    real_modes = 2 if n % 2 == 0 else 1
    if p == 0:
        closed = n
    elif p % 2:
        closed = 0.0
    else:
        closed = real_modes * double_factorial(p - 1) * t ** (p // 2)
    assert expected_trace_power_exact(n, p, t) == pytest.approx(closed, rel=1e-12)


def test_expected_trace_small_hand_case():
    # n=2, p=2: Tr C^2 = b_0^2 + b_1^2, mean 2t
    assert expected_trace_power_exact(2, 2, 1.5) == pytest.approx(3.0)


def test_real_bm_power_covariance_hand_values():
    assert real_bm_power_covariance(1, 1, 0.3, 0.8) == pytest.approx(0.3)
    assert real_bm_power_covariance(2, 2, 1.0, 1.0) == pytest.approx(2.0)
    # Cov(B(s)^2, B(t)^2) = 2 s^2
    assert real_bm_power_covariance(2, 2, 0.8, 0.3) == pytest.approx(2 * 0.09)
    assert real_bm_power_covariance(2, 3, 0.5, 1.0) == 0.0


@pytest.mark.parametrize("n", [1, 2, 5, 8, 201])
def test_exact_variance_of_w2_is_2t2(n):
    assert exact_fluctuation_covariance(n, 2, 2, 0.6, 0.6) == pytest.approx(2 * 0.36)


def test_exact_variance_of_w3_finite_n():
    assert exact_fluctuation_covariance(201, 3, 3, 1.0, 1.0) == pytest.approx(1215 / 201)


def test_exact_covariance_against_dense_monte_carlo():
    # independent oracle: dense matrix powers on a small n
    n, r = 4, 20_000
    ens = generate_ensemble(n, TimeGrid((0.0, 0.5, 1.0)), r, seed=77)
    for p, q, t1, t2 in [(2, 2, 0.5, 1.0), (3, 3, 1.0, 1.0), (2, 4, 0.5, 1.0), (1, 3, 1.0, 1.0)]:
        a = np.array([dense_trace(ens.at(t1)[k], p) for k in range(r)]) / math.sqrt(n)
        b = np.array([dense_trace(ens.at(t2)[k], q) for k in range(r)]) / math.sqrt(n)
        prod = (a - a.mean()) * (b - b.mean())
        se = prod.std() / math.sqrt(r)
        exact = exact_fluctuation_covariance(n, p, q, t1, t2)
        assert abs(prod.mean() - exact) <= 4 * se, (p, q, prod.mean(), exact)


def test_fluctuation_series_matches_exact_finite_n(ensemble_201):
    w2 = fluctuation_series(ensemble_201, 2)
    w4 = fluctuation_series(ensemble_201, 4, times=(1.0,))
    assert w4.centering == "exact"
    a, b = w2.column(0.5).values, w4.column(1.0).values
    prod = a * b
    exact = exact_fluctuation_covariance(201, 2, 4, 0.5, 1.0)
    assert abs(prod.mean() - exact) <= 4 * prod.std() / math.sqrt(len(prod))
    for t in (0.5, 1.0):
        col = w2.column(t).values
        assert abs(col.mean()) <= 4 * col.std() / math.sqrt(len(col))


def test_routes_agree_on_series():
    ens = generate_ensemble(6, TimeGrid((0.0, 0.5, 1.0)), 50, seed=9)
    for p in (2, 3, 4):
        spec = fluctuation_series(ens, p, route="spectral")
        comb = fluctuation_series(ens, p, route="combinatorial")
        np.testing.assert_allclose(spec.values, comb.values, rtol=1e-9, atol=1e-10)


def test_degenerate_powers_exact():
    ens = generate_ensemble(13, TimeGrid((0.0, 0.5, 1.0)), 40, seed=10)
    with pytest.raises(DegenerateCaseError):
        fluctuation_series(ens, 1)
    w0 = fluctuation_series(ens, 0, allow_degenerate=True)
    w1 = fluctuation_series(ens, 1, allow_degenerate=True)
    assert np.all(w0.values == 0.0)
    for k, t in enumerate(w1.times):
        np.testing.assert_array_equal(w1.values[:, k], ens.at(t)[:, 0])


def test_empirical_centering_and_auto_resolution():
    ens = generate_ensemble(30, TimeGrid((0.0, 1.0)), 200, seed=12)
    s = fluctuation_series(ens, 4, centering="auto", budget=1000)
    assert s.centering == "empirical"
    assert abs(s.values[:, 1].mean()) < 1e-10
    assert resolve_centering("auto", 30, 3, budget=10) == "exact"
    assert resolve_centering("auto", 30, 4, budget=10**6) == "exact"
    with pytest.raises(ValueError):
        resolve_centering("bogus", 3, 2)


def test_series_column_and_sample_at():
    ens = generate_ensemble(5, TimeGrid((0.0, 1.0)), 3, seed=1)
    s = fluctuation_series(ens, 2)
    with pytest.raises(GridError):
        s.column(0.5)
    sample = sample_at(ens, 2, 1.0)
    assert sample.n == 5 and sample.t == 1.0
    with pytest.raises(IndexError):
        sample_at(ens, 3, 1.0)


def test_series_csv_round_trip_and_header_flag(tmp_path):
    ens = generate_ensemble(7, TimeGrid((0.0, 0.5, 1.0)), 4, seed=13)
    s = fluctuation_series(ens, 3)
    s.to_csv(tmp_path / "a.csv", header=False)
    s.to_csv(tmp_path / "b.csv", header=False)
    s.to_csv(tmp_path / "c.csv", header=True)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    c_lines = (tmp_path / "c.csv").read_text().splitlines()
    assert c_lines[0].startswith("# generated ")
    assert c_lines[1:] == (tmp_path / "a.csv").read_text().splitlines()
    meta, obs = read_observables_csv(tmp_path / "c.csv")
    assert meta["n"] == 7 and meta["R"] == 4 and meta["seed"] == 13
    assert meta["centering"] == "exact" and meta["route"] == "spectral"
    for o in obs:
        np.testing.assert_array_equal(o.values, s.column(o.t).values)
