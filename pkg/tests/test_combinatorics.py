import itertools
import math
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from circfluct.combinatorics import (
    DensityRangeWarning,
    cluster_count_scaling,
    cluster_decompose,
    count_by_level,
    count_level,
    density_limit_check,
    double_factorial,
    enumerate_B,
    enumerate_index_family,
    eulerian_density,
    eulerian_density_exact,
    eulerian_total,
    iter_a_p,
    pair_partitions,
    wick_gaussian_product_moment,
)
from circfluct.errors import BudgetExceededError


def brute_family(n, p, s=None, distinct=None):
    out = []
    for idx in itertools.product(range(n), repeat=p):
        if sum(idx) % n:
            continue
        if s is not None and sum(idx) != s * n:
            continue
        if distinct == "consecutive" and any(a == b for a, b in zip(idx, idx[1:])):
            continue
        if distinct == "pairwise" and len(set(idx)) < p:
            continue
        out.append(idx)
    return sorted(out)


def brute_B(n, ps):
    families = [brute_family(n, p) for p in ps]
    count = 0
    for combo in itertools.product(*families):
        mult = Counter(x for v in combo for x in v)
        if min(mult.values()) < 2:
            continue
        sets = [set(v) for v in combo]
        # connected iff repeated merging reaches everything
        reached = set(sets[0])
        members = {0}
        grew = True
        while grew:
            grew = False
            for k, s_ in enumerate(sets):
                if k not in members and reached & s_:
                    members.add(k)
                    reached |= s_
                    grew = True
        count += len(members) == len(sets)
    return count


def test_hand_examples():
    fam = enumerate_index_family(3, 2, "A_p")
    assert sorted(map(tuple, fam.members.tolist())) == [(0, 0), (1, 2), (2, 1)]
    assert fam.count == 3
    fam = enumerate_index_family(2, 2, "A_ps", s=1)
    assert fam.members.tolist() == [[1, 1]] and fam.count == 1
    for n in (1, 4, 9):
        fam = enumerate_index_family(n, 1, "A_p")
        assert fam.members.tolist() == [[0]] and fam.count == 1


@pytest.mark.parametrize("n,p", [(1, 1), (2, 3), (3, 3), (4, 2), (5, 4), (6, 3), (3, 5)])
def test_families_against_full_product_filter(n, p):
    for variant, distinct in [("A_p", None), ("A_p_distinct", "consecutive"),
                              ("A_p_distinct", "pairwise")]:
        fam = enumerate_index_family(n, p, variant, distinct=distinct or "consecutive")
        assert sorted(map(tuple, fam.members.tolist())) == brute_family(n, p, None, distinct)
        assert fam.count == len(fam.members)
    for s in range(p):
        for variant, distinct in [("A_ps", None), ("A_ps_distinct", "consecutive"),
                                  ("A_ps_distinct", "pairwise")]:
            fam = enumerate_index_family(n, p, variant, s=s,
                                         distinct=distinct or "consecutive")
            assert sorted(map(tuple, fam.members.tolist())) == brute_family(n, p, s, distinct)


def test_level_out_of_range_is_empty():
    assert enumerate_index_family(5, 3, "A_ps", s=3).count == 0
    assert enumerate_index_family(5, 3, "A_ps", s=-1).count == 0
    assert count_level(5, 3, 7) == 0


def test_family_errors():
    with pytest.raises(ValueError):
        enumerate_index_family(3, 2, "A_ps")
    with pytest.raises(ValueError):
        enumerate_index_family(3, 2, "B")
    with pytest.raises(BudgetExceededError):
        enumerate_index_family(100, 4, budget=10**5)


@settings(max_examples=60, deadline=None)
@given(n=st.integers(1, 40), p=st.integers(1, 4))
def test_counts_partition_A_p(n, p):
    levels = count_by_level(n, p)
    assert int(levels.sum()) == n ** (p - 1)
    assert [int(c) for c in levels] == [count_level(n, p, s) for s in range(p)]
    assert sum(len(b) for b in iter_a_p(n, p)) == n ** (p - 1)


def test_distinct_variants_bounded_by_full():
    full = count_by_level(12, 4)
    consecutive = count_by_level(12, 4, distinct="consecutive")
    pairwise = count_by_level(12, 4, distinct="pairwise")
    assert np.all(pairwise <= consecutive) and np.all(consecutive <= full)


def test_eulerian_values():
    assert eulerian_density_exact(2, 0) == 0 and eulerian_density_exact(2, 1) == 1
    assert eulerian_density_exact(3, 1) == Fraction(1, 2) == eulerian_density_exact(3, 2)
    assert eulerian_density(4, 1) == pytest.approx(1 / 6)
    # display convention: Eulerian-number values, total (p-1)!
    assert [eulerian_density_exact(4, s, "display") for s in range(4)] == [0, 1, 4, 1]
    assert eulerian_total(5, "display") == math.factorial(4)


@pytest.mark.parametrize("p", range(2, 11))
def test_density_sums_to_one_and_nonnegative(p):
    values = [eulerian_density_exact(p, s) for s in range(p)]
    assert all(v >= 0 for v in values)
    assert sum(values) == 1


def test_density_out_of_range_warns():
    with pytest.warns(DensityRangeWarning):
        assert eulerian_density(3, 5) == 0.0
    with pytest.warns(DensityRangeWarning):
        assert eulerian_density(3, -1) == 0.0


def test_density_limit_check_rows():
    report = density_limit_check(3, [100])
    row = [r for r in report.rows if r.s == 1 and r.variant == "A_ps"][0]
    assert abs(row.ratio - 0.5) <= 0.05 and row.f_ps == 0.5
    assert report.ratio(100, 0) == pytest.approx(1 / 100 ** 2)
    assert density_limit_check(2, [50]).ratio(50, 1) == pytest.approx(49 / 50)


def test_distinct_gap_grows_like_lower_order():
    report = density_limit_check(3, [20, 40, 80])
    # the removed tuples are an O(n^(p-2)) sliver: ratio to n^(p-2) stays bounded
    ratios = [report.gap_ratios[n, 1, "pairwise"] for n in (20, 40, 80)]
    assert max(ratios) < 5
    assert all(report.gaps[n, 1, "consecutive"] <= report.gaps[n, 1, "pairwise"]
               for n in (20, 40, 80))


def test_cluster_examples():
    dec = cluster_decompose([(0, 0), (1, 2), (2, 1)])
    assert dec.blocks == ((0,), (1, 2))
    assert dec.self_multiplicity == {(0, 0): 2}
    assert dec.multiplicity == {0: 2, 1: 2, 2: 2}
    assert dec.cross_multiplicity == {0: 1, 1: 2, 2: 2}
    assert cluster_decompose([(1, 2, 3)] * 3).n_clusters == 1
    assert cluster_decompose([(0, 1), (2, 3), (4, 5), (6, 7)]).n_clusters == 4


@settings(max_examples=80, deadline=None)
@given(st.lists(st.lists(st.integers(0, 8), min_size=1, max_size=4), min_size=1, max_size=6),
       st.randoms(use_true_random=False))
def test_cluster_partition_invariant_under_permutation(vectors, rnd):
    order = list(range(len(vectors)))
    rnd.shuffle(order)
    base = cluster_decompose(vectors)
    perm = cluster_decompose([vectors[k] for k in order])
    relabelled = {tuple(sorted(order[k] for k in block)) for block in perm.blocks}
    assert relabelled == set(base.blocks)
    # connectivity check against a naive definition: same block iff a chain exists
    for block in base.blocks:
        for a in block:
            for b in range(len(vectors)):
                if set(vectors[a]) & set(vectors[b]):
                    assert b in block


def test_B_golden_fixture():
    # frozen from brute_B: (0,0),(0,0) and (1,1),(1,1) at n=2
    assert brute_B(2, (2, 2)) == 2
    assert enumerate_B(2, (2, 2)) == 2


@pytest.mark.parametrize("n,ps", [(3, (2, 2)), (4, (2, 3)), (5, (3, 3)), (4, (2, 2, 2)),
                                  (3, (1, 2)), (4, (1,)), (1, (1,)), (3, (2, 2, 1))])
def test_B_against_brute_force(n, ps):
    assert enumerate_B(n, ps) == brute_B(n, ps)


def test_B_bounded_by_product_of_families():
    for n, ps in [(4, (2, 2)), (5, (2, 3)), (6, (2, 2, 2))]:
        assert enumerate_B(n, ps) <= math.prod(n ** (p - 1) for p in ps)


def test_B_single_short_vector():
    # p=1 forces J=(0) whose only element has multiplicity 1
    assert enumerate_B(7, (1,)) == 0


def test_B_three_pairs_frozen_counts():
    # frozen from brute_B at n = 4..12; the triple (i, n-i) repeated thrice drives growth
    fit = cluster_count_scaling((2, 2, 2), (4, 6, 8, 10, 12))
    assert fit.counts == (10, 18, 26, 34, 42)
    assert fit.bound_exponent == 0
    even = cluster_count_scaling((2, 2, 2), (4, 6, 8, 10, 12), multiplicity="even")
    assert even.counts == (2, 2, 2, 2, 2) and even.slope == pytest.approx(0, abs=1e-12)


def test_B_budget():
    with pytest.raises(BudgetExceededError):
        enumerate_B(20, (3, 3), budget=1000)


@pytest.mark.parametrize("size,expected", [(0, 1), (2, 1), (4, 3), (6, 15), (8, 105), (12, 10395)])
def test_pair_partition_counts(size, expected):
    parts = pair_partitions(size)
    assert len(parts) == expected == double_factorial(size - 1)
    assert len(set(parts)) == expected
    for part in parts:
        assert sorted(x for pair in part.pairs for x in pair) == list(range(size))
        assert all(y < z for y, z in part.pairs)
        assert list(part.pairs) == sorted(part.pairs)


def test_pair_partition_edges():
    assert pair_partitions(5) == []
    assert pair_partitions(2)[0].pairs == ((0, 1),)
    with pytest.raises(ValueError):
        pair_partitions(14)


def test_wick_product_moment():
    assert wick_gaussian_product_moment({0: 1, 1: 1}, 2.0) == 0.0
    assert wick_gaussian_product_moment({0: 4}, 1.5) == pytest.approx(3 * 1.5 ** 2)
    assert wick_gaussian_product_moment({"a": 2, "b": 2}, 0.7) == pytest.approx(0.49)
    assert wick_gaussian_product_moment({}, 3.0) == 1.0
    with pytest.raises(ValueError):
        wick_gaussian_product_moment({0: -2}, 1.0)


@settings(max_examples=30, deadline=None)
@given(st.dictionaries(st.integers(0, 3), st.integers(0, 4), min_size=1, max_size=3),
       st.floats(0.1, 2.0))
def test_wick_product_moment_matches_pairing_count(mults, t):
    # independent route: count pairings within each index block
    expected = 1.0
    for m in mults.values():
        expected *= 0.0 if m % 2 else len(pair_partitions(m)) * t ** (m // 2)
    assert wick_gaussian_product_moment(mults, t) == pytest.approx(expected)
