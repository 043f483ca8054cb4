"""Index sets, Eulerian densities, clusters and pair partitions.

``A_p`` is the set of p-tuples over ``{0..n-1}`` whose sum is 0 mod n;
``A_{p,s}`` keeps the tuples whose sum is exactly ``s*n``. Primed
("distinct") variants forbid equal neighbours ``i_j == i_{j+1}`` by
default, or any repeated coordinate with ``distinct="pairwise"``.
"""

from __future__ import annotations

import itertools
import math
import warnings
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ._validation import DEFAULT_BUDGET, check_budget, check_count
from .errors import BudgetExceededError

VARIANTS = ("A_p", "A_p_distinct", "A_ps", "A_ps_distinct")
DISTINCT_MODES = ("consecutive", "pairwise")


# --- enumeration of A_p -----------------------------------------------------

def iter_a_p(n, p, budget=DEFAULT_BUDGET):
    """Yield every member of A_p, in blocks of shape ``(k, p)``.

    The first ``p-1`` coordinates range freely (lexicographic order) and the
    last one is solved mod n, so exactly ``n**(p-1)`` rows are produced.
    """
    n = check_count(n, "n")
    p = check_count(p, "p")
    budget = check_budget(budget)
    total = n ** (p - 1)
    if total > budget:
        raise BudgetExceededError(total, budget, f"enumerating A_{p} for n={n}")
    if p == 1:
        yield np.zeros((1, 1), dtype=np.int64)
        return
    k = min(p - 1, 2)
    tail = np.indices((n,) * k, dtype=np.int64).reshape(k, -1).T
    tail_sum = tail.sum(axis=1)
    lead = p - 1 - k
    for prefix in itertools.product(range(n), repeat=lead):
        block = np.empty((len(tail), p), dtype=np.int64)
        block[:, :lead] = prefix
        block[:, lead:p - 1] = tail
        block[:, -1] = (-(sum(prefix) + tail_sum)) % n
        yield block


def _distinct_mask(block, mode):
    if mode == "consecutive":
        return np.all(block[:, 1:] != block[:, :-1], axis=1)
    if mode == "pairwise":
        s = np.sort(block, axis=1)
        return np.all(s[:, 1:] != s[:, :-1], axis=1)
    raise ValueError(f"distinct must be one of {DISTINCT_MODES}, got {mode!r}")


def count_by_level(n, p, distinct=None, budget=DEFAULT_BUDGET):
    """Counts ``|A_{p,s}|`` (or a distinct variant) for ``s = 0..p-1``."""
    counts = np.zeros(p, dtype=np.int64)
    for block in iter_a_p(n, p, budget):
        if distinct is not None:
            block = block[_distinct_mask(block, distinct)]
        counts += np.bincount(block.sum(axis=1) // n, minlength=p)[:p]
    return counts


def count_level(n, p, s, budget=DEFAULT_BUDGET):
    """``|A_{p,s}|`` by solving ``i_p = s*n - (i_1+...+i_{p-1})`` over the heads.

    Independent of :func:`count_by_level`, which bins A_p by sum level.
    """
    n = check_count(n, "n")
    p = check_count(p, "p")
    budget = check_budget(budget)
    if n ** (p - 1) > budget:
        raise BudgetExceededError(n ** (p - 1), budget, f"counting A_{p},{s} for n={n}")
    if p == 1:
        return int(s == 0)
    total = 0
    k = min(p - 1, 2)
    tail_sum = np.indices((n,) * k, dtype=np.int64).reshape(k, -1).sum(axis=0)
    for prefix in itertools.product(range(n), repeat=p - 1 - k):
        last = s * n - (sum(prefix) + tail_sum)
        total += int(np.count_nonzero((last >= 0) & (last <= n - 1)))
    return total


@dataclass(frozen=True)
class IndexFamily:
    n: int
    p: int
    variant: str
    s: int | None
    count: int
    members: np.ndarray | None = field(default=None, repr=False)
    distinct: str = "consecutive"


def enumerate_index_family(n, p, variant="A_p", s=None, *, distinct="consecutive",
                           keep_members=True, budget=DEFAULT_BUDGET):
    """Enumerate one of A_p, A'_p, A_{p,s}, A'_{p,s} exactly.

    Members come back as an ``(count, p)`` integer array when
    ``keep_members`` is true. A sum level outside ``0..p-1`` yields an empty
    family.
    """
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}, got {variant!r}")
    by_level = variant.startswith("A_ps")
    if by_level and s is None:
        raise ValueError(f"variant {variant} needs a sum level s")
    if not by_level:
        s = None
    mode = distinct if variant.endswith("_distinct") else None
    if mode is not None and mode not in DISTINCT_MODES:
        raise ValueError(f"distinct must be one of {DISTINCT_MODES}, got {mode!r}")

    kept, count = [], 0
    for block in iter_a_p(n, p, budget):
        mask = np.ones(len(block), dtype=bool)
        if by_level:
            mask &= block.sum(axis=1) == s * n
        if mode is not None:
            mask &= _distinct_mask(block, mode)
        count += int(mask.sum())
        if keep_members:
            kept.append(block[mask])
    members = np.concatenate(kept) if keep_members else None
    return IndexFamily(n=n, p=p, variant=variant, s=s, count=count,
                       members=members, distinct=distinct)


# --- Eulerian density ---------------------------------------------------------

class DensityRangeWarning(UserWarning):
    """Raised as a note when ``f_p(s)`` is requested outside ``0..p-1``."""


def eulerian_density_exact(p, s, convention="normalized"):
    """Exact ``f_p(s)`` as a Fraction.

    ``"normalized"`` includes the ``1/(p-1)!`` factor, which makes the values
    the Irwin-Hall density of a sum of p uniforms at s and sum to 1 over
    ``s = 0..p-1``. ``"display"`` omits it (values are Eulerian numbers).
    """
    p = check_count(p, "p", minimum=2)
    if convention not in ("normalized", "display"):
        raise ValueError(f"unknown convention {convention!r}")
    if not 0 <= s <= p - 1:
        warnings.warn(f"f_{p}({s}) is outside the support s = 0..{p - 1}; returning 0",
                      DensityRangeWarning, stacklevel=3)
        return Fraction(0)
    total = sum((-1) ** k * math.comb(p, k) * (s - k) ** (p - 1) for k in range(s + 1))
    if convention == "normalized":
        return Fraction(total, math.factorial(p - 1))
    return Fraction(total)


def eulerian_density(p, s, convention="normalized"):
    """Float value of :func:`eulerian_density_exact`; 0 outside ``0..p-1``."""
    return float(eulerian_density_exact(p, s, convention))


def eulerian_total(p, convention="normalized"):
    return sum(eulerian_density_exact(p, s, convention) for s in range(p))


@dataclass(frozen=True)
class DensityRow:
    n: int
    p: int
    s: int
    variant: str
    count: int
    ratio: float
    f_ps: float
    abs_error: float


@dataclass
class DensityReport:
    """Ratios ``|A_{p,s}|/n^(p-1)`` against f_p(s), plus the primed gaps.

    ``gaps[(n, s, mode)]`` holds ``|A_{p,s}| - |A'_{p,s}|``; it should grow
    like ``n**(p-2)``, so ``gap_ratios`` divides by that power.
    """

    p: int
    rows: list = field(default_factory=list)
    gaps: dict = field(default_factory=dict)
    gap_ratios: dict = field(default_factory=dict)

    def ratio(self, n, s, variant="A_ps"):
        for row in self.rows:
            if (row.n, row.s, row.variant) == (n, s, variant):
                return row.ratio
        raise KeyError((n, s, variant))


def density_limit_check(p, n_list, budget=DEFAULT_BUDGET):
    p = check_count(p, "p", minimum=2)
    report = DensityReport(p=p)
    for n in n_list:
        scale = n ** (p - 1)
        base = count_by_level(n, p, budget=budget)
        variants = {"A_ps": base}
        for mode in DISTINCT_MODES:
            name = "A_ps_distinct" if mode == "consecutive" else "A_ps_distinct_pairwise"
            variants[name] = count_by_level(n, p, distinct=mode, budget=budget)
        for s in range(p):
            f = eulerian_density(p, s)
            for name, counts in variants.items():
                ratio = int(counts[s]) / scale
                report.rows.append(DensityRow(n, p, s, name, int(counts[s]), ratio, f, abs(ratio - f)))
            for mode, name in (("consecutive", "A_ps_distinct"), ("pairwise", "A_ps_distinct_pairwise")):
                gap = int(base[s] - variants[name][s])
                report.gaps[(n, s, mode)] = gap
                report.gap_ratios[(n, s, mode)] = gap / n ** (p - 2)
    return report


# --- clusters -----------------------------------------------------------------

@dataclass(frozen=True)
class VectorTupleSystem:
    """Vectors ``J_1..J_l`` with their coordinate multisets ``S_J``."""

    vectors: tuple

    def __post_init__(self):
        object.__setattr__(self, "vectors", tuple(tuple(int(x) for x in v) for v in self.vectors))

    @property
    def multisets(self):
        return [Counter(v) for v in self.vectors]


@dataclass(frozen=True)
class ClusterDecomposition:
    blocks: tuple
    multiplicity: dict
    cross_multiplicity: dict
    self_multiplicity: dict

    @property
    def n_clusters(self):
        return len(self.blocks)


def _find(parent, x):
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


def cluster_decompose(system):
    """Connected components of the "coordinate multisets intersect" graph.

    Accepts a :class:`VectorTupleSystem` or a plain sequence of vectors.
    ``blocks`` lists vector indices (0-based) per component, sorted.
    ``self_multiplicity`` maps ``(vector_index, element)`` to its count
    whenever that count exceeds one.
    """
    if not isinstance(system, VectorTupleSystem):
        system = VectorTupleSystem(tuple(system))
    vectors = system.vectors
    if not vectors:
        raise ValueError("need at least one vector")
    parent = list(range(len(vectors)))
    owner = {}
    for idx, vec in enumerate(vectors):
        for x in vec:
            if x in owner:
                a, b = _find(parent, owner[x]), _find(parent, idx)
                if a != b:
                    parent[max(a, b)] = min(a, b)
            else:
                owner[x] = idx
    groups = {}
    for idx in range(len(vectors)):
        groups.setdefault(_find(parent, idx), []).append(idx)
    blocks = tuple(sorted(tuple(g) for g in groups.values()))

    multiplicity, cross, selfm = Counter(), Counter(), {}
    for idx, ms in enumerate(system.multisets):
        for x, c in ms.items():
            multiplicity[x] += c
            cross[x] += 1
            if c > 1:
                selfm[(idx, x)] = c
    return ClusterDecomposition(blocks, dict(multiplicity), dict(cross), selfm)


def _single_cluster(vectors):
    sets = [set(v) for v in vectors]
    seen, frontier = {0}, [0]
    while frontier:
        a = frontier.pop()
        for b in range(len(sets)):
            if b not in seen and sets[a] & sets[b]:
                seen.add(b)
                frontier.append(b)
    return len(seen) == len(sets)


def enumerate_B(n, ps, budget=DEFAULT_BUDGET, multiplicity="at_least_two"):
    """Exact ``|B_P|``: tuples in ``A_{p_1} x ... x A_{p_l}`` forming one
    cluster in which every element of the union has total multiplicity >= 2.

    ``multiplicity="even"`` instead keeps only tuples whose multiplicities are
    all even, i.e. the ones with a nonzero Gaussian moment.
    """
    ps = tuple(check_count(p, "p") for p in ps)
    if not ps:
        raise ValueError("need at least one vector length")
    if multiplicity not in ("at_least_two", "even"):
        raise ValueError(f"unknown multiplicity rule {multiplicity!r}")
    total = math.prod(n ** (p - 1) for p in ps)
    if total > budget:
        raise BudgetExceededError(total, budget, f"enumerating B_{ps} for n={n}")
    families = []
    for p in ps:
        rows = np.concatenate(list(iter_a_p(n, p, budget)))
        families.append([tuple(r) for r in rows.tolist()])

    count = 0
    for combo in itertools.product(*families):
        mult = Counter(itertools.chain.from_iterable(combo))
        if multiplicity == "even":
            if any(c % 2 for c in mult.values()):
                continue
        elif min(mult.values()) < 2:
            continue
        if _single_cluster(combo):
            count += 1
    return count


@dataclass(frozen=True)
class ClusterScaling:
    ps: tuple
    n_values: tuple
    counts: tuple
    slope: float
    bound_exponent: float
    multiplicity: str


def cluster_count_scaling(ps, n_values, budget=DEFAULT_BUDGET, multiplicity="at_least_two"):
    """Fit ``log |B_P|`` against ``log n``; compare to ``sum(p)/2 - l``."""
    counts = tuple(enumerate_B(n, ps, budget, multiplicity) for n in n_values)
    if min(counts) <= 0:
        slope = float("nan")
    else:
        slope = float(np.polyfit(np.log(n_values), np.log(counts), 1)[0])
    return ClusterScaling(tuple(ps), tuple(n_values), counts, slope,
                          sum(ps) / 2 - len(ps), multiplicity)


# --- pair partitions and Gaussian moments ---------------------------------------

@dataclass(frozen=True)
class PairPartition:
    """Disjoint pairs ``(y, z)`` with ``y < z`` covering ``0..l-1``."""

    pairs: tuple

    @property
    def size(self):
        return 2 * len(self.pairs)


def _pairings(items):
    if not items:
        yield ()
        return
    first, rest = items[0], items[1:]
    for i, other in enumerate(rest):
        for tail in _pairings(rest[:i] + rest[i + 1:]):
            yield ((first, other),) + tail


def pair_partitions(size):
    """All ``(size-1)!!`` pairings of ``0..size-1``; empty for odd sizes."""
    size = check_count(size, "size", minimum=0)
    if size > 12:
        raise ValueError(f"pair partitions limited to size <= 12, got {size}")
    if size % 2:
        return []
    return [PairPartition(tuple(sorted(p))) for p in _pairings(tuple(range(size)))]


def double_factorial(k):
    return math.prod(range(k, 0, -2)) if k > 0 else 1


def wick_gaussian_product_moment(multiplicities, t):
    """``E[prod_q b_q(t)^{m_q}]`` for independent Brownian motions at time t."""
    exponent, weight = 0, 1
    for count in multiplicities.values():
        if count < 0:
            raise ValueError(f"multiplicities must be non-negative, got {count}")
        if count % 2:
            return 0.0
        exponent += count // 2
        weight *= double_factorial(count - 1)
    return weight * float(t) ** exponent
