"""Distribution-compatibility tests used to veto biased imputers.

An imputer that fills gaps with values drawn from a visibly different
distribution than the observed data would tilt any downstream analysis, even
if its pointwise accuracy looks fine.  Before an imputer can be selected for
a feature we compare its re-imputed values against the originally observed
ones: two-sample Kolmogorov-Smirnov for continuous columns, a chi-square
independence test on the 2 x V category table for everything else.

The p-value machinery (asymptotic Kolmogorov distribution, regularized upper
incomplete gamma) is implemented here directly so library routines can serve
as an independent oracle in the tests.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInput, InvalidArgument
from .table import Column, ColumnKind

SMALL_SAMPLE_N = 30  # below this the asymptotic p-values get rough


class TestKind(enum.Enum):
    KS = "ks"
    CHI_SQUARE = "chi_square"


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    test: TestKind
    rejected: bool
    notes: tuple[str, ...] = ()


def ks_two_sample(a, b, alpha: float = 0.05) -> TestResult:
    """Two-sample Kolmogorov-Smirnov test.

    D is the exact supremum distance between the two empirical CDFs; the
    p-value uses the asymptotic Kolmogorov distribution at effective sample
    size n_a*n_b/(n_a+n_b).
    """
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise DegenerateInput("ks_two_sample needs non-empty samples")
    grid = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, grid, side="right") / a.size
    cdf_b = np.searchsorted(b, grid, side="right") / b.size
    d = float(np.abs(cdf_a - cdf_b).max())
    en = a.size * b.size / (a.size + b.size)
    p = _kolmogorov_sf(math.sqrt(en) * d)
    notes = ()
    if min(a.size, b.size) < SMALL_SAMPLE_N:
        notes = ("small_sample",)
    return TestResult(d, p, TestKind.KS, rejected=p < alpha, notes=notes)


def chi2_independence(
    observed_vals, imputed_vals, alpha: float = 0.05
) -> TestResult:
    """Chi-square independence test on the group x category table.

    Categories whose expected count in the smaller group falls below 5 are
    folded, rarest first, into a shared bucket before computing the Pearson
    statistic; df is the final category count minus one.
    """
    a = np.asarray(observed_vals, dtype=float)
    b = np.asarray(imputed_vals, dtype=float)
    if a.size == 0 or b.size == 0:
        raise DegenerateInput("chi2_independence needs non-empty groups")
    cats = np.unique(np.concatenate([a, b]))
    count_a = np.array([(a == c).sum() for c in cats], dtype=float)
    count_b = np.array([(b == c).sum() for c in cats], dtype=float)
    pairs = _merge_rare(list(zip(count_a, count_b)), a.size, b.size)
    if len(pairs) < 2:
        raise DegenerateInput("single category after merging")

    table = np.array(pairs, dtype=float).T  # 2 x V
    n = table.sum()
    expected = np.outer(table.sum(axis=1), table.sum(axis=0)) / n
    stat = float(((table - expected) ** 2 / expected).sum())
    df = table.shape[1] - 1
    p = _chi2_sf(stat, df)
    notes = ()
    if min(a.size, b.size) < SMALL_SAMPLE_N:
        notes = ("small_sample",)
    return TestResult(stat, p, TestKind.CHI_SQUARE, rejected=p < alpha, notes=notes)


def _merge_rare(pairs, n_a, n_b):
    """Fold categories with expected count < 5 in the smaller group into one
    bucket, rarest first.  Ties break on the count pair itself so the result
    never depends on how categories happen to be labeled."""
    total = float(n_a + n_b)
    floor = min(n_a, n_b)
    regular = list(pairs)
    bucket = None

    def pooled(p):
        return p[0] + p[1]

    while True:
        current = regular + ([bucket] if bucket is not None else [])
        if len(current) <= 1 or not regular:
            break
        if min(floor * pooled(p) / total for p in current) >= 5.0:
            break
        idx = min(
            range(len(regular)),
            key=lambda i: (pooled(regular[i]), regular[i][0], regular[i][1]),
        )
        rare = regular.pop(idx)
        if bucket is None:
            bucket = rare
        else:
            bucket = (bucket[0] + rare[0], bucket[1] + rare[1])
    return regular + ([bucket] if bucket is not None else [])


def distribution_compatible(
    col: Column, observed_cells, imputed_cells, alpha: float = 0.05
) -> TestResult:
    """Run the kind-appropriate test; continuous columns get KS, all other
    kinds the chi-square test.

    A chi-square collapse to a single category means the data cannot express
    a distribution mismatch; that comes back flagged and not rejected rather
    than as an error, since the caller treats it as "no veto".
    """
    if col.kind is None:
        raise InvalidArgument(f"column {col.name!r} has no kind assigned")
    if col.kind is ColumnKind.CONTINUOUS:
        return ks_two_sample(observed_cells, imputed_cells, alpha)
    try:
        return chi2_independence(observed_cells, imputed_cells, alpha)
    except DegenerateInput:
        return TestResult(
            0.0, 1.0, TestKind.CHI_SQUARE, rejected=False,
            notes=("single_category",),
        )


def _kolmogorov_sf(x: float) -> float:
    """Survival function of the Kolmogorov distribution.

    Two complementary series: a Jacobi theta form that converges fast for
    small x, and the alternating tail series for large x.
    """
    if x <= 0.0:
        return 1.0
    if x < 1.18:
        t = math.exp(-math.pi**2 / (8.0 * x * x))
        cdf = (
            math.sqrt(2.0 * math.pi)
            / x
            * (t + t**9 + t**25 + t**49)
        )
        return max(0.0, min(1.0, 1.0 - cdf))
    s = 0.0
    for k in range(1, 200):
        term = math.exp(-2.0 * k * k * x * x)
        s += term if k % 2 == 1 else -term
        if term < 1e-18:
            break
    return max(0.0, min(1.0, 2.0 * s))


def _chi2_sf(stat: float, df: int) -> float:
    """Upper tail of the chi-square distribution: Q(df/2, stat/2)."""
    if df < 1:
        raise InvalidArgument(f"df must be >= 1, got {df}")
    if stat < 0:
        raise InvalidArgument("chi-square statistic must be non-negative")
    return _reg_upper_gamma(df / 2.0, stat / 2.0)


def _reg_upper_gamma(s: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(s, x) = Gamma(s, x)/Gamma(s).

    Series for the lower function when x < s + 1, Lentz continued fraction
    for the upper function otherwise; the usual split keeps both convergent.
    """
    if x < 0.0 or s <= 0.0:
        raise InvalidArgument("gamma arguments out of domain")
    if x == 0.0:
        return 1.0
    if x < s + 1.0:
        term = 1.0 / s
        total = term
        a = s
        for _ in range(1000):
            a += 1.0
            term *= x / a
            total += term
            if abs(term) < abs(total) * 1e-16:
                break
        lower = total * math.exp(-x + s * math.log(x) - math.lgamma(s))
        return max(0.0, min(1.0, 1.0 - lower))
    tiny = 1e-300
    b = x + 1.0 - s
    c = 1.0 / tiny
    d = 1.0 / b if b != 0 else 1.0 / tiny
    h = d
    for i in range(1, 1000):
        an = -i * (i - s)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return max(
        0.0, min(1.0, math.exp(-x + s * math.log(x) - math.lgamma(s)) * h)
    )
