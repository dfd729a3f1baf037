"""Distribution summaries and the hypothesis-test battery.

Quantiles interpolate order statistics linearly at plotting position
``(k - 1) / (n - 1)``.  Every test returns a :class:`TestResult`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (DegenerateBinning, EmptySample, InsufficientData,
                     QOutOfRange, ZeroExpected)
from .model import DistributionSummary, TestResult
from .special import chi2_sf, f_sf, normal_quantile, t_sf_two_sided


@dataclass(frozen=True)
class Sample:
    values: tuple
    label: str = ""

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"sample {self.label!r} holds non-finite values")
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return len(self.values)

    def array(self):
        return np.asarray(self.values, dtype=np.float64)


def _values(sample) -> np.ndarray:
    if isinstance(sample, Sample):
        arr = sample.array()
    else:
        arr = np.asarray(sample, dtype=np.float64).ravel()
    if not np.all(np.isfinite(arr)):
        raise ValueError("sample holds non-finite values")
    return arr


def _sorted_quantile(xs: np.ndarray, q: float) -> float:
    n = len(xs)
    h = (n - 1) * q
    lo = int(math.floor(h))
    hi = min(lo + 1, n - 1)
    return float(xs[lo] + (h - lo) * (xs[hi] - xs[lo]))


def quantile(sample, q: float) -> float:
    if not 0.0 <= q <= 1.0:
        raise QOutOfRange(f"quantile level {q} outside [0, 1]")
    xs = np.sort(_values(sample))
    if len(xs) == 0:
        raise EmptySample("quantile of an empty sample")
    return _sorted_quantile(xs, q)


def summarize(sample) -> DistributionSummary:
    xs = np.sort(_values(sample))
    n = len(xs)
    if n == 0:
        raise EmptySample("cannot summarize an empty sample")
    mean = float(np.mean(xs))
    std = float(np.sqrt(np.sum((xs - mean) ** 2) / (n - 1))) if n > 1 else 0.0
    qs = [_sorted_quantile(xs, q) for q in (0.10, 0.25, 0.50, 0.75, 0.90)]
    lo, hi = float(xs[0]), float(xs[-1])
    return DistributionSummary(n=n, mean=mean, std=std, min=lo, max=hi, range=hi - lo,
                               q10=qs[0], q25=qs[1], median=qs[2], q75=qs[3], q90=qs[4],
                               std_defined=n > 1)


def anova_f(groups: Sequence) -> TestResult:
    """One-way analysis of variance."""
    arrs = [_values(g) for g in groups]
    k = len(arrs)
    if k < 2 or any(len(a) < 2 for a in arrs):
        raise InsufficientData("ANOVA needs at least two groups of size >= 2")
    n_total = sum(len(a) for a in arrs)
    if n_total <= k:
        raise InsufficientData("ANOVA needs more observations than groups")
    grand = sum(a.sum() for a in arrs) / n_total
    ss_between = sum(len(a) * (a.mean() - grand) ** 2 for a in arrs)
    ss_within = sum(((a - a.mean()) ** 2).sum() for a in arrs)
    df1, df2 = k - 1, n_total - k
    if ss_between == 0:
        return TestResult("anova_f", 0.0, (df1, df2), 1.0)
    if ss_within == 0:
        return TestResult("anova_f", math.inf, (df1, df2), 0.0, ("zero_within_variance",))
    f = (ss_between / df1) / (ss_within / df2)
    return TestResult("anova_f", float(f), (df1, df2), f_sf(f, df1, df2))


def t_test_two_sample(a, b, pooled: bool = True) -> TestResult:
    """Two-sided two-sample t-test (pooled variance or Welch)."""
    xa, xb = _values(a), _values(b)
    na, nb = len(xa), len(xb)
    if na < 2 or nb < 2:
        raise InsufficientData("t-test needs two samples of size >= 2")
    va = ((xa - xa.mean()) ** 2).sum() / (na - 1)
    vb = ((xb - xb.mean()) ** 2).sum() / (nb - 1)
    diff = xa.mean() - xb.mean()
    if pooled:
        name = "t_pooled"
        df = na + nb - 2
        se2 = ((na - 1) * va + (nb - 1) * vb) / df * (1.0 / na + 1.0 / nb)
    else:
        name = "t_welch"
        sa, sb = va / na, vb / nb
        se2 = sa + sb
        df = se2 ** 2 / (sa ** 2 / (na - 1) + sb ** 2 / (nb - 1)) if se2 > 0 else na + nb - 2
    if diff == 0:
        return TestResult(name, 0.0, (float(df),), 1.0)
    if se2 == 0:
        return TestResult(name, math.copysign(math.inf, diff), (float(df),), 0.0,
                          ("zero_variance",))
    t = diff / math.sqrt(se2)
    return TestResult(name, float(t), (float(df),), t_sf_two_sided(t, df))


def midranks(values) -> np.ndarray:
    """1-based ranks; tied values share the mean of their positions."""
    x = _values(values)
    order = np.argsort(x, kind="mergesort")
    xs = x[order]
    ranks = np.empty(len(x), dtype=np.float64)
    i = 0
    n = len(x)
    while i < n:
        j = i
        while j + 1 < n and xs[j + 1] == xs[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def van_der_waerden(groups: Sequence) -> TestResult:
    """k-sample normal-scores location test.

    Pooled mid-ranks r map to scores Phi^-1(r / (N + 1)); the statistic
    sum_j n_j * mean_j^2 / s^2 with s^2 = sum(score^2) / (N - 1) is
    referred to chi-square with k - 1 degrees of freedom.
    """
    arrs = [_values(g) for g in groups]
    k = len(arrs)
    n_total = sum(len(a) for a in arrs)
    if k < 2 or any(len(a) == 0 for a in arrs) or n_total < 4:
        raise InsufficientData("Van der Waerden needs >= 2 nonempty groups and N >= 4")
    ranks = midranks(np.concatenate(arrs))
    scores = np.array([normal_quantile(r / (n_total + 1)) for r in ranks])
    s2 = float(np.sum(scores ** 2) / (n_total - 1))
    df = (k - 1,)
    if s2 == 0:
        return TestResult("van_der_waerden", 0.0, df, 1.0, ("all_tied",))
    stat = 0.0
    start = 0
    for a in arrs:
        # exact sums keep group means independent of value order
        mean = math.fsum(scores[start:start + len(a)]) / len(a)
        stat += len(a) * mean ** 2
        start += len(a)
    stat /= s2
    return TestResult("van_der_waerden", stat, df, chi2_sf(stat, k - 1))


def merge_sparse_columns(table: np.ndarray, min_expected: float = 5.0) -> np.ndarray:
    """Fold columns whose expected counts fall below ``min_expected`` rightward.

    Columns are accumulated left to right until every cell of the running
    block has expected count >= ``min_expected``; a deficient tail block is
    folded into the last accepted column.
    """
    table = np.asarray(table, dtype=np.float64)
    rows = table.sum(axis=1)
    total = table.sum()
    if total == 0:
        return table[:, :0]
    blocks = []
    acc = np.zeros(table.shape[0])
    for j in range(table.shape[1]):
        acc = acc + table[:, j]
        expected = rows * acc.sum() / total
        if np.all(expected >= min_expected):
            blocks.append(acc)
            acc = np.zeros(table.shape[0])
    if acc.sum() > 0:
        if blocks:
            blocks[-1] = blocks[-1] + acc
        else:
            blocks.append(acc)
    return np.column_stack(blocks) if blocks else table[:, :0]


def _pearson(table):
    rows = table.sum(axis=1, keepdims=True)
    cols = table.sum(axis=0, keepdims=True)
    expected = rows * cols / table.sum()
    return float(np.sum((table - expected) ** 2 / expected))


def _proportional_rows(table):
    # exact for integer counts: t[i, j] * n_k == t[k, j] * n_i
    rows = table.sum(axis=1)
    return bool(np.all(table * rows[0] == table[:1] * rows[:, None]))


def chi_square_contingency(table, merge: bool = True, min_expected: float = 5.0,
                           name: str = "chi_square_independence") -> TestResult:
    """Pearson chi-square on an r x c table of counts.

    Rows with identical profiles give statistic 0 and p = 1 even when
    merging would collapse the table; any other collapse to a single row
    or column raises :class:`DegenerateBinning`.
    """
    table = np.asarray(table, dtype=np.float64)
    table = table[table.sum(axis=1) > 0][:, table.sum(axis=0) > 0]
    if table.shape[0] >= 2 and table.shape[1] >= 2 and _proportional_rows(table):
        return TestResult(name, 0.0, ((table.shape[0] - 1) * (table.shape[1] - 1),), 1.0)
    if merge:
        table = merge_sparse_columns(table, min_expected)
    r, c = table.shape
    if r < 2 or c < 2:
        raise DegenerateBinning("contingency collapses to a single row or column")
    stat = _pearson(table)
    df = (r - 1) * (c - 1)
    return TestResult(name, stat, (df,), chi2_sf(stat, df))


def bin_counts(samples: Sequence, bins: int) -> np.ndarray:
    """Counts of each sample over equal-width bins spanning the pooled range."""
    arrs = [_values(s) for s in samples]
    pooled = np.concatenate(arrs)
    lo, hi = float(pooled.min()), float(pooled.max())
    if lo == hi:
        raise DegenerateBinning("all observations share one value")
    edges = np.linspace(lo, hi, bins + 1)
    return np.vstack([np.histogram(a, bins=edges)[0] for a in arrs])


def chi_square_homogeneity(samples: Sequence, bins: int = 20,
                           name: str = "chi_square_homogeneity") -> TestResult:
    """k-sample version of :func:`chi_square_independence`."""
    if bins < 2:
        raise ValueError("bins must be >= 2")
    arrs = [_values(s) for s in samples]
    if len(arrs) < 2 or any(len(a) == 0 for a in arrs):
        raise InsufficientData("chi-square needs >= 2 nonempty samples")
    return chi_square_contingency(bin_counts(arrs, bins), name=name)


def chi_square_independence(a, b, bins: int = 20) -> TestResult:
    """Binned two-sample chi-square test on the pooled range.

    Builds the 2 x ``bins`` contingency of equal-width bins, merges columns
    with expected counts below 5 rightward, and applies Pearson's statistic
    with (columns - 1) degrees of freedom.
    """
    return chi_square_homogeneity([a, b], bins, name="chi_square_independence")


def chi_square_gof(observed, expected) -> TestResult:
    obs = np.asarray(observed, dtype=np.float64)
    exp = np.asarray(expected, dtype=np.float64)
    if obs.shape != exp.shape or obs.ndim != 1 or len(obs) < 2:
        raise ValueError("observed and expected must be equal-length vectors of length >= 2")
    if np.any(exp <= 0):
        raise ZeroExpected("expected counts must all be positive")
    stat = float(np.sum((obs - exp) ** 2 / exp))
    df = len(obs) - 1
    return TestResult("chi_square_gof", stat, (df,), chi2_sf(stat, df))


def qq_points(a, b, k: int) -> list:
    xa, xb = np.sort(_values(a)), np.sort(_values(b))
    if len(xa) < 2 or len(xb) < 2:
        raise EmptySample("Q-Q pairing needs two samples of size >= 2")
    if k < 2:
        raise ValueError("k must be >= 2")
    return [(_sorted_quantile(xa, i / (k + 1)), _sorted_quantile(xb, i / (k + 1)))
            for i in range(1, k + 1)]


def kolmogorov_uniform(pvalues) -> float:
    """Kolmogorov distance between an empirical sample and U(0, 1)."""
    p = np.sort(np.asarray(pvalues, dtype=np.float64))
    n = len(p)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - p), np.max(p - (i - 1) / n)))
