"""Independent reference computations: exact rationals, brute force, quadrature."""

import math
from fractions import Fraction
from itertools import combinations

from scipy import integrate


def frac(xs):
    return [Fraction(x) for x in xs]


def anova_exact(groups):
    gs = [frac(g) for g in groups]
    allv = [v for g in gs for v in g]
    n, k = len(allv), len(gs)
    grand = sum(allv) / n
    ssb = sum(len(g) * (sum(g) / len(g) - grand) ** 2 for g in gs)
    ssw = sum(sum((v - sum(g) / len(g)) ** 2 for v in g) for g in gs)
    return float((ssb / (k - 1)) / (ssw / (n - k))), (k - 1, n - k)


def t_exact(a, b, pooled):
    a, b = frac(a), frac(b)
    na, nb = len(a), len(b)
    ma, mb = sum(a) / na, sum(b) / nb
    va = sum((v - ma) ** 2 for v in a) / (na - 1)
    vb = sum((v - mb) ** 2 for v in b) / (nb - 1)
    if pooled:
        df = na + nb - 2
        se2 = ((na - 1) * va + (nb - 1) * vb) / df * (Fraction(1, na) + Fraction(1, nb))
        df = float(df)
    else:
        se2 = va / na + vb / nb
        df = float(se2 ** 2 / ((va / na) ** 2 / (na - 1) + (vb / nb) ** 2 / (nb - 1)))
    return float(ma - mb) / math.sqrt(float(se2)), df


def ols_exact(x, y):
    x, y = frac(x), frac(y)
    n = len(x)
    sx, sy = sum(x), sum(y)
    sxx = sum(v * v for v in x) - sx * sx / n
    sxy = sum(a * b for a, b in zip(x, y)) - sx * sy / n
    slope = sxy / sxx
    icpt = (sy - slope * sx) / n
    ssr = sum((b - icpt - slope * a) ** 2 for a, b in zip(x, y))
    se = math.sqrt(float(ssr / (n - 2) / sxx))
    return float(slope), float(icpt), se


def gof_exact(obs, exp):
    obs, exp = frac(obs), frac(exp)
    return float(sum((o - e) ** 2 / e for o, e in zip(obs, exp))), len(obs) - 1


def brute_midranks(values):
    # rank = 1 + number strictly below + half the number of ties excluding itself
    return [1 + sum(w < v for w in values) + 0.5 * (sum(w == v for w in values) - 1)
            for v in values]


def vdw_brute(groups, ppf):
    pooled = [v for g in groups for v in g]
    n = len(pooled)
    scores = [ppf(r / (n + 1)) for r in brute_midranks(pooled)]
    s2 = sum(s * s for s in scores) / (n - 1)
    stat, i = 0.0, 0
    for g in groups:
        seg = scores[i:i + len(g)]
        stat += len(g) * (sum(seg) / len(g)) ** 2
        i += len(g)
    return stat / s2, len(groups) - 1


def brute_quantile(xs, q):
    """Definition by plotting positions: the k-th smallest sits at (k-1)/(n-1)."""
    xs = sorted(xs)
    n = len(xs)
    if n == 1:
        return xs[0]
    pos = [(k - 1) / (n - 1) for k in range(1, n + 1)]
    for k in range(n - 1):
        if pos[k] <= q <= pos[k + 1]:
            w = (q - pos[k]) / (pos[k + 1] - pos[k])
            return xs[k] + w * (xs[k + 1] - xs[k])
    raise AssertionError


def chi2_tail(x, k):
    logc = -(k / 2) * math.log(2) - math.lgamma(k / 2)
    dens = lambda t: math.exp(logc + (k / 2 - 1) * math.log(t) - t / 2) if t > 0 else 0.0
    # split at the mode so quad sees the peak
    mode = max(k - 2, 0)
    if x < mode:
        return (integrate.quad(dens, x, mode, limit=200)[0]
                + integrate.quad(dens, mode, math.inf, limit=200)[0])
    return integrate.quad(dens, x, math.inf, limit=200)[0]


def t_two_sided(t, v):
    logc = math.lgamma((v + 1) / 2) - math.lgamma(v / 2) - 0.5 * math.log(v * math.pi)
    dens = lambda s: math.exp(logc - (v + 1) / 2 * math.log1p(s * s / v))
    return 2 * integrate.quad(dens, abs(t), math.inf, limit=200)[0]


def f_tail(f, d1, d2):
    logc = (d1 / 2) * math.log(d1 / d2) - (math.lgamma(d1 / 2) + math.lgamma(d2 / 2)
                                          - math.lgamma((d1 + d2) / 2))
    def dens(x):
        if x <= 0:
            return 0.0
        return math.exp(logc + (d1 / 2 - 1) * math.log(x) - (d1 + d2) / 2 * math.log1p(d1 * x / d2))
    lower = integrate.quad(dens, 0, f, limit=200)[0] if f < 1 else None
    if lower is not None and d1 > 1:
        return 1.0 - lower
    return integrate.quad(dens, f, math.inf, limit=200)[0]


def exact_permutation_groups(values, sizes):
    """All ways to deal ``values`` into groups of the given sizes (two groups)."""
    idx = range(len(values))
    for pick in combinations(idx, sizes[0]):
        rest = [values[i] for i in idx if i not in pick]
        yield [values[i] for i in pick], rest
