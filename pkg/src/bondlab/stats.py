"""Shared statistical primitives.

Pearson correlation, order-statistic percentiles, Newey-West HAC variance,
the Diebold-Mariano equal-accuracy test, and the standard normal CDF.

Everything here is a direct-formula implementation over plain sequences,
using ``math.fsum`` so results are independent of input summation order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .errors import DegenerateSeriesError, InsufficientDataError

# Nonpositive HAC estimates are floored here so downstream ratios stay finite.
VARIANCE_FLOOR = 1e-24


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Product-moment correlation of two equal-length series.

    Raises
    ------
    InsufficientDataError
        If the series differ in length or are shorter than 3.
    DegenerateSeriesError
        If either series has zero variance.
    """
    n = len(x)
    if len(y) != n:
        raise InsufficientDataError(f"length mismatch: {n} vs {len(y)}")
    if n < 3:
        raise InsufficientDataError(f"pearson needs >= 3 points, got {n}")
    mx = math.fsum(x) / n
    my = math.fsum(y) / n
    sxy = math.fsum((xi - mx) * (yi - my) for xi, yi in zip(x, y))
    sxx = math.fsum((xi - mx) ** 2 for xi in x)
    syy = math.fsum((yi - my) ** 2 for yi in y)
    if sxx == 0.0 or syy == 0.0:
        raise DegenerateSeriesError("zero variance; correlation undefined")
    return sxy / math.sqrt(sxx * syy)


def percentile(values: Sequence[float], q: float) -> float:
    """Linear-interpolation order statistic (the common "type 7" estimate).

    ``q`` is in percent, 0 < q < 100.  For sorted values x_0..x_{n-1} the
    estimate sits at fractional rank h = (n-1) * q / 100.
    """
    if not values:
        raise InsufficientDataError("percentile of empty series")
    if not 0.0 < q < 100.0:
        raise ValueError(f"q must be in (0, 100), got {q}")
    xs = sorted(values)
    n = len(xs)
    h = (n - 1) * q / 100.0
    lo = math.floor(h)
    hi = math.ceil(h)
    if lo == hi:
        return xs[lo]
    return xs[lo] + (h - lo) * (xs[hi] - xs[lo])


def newey_west_variance_flagged(d: Sequence[float], lag: int) -> tuple[float, bool]:
    """Bartlett-kernel HAC long-run variance, plus a floored-at-epsilon flag.

    Returns gamma_0 + 2 * sum_{j=1..lag} (1 - j/(lag+1)) * gamma_j where
    gamma_j is the lag-j autocovariance about the sample mean, normalized
    by 1/n.  A nonpositive estimate is floored at ``VARIANCE_FLOOR`` and
    flagged.
    """
    n = len(d)
    if n < 2:
        raise InsufficientDataError(f"newey_west_variance needs >= 2 points, got {n}")
    if lag < 0:
        raise ValueError(f"lag must be nonnegative, got {lag}")
    if lag >= n:
        raise ValueError(f"lag must be < series length ({n}), got {lag}")
    mean = math.fsum(d) / n
    centered = [v - mean for v in d]
    total = math.fsum(c * c for c in centered)  # gamma_0 * n
    for j in range(1, lag + 1):
        gamma_j_n = math.fsum(centered[t] * centered[t - j] for t in range(j, n))
        total += 2.0 * (1.0 - j / (lag + 1.0)) * gamma_j_n
    variance = total / n
    if variance <= 0.0:
        return VARIANCE_FLOOR, True
    return variance, False


def newey_west_variance(d: Sequence[float], lag: int) -> float:
    """HAC long-run variance; see :func:`newey_west_variance_flagged`."""
    return newey_west_variance_flagged(d, lag)[0]


def normal_cdf(z: float) -> float:
    """Standard normal CDF via the complementary error function."""
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def auto_dm_lag(n: int) -> int:
    """Standard HAC bandwidth rule: floor(4 * (n/100)^(2/9))."""
    return int(math.floor(4.0 * (n / 100.0) ** (2.0 / 9.0)))


@dataclass(frozen=True)
class DMResult:
    """Outcome of a Diebold-Mariano equal-accuracy test.

    ``mean_differential`` is the mean of d_t = e_a(t)^2 - e_b(t)^2; negative
    favours model A.  ``degenerate`` marks a zero-variance differential whose
    HAC variance was floored.
    """

    dm_stat: float
    p_value: float
    lag: int
    n: int
    mean_differential: float
    degenerate: bool = False

    @property
    def significant_5pct(self) -> bool:
        return self.p_value < 0.05


def dm_test(
    errors_a: Sequence[float],
    errors_b: Sequence[float],
    lag: int | None = None,
    harvey: bool = False,
) -> DMResult:
    """Diebold-Mariano test on squared-error loss differentials.

    The loss differential is d_t = errors_a_t^2 - errors_b_t^2, matching a
    mean-squared-error training objective.  The statistic is
    mean(d) / sqrt(NW_var(d, lag) / n) with a two-sided asymptotic normal
    p-value.  ``lag=None`` applies :func:`auto_dm_lag`.  ``harvey`` applies
    the small-sample statistic adjustment for one-step-ahead forecasts.
    """
    n = len(errors_a)
    if len(errors_b) != n:
        raise InsufficientDataError(f"length mismatch: {n} vs {len(errors_b)}")
    if n < 10:
        raise InsufficientDataError(f"dm_test needs >= 10 points, got {n}")
    if lag is None:
        lag = auto_dm_lag(n)
    if not 0 <= lag < n:
        raise ValueError(f"lag must be in [0, {n}), got {lag}")

    d = [a * a - b * b for a, b in zip(errors_a, errors_b)]
    mean_d = math.fsum(d) / n
    variance, floored = newey_west_variance_flagged(d, lag)

    if floored and mean_d == 0.0:
        # Identical error magnitudes: nothing to test.
        return DMResult(dm_stat=0.0, p_value=1.0, lag=lag, n=n,
                        mean_differential=0.0, degenerate=True)

    stat = mean_d / math.sqrt(variance / n)
    if harvey:
        stat *= math.sqrt((n + 1.0 - 2.0 + 0.0) / n)  # horizon h = 1
    p = 2.0 * (1.0 - normal_cdf(abs(stat)))
    return DMResult(dm_stat=stat, p_value=p, lag=lag, n=n,
                    mean_differential=mean_d, degenerate=floored)


def exact_binomial_pvalue(k: int, n: int) -> float:
    """Exact two-sided binomial p-value against p = 0.5.

    p = min(1, 2 * P(Bin(n, 0.5) >= max(k, n - k))), computed with exact
    integer tail sums.
    """
    if not 0 <= k <= n:
        raise ValueError(f"k must be in [0, n], got k={k}, n={n}")
    if n == 0:
        raise InsufficientDataError("binomial p-value of zero trials")
    k_hi = max(k, n - k)
    tail = sum(math.comb(n, i) for i in range(k_hi, n + 1))
    p = 2.0 * tail / (2 ** n)
    return min(1.0, p)


def spearman(x: Sequence[float], y: Sequence[float]) -> float:
    """Spearman rank correlation: Pearson on average ranks."""
    return pearson(_ranks(x), _ranks(y))


def _ranks(values: Sequence[float]) -> list[float]:
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks
