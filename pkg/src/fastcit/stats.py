"""Hypothesis-testing primitives: paired t-test, bootstrap, p-value metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import special

from .core import DomainError, SampleSizeError, SeedStream

P_FLOOR = 1e-16
P_CEIL = 1.0 - 1e-16


@dataclass(frozen=True)
class TTestResult:
    t_statistic: float
    p_two_sided: float
    df: int


def t_cdf(t: float, df: int) -> float:
    """Student-t distribution function via the regularized incomplete beta."""
    if df < 1:
        raise DomainError(f"degrees of freedom must be >= 1, got {df}")
    if math.isinf(t):
        return 1.0 if t > 0 else 0.0
    tail = 0.5 * special.betainc(0.5 * df, 0.5, df / (df + t * t))
    return float(1.0 - tail if t > 0 else tail)


def _two_sided(t: float, df: int) -> float:
    if math.isinf(t):
        return 0.0
    # computed directly from the tail to keep precision for large |t|
    return float(special.betainc(0.5 * df, 0.5, df / (df + t * t)))


def one_sample_t(diffs: Sequence[float]) -> TTestResult:
    """One-sample t-test of ``mean(diffs) == 0``.

    Zero-variance samples get t = 0 (mean 0) or t = +/-inf with the
    two-sided p-value at 1 or 0, so downstream one-tailed p-values land
    on 0.5 or the clipping bounds instead of NaN.
    """
    d = np.asarray(diffs, dtype=np.float64).ravel()
    n = d.size
    if n < 2:
        raise SampleSizeError(f"t-test needs at least 2 values, got {n}")
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    if sd == 0.0:
        if mean == 0.0:
            return TTestResult(0.0, 1.0, n - 1)
        return TTestResult(math.copysign(math.inf, mean), 0.0, n - 1)
    t = mean / (sd / math.sqrt(n))
    return TTestResult(t, _two_sided(t, n - 1), n - 1)


def clip_p(p: float) -> float:
    return min(max(p, P_FLOOR), P_CEIL)


def one_tailed_p(t: float, p_two_sided: float) -> float:
    """Convert a two-sided p-value to the upper-tail one (small when t > 0)."""
    if not 0.0 <= p_two_sided <= 1.0:
        raise DomainError(f"p-value out of [0, 1]: {p_two_sided}")
    p = 1.0 - p_two_sided / 2.0 if t < 0 else p_two_sided / 2.0
    return clip_p(p)


def bootstrap_one_tailed_p(diffs: Sequence[float], n_boot: int = 1000, seed: SeedStream = SeedStream(0)) -> float:
    """Bootstrap analogue of :func:`one_tailed_p` for ``mean(diffs) > 0``.

    The sample is centred to mean zero, resampled with replacement
    ``n_boot`` times, and the p-value is
    ``(1 + #{bootstrap mean >= observed mean}) / (n_boot + 1)``.
    Zero-variance input follows the t-test convention.
    """
    d = np.asarray(diffs, dtype=np.float64).ravel()
    if d.size < 2:
        raise SampleSizeError(f"bootstrap needs at least 2 values, got {d.size}")
    if n_boot < 100:
        raise SampleSizeError(f"n_boot must be >= 100, got {n_boot}")
    obs = float(d.mean())
    if float(d.std()) == 0.0:
        res = one_sample_t(d)
        return one_tailed_p(res.t_statistic, res.p_two_sided)
    centred = d - obs
    idx = seed.rng().integers(0, d.size, size=(n_boot, d.size))
    boot = centred[idx].mean(axis=1)
    return clip_p((1.0 + np.count_nonzero(boot >= obs)) / (n_boot + 1.0))


def _check_pvals(pvals, min_len: int) -> np.ndarray:
    p = np.asarray(pvals, dtype=np.float64).ravel()
    if p.size < min_len:
        raise SampleSizeError(f"need at least {min_len} p-values, got {p.size}")
    if np.any(~np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
        raise DomainError("p-values must lie in [0, 1]")
    return p


def aupc(pvals: Sequence[float]) -> float:
    """Area under the empirical CDF of ``pvals`` on [0, 1]."""
    p = np.sort(_check_pvals(pvals, 1))
    n = p.size
    # ECDF equals i/n on [p_(i), p_(i+1)), with p_(n+1) = 1
    upper = np.append(p[1:], 1.0)
    return float(np.sum(np.arange(1, n + 1) / n * (upper - p)))


def ks_statistic(pvals: Sequence[float]) -> float:
    p = np.sort(_check_pvals(pvals, 1))
    n = p.size
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - p), np.max(p - (i - 1) / n)))


def ks_uniform_p(pvals: Sequence[float]) -> float:
    """Kolmogorov-Smirnov p-value for uniformity of ``pvals`` on [0, 1].

    Uses the asymptotic Kolmogorov distribution evaluated at
    ``(sqrt(n) + 0.12 + 0.11/sqrt(n)) * D`` (Stephens' small-sample
    correction).
    """
    p = _check_pvals(pvals, 5)
    d = ks_statistic(p)
    rn = math.sqrt(p.size)
    lam = (rn + 0.12 + 0.11 / rn) * d
    return float(min(1.0, max(0.0, special.kolmogorov(lam))))
