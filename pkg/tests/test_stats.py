import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import norm

from fastcit.core import DomainError, SampleSizeError, SeedStream
from fastcit.stats import (
    aupc,
    bootstrap_one_tailed_p,
    ks_statistic,
    ks_uniform_p,
    one_sample_t,
    one_tailed_p,
    t_cdf,
)


def t_cdf_reference(t, df):
    """50-digit evaluation of the Student-t CDF by direct integration of the density."""
    mpmath.mp.dps = 50
    t, df = mpmath.mpf(t), mpmath.mpf(df)
    c = mpmath.gamma((df + 1) / 2) / (mpmath.sqrt(df * mpmath.pi) * mpmath.gamma(df / 2))
    dens = lambda u: c * (1 + u * u / df) ** (-(df + 1) / 2)  # noqa: E731
    half = mpmath.quad(dens, [0, abs(t)])
    return float(mpmath.mpf(0.5) + (half if t > 0 else -half))


def test_t_cdf_symmetry_point():
    for df in (1, 2, 5, 100, 10_000):
        assert t_cdf(0.0, df) == 0.5


def test_t_cdf_cauchy():
    assert abs(t_cdf(1.0, 1) - 0.75) < 1e-10
    for t in (-3.0, -0.4, 2.5, 10.0):
        assert abs(t_cdf(t, 1) - (0.5 + math.atan(t) / math.pi)) < 1e-10


def test_t_cdf_normal_limit():
    assert abs(t_cdf(1.96, 10_000) - norm.cdf(1.96)) < 1e-4


@pytest.mark.parametrize("df", [1, 2, 3, 7, 30, 1000])
@pytest.mark.parametrize("t", [-6.0, -1.3, 0.2, 1.0, 2.7, 12.0])
def test_t_cdf_against_high_precision(t, df):
    assert abs(t_cdf(t, df) - t_cdf_reference(t, df)) < 1e-10


def test_t_cdf_domain():
    with pytest.raises(DomainError):
        t_cdf(1.0, 0)


@given(st.floats(-50, 50), st.integers(1, 10_000))
def test_t_cdf_reflection(t, df):
    assert abs(t_cdf(-t, df) + t_cdf(t, df) - 1.0) < 1e-12


def test_one_sample_t_examples():
    r = one_sample_t([-1.0, 1.0])
    assert r.t_statistic == 0.0 and r.p_two_sided == 1.0
    r = one_sample_t([1.0, 2.0, 3.0])
    assert r.t_statistic == pytest.approx(2 * math.sqrt(3), rel=1e-12)
    assert r.df == 2
    # df = 2 has the closed form CDF(t) = 1/2 + t / (2 sqrt(2 + t^2))
    cdf = 0.5 + r.t_statistic / (2 * math.sqrt(2 + r.t_statistic**2))
    assert r.p_two_sided == pytest.approx(2 * (1 - cdf), rel=1e-12)
    with pytest.raises(SampleSizeError):
        one_sample_t([1.0])


def test_one_sample_t_zero_variance():
    assert one_tailed_p(*_tp([0.0, 0.0, 0.0])) == 0.5
    assert one_tailed_p(*_tp([2.0, 2.0])) == 1e-16
    assert one_tailed_p(*_tp([-2.0, -2.0])) == 1 - 1e-16


def _tp(d):
    r = one_sample_t(d)
    return r.t_statistic, r.p_two_sided


def test_one_tailed_p_examples():
    assert one_tailed_p(0.0, 1.0) == 0.5
    assert one_tailed_p(3.46, 0.0743) == pytest.approx(0.0372, abs=1e-4)
    r = one_sample_t([1.0, 2.0, 3.0])
    assert one_tailed_p(r.t_statistic, r.p_two_sided) == pytest.approx(0.0370899501, abs=1e-9)
    assert one_tailed_p(-5.0, 0.001) == pytest.approx(0.9995, abs=1e-15)
    with pytest.raises(DomainError):
        one_tailed_p(1.0, 1.5)


@given(st.lists(st.floats(-100, 100), min_size=3, max_size=20))
def test_sign_flip_maps_p_to_complement(diffs):
    d = np.array(diffs)
    if np.std(d) < 1e-6 * (1 + np.abs(d).max()):
        return
    p = one_tailed_p(*_tp(d))
    q = one_tailed_p(*_tp(-d))
    assert p + q == pytest.approx(1.0, abs=1e-12)


def test_t_test_null_p_values_uniform():
    ps = [one_sample_t(np.random.default_rng(s).standard_normal(8)).p_two_sided for s in range(10_000)]
    assert ks_statistic(ps) < 0.02


def test_one_tailed_null_calibration():
    ps = [one_tailed_p(*_tp(np.random.default_rng(s).standard_normal(8))) for s in range(2000)]
    assert ks_uniform_p(ps) > 0.01


def test_bootstrap_degenerate_follows_t_convention():
    assert bootstrap_one_tailed_p([3.0] * 8, 1000, SeedStream(0)) == 1e-16
    assert bootstrap_one_tailed_p([0.0] * 8, 1000, SeedStream(0)) == 0.5


def test_bootstrap_close_to_t_test():
    gaps = []
    for s in range(100):
        d = np.random.default_rng(s).standard_normal(8)
        gaps.append(abs(bootstrap_one_tailed_p(d, 1000, SeedStream(s)) - one_tailed_p(*_tp(d))))
    assert np.median(gaps) < 0.05
    assert max(gaps) < 0.1


def test_bootstrap_strong_signal_and_determinism():
    d = np.random.default_rng(1).normal(5, 1, 8)
    assert bootstrap_one_tailed_p(d, 1000, SeedStream(1)) < 0.01
    assert bootstrap_one_tailed_p(d, 500, SeedStream(7)) == bootstrap_one_tailed_p(d, 500, SeedStream(7))
    with pytest.raises(SampleSizeError):
        bootstrap_one_tailed_p(d, 50, SeedStream(1))


def test_aupc_extremes_and_uniform():
    assert aupc([0.0, 0.0, 0.0]) == 1.0
    assert aupc([1.0]) == 0.0
    u = np.random.default_rng(0).random(10_000)
    assert abs(aupc(u) - 0.5) < 0.01
    with pytest.raises(DomainError):
        aupc([0.5, 1.2])


@given(st.lists(st.floats(0, 1), min_size=1, max_size=500))
def test_aupc_plus_mean_is_one(p):
    assert abs(aupc(p) + np.mean(p) - 1.0) < 1e-12


def kolmogorov_sf(lam, terms=100):
    return 2 * sum((-1) ** (k - 1) * math.exp(-2 * k * k * lam * lam) for k in range(1, terms + 1))


def test_ks_examples():
    n = 50
    grid = (np.arange(1, n + 1) - 0.5) / n
    assert ks_statistic(grid) == pytest.approx(0.5 / n)
    assert ks_uniform_p(grid) > 0.999
    half = np.full(100, 0.5)
    assert ks_statistic(half) == 0.5
    assert ks_uniform_p(half) < 1e-10
    # against the alternating series with the same small-sample correction
    lam = (10 + 0.12 + 0.011) * 0.5
    assert ks_uniform_p(half) == pytest.approx(kolmogorov_sf(lam), rel=1e-8)
    with pytest.raises(SampleSizeError):
        ks_uniform_p([0.1, 0.2])
    with pytest.raises(DomainError):
        ks_uniform_p([0.1, 0.2, 0.3, 0.4, -0.1])


def test_ks_calibration():
    rejections = [ks_uniform_p(np.random.default_rng(s).random(1000)) < 0.05 for s in range(500)]
    assert abs(np.mean(rejections) - 0.05) <= 0.02
