import numpy as np
import pytest

from fastcit.core import ConfigurationError, SeedStream
from fastcit.datasets import (
    CHAOS_ALPHAS,
    ChaosSpec,
    HybridSpec,
    LingaussSpec,
    PnlSpec,
    chaos_step,
    generate,
    make_spec,
    official_difficulties,
    official_sweep,
)


def partial_corr(x, y, z):
    """Correlation of the residuals of x and y after least-squares regression on (1, z)."""
    design = np.column_stack([np.ones(len(z)), z])
    rx = x - design @ np.linalg.lstsq(design, x, rcond=None)[0]
    ry = y - design @ np.linalg.lstsq(design, y, rcond=None)[0]
    return float(np.corrcoef(rx, ry)[0, 1])


def counts_from_one_hot(m, dim, gamma):
    blocks = m.reshape(len(m), dim, gamma + 1)
    return blocks.argmax(axis=2), blocks.sum(axis=2)


@pytest.mark.parametrize("spec, shapes", [
    (LingaussSpec(2, False, 100), ((100, 2), (100, 2), (100, 2))),
    (LingaussSpec(3, True, 50), ((50, 3), (50, 3), (50, 3))),
    (ChaosSpec(0.5, True, 200), ((200, 4), (200, 4), (200, 2))),
    (HybridSpec(2, 3, False, 40), ((40, 9), (40, 9), (40, 3))),
    (PnlSpec(5, True, 30), ((30, 1), (30, 1), (30, 5))),
])
def test_shapes(spec, shapes):
    ds = generate(spec)
    assert (ds.x.shape, ds.y.shape, ds.z.shape) == shapes
    assert ds.dependent == spec.dependent
    for m in (ds.x, ds.y, ds.z):
        assert np.all(np.isfinite(m))


@pytest.mark.parametrize("spec", [
    LingaussSpec(4, True, 300, seed=3),
    ChaosSpec(0.16, False, 300, seed=3),
    HybridSpec(8, 2, True, 300, seed=3),
    PnlSpec(2, False, 300, seed=3),
])
def test_generators_are_pure(spec):
    a, b = generate(spec), generate(spec)
    for m1, m2 in zip((a.x, a.y, a.z), (b.x, b.y, b.z)):
        np.testing.assert_array_equal(m1, m2)
    assert a.params == b.params
    other = generate(type(spec)(**{**spec.__dict__, "seed": spec.seed + 1}))
    assert not np.array_equal(a.y, other.y)


def test_lingauss_versions_share_z_and_x():
    ind = generate(LingaussSpec(3, False, 200, seed=5))
    dep = generate(LingaussSpec(3, True, 200, seed=5))
    np.testing.assert_array_equal(ind.z, dep.z)
    np.testing.assert_array_equal(ind.x, dep.x)


def test_lingauss_independent_partial_correlation():
    ds = generate(LingaussSpec(1, False, 10**5, seed=0))
    assert abs(partial_corr(ds.x[:, 0], ds.y[:, 0], ds.z)) < 0.01


def test_lingauss_dependent_partial_correlation():
    hits = 0
    for seed in range(20):
        ds = generate(LingaussSpec(1, True, 10**5, seed=seed))
        hits += abs(partial_corr(ds.x[:, 0], ds.y[:, 0], ds.z)) > 0.05
    assert hits >= 18


def test_chaos_step_examples():
    a, b = chaos_step((0.0, 0.0), (0.0, 0.0), 0.5)
    assert a == (1.4, 0.0)
    assert b == (1.4, 0.0)
    for alpha in (0.01, 0.99):
        assert chaos_step((0.0, 0.3), (0.0, 0.0), alpha)[1] == (1.4, 0.0)


@pytest.mark.parametrize("dependent", [False, True])
def test_chaos_within_attractor_box(dependent):
    ds = generate(ChaosSpec(0.5, dependent, 10**4, seed=1))
    assert np.all(np.abs(ds.x[:, :2]) <= 2.0)
    assert np.all(np.abs(ds.z) <= 2.0)
    # appended noise columns: sd 0.5
    assert np.std(ds.x[:, 2:]) == pytest.approx(0.5, rel=0.05)


def test_chaos_rejects_bad_spec():
    with pytest.raises(ConfigurationError):
        ChaosSpec(1.0, False, 10)
    with pytest.raises(ConfigurationError):
        ChaosSpec(0.5, False, 10**6)


@pytest.mark.parametrize("gamma, dim", [(2, 3), (8, 2), (32, 8)])
def test_hybrid_one_hot_and_multinomial(gamma, dim):
    ds = generate(HybridSpec(gamma, dim, False, 500, seed=2))
    np.testing.assert_allclose(ds.z.sum(axis=1), 1.0, rtol=1e-12)
    assert np.all(ds.z >= 0)
    for m in (ds.x, ds.y):
        counts, ones = counts_from_one_hot(m, dim, gamma)
        assert np.all(ones == 1)
        assert set(np.unique(m)) <= {0.0, 1.0}
        np.testing.assert_array_equal(counts.sum(axis=1), gamma)


def test_hybrid_dependent_copy_fraction():
    ds = generate(HybridSpec(2, 2, True, 10**5, seed=0))
    same = np.all(ds.x == ds.y, axis=1).mean()
    assert same >= 0.5


def test_pnl_covariance():
    ds = generate(PnlSpec(4, False, 10**5, seed=0))
    # A is the first draw of the dataset's coefficient stream
    a = SeedStream(0).child("pnl", 4).child("coef").rng().standard_normal((4, 4))
    truth = a @ a.T
    emp = np.cov(ds.z, rowvar=False)
    assert np.linalg.norm(emp - truth) / np.linalg.norm(truth) < 0.1


def bin_corr(ds, lo, hi):
    z1 = ds.z[:, 0]
    a, b = np.percentile(z1, [lo, hi])
    rows = (z1 >= a) & (z1 <= b)
    return float(np.corrcoef(ds.x[rows, 0], ds.y[rows, 0])[0, 1]), int(rows.sum())


def test_pnl_identity_independent_within_bin():
    ds = generate(PnlSpec(1, False, 10**5, seed=0, functions=("identity", "identity")))
    r, m = bin_corr(ds, 50, 51)
    # sampling sd of a null correlation is 1/sqrt(m)
    assert abs(r) < 4 / np.sqrt(m)


@pytest.mark.parametrize("functions", [("identity", "identity"), ("tanh", "exp_abs"), None])
@pytest.mark.parametrize("bin_lo", [10, 50, 90])
def test_pnl_dependent_within_bin(functions, bin_lo):
    ds = generate(PnlSpec(1, True, 10**5, seed=0, functions=functions))
    r, _ = bin_corr(ds, bin_lo, bin_lo + 1)
    assert r > 0


def test_pnl_functions_are_per_dataset():
    ds = generate(PnlSpec(2, False, 100, seed=4))
    assert ds.params["f"] in ("identity", "square", "cube", "tanh", "exp_abs")
    assert ds.params == generate(PnlSpec(2, True, 5000, seed=4)).params


def test_official_sweep_lists():
    assert [s.dim for s in official_sweep("lingauss")] == [1, 2, 4, 8, 16, 32, 64, 128, 256]
    assert [s.dim for s in official_sweep("pnl")] == [1, 2, 4, 8, 16, 32, 64, 128, 256]
    assert tuple(s.alpha for s in official_sweep("chaos")) == CHAOS_ALPHAS
    assert CHAOS_ALPHAS == (0.01, 0.04, 0.16, 0.32, 0.5, 0.68, 0.84, 0.96, 0.99)
    hyb = [(s.gamma, s.dim) for s in official_sweep("hybrid")]
    assert hyb == [(g, d) for g in (2, 8, 32) for d in (2, 8, 32)]
    assert all(s.dependent for s in official_sweep("chaos", dependent=True))
    with pytest.raises(ConfigurationError):
        official_difficulties("nope")


def total_dims(setting, params):
    ds = generate(make_spec(setting, params, dependent=False, n=3))
    return ds.x.shape[1] + ds.y.shape[1] + ds.z.shape[1]


def test_total_dimensions_at_extremes():
    assert total_dims("lingauss", {"dim": 1}) == 3
    assert total_dims("lingauss", {"dim": 256}) == 768
    assert total_dims("pnl", {"dim": 1}) == 3
    assert total_dims("pnl", {"dim": 256}) == 258
    assert total_dims("chaos", {"alpha": 0.5}) == 10
    # one-hot with gamma + 1 slots: 2 * dim * (gamma + 1) + dim
    hybrid = sorted(total_dims("hybrid", p) for p in official_difficulties("hybrid"))
    assert hybrid[0] == 2 * 2 * 3 + 2
    assert hybrid[-1] == 2 * 32 * 33 + 32
