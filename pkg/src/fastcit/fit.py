"""The fast (conditional) independence test.

``fit_test`` regresses ``y`` on ``(x, z)`` and on ``z`` alone with
decision trees, over ``n_perm`` random train/test splits, and asks
whether including ``x`` lowers the held-out MSE. The p-value comes from
a one-tailed one-sample t-test on the per-split MSE differences, so a
small value rejects ``x independent of y given z``.

Tree hyperparameters are cross-validated once on the full data and then
reused for every split. The cross-validations and the split loop run
on a thread pool; every task draws randomness from its own labelled
``SeedStream`` child, so results do not depend on the worker count.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .core import (
    ConfigurationError,
    DimensionError,
    FcitError,
    SampleSizeError,
    SeedStream,
    as_matrix,
    concat_features,
    n_test_for,
)
from .dtree import N_FOLDS, PresortedFeatures, TreeParams, cross_validate_presorted
from .stats import bootstrap_one_tailed_p, one_sample_t, one_tailed_p

MIN_SAMPLES = 20


class TimeBudgetExceeded(FcitError, TimeoutError):
    pass


def default_workers() -> int:
    env = os.environ.get("FCIT_WORKERS")
    if env:
        try:
            value = int(env)
        except ValueError:
            raise ConfigurationError(f"FCIT_WORKERS must be an integer, got {env!r}") from None
        if value < 1:
            raise ConfigurationError("FCIT_WORKERS must be >= 1")
        return value
    return os.cpu_count() or 1


@dataclass(frozen=True)
class FitConfig:
    n_perm: int = 8
    frac_test: float = 0.1
    grid: Optional[tuple[TreeParams, ...]] = None
    use_bootstrap: bool = False
    n_boot: int = 1000
    seed: int = 0
    workers: Optional[int] = None

    def __post_init__(self):
        if self.n_perm < 2:
            raise ConfigurationError("n_perm must be >= 2")
        if not 0.0 < self.frac_test < 1.0:
            raise ConfigurationError("frac_test must lie in (0, 1)")
        if self.grid is not None:
            if len(self.grid) == 0:
                raise ConfigurationError("grid must not be empty")
            object.__setattr__(self, "grid", tuple(self.grid))
        if self.workers is not None and self.workers < 1:
            raise ConfigurationError("workers must be >= 1")


@dataclass(frozen=True)
class TestOutcome:
    p_value: float
    t_statistic: float
    mses_x: tuple[float, ...]
    mses_nox: tuple[float, ...]
    best_params_x: TreeParams
    best_params_nox: TreeParams
    wall_time: float
    config: FitConfig
    conditional: bool = True

    __test__ = False  # not a pytest class

    def to_dict(self) -> dict:
        cfg = asdict(self.config)
        if cfg["grid"] is not None:
            cfg["grid"] = [g["min_samples_split"] for g in cfg["grid"]]
        return {
            "p_value": self.p_value,
            "t_statistic": self.t_statistic,
            "mses_x": list(self.mses_x),
            "mses_nox": list(self.mses_nox),
            "best_min_samples_split_x": self.best_params_x.min_samples_split,
            "best_min_samples_split_nox": self.best_params_nox.min_samples_split,
            "wall_time": self.wall_time,
            "mode": "conditional" if self.conditional else "unconditional",
            "config": cfg,
        }


def _check_inputs(x, y, z, cfg: FitConfig):
    x = as_matrix(x, "x")
    y = as_matrix(y, "y")
    n = x.shape[0]
    if y.shape[0] != n or (z is not None and z.shape[0] != n):
        raise DimensionError("x, y and z must have the same number of rows")
    if n < MIN_SAMPLES:
        raise SampleSizeError(f"need at least {MIN_SAMPLES} samples, got {n}")
    n_test = n_test_for(cfg.frac_test, n)
    if n_test < 1 or n - n_test < N_FOLDS:
        raise SampleSizeError(f"frac_test={cfg.frac_test} leaves no usable test set for n={n}")
    return x, y, n_test


class _Runner:
    """Runs independent tasks in order-preserving fashion, checking a deadline."""

    def __init__(self, workers: int, deadline: Optional[float]):
        self.workers = workers
        self.deadline = deadline

    def check(self):
        if self.deadline is not None and time.perf_counter() > self.deadline:
            raise TimeBudgetExceeded("time budget exhausted")

    def map(self, fn: Callable, items: Sequence) -> list:
        def guarded(item):
            self.check()
            return fn(item)

        if self.workers <= 1 or len(items) <= 1:
            return [guarded(it) for it in items]
        with ThreadPoolExecutor(max_workers=min(self.workers, len(items))) as pool:
            futures = [pool.submit(guarded, it) for it in items]
            try:
                return [f.result() for f in futures]
            finally:
                for f in futures:
                    f.cancel()


def _mse(tree, data: PresortedFeatures, y: np.ndarray, rows: np.ndarray) -> float:
    resid = tree.predict(data.rows(rows)) - y[rows]
    return float(np.mean(resid**2))


def _finish(mses_x, mses_nox, cfg: FitConfig, stream: SeedStream):
    diffs = np.asarray(mses_nox) - np.asarray(mses_x)
    res = one_sample_t(diffs)
    if cfg.use_bootstrap:
        p = bootstrap_one_tailed_p(diffs, cfg.n_boot, stream.child("bootstrap"))
    else:
        p = one_tailed_p(res.t_statistic, res.p_two_sided)
    return p, res.t_statistic


def fit_test(
    x: np.ndarray,
    y: np.ndarray,
    z: np.ndarray,
    cfg: FitConfig = FitConfig(),
    *,
    deadline: Optional[float] = None,
) -> TestOutcome:
    """Test ``x`` independent of ``y`` given ``z``; returns a one-tailed p-value.

    ``deadline`` is an absolute ``time.perf_counter()`` value checked
    between tasks; past it, :class:`TimeBudgetExceeded` is raised.
    """
    start = time.perf_counter()
    z = as_matrix(z, "z")
    x, y, n_test = _check_inputs(x, y, z, cfg)
    n = x.shape[0]
    stream = SeedStream(cfg.seed)
    runner = _Runner(cfg.workers or default_workers(), deadline)
    runner.check()

    data_x = PresortedFeatures(concat_features(x, z))
    data_nox = data_x.columns(x.shape[1], x.shape[1] + z.shape[1])

    cv_x, cv_nox = runner.map(
        lambda job: cross_validate_presorted(job[0], y, cfg.grid, stream.child(job[1]), runner.check),
        [(data_x, "cv-x"), (data_nox, "cv-nox")],
    )
    best_x, best_nox = cv_x.best_params, cv_nox.best_params

    def repetition(i: int):
        perm = stream.child("split", i).rng().permutation(n)
        test, train = perm[:n_test], perm[n_test:]
        mx = _mse(data_x.fit(y, train, best_x), data_x, y, test)
        runner.check()
        mn = _mse(data_nox.fit(y, train, best_nox), data_nox, y, test)
        return mx, mn

    pairs = runner.map(repetition, list(range(cfg.n_perm)))
    mses_x = tuple(p[0] for p in pairs)
    mses_nox = tuple(p[1] for p in pairs)
    p, t = _finish(mses_x, mses_nox, cfg, stream)
    return TestOutcome(
        p, t, mses_x, mses_nox, best_x, best_nox, time.perf_counter() - start, cfg, True
    )


def fit_test_unconditional(
    x: np.ndarray,
    y: np.ndarray,
    cfg: FitConfig = FitConfig(),
    *,
    deadline: Optional[float] = None,
) -> TestOutcome:
    """Test ``x`` independent of ``y``.

    The baseline regressor sees a row-shuffled copy of ``x`` instead of
    ``z``; each repetition draws a fresh shuffle.
    """
    start = time.perf_counter()
    x, y, n_test = _check_inputs(x, y, None, cfg)
    n = x.shape[0]
    stream = SeedStream(cfg.seed)
    runner = _Runner(cfg.workers or default_workers(), deadline)
    runner.check()

    data_x = PresortedFeatures(x)
    shuffled = data_x.permuted(stream.child("cv-shuffle").rng().permutation(n))

    cv_x, cv_nox = runner.map(
        lambda job: cross_validate_presorted(job[0], y, cfg.grid, stream.child(job[1]), runner.check),
        [(data_x, "cv-x"), (shuffled, "cv-nox")],
    )
    best_x, best_nox = cv_x.best_params, cv_nox.best_params

    def repetition(i: int):
        perm = stream.child("split", i).rng().permutation(n)
        test, train = perm[:n_test], perm[n_test:]
        mx = _mse(data_x.fit(y, train, best_x), data_x, y, test)
        runner.check()
        data_nox = data_x.permuted(stream.child("shuffle", i).rng().permutation(n))
        mn = _mse(data_nox.fit(y, train, best_nox), data_nox, y, test)
        return mx, mn

    pairs = runner.map(repetition, list(range(cfg.n_perm)))
    mses_x = tuple(p[0] for p in pairs)
    mses_nox = tuple(p[1] for p in pairs)
    p, t = _finish(mses_x, mses_nox, cfg, stream)
    return TestOutcome(
        p, t, mses_x, mses_nox, best_x, best_nox, time.perf_counter() - start, cfg, False
    )


def auto_test(
    x: np.ndarray,
    y: np.ndarray,
    z: Optional[np.ndarray] = None,
    cfg: FitConfig = FitConfig(),
    *,
    deadline: Optional[float] = None,
) -> TestOutcome:
    """Conditional test when ``z`` has at least one column, unconditional otherwise."""
    if z is not None:
        z = as_matrix(z, "z", allow_empty=True)
        if z.shape[1] > 0:
            return fit_test(x, y, z, cfg, deadline=deadline)
    return fit_test_unconditional(x, y, cfg, deadline=deadline)
