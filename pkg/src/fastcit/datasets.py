"""Synthetic benchmark settings, each with a dependent and an independent version.

Every generator is a pure function of its spec: the spec's seed is the
root of a :class:`~fastcit.core.SeedStream`, and coefficient matrices
are drawn before the samples so both versions of a setting share them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numba
import numpy as np

from .core import ConfigurationError, Dataset, SeedStream

CHAOS_STEPS = 10**6
CHAOS_BURN_IN = 1000
CHAOS_NOISE_SD = 0.5
CHAOS_DIVERGENCE = 10.0
PNL_DEP_NOISE_SD = 0.5

PNL_FUNCTIONS = {
    "identity": lambda v: v,
    "square": np.square,
    "cube": lambda v: v**3,
    "tanh": np.tanh,
    "exp_abs": lambda v: np.exp(-np.abs(v)),
}
_PNL_NAMES = tuple(PNL_FUNCTIONS)


def _positive(name, value, minimum=1):
    if int(value) != value or value < minimum:
        raise ConfigurationError(f"{name} must be an integer >= {minimum}, got {value}")


@dataclass(frozen=True)
class LingaussSpec:
    dim: int
    dependent: bool
    n: int
    seed: int = 0

    def __post_init__(self):
        _positive("dim", self.dim)
        _positive("n", self.n)


@dataclass(frozen=True)
class ChaosSpec:
    alpha: float
    dependent: bool
    n: int
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ConfigurationError(f"alpha must lie in (0, 1), got {self.alpha}")
        _positive("n", self.n)
        if self.n > CHAOS_STEPS - 1:
            raise ConfigurationError(f"n must be < {CHAOS_STEPS}")


@dataclass(frozen=True)
class HybridSpec:
    gamma: int
    dim: int
    dependent: bool
    n: int
    seed: int = 0

    def __post_init__(self):
        _positive("gamma", self.gamma)
        _positive("dim", self.dim, 2)
        _positive("n", self.n)


@dataclass(frozen=True)
class PnlSpec:
    dim: int
    dependent: bool
    n: int
    seed: int = 0
    # force (f, g) by name instead of drawing them; used by tests
    functions: Optional[tuple[str, str]] = None

    def __post_init__(self):
        _positive("dim", self.dim)
        _positive("n", self.n)
        if self.functions is not None:
            bad = [f for f in self.functions if f not in PNL_FUNCTIONS]
            if len(self.functions) != 2 or bad:
                raise ConfigurationError(f"functions must be two of {_PNL_NAMES}")


AnySpec = Union[LingaussSpec, ChaosSpec, HybridSpec, PnlSpec]


def gen_lingauss(spec: LingaussSpec) -> Dataset:
    stream = SeedStream(spec.seed).child("lingauss", spec.dim)
    coef = stream.child("coef").rng()
    a = coef.standard_normal((spec.dim, spec.dim))
    b = coef.standard_normal((spec.dim, spec.dim))
    rng = stream.child("samples", spec.n).rng()
    z = rng.standard_normal((spec.n, spec.dim))
    x = z @ a.T + rng.standard_normal((spec.n, spec.dim))
    parent = x if spec.dependent else z
    y = parent @ b.T + rng.standard_normal((spec.n, spec.dim))
    return Dataset(x, y, z, "lingauss", {"dim": spec.dim}, spec.dependent, spec.seed)


@numba.njit(cache=True)
def _chaos_trajectory(a0, b0, alpha, steps, burn_in, limit):
    """Coupled Henon maps; returns (A, B) of shape (steps, 2) or None on divergence."""
    a = np.empty((steps, 2))
    b = np.empty((steps, 2))
    pa0, pa1, pb0, pb1 = a0[0], a0[1], b0[0], b0[1]
    for t in range(burn_in + steps):
        na0 = 1.4 - pa0 * pa0 + 0.3 * pa1
        nb0 = 1.4 - (alpha * pa0 * pb0 + (1.0 - alpha) * pb0 * pb0) + 0.1 * pb1
        pa1 = pa0
        pb1 = pb0
        pa0 = na0
        pb0 = nb0
        if abs(pa0) > limit or abs(pb0) > limit:
            return a, b, False
        if t >= burn_in:
            k = t - burn_in
            a[k, 0] = pa0
            a[k, 1] = pa1
            b[k, 0] = pb0
            b[k, 1] = pb1
    return a, b, True


def chaos_step(a_prev, b_prev, alpha: float):
    """One step of the coupled maps, for inspection and tests."""
    a0, a1 = a_prev
    b0, b1 = b_prev
    a = (1.4 - a0**2 + 0.3 * a1, a0)
    b = (1.4 - (alpha * a0 * b0 + (1 - alpha) * b0**2) + 0.1 * b1, b0)
    return a, b


def chaos_trajectory(alpha: float, stream: SeedStream, steps: int = CHAOS_STEPS):
    for attempt in range(100):
        init = stream.child("init", attempt).rng().uniform(-0.1, 0.1, size=4)
        a, b, ok = _chaos_trajectory(init[:2], init[2:], float(alpha), steps, CHAOS_BURN_IN, CHAOS_DIVERGENCE)
        if ok:
            return a, b
    raise RuntimeError("coupled map diverged from 100 initial conditions")


def gen_chaos(spec: ChaosSpec) -> Dataset:
    stream = SeedStream(spec.seed).child("chaos", spec.alpha)
    a, b = chaos_trajectory(spec.alpha, stream)
    rng = stream.child("samples", spec.n).rng()
    t = rng.choice(CHAOS_STEPS - 1, size=spec.n, replace=False)
    if spec.dependent:
        x_core, y_core, z = b[t + 1], a[t], b[t]
    else:
        x_core, y_core, z = a[t + 1], b[t], a[t]
    x = np.hstack([x_core, rng.normal(0.0, CHAOS_NOISE_SD, (spec.n, 2))])
    y = np.hstack([y_core, rng.normal(0.0, CHAOS_NOISE_SD, (spec.n, 2))])
    return Dataset(x, y, z, "chaos", {"alpha": spec.alpha}, spec.dependent, spec.seed)


def one_hot_counts(counts: np.ndarray, gamma: int) -> np.ndarray:
    """Encode an (n, dim) count matrix with values in 0..gamma as (n, dim*(gamma+1)) indicators."""
    n, dim = counts.shape
    out = np.zeros((n, dim, gamma + 1))
    out[np.arange(n)[:, None], np.arange(dim)[None, :], counts] = 1.0
    return out.reshape(n, dim * (gamma + 1))


def gen_hybrid(spec: HybridSpec) -> Dataset:
    rng = SeedStream(spec.seed).child("hybrid", spec.gamma, spec.dim, spec.n).rng()
    z = rng.dirichlet(np.ones(spec.dim), size=spec.n)
    # renormalise so the multinomial sampler never sees a sum above 1
    z = z / z.sum(axis=1, keepdims=True)
    s_x = rng.multinomial(spec.gamma, z)
    s_y = rng.multinomial(spec.gamma, z)
    x = one_hot_counts(s_x, spec.gamma)
    y = one_hot_counts(s_y, spec.gamma)
    if spec.dependent:
        heads = rng.random(spec.n) < 0.5
        y[heads] = x[heads]
    return Dataset(
        x, y, z, "hybrid", {"gamma": spec.gamma, "dim": spec.dim}, spec.dependent, spec.seed
    )


def gen_pnl(spec: PnlSpec) -> Dataset:
    stream = SeedStream(spec.seed).child("pnl", spec.dim)
    coef = stream.child("coef").rng()
    a = coef.standard_normal((spec.dim, spec.dim))
    names = spec.functions
    if names is None:
        picks = coef.integers(0, len(_PNL_NAMES), size=2)
        names = (_PNL_NAMES[picks[0]], _PNL_NAMES[picks[1]])
    f, g = PNL_FUNCTIONS[names[0]], PNL_FUNCTIONS[names[1]]
    rng = stream.child("samples", spec.n).rng()
    z = rng.standard_normal((spec.n, spec.dim)) @ a.T
    x = f(z[:, 0] + rng.standard_normal(spec.n))
    y = g(z[:, 0] + rng.standard_normal(spec.n))
    if spec.dependent:
        shared = rng.normal(0.0, PNL_DEP_NOISE_SD, spec.n)
        x = x + shared
        y = y + shared
    params = {"dim": spec.dim, "f": names[0], "g": names[1]}
    return Dataset(x, y, z, "pnl", params, spec.dependent, spec.seed)


def generate(spec: AnySpec) -> Dataset:
    if isinstance(spec, LingaussSpec):
        return gen_lingauss(spec)
    if isinstance(spec, ChaosSpec):
        return gen_chaos(spec)
    if isinstance(spec, HybridSpec):
        return gen_hybrid(spec)
    if isinstance(spec, PnlSpec):
        return gen_pnl(spec)
    raise ConfigurationError(f"not a dataset spec: {spec!r}")


POW2_DIMS = (1, 2, 4, 8, 16, 32, 64, 128, 256)
CHAOS_ALPHAS = (0.01, 0.04, 0.16, 0.32, 0.5, 0.68, 0.84, 0.96, 0.99)
HYBRID_GRID = tuple((g, d) for g in (2, 8, 32) for d in (2, 8, 32))


def official_difficulties(setting: str) -> list[dict]:
    """Parameter dicts of the nine official instantiations, easiest first."""
    if setting in ("lingauss", "pnl"):
        return [{"dim": d} for d in POW2_DIMS]
    if setting == "chaos":
        return [{"alpha": a} for a in CHAOS_ALPHAS]
    if setting == "hybrid":
        return [{"gamma": g, "dim": d} for g, d in HYBRID_GRID]
    raise ConfigurationError(f"unknown setting {setting!r}")


def make_spec(setting: str, params: dict, dependent: bool, n: int, seed: int = 0) -> AnySpec:
    cls = {"lingauss": LingaussSpec, "chaos": ChaosSpec, "hybrid": HybridSpec, "pnl": PnlSpec}
    if setting not in cls:
        raise ConfigurationError(f"unknown setting {setting!r}")
    return cls[setting](dependent=dependent, n=n, seed=seed, **params)


def official_sweep(setting: str, dependent: bool = False, n: int = 1000, seed: int = 0) -> list[AnySpec]:
    return [make_spec(setting, p, dependent, n, seed) for p in official_difficulties(setting)]
