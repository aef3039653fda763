"""Shared containers, seeding and row-wise helpers.

Sample matrices are plain ``numpy.ndarray`` objects (2-D, float64,
C-contiguous, finite). :func:`as_matrix` is the single gate that turns
user input into one; every other module assumes its output.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

SETTINGS = ("lingauss", "chaos", "hybrid", "pnl", "external")


class FcitError(Exception):
    """Base class for errors raised by this package."""


class DimensionError(FcitError, ValueError):
    pass


class InvalidPermutationError(FcitError, ValueError):
    pass


class SplitError(FcitError, ValueError):
    pass


class SampleSizeError(FcitError, ValueError):
    pass


class ConfigurationError(FcitError, ValueError):
    pass


class DomainError(FcitError, ValueError):
    pass


def as_matrix(data: Any, name: str = "matrix", allow_empty: bool = False) -> np.ndarray:
    """Validate ``data`` as a sample matrix (rows are samples).

    1-D input is treated as a single column. Non-finite entries are
    rejected rather than dropped.
    """
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 1-D or 2-D, got shape {arr.shape}")
    if arr.shape[1] == 0 and not allow_empty:
        raise DimensionError(f"{name} needs at least one column")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains NaN or Inf entries")
    return np.ascontiguousarray(arr)


@dataclass(frozen=True)
class SeedStream:
    """Deterministic, splittable source of random generators.

    A stream is identified by a root seed and a path of labels. The
    integer seed of a stream is the first 16 bytes (big endian) of
    ``sha256("<root>/<label1>/<label2>/...")``; the generator is a
    ``PCG64`` seeded through ``numpy.random.SeedSequence`` with that
    integer. Children with distinct labels get unrelated seeds, so
    concurrent tasks can draw randomness without coordination.
    """

    root_seed: int
    path: tuple[str, ...] = ()

    def __post_init__(self):
        if int(self.root_seed) < 0:
            raise ConfigurationError("root_seed must be non-negative")

    def child(self, *labels: Any) -> SeedStream:
        return SeedStream(self.root_seed, self.path + tuple(str(lab) for lab in labels))

    @property
    def seed(self) -> int:
        key = "/".join((str(int(self.root_seed)),) + self.path).encode()
        return int.from_bytes(hashlib.sha256(key).digest()[:16], "big")

    def rng(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence(self.seed)))


@dataclass(frozen=True, eq=False)
class Dataset:
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    setting: str = "external"
    params: Mapping[str, Any] = field(default_factory=dict)
    dependent: bool = False
    seed: int = 0

    def __post_init__(self):
        x = as_matrix(self.x, "x")
        y = as_matrix(self.y, "y")
        z = as_matrix(self.z, "z", allow_empty=True)
        if not x.shape[0] == y.shape[0] == z.shape[0]:
            raise DimensionError(
                f"x, y, z row counts differ: {x.shape[0]}, {y.shape[0]}, {z.shape[0]}"
            )
        if self.setting not in SETTINGS:
            raise ConfigurationError(f"unknown setting {self.setting!r}")
        for arr in (x, y, z):
            arr.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "params", dict(self.params))

    @property
    def n_samples(self) -> int:
        return self.x.shape[0]

    def metadata(self) -> dict:
        return {
            "setting": self.setting,
            "params": dict(self.params),
            "dependent": bool(self.dependent),
            "seed": int(self.seed),
            "dims": {"x": self.x.shape[1], "y": self.y.shape[1], "z": self.z.shape[1]},
        }


def concat_features(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Columns of ``a`` followed by the columns of ``b``."""
    a = as_matrix(a, "a", allow_empty=True)
    b = as_matrix(b, "b", allow_empty=True)
    if a.shape[0] != b.shape[0]:
        raise DimensionError(f"row counts differ: {a.shape[0]} vs {b.shape[0]}")
    return np.ascontiguousarray(np.hstack([a, b]))


def check_permutation(perm: Any, n: int) -> np.ndarray:
    perm = np.asarray(perm)
    if perm.shape != (n,) or not np.issubdtype(perm.dtype, np.integer):
        raise InvalidPermutationError(f"expected {n} integer indices")
    seen = np.zeros(n, dtype=bool)
    if n and (perm.min() < 0 or perm.max() >= n):
        raise InvalidPermutationError("index out of range")
    seen[perm] = True
    if not seen.all():
        raise InvalidPermutationError("indices are not a permutation")
    return perm


def permute_rows(m: np.ndarray, perm: Any) -> np.ndarray:
    """Row ``i`` of the result is row ``perm[i]`` of ``m``."""
    m = as_matrix(m, allow_empty=True)
    return m[check_permutation(perm, m.shape[0])]


def n_test_for(frac_test: float, n_samples: int) -> int:
    return int(np.floor(frac_test * n_samples))


def split_train_test(m: np.ndarray, perm: Any, n_test: int) -> tuple[np.ndarray, np.ndarray]:
    """Permute rows, then return ``(test, train)`` = first ``n_test`` rows, the rest."""
    m = as_matrix(m, allow_empty=True)
    if not 1 <= n_test < m.shape[0]:
        raise SplitError(f"n_test={n_test} must lie in [1, {m.shape[0] - 1}]")
    pm = permute_rows(m, perm)
    return pm[:n_test], pm[n_test:]


def mse(pred: np.ndarray, truth: np.ndarray) -> float:
    """Mean squared error over all rows and output columns."""
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.ndim == 1:
        pred = pred[:, None]
    if truth.ndim == 1:
        truth = truth[:, None]
    if pred.shape != truth.shape:
        raise DimensionError(f"shape mismatch: {pred.shape} vs {truth.shape}")
    if pred.size == 0:
        raise DimensionError("mse of empty arrays")
    return float(np.mean((pred - truth) ** 2))
