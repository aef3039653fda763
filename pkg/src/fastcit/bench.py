"""Benchmark harness: sample-size sweeps with time budgets, error rates and metrics."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Iterable, Iterator, Optional, TextIO, Union

import numpy as np

from .core import ConfigurationError, SeedStream
from .datasets import generate, make_spec, official_difficulties
from .fit import FitConfig, TimeBudgetExceeded, auto_test, default_workers
from .stats import aupc, ks_uniform_p

log = logging.getLogger(__name__)

BENCH_SETTINGS = ("lingauss", "chaos", "hybrid", "pnl")
RECORD_COLUMNS = ["setting", "params", "n_samples", "dependent", "seed", "p_value", "wall_time_s", "status"]
SUMMARY_COLUMNS = ["setting", "params", "n_used", "type1", "type2", "avg_error", "aupc", "ks_p"]
METRIC_COLUMNS = ["setting", "params", "n_used", "aupc", "ks_p"]
NOT_RUN = "NOT-RUN"
OK, TIMEOUT, ERROR = "OK", "TIMEOUT", "ERROR"


def _default_sizes() -> tuple[int, ...]:
    return tuple(int(v) for v in np.unique(np.round(np.logspace(2, 5, 10)).astype(int)))


@dataclass(frozen=True)
class SweepConfig:
    settings: tuple[str, ...] = BENCH_SETTINGS
    sample_sizes: tuple[int, ...] = field(default_factory=_default_sizes)
    time_budget: float = 100.0
    alpha: float = 0.05
    seeds: int = 3
    workers: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "settings", tuple(self.settings))
        object.__setattr__(self, "sample_sizes", tuple(int(n) for n in self.sample_sizes))
        unknown = [s for s in self.settings if s not in BENCH_SETTINGS]
        if unknown or not self.settings:
            raise ConfigurationError(f"settings must be a non-empty subset of {BENCH_SETTINGS}")
        sizes = self.sample_sizes
        if not sizes or any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise ConfigurationError("sample_sizes must be non-empty and strictly increasing")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigurationError("alpha must lie in (0, 1)")
        if self.seeds < 1:
            raise ConfigurationError("seeds must be >= 1")
        if self.time_budget < 0:
            raise ConfigurationError("time_budget must be >= 0")
        if self.workers is not None and self.workers < 1:
            raise ConfigurationError("workers must be >= 1")

    @classmethod
    def from_dict(cls, data: dict) -> SweepConfig:
        names = {f.name for f in fields(cls)}
        extra = set(data) - names
        if extra:
            raise ConfigurationError(f"unknown config keys: {sorted(extra)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path: Union[str, Path]) -> SweepConfig:
        return cls.from_dict(json.loads(Path(path).read_text()))

    def digest(self) -> str:
        """Hash of everything that affects results (the worker count does not)."""
        d = asdict(self)
        d.pop("workers")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


@dataclass(frozen=True)
class BenchRecord:
    setting: str
    params: dict
    n_samples: int
    dependent: bool
    seed: int
    p_value: Optional[float]
    wall_time: Optional[float]
    status: str = OK

    @property
    def params_key(self) -> str:
        return format_params(self.params)


@dataclass(frozen=True)
class ErrorSummary:
    setting: str
    params: str
    n_used: Optional[int]
    type1: Optional[float]
    type2: Optional[float]

    @property
    def avg_error(self) -> Optional[float]:
        if self.type1 is None or self.type2 is None:
            return None
        return (self.type1 + self.type2) / 2.0


def format_params(params: dict) -> str:
    return ";".join(f"{k}={v}" for k, v in params.items())


def parse_params(text: str) -> dict:
    out = {}
    for part in filter(None, text.split(";")):
        k, v = part.split("=", 1)
        num = float(v)
        out[k] = int(num) if num.is_integer() and "." not in v else num
    return out


def _test_seed(setting: str, params: dict, n: int, dependent: bool, seed: int) -> int:
    return SeedStream(seed).child("test", setting, format_params(params), n, int(dependent)).seed


def run_cell(setting: str, params: dict, n: int, dependent: bool, seed: int, time_budget: float) -> BenchRecord:
    try:
        ds = generate(make_spec(setting, params, dependent, n, seed))
        cfg = FitConfig(seed=_test_seed(setting, params, n, dependent, seed), workers=1)
        start = time.perf_counter()
        try:
            out = auto_test(ds.x, ds.y, ds.z, cfg, deadline=start + time_budget)
        except TimeBudgetExceeded:
            return BenchRecord(setting, params, n, dependent, seed, None, time.perf_counter() - start, TIMEOUT)
    except Exception as exc:  # reported per record, the sweep goes on
        log.error("cell %s %s n=%d dep=%s seed=%d failed: %s", setting, params, n, dependent, seed, exc)
        return BenchRecord(setting, params, n, dependent, seed, None, None, ERROR)
    if out.wall_time > time_budget:
        return BenchRecord(setting, params, n, dependent, seed, None, out.wall_time, TIMEOUT)
    return BenchRecord(setting, params, n, dependent, seed, out.p_value, out.wall_time, OK)


def _run_difficulty(setting: str, params: dict, cfg: SweepConfig) -> list[BenchRecord]:
    records: list[BenchRecord] = []
    skipping = False
    for n in cfg.sample_sizes:
        batch = []
        for dependent in (False, True):
            for seed in range(cfg.seeds):
                if skipping:
                    batch.append(BenchRecord(setting, params, n, dependent, seed, None, None, TIMEOUT))
                else:
                    batch.append(run_cell(setting, params, n, dependent, seed, cfg.time_budget))
        # runtime grows with n, so once a size times out larger ones are skipped
        skipping = skipping or any(r.status == TIMEOUT for r in batch)
        records.extend(batch)
    _check_runtime_monotone(records)
    return records


def _check_runtime_monotone(records: list[BenchRecord]) -> None:
    by_n: dict[int, list[float]] = {}
    for r in records:
        if r.status == OK:
            by_n.setdefault(r.n_samples, []).append(r.wall_time)
    medians = [float(np.median(by_n[n])) for n in sorted(by_n)]
    for (n0, m0), (n1, m1) in zip(zip(sorted(by_n), medians), zip(sorted(by_n)[1:], medians[1:])):
        if m1 < m0:
            r = records[0]
            log.info("runtime not monotone for %s %s: %.3fs at n=%d, %.3fs at n=%d",
                     r.setting, r.params_key, m0, n0, m1, n1)


def run_sweep(cfg: SweepConfig, workers: Optional[int] = None) -> Iterator[BenchRecord]:
    """Yield records in deterministic order: setting, difficulty, n, dependent, seed.

    Each (setting, difficulty) runs as one job on a pool of ``workers``
    threads; a test inside a job is single-threaded, so total
    parallelism is bounded by the worker count.
    """
    n_workers = workers or cfg.workers or default_workers()
    jobs = [(s, p) for s in cfg.settings for p in official_difficulties(s)]
    if n_workers <= 1:
        for s, p in jobs:
            yield from _run_difficulty(s, p, cfg)
        return
    with ThreadPoolExecutor(max_workers=n_workers) as pool:
        futures = [pool.submit(_run_difficulty, s, p, cfg) for s, p in jobs]
        for fut in futures:
            yield from fut.result()


def _group(records: Iterable[BenchRecord]) -> dict[tuple[str, str], list[BenchRecord]]:
    groups: dict[tuple[str, str], list[BenchRecord]] = {}
    for r in records:
        groups.setdefault((r.setting, r.params_key), []).append(r)
    return groups


def _n_used(recs: list[BenchRecord], time_cap: float) -> Optional[int]:
    by_n: dict[int, list[BenchRecord]] = {}
    for r in recs:
        by_n.setdefault(r.n_samples, []).append(r)
    done = [
        n for n, rs in by_n.items()
        if all(r.status == OK and r.wall_time is not None and r.wall_time <= time_cap for r in rs)
    ]
    return max(done) if done else None


def summarize_errors(records: Iterable[BenchRecord], alpha: float = 0.05, time_cap: float = 60.0) -> list[ErrorSummary]:
    """Type I/II error rates at the largest sample size completed within ``time_cap``."""
    out = []
    for (setting, key), recs in _group(records).items():
        n_used = _n_used(recs, time_cap)
        if n_used is None:
            out.append(ErrorSummary(setting, key, None, None, None))
            continue
        at_n = [r for r in recs if r.n_samples == n_used]
        indep = [r.p_value for r in at_n if not r.dependent]
        dep = [r.p_value for r in at_n if r.dependent]
        type1 = float(np.mean([p < alpha for p in indep])) if indep else None
        type2 = float(np.mean([p >= alpha for p in dep])) if dep else None
        out.append(ErrorSummary(setting, key, n_used, type1, type2))
    return out


def aggregate_metrics(records: Iterable[BenchRecord], time_cap: float = 60.0) -> dict[tuple[str, str], dict]:
    """AUPC of dependent-version and KS uniformity p of independent-version p-values.

    Computed per (setting, difficulty) at the same sample size the error
    summary uses; ``None`` marks cells without enough p-values.
    """
    out = {}
    for key, recs in _group(records).items():
        n_used = _n_used(recs, time_cap)
        at_n = [r for r in recs if r.n_samples == n_used and r.status == OK]
        dep = [r.p_value for r in at_n if r.dependent]
        indep = [r.p_value for r in at_n if not r.dependent]
        out[key] = {
            "n_used": n_used,
            "aupc": aupc(dep) if dep else None,
            "ks_p": ks_uniform_p(indep) if len(indep) >= 5 else None,
        }
    return out


# ---------------------------------------------------------------- CSV I/O


def _fmt(v: Optional[float], spec: str = "%.17g") -> str:
    if v is None:
        return ""
    return spec % v


def _fmt_or_not_run(v) -> str:
    if v is None:
        return NOT_RUN
    return str(v) if isinstance(v, int) else "%.17g" % v


def record_row(r: BenchRecord) -> list[str]:
    return [
        r.setting, r.params_key, str(r.n_samples), str(int(r.dependent)), str(r.seed),
        _fmt(r.p_value), _fmt(r.wall_time, "%.6f"), r.status,
    ]


def write_records(records: Iterable[BenchRecord], fh: TextIO, digest: str = "") -> int:
    fh.write(f"# config_sha256={digest}\n")
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(RECORD_COLUMNS)
    count = 0
    for r in records:
        writer.writerow(record_row(r))
        fh.flush()
        count += 1
    return count


def read_records(fh: TextIO) -> tuple[list[BenchRecord], str]:
    digest = ""
    lines = []
    for line in fh:
        if line.startswith("#"):
            if "config_sha256=" in line:
                digest = line.split("config_sha256=", 1)[1].strip()
            continue
        lines.append(line)
    reader = csv.DictReader(lines)
    if reader.fieldnames != RECORD_COLUMNS:
        raise ValueError(f"records CSV must have columns {RECORD_COLUMNS}")
    out = []
    for row in reader:
        out.append(BenchRecord(
            row["setting"], parse_params(row["params"]), int(row["n_samples"]),
            bool(int(row["dependent"])), int(row["seed"]),
            float(row["p_value"]) if row["p_value"] else None,
            float(row["wall_time_s"]) if row["wall_time_s"] else None,
            row["status"],
        ))
    return out, digest


def write_summary(summary: list[ErrorSummary], metrics: dict, fh: TextIO, digest: str = "") -> None:
    fh.write(f"# config_sha256={digest}\n")
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(SUMMARY_COLUMNS)
    for s in summary:
        m = metrics.get((s.setting, s.params), {})
        writer.writerow([
            s.setting, s.params, _fmt_or_not_run(s.n_used), _fmt_or_not_run(s.type1),
            _fmt_or_not_run(s.type2), _fmt_or_not_run(s.avg_error),
            _fmt_or_not_run(m.get("aupc")), _fmt_or_not_run(m.get("ks_p")),
        ])


def write_metrics(metrics: dict, fh: TextIO, digest: str = "") -> None:
    fh.write(f"# config_sha256={digest}\n")
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(METRIC_COLUMNS)
    for (setting, key), m in metrics.items():
        writer.writerow([
            setting, key, _fmt_or_not_run(m["n_used"]),
            _fmt_or_not_run(m["aupc"]), _fmt_or_not_run(m["ks_p"]),
        ])
