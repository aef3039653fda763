"""Dataset CSV files with a JSON metadata sidecar.

The CSV header is ``x0,...,y0,...,z0,...`` and values are written with
17 significant digits, so a write/read round trip is exact.
"""

from __future__ import annotations

import json
import re
from pathlib import Path
from typing import Union

import numpy as np

from .core import Dataset, DimensionError, FcitError

PathLike = Union[str, Path]


class DataFormatError(FcitError, ValueError):
    pass


def meta_path(csv_path: PathLike) -> Path:
    p = Path(csv_path)
    return p.with_name(p.stem + ".meta.json")


def header_for(dx: int, dy: int, dz: int) -> list[str]:
    return [f"x{i}" for i in range(dx)] + [f"y{i}" for i in range(dy)] + [f"z{i}" for i in range(dz)]


def write_dataset(ds: Dataset, path: PathLike) -> Path:
    path = Path(path)
    data = np.hstack([ds.x, ds.y, ds.z])
    header = ",".join(header_for(ds.x.shape[1], ds.y.shape[1], ds.z.shape[1]))
    np.savetxt(path, data, fmt="%.17g", delimiter=",", header=header, comments="")
    meta_path(path).write_text(json.dumps(ds.metadata(), indent=2, sort_keys=True) + "\n")
    return path


def read_csv(path: PathLike) -> tuple[list[str], np.ndarray]:
    """Return the header names and the numeric table of a CSV file."""
    path = Path(path)
    try:
        with path.open() as fh:
            header = fh.readline().strip()
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc}") from exc
    if not header:
        raise DataFormatError(f"{path} is empty")
    names = [h.strip() for h in header.split(",")]
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except ValueError as exc:
        raise DataFormatError(f"malformed CSV {path}: {exc}") from exc
    if data.size == 0:
        data = np.zeros((0, len(names)))
    if data.shape[1] != len(names):
        raise DataFormatError(f"{path}: header has {len(names)} columns, rows have {data.shape[1]}")
    if not np.all(np.isfinite(data)):
        raise DataFormatError(f"{path} contains NaN or Inf")
    return names, data


def read_dataset(path: PathLike) -> Dataset:
    """Read a file written by :func:`write_dataset` (columns grouped by header prefix)."""
    names, data = read_csv(path)
    groups = {"x": [], "y": [], "z": []}
    for i, name in enumerate(names):
        m = re.fullmatch(r"([xyz])(\d+)", name)
        if not m:
            raise DataFormatError(f"unexpected column name {name!r}")
        groups[m.group(1)].append(i)
    meta = {}
    if meta_path(path).exists():
        meta = json.loads(meta_path(path).read_text())
    try:
        return Dataset(
            data[:, groups["x"]], data[:, groups["y"]], data[:, groups["z"]],
            meta.get("setting", "external"), meta.get("params", {}),
            bool(meta.get("dependent", False)), int(meta.get("seed", 0)),
        )
    except DimensionError as exc:
        raise DataFormatError(str(exc)) from exc


def parse_columns(spec: str, n_cols: int) -> list[int]:
    """Parse ``"0-3,7"`` into ``[0, 1, 2, 3, 7]`` (inclusive ranges)."""
    cols: list[int] = []
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        m = re.fullmatch(r"(\d+)(?:-(\d+))?", part)
        if not m:
            raise ValueError(f"bad column spec {part!r}")
        lo = int(m.group(1))
        hi = int(m.group(2)) if m.group(2) else lo
        if hi < lo:
            raise ValueError(f"bad column range {part!r}")
        cols.extend(range(lo, hi + 1))
    if not cols:
        raise ValueError("empty column selection")
    bad = [c for c in cols if c >= n_cols]
    if bad:
        raise DataFormatError(f"columns {bad} out of range for {n_cols} columns")
    return cols
