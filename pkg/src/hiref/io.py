"""Reading and writing point files.

Two formats are supported:

* CSV: one point per row, comma separated, with an optional header line.
* Binary: magic ``b"OTPT"``, ``u32`` version (1), ``u64`` n, ``u64`` d, then
  ``n * d`` little-endian float64 values in row-major order.

The binary format is used for paths ending in ``.otpt`` or ``.bin``.
"""

from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from .core import Dataset
from .errors import DatasetError

MAGIC = b"OTPT"
VERSION = 1
_HEADER = struct.Struct("<4sIQQ")
BINARY_SUFFIXES = (".otpt", ".bin")


def is_binary_path(path) -> bool:
    return Path(path).suffix.lower() in BINARY_SUFFIXES


def read_points(path) -> Dataset:
    path = Path(path)
    if is_binary_path(path):
        return Dataset(_read_binary(path))
    return Dataset(_read_csv(path))


def write_points(path, data) -> None:
    pts = data.points if isinstance(data, Dataset) else Dataset(data).points
    path = Path(path)
    if is_binary_path(path):
        _write_binary(path, pts)
    else:
        _write_csv(path, pts)


def _read_binary(path: Path) -> np.ndarray:
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise DatasetError(f"{path}: truncated header")
    magic, version, n, d = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise DatasetError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise DatasetError(f"{path}: unsupported version {version}")
    expected = _HEADER.size + 8 * n * d
    if len(raw) != expected:
        raise DatasetError(f"{path}: expected {expected} bytes, found {len(raw)}")
    body = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size, count=n * d)
    return body.astype(np.float64).reshape(n, d)


def _write_binary(path: Path, pts: np.ndarray) -> None:
    n, d = pts.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, n, d))
        fh.write(np.ascontiguousarray(pts, dtype="<f8").tobytes())


def _read_csv(path: Path) -> np.ndarray:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for k, row in enumerate(csv.reader(fh)):
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                rows.append([float(cell) for cell in row])
            except ValueError:
                if k == 0 and not rows:
                    continue  # header
                raise DatasetError(f"{path}: non-numeric value on line {k + 1}") from None
    if not rows:
        raise DatasetError(f"{path}: no points")
    width = {len(r) for r in rows}
    if len(width) != 1:
        raise DatasetError(f"{path}: ragged rows")
    return np.array(rows, dtype=np.float64)


def _write_csv(path: Path, pts: np.ndarray) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"x{k}" for k in range(pts.shape[1])])
        for row in pts:
            writer.writerow([repr(float(v)) for v in row])
