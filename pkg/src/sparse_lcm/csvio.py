"""Comma-separated matrix and table files.

A single header row is allowed and detected by failing to parse the first row
as numbers. Values are written with ``%.17g`` so they round-trip exactly.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .exceptions import ParseError

__all__ = ["read_matrix", "write_matrix", "write_table", "write_json", "FLOAT_FMT"]

FLOAT_FMT = "%.17g"


def _parse_row(row, lineno, path):
    try:
        return [float(v) for v in row]
    except ValueError as exc:
        raise ParseError(f"{path}:{lineno}: non-numeric value ({exc})") from None


def read_matrix(path) -> tuple[np.ndarray, list | None]:
    """Read a numeric CSV; returns ``(array, header or None)``."""
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise ParseError(f"{path}: empty file")
    rows = [[c.strip() for c in r] for r in rows]
    header = None
    try:
        [float(v) for v in rows[0]]
    except ValueError:
        header, rows = rows[0], rows[1:]
    if not rows:
        raise ParseError(f"{path}: header but no data")
    width = len(rows[0])
    data = []
    for i, r in enumerate(rows, start=2 if header else 1):
        if len(r) != width:
            raise ParseError(f"{path}:{i}: expected {width} fields, got {len(r)}")
        data.append(_parse_row(r, i, path))
    arr = np.array(data, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ParseError(f"{path}: non-finite values")
    return arr, header


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return FLOAT_FMT % float(v)


def write_matrix(path, a, header=None) -> None:
    a = np.atleast_2d(np.asarray(a, dtype=float))
    write_table(path, header, a.tolist())


def write_table(path, header, rows) -> None:
    with Path(path).open("w", newline="") as fh:
        if header:
            fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def write_json(path, obj) -> None:
    with Path(path).open("w") as fh:
        json.dump(_clean(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")
