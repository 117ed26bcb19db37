"""CSV/JSON export of traces and reports."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Sequence

import numpy as np

from .curves import CurveTrace

DIAGNOSTIC_COLUMNS = ("s", "wedge_residual", "sigma_residual", "sigma_norm2")


def trace_columns(trace: CurveTrace, integrals: Sequence[str] = ()) -> list[str]:
    n = trace.dim
    cols = ["param"]
    for tag in ("x", "u", "a"):
        cols += [f"{tag}{i + 1}" for i in range(n)]
    return cols + list(DIAGNOSTIC_COLUMNS) + [f"fi_{name}" for name in integrals]


def trace_rows(trace: CurveTrace, integrals: Sequence[str] = ()) -> np.ndarray:
    """Sample-by-column array; diagnostics that were not computed are NaN."""
    m = len(trace)
    blocks = [trace.params[:, None], trace.X, trace.U, trace.A]
    for key in DIAGNOSTIC_COLUMNS:
        blocks.append(np.asarray(trace.diagnostics.get(key, np.full(m, np.nan)), dtype=float)[:, None])
    for name in integrals:
        blocks.append(np.asarray(trace.diagnostics[f"fi_{name}"], dtype=float)[:, None])
    return np.hstack(blocks)


def _fmt(v: float) -> str:
    return repr(float(v))


def write_trace_csv(path, trace: CurveTrace, integrals: Sequence[str] = ()) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(trace_columns(trace, integrals))
        for row in trace_rows(trace, integrals):
            writer.writerow([_fmt(v) for v in row])
    return path


def read_trace_csv(path) -> tuple[list[str], np.ndarray]:
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader]
    return header, np.array(rows)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_trace_json(path, trace: CurveTrace, integrals: Sequence[str] = ()) -> Path:
    cols = trace_columns(trace, integrals)
    rows = trace_rows(trace, integrals)
    payload = {"columns": cols, "meta": _jsonable(trace.meta), "rows": _jsonable(rows)}
    return write_json(path, payload)


def write_trace(path, trace: CurveTrace, fmt: str = "csv", integrals: Sequence[str] = ()) -> Path:
    if fmt == "csv":
        return write_trace_csv(path, trace, integrals)
    if fmt == "json":
        return write_trace_json(path, trace, integrals)
    raise ValueError(f"unknown format {fmt!r}")


def write_json(path, payload) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=False) + "\n")
    return path
