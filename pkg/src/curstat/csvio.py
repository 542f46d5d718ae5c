"""CSV readers and writers for samples, diagnostics, grids and study outputs.

All floating point output uses 17 significant digits so values survive a
write/read round trip unchanged.
"""
from __future__ import annotations

import csv
import io
from typing import Iterable, List, Sequence

import numpy as np

from .errors import InputFormatError
from .risk import EstimateGrid, ReplicateRecord
from .selection import SelectionResult
from .simgen import FullSample
from .tensor_ls import Sample


def fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


def _write(rows: Iterable[Sequence], header: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if not isinstance(v, str) else v for v in row])
    return buf.getvalue()


def sample_to_csv(sample: Sample, y=None) -> str:
    """``x,t,delta`` records; pass ``y`` (aligned with the sample) to add a ``y`` column."""
    if y is None:
        return _write(zip(sample.x, sample.t, sample.delta), ("x", "t", "delta"))
    return _write(zip(sample.x, sample.t, sample.delta, y), ("x", "t", "delta", "y"))


def full_to_csv(full: FullSample) -> str:
    return _write(zip(full.x, full.t, full.delta, full.y), ("x", "t", "delta", "y"))


def read_sample_csv(text: str, region) -> Sample:
    """Parse ``x,t,delta[,y]`` CSV text and restrict it to ``region``."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise InputFormatError("line 1: empty sample file") from None
    try:
        ix, it, idelta = header.index("x"), header.index("t"), header.index("delta")
    except ValueError:
        raise InputFormatError(f"line 1: header must contain x, t, delta; got {header}") from None
    xs, ts, ds = [], [], []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        try:
            if len(row) != len(header):
                raise ValueError(f"expected {len(header)} fields, got {len(row)}")
            x, t, d = float(row[ix]), float(row[it]), float(row[idelta])
            if d not in (0.0, 1.0):
                raise ValueError(f"delta must be 0 or 1, got {row[idelta]!r}")
            if not (np.isfinite(x) and np.isfinite(t)):
                raise ValueError("non-finite coordinate")
        except ValueError as exc:
            raise InputFormatError(f"line {lineno}: {exc}") from None
        xs.append(x)
        ts.append(t)
        ds.append(int(d))
    if not xs:
        raise InputFormatError("sample file holds no records")
    return Sample.from_arrays(np.array(xs), np.array(ts), np.array(ds), region)


def per_model_to_csv(result: SelectionResult) -> str:
    chosen = result.chosen
    rows = [
        (r.d1, r.d2, r.dim, r.contrast, r.penalty, r.criterion, int((r.d1, r.d2) == chosen))
        for r in result.per_model
    ]
    return _write(rows, ("model_d1", "model_d2", "dim", "contrast", "penalty", "criterion", "chosen"))


def grid_to_csv(grid: EstimateGrid) -> str:
    rows = [[fmt(x)] + [fmt(v) for v in vals] for x, vals in zip(grid.x_nodes, grid.values)]
    return _write(rows, ["x\\u"] + [fmt(u) for u in grid.u_nodes])


def read_grid_csv(text: str) -> EstimateGrid:
    rows = list(csv.reader(io.StringIO(text)))
    try:
        u = np.array([float(v) for v in rows[0][1:]])
        x = np.array([float(r[0]) for r in rows[1:]])
        vals = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
    except (ValueError, IndexError) as exc:
        raise InputFormatError(f"malformed grid file: {exc}") from None
    return EstimateGrid(x, u, vals)


RISK_COLUMNS = ("design", "n", "rep", "risk_raw", "risk_clamped", "risk_rearranged", "chosen_d1", "chosen_d2")


def risk_records_to_csv(records: List[ReplicateRecord]) -> str:
    rows = [
        (r.design, r.n, r.rep, r.risk_raw, r.risk_clamped, r.risk_rearranged, r.chosen_d1, r.chosen_d2)
        for r in records
    ]
    return _write(rows, RISK_COLUMNS)


def dist_table_to_csv(rows) -> str:
    return _write(rows, ("a", "dist", "error_bound"))
