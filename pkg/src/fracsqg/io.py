"""On-disk formats: SQGF field snapshots, the diagnostics CSV and JSON reports."""

from __future__ import annotations

import csv
import json
import math
import struct
from pathlib import Path
from typing import IO, Sequence

import numpy as np

from .diagnostics import DiagnosticsRecord
from .spectral import Grid, ScalarField

MAGIC = b"SQGF"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIIdd")


class SnapshotError(ValueError):
    pass


def write_snapshot(path, field: ScalarField, gamma: float, t: float) -> None:
    """Write magic, u32 version, u32 n, f64 gamma, f64 time, then n*n f64 values (row-major, LE)."""
    n = field.grid.n
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, n, float(gamma), float(t)))
        fh.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes())


def read_snapshot(path) -> tuple[ScalarField, float, float]:
    """Return (field, gamma, time)."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise SnapshotError("truncated header")
    magic, version, n, gamma, t = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise SnapshotError(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise SnapshotError(f"unsupported format version {version}")
    body = data[_HEADER.size:]
    if len(body) != 8 * n * n:
        raise SnapshotError(f"expected {8 * n * n} payload bytes, got {len(body)}")
    values = np.frombuffer(body, dtype="<f8").reshape(n, n).astype(float)
    return ScalarField(Grid(n), values), gamma, t


def csv_columns(alphas: Sequence[float]) -> list[str]:
    return (["t", "l2", "linf", "h_gamma_half", "h2", "h2_gamma_half"]
            + [f"holder_{a:g}" for a in alphas]
            + ["v_sup", "energy_residual", "dgamma_min"])


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def record_row(rec: DiagnosticsRecord, gamma: float, alphas: Sequence[float]) -> list[str]:
    s = rec.sobolev_norms
    row = [rec.t, rec.l2_norm, rec.linf_norm, s[gamma / 2], s[2.0], s[2.0 + gamma / 2]]
    row += [rec.holder_seminorm[float(a)] for a in alphas]
    row += [rec.v_sup, rec.energy_residual, rec.dgamma_min]
    return [fmt(v) for v in row]


class CsvSink:
    """Append-only CSV writer that flushes after every row."""

    def __init__(self, path, columns: Sequence[str]):
        self.path = Path(path)
        self._fh: IO = open(self.path, "w", newline="")
        self._w = csv.writer(self._fh, lineterminator="\n")
        self._w.writerow(columns)
        self._fh.flush()

    def write(self, row: Sequence[str]) -> None:
        self._w.writerow(row)
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()


def read_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty CSV")
    head, body = rows[0], rows[1:]
    cols = {h: [] for h in head}
    for r in body:
        for h, v in zip(head, r):
            cols[h].append(float(v) if v not in ("",) else math.nan)
    return {h: np.array(v) for h, v in cols.items()}


def _clean(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    return obj


def dump_json(obj, path=None) -> str:
    """Deterministic JSON; non-finite floats become null."""
    text = json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text
