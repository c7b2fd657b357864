"""On-disk formats: diagnostics CSV, binary field snapshots with a manifest, JSON reports.

Snapshot layout: one ASCII header line ``<field> <nx> <ny> <t>`` terminated by
``\\n``, followed by ``nx * ny`` little-endian float64 values in row-major
order (x varies fastest).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, is_dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .diagnostics import CSV_COLUMNS, DiagnosticsRecord

MANIFEST = "manifest.json"
DIAGNOSTICS = "diagnostics.csv"


class FormatError(ValueError):
    pass


# -- snapshots --------------------------------------------------------------


def write_snapshot(path: str | Path, name: str, values: np.ndarray, t: float) -> None:
    values = np.asarray(values, dtype=float)
    if values.ndim != 2:
        raise ValueError("snapshot values must be a 2-D (ny, nx) array")
    if not name or any(c.isspace() for c in name):
        raise ValueError("field name must be a non-empty token")
    ny, nx = values.shape
    header = f"{name} {nx} {ny} {float(t)!r}\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(values, dtype="<f8").tobytes())


def read_snapshot(path: str | Path) -> tuple[str, float, np.ndarray]:
    """Return ``(field, t, values)`` with ``values`` shaped ``(ny, nx)``."""
    data = Path(path).read_bytes()
    nl = data.find(b"\n")
    if nl < 0:
        raise FormatError(f"{path}: missing header line")
    parts = data[:nl].decode("ascii").split()
    if len(parts) != 4:
        raise FormatError(f"{path}: header must be 'field nx ny t'")
    name, nx, ny, t = parts[0], int(parts[1]), int(parts[2]), float(parts[3])
    body = data[nl + 1 :]
    if len(body) != 8 * nx * ny:
        raise FormatError(f"{path}: expected {nx * ny} values, found {len(body) / 8:g}")
    values = np.frombuffer(body, dtype="<f8").astype(float).reshape(ny, nx)
    return name, t, values


def write_manifest(run_dir: str | Path, entries: Sequence[Mapping]) -> None:
    write_json(Path(run_dir) / MANIFEST, {"snapshots": list(entries)})


def read_manifest(run_dir: str | Path) -> list[dict]:
    return read_json(Path(run_dir) / MANIFEST)["snapshots"]


# -- diagnostics CSV ---------------------------------------------------------


def write_diagnostics(path: str | Path, records: Iterable[DiagnosticsRecord]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for rec in records:
            w.writerow([repr(float(getattr(rec, c))) for c in CSV_COLUMNS])


def read_diagnostics(path: str | Path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise FormatError(f"{path}: empty file")
    header, body = rows[0], rows[1:]
    cols = {name: np.array([float(r[k]) for r in body]) for k, name in enumerate(header)}
    return cols


def require_columns(series: Mapping, names: Iterable[str]) -> None:
    missing = [n for n in names if n not in series]
    if missing:
        raise FormatError(f"missing series column(s): {', '.join(missing)}")


# -- JSON -----------------------------------------------------------------------


def _jsonable(obj):
    if is_dataclass(obj) and not isinstance(obj, type):
        return _jsonable(asdict(obj))
    if isinstance(obj, Mapping):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    return obj


def write_json(path: str | Path, obj) -> None:
    Path(path).write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def read_json(path: str | Path):
    return json.loads(Path(path).read_text())
