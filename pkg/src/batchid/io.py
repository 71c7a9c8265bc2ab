"""CSV / JSON export of run records, aggregates and curves.

Floats are written with ``repr`` so a re-import returns the identical value and
identical inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, is_dataclass
from pathlib import Path

RUN_COLUMNS = ("seed", "K", "beta", "M", "N_A", "N_R", "N_E", "f_RE", "f_RA", "T", "delta_nE")
CURVE_COLUMNS = ("K", "M_over_N", "beta_star", "p_R_star", "T_star", "p_U")
EVOLUTION_COLUMNS = ("K", "M_over_N", "beta", "p_R", "T", "p_U", "converged", "iterations")
AGGREGATE_COLUMNS = ("K", "beta", "runs", "f_RE", "f_RE_se", "f_RA", "f_RA_se", "T", "T_se",
                     "delta_nE", "delta_nE_se", "abs_delta_nE", "abs_delta_nE_se", "M", "M_se",
                     "truncated", "beta_star")

_EVOLUTION_RENAME = {"beta": "beta_star", "p_R": "p_R_star", "T": "T_star"}


class ExportError(OSError):
    pass


def _as_row(item) -> dict:
    if isinstance(item, dict):
        return item
    if hasattr(item, "row"):
        return item.row()
    if is_dataclass(item):
        return asdict(item)
    raise TypeError(f"cannot export {type(item).__name__}")


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    if v is None:
        return ""
    return str(v)


def _parse(s: str):
    if s == "":
        return None
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def evolution_rows(curves) -> list[dict]:
    """Curve points in the density-evolution column layout."""
    out = []
    for c in curves:
        r = _as_row(c)
        out.append({k: r[_EVOLUTION_RENAME.get(k, k)] for k in EVOLUTION_COLUMNS})
    return out


def export(items, path: str | Path, format: str = "csv", columns=None) -> Path:
    """Write rows as CSV (fixed header) or JSON (a list with one object per row)."""
    path = Path(path)
    rows = [_as_row(x) for x in items]
    if columns is None:
        columns = list(rows[0]) if rows else []
    try:
        if format == "csv":
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(columns)
                for r in rows:
                    w.writerow([_fmt(r.get(c)) for c in columns])
        elif format == "json":
            doc = [{c: _json_value(r.get(c)) for c in columns} for r in rows]
            path.write_text(json.dumps(doc, indent=1) + "\n")
        else:
            raise ValueError(f"unknown export format {format!r}")
    except OSError as exc:
        raise ExportError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def _json_value(v):
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    return v


def read_csv(path: str | Path) -> list[dict]:
    try:
        with open(path, newline="") as fh:
            return [{k: _parse(v) for k, v in row.items()} for row in csv.DictReader(fh)]
    except OSError as exc:
        raise ExportError(f"cannot read {path}: {exc.strerror or exc}") from exc


def read_json(path: str | Path) -> list[dict]:
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise ExportError(f"cannot read {path}: {exc.strerror or exc}") from exc


def write_metadata(path: str | Path, meta: dict) -> Path:
    """Sidecar ``<path>.meta.json`` recording the settings behind an export."""
    side = Path(str(path) + ".meta.json")
    try:
        side.write_text(json.dumps(meta, indent=1, sort_keys=True) + "\n")
    except OSError as exc:
        raise ExportError(f"cannot write {side}: {exc.strerror or exc}") from exc
    return side
