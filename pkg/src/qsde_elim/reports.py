"""JSON and CSV serialization of results.

Complex numbers become ``{"re": .., "im": ..}`` objects, matrices nested lists
of those, and non-finite floats ``null``.  Output is deterministic: keys are
sorted and nothing time-dependent is written.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import os
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

CSV_COLUMNS = ("epsilon", "prelim_re", "prelim_im", "limit_re", "limit_im", "abs_err", "rel_err")


def _float(x: float):
    x = float(x)
    return x if math.isfinite(x) else None


def complex_obj(z: complex) -> dict:
    z = complex(z)
    return {"re": _float(z.real), "im": _float(z.imag)}


def to_jsonable(obj):
    if obj is None or isinstance(obj, (bool, str)):
        return obj
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _float(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return complex_obj(obj)
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return [to_jsonable(x) for x in obj.tolist()] if obj.ndim else complex_obj(obj.item())
        return [to_jsonable(x) for x in obj.tolist()] if obj.ndim else to_jsonable(obj.item())
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, Mapping):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(x) for x in obj]
    if hasattr(obj, "as_dict"):
        return to_jsonable(obj.as_dict())
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(payload) -> str:
    return json.dumps(to_jsonable(payload), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _fmt(x: float) -> str:
    return "%.17g" % x


def sweep_table(rows: Iterable) -> list:
    """CSV rows (without header) from SweepRow-like objects."""
    out = []
    for r in rows:
        p, l = complex(r.prelim_value), complex(r.limit_value)
        out.append([_fmt(r.epsilon), _fmt(p.real), _fmt(p.imag), _fmt(l.real), _fmt(l.imag), _fmt(r.abs_err), _fmt(r.rel_err)])
    return out


def write_csv(path: Path, rows: Iterable) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        w.writerows(sweep_table(rows))
    return path


def read_csv(path: Path) -> list:
    with open(path, newline="", encoding="utf-8") as fh:
        rd = csv.DictReader(fh)
        return [{k: float(v) for k, v in row.items()} for row in rd]


def emit_report(payload, out_dir, stem: str, fmt: str = "json", tables: Mapping | None = None) -> list:
    """Write ``<stem>.json`` and/or one ``<stem>_<name>.csv`` per table; returns written paths."""
    if fmt not in ("json", "csv", "both"):
        raise ValueError(f"unknown format {fmt!r}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise PermissionError(f"output directory {out} is not writable")
    written = []
    if fmt in ("json", "both"):
        p = out / f"{stem}.json"
        with open(p, "w", newline="\n", encoding="utf-8") as fh:
            fh.write(dumps(payload))
        written.append(p)
    if fmt in ("csv", "both"):
        for name, rows in (tables or {}).items():
            written.append(write_csv(out / f"{stem}_{name}.csv", rows))
    return written
