"""CSV and JSON outputs with a provenance header line."""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path


def _cell(value) -> str:
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return f"{value:.12g}"
    return str(value)


def format_csv(columns, rows, meta: dict) -> str:
    """CSV text whose first line is ``# key=value ...`` metadata."""
    buf = io.StringIO()
    buf.write("# " + " ".join(f"{k}={v}" for k, v in meta.items()) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        if len(row) != len(columns):
            raise ValueError(f"row has {len(row)} cells, expected {len(columns)}")
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def write_csv(path: str | Path, columns, rows, meta: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_csv(columns, rows, meta))
    return path


def read_csv(path: str | Path) -> tuple[dict, list[dict]]:
    """Return ``(metadata, rows)``; numeric cells stay strings."""
    lines = Path(path).read_text().splitlines()
    meta = {}
    if lines and lines[0].startswith("#"):
        for item in lines[0][1:].split():
            key, _, value = item.partition("=")
            meta[key] = value
        lines = lines[1:]
    return meta, list(csv.DictReader(lines))


def write_json(path: str | Path, data: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def _json_default(obj):
    if hasattr(obj, "tolist"):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")
