"""Deterministic serialization of experiment results.

Floats are written with 17 significant digits so that reading a file back
reproduces every value bit for bit. Complex numbers become ``{"re", "im"}``
objects in JSON and ``_re``/``_im`` column pairs in CSV. Timing and other
run-dependent details live in a sidecar manifest, never in the data file.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class OutputError(OSError):
    """Raised when a result file cannot be written."""


@dataclass
class Table:
    """Rows of a sweep with a fixed column order.

    ``meta`` is extra scalar context that goes into the JSON form only.
    """

    header: tuple
    rows: list
    meta: dict = field(default_factory=dict)


def format_float(x):
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def to_plain(obj):
    """Convert reports, arrays and complex numbers into JSON-ready builtins."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, Table):
        return {**{k: to_plain(v) for k, v in obj.meta.items()},
                "columns": list(obj.header),
                "rows": [to_plain(list(r)) for r in obj.rows]}
    if isinstance(obj, dict):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, np.ndarray):
        return to_plain(obj.tolist())
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if obj is None or isinstance(obj, str):
        return obj
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _emit(value, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {_emit(v, indent, level + 1)}" for k, v in value.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(value, list):
        if not value:
            return "[]"
        if all(not isinstance(v, (dict, list)) for v in value):
            return "[" + ", ".join(_emit(v, indent, level + 1) for v in value) + "]"
        items = [pad + _emit(v, indent, level + 1) for v in value]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if isinstance(value, bool) or value is None:
        return json.dumps(value)
    if isinstance(value, float):
        text = format_float(value)
        # JSON has no literal for non-finite numbers
        return json.dumps(text) if not math.isfinite(value) else text
    return json.dumps(value)


def dumps_json(obj, indent=2):
    """JSON text with insertion key order and 17-digit floats."""
    return _emit(to_plain(obj), indent, 0) + "\n"


def _csv_cells(value):
    if isinstance(value, (complex, np.complexfloating)):
        return [format_float(value.real), format_float(value.imag)]
    if isinstance(value, (bool, np.bool_)):
        return ["true" if value else "false"]
    if isinstance(value, (int, np.integer)):
        return [str(int(value))]
    if isinstance(value, (float, np.floating)):
        return [format_float(value)]
    if value is None:
        return [""]
    return [str(value)]


def _flatten(obj, prefix=""):
    plain = obj if isinstance(obj, (dict, list)) else to_plain(obj)
    if isinstance(plain, dict) and set(plain) == {"re", "im"}:
        yield prefix + "_re", plain["re"]
        yield prefix + "_im", plain["im"]
    elif isinstance(plain, dict):
        for k, v in plain.items():
            yield from _flatten(v, f"{prefix}.{k}" if prefix else k)
    elif isinstance(plain, list):
        for i, v in enumerate(plain):
            yield from _flatten(v, f"{prefix}[{i}]")
    else:
        yield prefix, plain


def dumps_csv(obj):
    """CSV text: a sweep table as-is, any other report as ``key,value`` rows.

    Complex columns of a table are split into ``<name>_re,<name>_im``; the
    table header names them that way already.
    """
    lines = []
    if isinstance(obj, Table):
        lines.append(",".join(obj.header))
        for row in obj.rows:
            cells = []
            for v in row:
                cells += _csv_cells(v)
            if len(cells) != len(obj.header):
                raise ValueError("row width does not match the header")
            lines.append(",".join(cells))
    else:
        lines.append("key,value")
        for key, value in _flatten(to_plain(obj)):
            lines.append(f"{key},{_csv_cells(value)[0]}")
    return "\n".join(lines) + "\n"


def write_text(path, text):
    try:
        path = Path(path)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc
    return path


def write_output(report, fmt, path):
    """Write ``report`` as ``json`` or ``csv`` to ``path`` and return the path."""
    if fmt == "json":
        text = dumps_json(report)
    elif fmt == "csv":
        text = dumps_csv(report)
    else:
        raise ValueError(f"unknown output format {fmt!r}")
    return write_text(path, text)


def manifest_path(path):
    path = Path(path)
    return path.with_name(path.name + ".manifest.json")


def write_manifest(manifest, data_path):
    return write_text(manifest_path(data_path), dumps_json(manifest))
