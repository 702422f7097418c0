"""Deterministic JSON text with 17-significant-digit floats and light schema checks."""

from __future__ import annotations

import hashlib
import json
import math

import numpy as np


class SchemaError(ValueError):
    pass


def _fmt(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    s = format(x, ".17g")
    # keep a float marker so readers do not round-trip it as an int
    if "e" not in s and "." not in s and "n" not in s:
        s += ".0"
    return s


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON text with sorted keys; floats printed with 17 significant digits, NaN/inf as null."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in sorted(obj.items())]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        return "[\n" + ",\n".join(pad + dumps(v, indent, _level + 1) for v in seq) + "\n" + end + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt(float(obj))
    if isinstance(obj, complex):
        return dumps([obj.real, obj.imag], indent, _level)
    if obj is None:
        return "null"
    return json.dumps(str(obj))


def write_json(path, obj, required: tuple[str, ...] = ()) -> None:
    if not isinstance(obj, dict):
        raise SchemaError("top-level JSON output must be an object")
    missing = [k for k in required if k not in obj]
    if missing:
        raise SchemaError(f"missing keys {missing}")
    text = dumps(obj) + "\n"
    json.loads(text)  # well-formed before it reaches disk
    with open(path, "w") as fh:
        fh.write(text)


def fmt(x) -> str:
    """CSV cell: 17 significant digits for floats."""
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def canonical_hash(obj) -> str:
    """sha256 of the canonical (sorted, compact) JSON form."""
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(text.encode()).hexdigest()


def file_hash(path) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()
