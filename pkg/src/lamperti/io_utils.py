"""Deterministic writers for the report artifacts.

Floats are rendered with repr (shortest round-trip form), so a rerun with
the same seed reproduces every artifact byte for byte. Timestamps never
pass through here; the pipeline quarantines them in one metadata file.
"""

from __future__ import annotations

import json
import os

import numpy as np

__all__ = ["write_csv", "write_json", "write_jsonl", "json_ready"]


def _ensure_parent(path) -> None:
    parent = os.path.dirname(os.fspath(path))
    if parent:
        os.makedirs(parent, exist_ok=True)


def _cell(value) -> str:
    if isinstance(value, (np.integer, int)):
        return str(int(value))
    return repr(float(value))


def write_csv(path, header: str, columns) -> None:
    """Write columns (equal-length 1-d arrays) under a fixed header line."""
    cols = [np.asarray(c) for c in columns]
    if len(cols) != len(header.split(",")):
        raise ValueError("header and column count disagree")
    n = len(cols[0])
    if any(len(c) != n for c in cols):
        raise ValueError("columns must share one length")
    _ensure_parent(path)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for i in range(n):
            fh.write(",".join(_cell(c[i]) for c in cols) + "\n")


def json_ready(obj):
    """Recursively coerce numpy scalars/arrays into plain JSON types."""
    if isinstance(obj, dict):
        return {str(k): json_ready(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [json_ready(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [json_ready(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def write_json(path, obj) -> None:
    _ensure_parent(path)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(json_ready(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_jsonl(path, records) -> None:
    _ensure_parent(path)
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(json_ready(rec), sort_keys=True) + "\n")
