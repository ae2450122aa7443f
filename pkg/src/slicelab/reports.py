"""Deterministic JSON and CSV report files."""

from __future__ import annotations

import csv
import io
import json
import math
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from . import __version__
from .dyadic import Scale

SCHEMA = "slicelab-report/1"

__all__ = ["SCHEMA", "make_report", "dumps", "write_report", "write_csv", "csv_text", "to_jsonable"]


def to_jsonable(obj: Any) -> Any:
    """Convert library values into plain JSON types, deterministically."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, Fraction):
        return f"{obj.numerator}/{obj.denominator}" if obj.denominator != 1 else str(obj.numerator)
    if isinstance(obj, Scale):
        return str(obj)
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if hasattr(obj, "as_dict"):
        return to_jsonable(obj.as_dict())
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def make_report(command: str, config: dict, seed: int | None, result: Any, *, ok: bool = True) -> dict:
    """Envelope holding schema, version, command, config, seed and result."""
    return {
        "schema": SCHEMA,
        "version": __version__,
        "command": command,
        "config": to_jsonable(config),
        "seed": seed,
        "ok": bool(ok),
        "result": to_jsonable(result),
    }


def dumps(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def write_report(out_dir: str | Path, name: str, report: dict) -> Path:
    path = Path(out_dir) / f"{name}.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(report), encoding="utf-8")
    return path


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def write_csv(out_dir: str | Path, name: str, text: str) -> Path:
    path = Path(out_dir) / f"{name}.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path
