"""Deterministic JSON / CSV artifacts.

Floats are written with ``repr`` (shortest round-trip form), keys are sorted
and no timestamps are recorded, so identical inputs give identical bytes.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

REPORT_SCHEMA = "avgctl-report-1"
CONFIG_SCHEMA = "avgctl-config-1"
CSV_SCHEMA = "avgctl-table-1"


def to_plain(obj):
    """numpy scalars/arrays to built-ins; non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    return obj


def canonical_json(obj) -> str:
    return json.dumps(to_plain(obj), sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def content_hash(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()


def build_report(command: str, config: dict, seed, results: dict, passed: bool) -> dict:
    """Report envelope; ``input_hash`` covers the command, config and seed."""
    inputs = {"command": command, "config": config, "seed": seed}
    return to_plain({
        "schema": REPORT_SCHEMA,
        "command": command,
        "config": config,
        "seed": seed,
        "input_hash": content_hash(inputs),
        "passed": passed,
        "results": results,
    })


def write_json(path, obj) -> Path:
    path = Path(path)
    text = json.dumps(to_plain(obj), sort_keys=True, indent=2, ensure_ascii=False) + "\n"
    path.write_text(text, encoding="utf-8")
    return path


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence], schema: str = CSV_SCHEMA) -> Path:
    path = Path(path)
    buf = io.StringIO()
    buf.write(f"# schema: {schema}\n")
    writer = csv.writer(buf, quoting=csv.QUOTE_MINIMAL, lineterminator="\r\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    path.write_text(buf.getvalue(), encoding="utf-8", newline="")
    return path
