"""Deterministic CSV/JSON artifact writing."""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np


def fmt(value) -> str:
    """Shortest round-trip text for numbers; empty string for missing values."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def atomic_write_text(path, text: str) -> Path:
    """Write ``text`` to ``path`` through a temporary file and an atomic rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([v if isinstance(v, str) else fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path, header, rows) -> Path:
    return atomic_write_text(path, csv_text(header, rows))


def write_json(path, doc) -> Path:
    return atomic_write_text(path, json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def read_csv(path) -> tuple[list, list]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, [row for row in reader]


def summarize(records) -> list[tuple]:
    """Per-checkpoint ``(step, median, half_std, n_seeds)`` across run records.

    ``half_std`` is half the population standard deviation (ddof = 0).
    """
    if not records:
        return []
    steps = records[0].steps
    for rec in records[1:]:
        if rec.steps != steps:
            raise ValueError("runs have different checkpoints")
    values = np.array([rec.metrics for rec in records], dtype=float)
    med = np.median(values, axis=0)
    half = 0.5 * values.std(axis=0)
    n = values.shape[0]
    return [(int(s), float(m), float(h), n) for s, m, h in zip(steps, med, half)]
