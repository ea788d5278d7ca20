"""Result files: CSV tables tagged with the config hash, and a JSON manifest.

Floats are written with ``repr`` so a table read back gives the same doubles,
and nothing time-dependent is recorded; two runs of one config produce
byte-identical files.
"""
from __future__ import annotations

import csv
import json
import math
import os
from typing import Iterable, Sequence

import numpy as np


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if v is None:
        return ""
    return str(v)


def write_csv(path: str, columns: Sequence[str], rows: Iterable[Sequence], config_hash: str) -> str:
    """Write ``# config_hash=...``, a header row, then the data rows."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(f"# config_hash={config_hash}\n")
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(columns)
        for row in rows:
            if len(row) != len(columns):
                raise ValueError(f"row of length {len(row)} for {len(columns)} columns in {path}")
            out.writerow([_cell(v) for v in row])
    return path


def read_csv(path: str) -> tuple:
    """Return ``(config_hash, columns, rows)`` with every cell as a string."""
    with open(path, newline="") as fh:
        first = fh.readline().strip()
        if not first.startswith("# config_hash="):
            raise ValueError(f"{path} has no config hash line")
        reader = csv.reader(fh)
        columns = next(reader)
        return first.split("=", 1)[1], columns, [r for r in reader]


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else str(v)      # JSON has no nan/inf
    return v


def write_manifest(path: str, manifest: dict) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as fh:
        json.dump(_jsonable(manifest), fh, sort_keys=True, indent=2)
        fh.write("\n")
    return path
