"""Atomic file emission and full-precision CSV."""
from __future__ import annotations

import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np


def atomic_write(path, data: str | bytes) -> Path:
    """Write to a temporary sibling, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        kwargs = {} if mode == "wb" else {"encoding": "utf-8", "newline": "\n"}
        with os.fdopen(fd, mode, **kwargs) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def csv_text(header: list[str], columns: list, int_columns: tuple[int, ...] = ()) -> str:
    """Columns to CSV with a header row; floats use 17 significant digits."""
    n = len(columns[0]) if columns else 0
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    if n:
        table = np.column_stack([np.asarray(c, dtype=float) for c in columns])
        fmt = ["%d" if i in int_columns else "%.17g" for i in range(len(columns))]
        np.savetxt(buf, table, fmt=fmt, delimiter=",", newline="\n")
    return buf.getvalue()


def write_csv(path, header, columns, int_columns=()) -> Path:
    return atomic_write(path, csv_text(header, columns, int_columns))


def write_json(path, obj) -> Path:
    return atomic_write(path, json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(x):
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, complex):
        return [x.real, x.imag]
    raise TypeError(f"not JSON serializable: {type(x).__name__}")


def read_csv(path) -> tuple[list[str], np.ndarray]:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, data
