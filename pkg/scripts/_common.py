"""Shared helpers for the experiment scripts: dataclass configs with key=value overrides."""
from __future__ import annotations

import dataclasses
import sys
import time
from pathlib import Path

from nhsr.cli import RunConfig, parse_key_values, run


def configure(cls, argv=None):
    """Instantiate ``cls`` from its defaults plus ``key=value`` command-line overrides."""
    argv = sys.argv[1:] if argv is None else argv
    raw = parse_key_values("\n".join(argv))
    known = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in raw.items():
        if key not in known:
            raise SystemExit(f"unknown option {key!r}; known: {', '.join(known)}")
        default = known[key].default
        if isinstance(default, tuple):
            kind = type(default[0]) if default else float
            kwargs[key] = tuple(kind(v) for v in value.split(","))
        else:
            kwargs[key] = type(default)(value)
    return cls(**kwargs)


def execute(cfg: RunConfig) -> Path:
    t0 = time.perf_counter()
    status = run(cfg)
    print(f"{cfg.command:12s} -> {cfg.out} (exit {status}, {time.perf_counter() - t0:.1f} s)")
    if status:
        raise SystemExit(status)
    return Path(cfg.out)
