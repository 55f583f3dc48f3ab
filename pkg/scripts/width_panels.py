"""Pooled width distributions at fixed lambda points, with mode and drift summaries.

Default points cover the origin, |lambda| ~ 3.2, ~ 4.5 and > 6 for HO with d = 2n = 16,
plus the mirrored eps = +-4.5 pair for PT2 with n = 1.
"""
import json
from dataclasses import dataclass
from pathlib import Path

from _common import configure, execute
from nhsr.cli import RunConfig


@dataclass
class Experiment:
    d: int = 16
    n: int = 8
    nr: int = 6250
    seed: int = 11
    bins: int = 80
    points: tuple = ("0:0.01", "0:3.2", "3.2:0.5", "0:4.5", "3.2:3.2", "4.5:0.5", "0:8", "6:6", "8:8")
    mirrored: tuple = ("4.5:0.01", "-4.5:0.01")
    out: str = "results/width_panels"


def main():
    ex = configure(Experiment)
    summary = {}
    jobs = [("ho", ex.n, p) for p in ex.points] + [("pt2", 1, p) for p in ex.mirrored]
    for model, n, point in jobs:
        eps, gamma = point.split(":")
        out = execute(RunConfig("widths", model=model, d=ex.d, n=n, eps=(float(eps),), gamma=gamma, nr=ex.nr,
                                seed=ex.seed, bins=ex.bins, out=f"{ex.out}/{model}_n{n}_{eps}_{gamma}"))
        summary[f"{model} n={n} [{eps},{gamma}]"] = json.loads((out / "histogram.json").read_text())["modes"]
    Path(ex.out).mkdir(parents=True, exist_ok=True)
    (Path(ex.out) / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    for k, v in summary.items():
        print(f"{k:28s} modes={v['modes']} kind={v['kind']}")


if __name__ == "__main__":
    main()
