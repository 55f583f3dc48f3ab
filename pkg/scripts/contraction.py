"""Normalized real-energy variance versus gamma at eps = 0 for several n/d."""
from dataclasses import dataclass

from _common import configure, execute
from nhsr.cli import RunConfig


@dataclass
class Experiment:
    model: str = "ho"
    d: int = 64
    ns: tuple = (8, 16, 32)
    grid: str = "1e-2:1e5:71log"
    nr: int = 64
    seed: int = 3
    out: str = "results/contraction"


def main():
    ex = configure(Experiment)
    for n in ex.ns:
        execute(RunConfig("contraction", model=ex.model, d=ex.d, n=n, gamma=ex.grid, nr=ex.nr, seed=ex.seed,
                          out=f"{ex.out}/n{n}"))


if __name__ == "__main__":
    main()
