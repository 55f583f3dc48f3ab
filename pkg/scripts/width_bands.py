"""Width trajectories and log-log slopes for HO, d = 2n = 16, at eps = 0, 4.5 and 16."""
from dataclasses import dataclass

from _common import configure, execute
from nhsr.cli import RunConfig


@dataclass
class Experiment:
    model: str = "ho"
    d: int = 16
    n: int = 8
    eps: tuple = (0.0, 4.5, 16.0)
    grid: str = "1e-2:1e2:200log"
    nr: int = 100
    seed: int = 42
    out: str = "results/width_bands"


def main():
    ex = configure(Experiment)
    for eps in ex.eps:
        execute(RunConfig("sweep", model=ex.model, d=ex.d, n=ex.n, eps=(eps,), gamma=ex.grid, nr=ex.nr, seed=ex.seed,
                          out=f"{ex.out}/eps_{eps:g}"))


if __name__ == "__main__":
    main()
