"""Paired HO / PT2 minimal widths at lambda = -16 d i, n = d/2, over growing d."""
from dataclasses import dataclass

from _common import configure, execute
from nhsr.cli import RunConfig


@dataclass
class Experiment:
    d_list: tuple = (64, 128, 256, 512, 1024)
    nr_list: tuple = (64, 32, 16, 8, 4)
    seed: int = 1
    out: str = "results/min_width_scaling"


def main():
    ex = configure(Experiment)
    out = execute(RunConfig("scaling", d_list=ex.d_list, nr_list=ex.nr_list, seed=ex.seed, out=ex.out))
    print((out / "ratio.csv").read_text())


if __name__ == "__main__":
    main()
