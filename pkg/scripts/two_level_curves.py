"""Closed-form two-level widths along eps = 0, 0.3 and 1.5 (EPs at +-i)."""
from dataclasses import dataclass

from _common import configure, execute
from nhsr.cli import RunConfig


@dataclass
class Experiment:
    e1: float = 0.0
    e2: float = 1.0
    theta: float = 0.7853981633974483
    eps: tuple = (0.0, 0.3, 1.5)
    grid: str = "1e-2:1e2:401log"
    out: str = "results/two_level"


def main():
    ex = configure(Experiment)
    execute(RunConfig("two-level", e1=ex.e1, e2=ex.e2, theta=ex.theta, eps=ex.eps, gamma=ex.grid, out=ex.out))


if __name__ == "__main__":
    main()
