"""EP densities in the complex lambda plane for all models at d = 16, n in {1, 8, 15}.

The realization count is chosen so that about 1e6 / 16 EPs are collected per map.
"""
from dataclasses import dataclass

from _common import configure, execute
from nhsr.cli import RunConfig
from nhsr.exceptional_points import ep_count


@dataclass
class Experiment:
    models: tuple = ("ho", "pt1", "pt2")
    d: int = 16
    ns: tuple = (1, 8, 15)
    target_eps: int = 62_500
    seed: int = 7
    bins: int = 100
    out: str = "results/ep_map"


def main():
    ex = configure(Experiment)
    for model in ex.models:
        for n in ex.ns:
            nr = max(1, ex.target_eps // ep_count(ex.d, n))
            execute(RunConfig("ep-map", model=model, d=ex.d, n=n, nr=nr, seed=ex.seed, ep_bins=ex.bins,
                              out=f"{ex.out}/{model}_n{n}"))


if __name__ == "__main__":
    main()
