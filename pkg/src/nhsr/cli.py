"""Batch driver: ``nhsr <command> [options]``.

Every run writes one directory containing ``manifest.json`` plus plot-ready
CSV files. Realizations are farmed out to a process pool; results are
reduced in realization order so outputs do not depend on the worker count.
Finished realizations are cached under ``parts/`` and reused on rerun.
"""
from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import math
import os
import pickle
import platform
import shutil
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np
import scipy
from threadpoolctl import threadpool_limits

import nhsr
from nhsr import exceptional_points as epm
from nhsr import stats
from nhsr.ensemble import sample_subspace
from nhsr.errors import ConfigError, EpCountError, NhsrError
from nhsr.io import atomic_write, write_csv, write_json
from nhsr.open_system import assemble, eig
from nhsr.quasispin import Model, initial_spectrum, spectrum_cumulants, spread_constant
from nhsr.sweep import GammaGrid, run_sweep
from nhsr.two_level import TwoLevelModel, width_curves

log = logging.getLogger("nhsr")

COMMANDS = ("spectrum", "sweep", "widths", "ep-map", "cumulants", "contraction", "scaling", "two-level")
WORKERS_ENV = "NHSR_WORKERS"
EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2
# fields that never influence data files
RUNTIME_FIELDS = ("workers", "out")


@dataclass(frozen=True)
class RunConfig:
    command: str
    model: str = "ho"
    d: int = 16
    n: int = 8
    eps: tuple[float, ...] = (0.0,)
    gamma: str = ""
    nr: int = 1
    seed: int = 0
    workers: int = 0
    out: str = "run"
    bins: int = 60
    ep_bins: int = 100
    d_list: tuple[int, ...] = (64, 128, 256, 512, 1024)
    nr_list: tuple[int, ...] = (64, 32, 16, 8, 4)
    e1: float = 0.0
    e2: float = 1.0
    theta: float = math.pi / 4

    # ------------------------------------------------------------ file form

    def to_dict(self) -> dict:
        return {f.name: list(v) if isinstance(v := getattr(self, f.name), tuple) else v for f in fields(self)}

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            lines.append(f"{f.name} = {_format_value(v)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, overrides: dict | None = None) -> "RunConfig":
        raw = parse_key_values(text)
        raw.update(overrides or {})
        return cls.from_raw(raw)

    @classmethod
    def from_raw(cls, raw: dict) -> "RunConfig":
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for key, value in raw.items():
            name = key.replace("-", "_")
            if name not in known:
                raise ConfigError(key, f"unknown configuration key {key!r}")
            kwargs[name] = _coerce(name, known[name], value)
        if "command" not in kwargs:
            raise ConfigError("command", "no command given")
        return cls(**kwargs)

    def data_key(self) -> str:
        """Hash of every field that can change data files."""
        d = {k: v for k, v in self.to_dict().items() if k not in RUNTIME_FIELDS}
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]

    # ------------------------------------------------------------ validation

    def validate(self) -> "RunConfig":
        if self.command not in COMMANDS:
            raise ConfigError("command", f"unknown command {self.command!r}; choose from {', '.join(COMMANDS)}")
        if self.workers < 0:
            raise ConfigError("workers", "workers must be >= 0 (0 means default)")
        if self.nr < 1:
            raise ConfigError("nr", "nr must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed", "seed must be a 64-bit unsigned integer")
        if self.command == "two-level":
            TwoLevelModel(self.e1, self.e2, self.theta)
            self.grid()
            if not self.eps:
                raise ConfigError("eps", "need at least one eps value")
            return self
        if self.command == "scaling":
            if len(self.d_list) != len(self.nr_list) or not self.d_list:
                raise ConfigError("nr_list", "d_list and nr_list must have equal, nonzero length")
            if any(d < 2 or d % 2 for d in self.d_list):
                raise ConfigError("d_list", "scaling needs even d >= 2 (n = d/2)")
            if any(r < 1 for r in self.nr_list):
                raise ConfigError("nr_list", "realization counts must be >= 1")
            return self
        try:
            Model.parse(self.model)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError("model", str(exc)) from None
        if self.d < 2:
            raise ConfigError("d", "d must be >= 2")
        if self.command == "spectrum":
            return self
        hi = self.d - 1
        if not 1 <= self.n <= hi:
            raise ConfigError("n", f"n must lie in [1, {hi}] for d={self.d}")
        if len(self.eps) != 1:
            raise ConfigError("eps", f"{self.command} takes a single eps value")
        if self.command in ("widths", "cumulants"):
            self.gamma_point()
            if self.bins < 1:
                raise ConfigError("bins", "bins must be >= 1")
        if self.command in ("sweep", "contraction"):
            self.grid()
        if self.command == "ep-map":
            if self.ep_bins < 1:
                raise ConfigError("ep_bins", "ep_bins must be >= 1")
            cap = epm.EpConfig().max_dim
            if self.d > cap:
                raise ConfigError("d", f"EP search limited to d <= {cap}")
        return self

    def gamma_point(self) -> float:
        if not self.gamma:
            raise ConfigError("gamma", f"{self.command} needs a single gamma value")
        try:
            g = float(self.gamma)
        except ValueError:
            raise ConfigError("gamma", f"expected a number, got {self.gamma!r}") from None
        if not g >= 0 or not math.isfinite(g):
            raise ConfigError("gamma", "gamma must be finite and >= 0")
        return g

    def grid(self) -> GammaGrid:
        if not self.gamma:
            if self.command == "two-level":
                return GammaGrid(1e-2, 1e2, 401, "log")
            if self.command == "contraction":
                return GammaGrid(1e-2, 1e4 * self.d / 16, 61, "log")
            return GammaGrid.default(self.d)
        try:
            return GammaGrid.parse(self.gamma)
        except ConfigError as exc:
            raise ConfigError("gamma", str(exc).split(": ", 1)[-1]) from None

    @property
    def lam(self) -> complex:
        return complex(self.eps[0], -self.gamma_point())


def _format_value(v) -> str:
    if isinstance(v, tuple):
        return ",".join(_format_value(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _coerce(name: str, f: dataclasses.Field, value):
    typ = f.type if isinstance(f.type, str) else getattr(f.type, "__name__", str(f.type))
    try:
        if isinstance(value, str):
            value = value.strip()
        if typ.startswith("tuple"):
            elem = int if "int" in typ else float
            items = value if isinstance(value, (list, tuple)) else [x for x in str(value).split(",") if x.strip()]
            return tuple(elem(x) for x in items)
        if typ == "int":
            return int(value)
        if typ == "float":
            return float(value)
        return str(value)
    except (TypeError, ValueError):
        raise ConfigError(name, f"cannot interpret {value!r} as {typ}") from None


def parse_key_values(text: str) -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("config", f"line {lineno}: expected key = value")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def default_workers() -> int:
    env = os.environ.get(WORKERS_ENV, "").strip()
    if env:
        try:
            w = int(env)
        except ValueError:
            raise ConfigError("workers", f"{WORKERS_ENV}={env!r} is not an integer") from None
        if w < 1:
            raise ConfigError("workers", f"{WORKERS_ENV} must be >= 1")
        return w
    return 1


# --------------------------------------------------------------------------- per-realization tasks


def _task_sweep(cfg: RunConfig, idx: int):
    sub = sample_subspace(cfg.d, cfg.n, cfg.seed, idx)
    res = run_sweep(initial_spectrum(cfg.model, cfg.d), sub, cfg.eps[0], cfg.grid())
    return {"trajectories": res.trajectories, "slopes": res.slopes,
            "events": [(int(t), r) for t, r in res.refinement_events]}


def _task_widths(cfg: RunConfig, idx: int):
    sub = sample_subspace(cfg.d, cfg.n, cfg.seed, idx)
    spec = eig(assemble(initial_spectrum(cfg.model, cfg.d), sub, lam=cfg.lam))
    return {"eigenvalues": spec.eigenvalues, "slopes": stats.point_slopes(spec, sub, cfg.gamma_point())}


def _task_ep(cfg: RunConfig, idx: int):
    sub = sample_subspace(cfg.d, cfg.n, cfg.seed, idx)
    s = epm.find_eps(initial_spectrum(cfg.model, cfg.d), sub)
    return {"points": s.points, "gap": s.residual_gap, "converged": s.converged}


def _task_cumulants(cfg: RunConfig, idx: int):
    sub = sample_subspace(cfg.d, cfg.n, cfg.seed, idx)
    return stats.identity_entry(initial_spectrum(cfg.model, cfg.d), sub, cfg.eps[0], cfg.gamma_point())


def _task_contraction(cfg: RunConfig, idx: int):
    from nhsr.open_system import eigvals_at, symmetric_projector

    h0 = initial_spectrum(cfg.model, cfg.d)
    sub = sample_subspace(cfg.d, cfg.n, cfg.seed, idx)
    proj = symmetric_projector(sub)
    var0 = float(np.var(h0.energies))
    eps = cfg.eps[0]
    ratios = np.array([np.var(eigvals_at(h0, sub, complex(eps, -g), proj).real) / var0 for g in cfg.grid().values()])
    return {"ratios": ratios, "asymptote": float(np.var(stats.asymptotic_energies(h0, sub, eps)) / var0)}


def _task_scaling(cfg: RunConfig, key: tuple[int, int]):
    d, idx = key
    return (stats.min_width_point(Model.HO, d, cfg.seed, idx), stats.min_width_point(Model.PT2, d, cfg.seed, idx))


TASKS = {"sweep": _task_sweep, "widths": _task_widths, "ep-map": _task_ep, "cumulants": _task_cumulants,
         "contraction": _task_contraction, "scaling": _task_scaling}


def _run_one(args):
    command, cfg, key = args
    with threadpool_limits(limits=1):
        try:
            return "ok", TASKS[command](cfg, key)
        except EpCountError as exc:
            return "skip", {"message": str(exc), "deficit": exc.deficit}
        except (NhsrError, np.linalg.LinAlgError, FloatingPointError) as exc:
            return "error", {"message": str(exc), "lam": _lam_repr(getattr(exc, "lam", None))}


def _lam_repr(lam):
    return None if lam is None else [complex(lam).real, complex(lam).imag]


def _init_worker():
    threadpool_limits(limits=1)


# --------------------------------------------------------------------------- farming and caching


class _Parts:
    """Per-realization result cache keyed by the data-affecting config."""

    def __init__(self, out: Path, cfg: RunConfig):
        self.root = out / "parts"
        key = cfg.data_key()
        stamp = self.root / "config.key"
        if self.root.exists() and (not stamp.exists() or stamp.read_text().strip() != key):
            shutil.rmtree(self.root)
        self.root.mkdir(parents=True, exist_ok=True)
        atomic_write(stamp, key + "\n")

    def _path(self, key) -> Path:
        name = "-".join(str(k) for k in key) if isinstance(key, tuple) else str(key)
        return self.root / f"{name}.pkl"

    def load(self, key):
        p = self._path(key)
        if not p.exists():
            return None
        with open(p, "rb") as fh:
            return pickle.load(fh)

    def save(self, key, value) -> None:
        atomic_write(self._path(key), pickle.dumps(value, protocol=4))


def farm(cfg: RunConfig, keys: list, workers: int, parts: _Parts) -> tuple[dict, dict]:
    """Run the command's task for every key; return ({key: result}, counters)."""
    results, todo = {}, []
    for k in keys:
        cached = parts.load(k)
        if cached is not None:
            results[k] = cached
        else:
            todo.append(k)
    counts = {"requested": len(keys), "resumed": len(results), "completed": 0, "skipped": 0, "errors": 0}
    failures = []
    jobs = [(cfg.command, cfg, k) for k in todo]
    if workers <= 1 or len(jobs) <= 1:
        outcomes = map(_run_one, jobs)
        pool = None
    else:
        pool = ProcessPoolExecutor(max_workers=workers, initializer=_init_worker)
        outcomes = pool.map(_run_one, jobs, chunksize=max(1, len(jobs) // (8 * workers)))
    try:
        for k, (status, value) in zip(todo, outcomes):
            counts[{"ok": "completed", "skip": "skipped", "error": "errors"}[status]] += 1
            results[k] = (status, value)
            # errors are not cached, so a rerun retries them
            if status != "error":
                parts.save(k, (status, value))
            if status != "ok":
                failures.append({"index": list(k) if isinstance(k, tuple) else k, "seed": cfg.seed, "kind": status,
                                 **value})
                log.warning("realization %s %s: %s", k, status, value.get("message"))
    finally:
        if pool is not None:
            pool.shutdown()
    # cached skips count as skips
    for k in keys:
        if k not in todo and results[k][0] == "skip":
            counts["skipped"] += 1
            failures.append({"index": list(k) if isinstance(k, tuple) else k, "seed": cfg.seed, "kind": "skip",
                             **results[k][1]})
    return results, {**counts, "failures": failures}


def _ok(results: dict, keys) -> list:
    return [(k, results[k][1]) for k in keys if results[k][0] == "ok"]


# --------------------------------------------------------------------------- emitters


def _emit_spectrum(cfg: RunConfig, out: Path, workers: int) -> tuple[list[str], dict]:
    h0 = initial_spectrum(cfg.model, cfg.d)
    write_csv(out / "spectrum.csv", ["k", "energy"], [np.arange(cfg.d), h0.energies], int_columns=(0,))
    mean, var, third = spectrum_cumulants(h0)
    write_json(out / "spectrum.json", {"model": Model.parse(cfg.model).value, "d": cfg.d, "j": h0.j, "mean": mean,
                                      "variance": var, "third_central_moment": third,
                                      "spread_constant": spread_constant(h0)})
    return ["spectrum.csv", "spectrum.json"], {}


def _emit_sweep(cfg, out, workers):
    keys = list(range(cfg.nr))
    results, counts = farm(cfg, keys, workers, _Parts(out, cfg))
    gammas = cfg.grid().values()
    cols = [[] for _ in range(6)]
    events = []
    for k, r in _ok(results, keys):
        d, npts = r["trajectories"].shape
        cols[0].append(np.full(d * npts, k))
        cols[1].append(np.repeat(np.arange(d), npts))
        cols[2].append(np.tile(gammas, d))
        cols[3].append(r["trajectories"].real.ravel())
        cols[4].append((-r["trajectories"].imag).ravel())
        cols[5].append(r["slopes"].ravel())
        events += [{"realization": k, "step": t, "gamma": float(gammas[t]), "reason": why} for t, why in r["events"]]
    cols = [np.concatenate(c) if c else np.empty(0) for c in cols]
    write_csv(out / "trajectories.csv", ["realization", "kappa", "gamma", "energy", "width", "slope"], cols,
              int_columns=(0, 1))
    write_json(out / "trajectories.json", {"grid": str(cfg.grid()), "refinement_events": events})
    return ["trajectories.csv", "trajectories.json"], counts


def _emit_widths(cfg, out, workers):
    keys = list(range(cfg.nr))
    results, counts = farm(cfg, keys, workers, _Parts(out, cfg))
    ok = _ok(results, keys)
    gamma = cfg.gamma_point()
    spectra = [r["eigenvalues"] for _, r in ok]
    hist = stats.width_histogram(spectra, gamma, bins=cfg.bins, eps=cfg.eps[0])
    slopes = np.concatenate([r["slopes"] for _, r in ok]) if ok else np.empty(0)
    widths = np.concatenate([-r["eigenvalues"].imag for _, r in ok]) if ok else np.empty(0)
    kept = slopes[widths >= stats.UNDERFLOW * gamma]
    summary = stats.bimodality(hist, kept)
    write_csv(out / "histogram.csv", ["log10_gamma_bin_center", "density"], [hist.centers, hist.density])
    write_json(out / "histogram.json", {
        "eps": cfg.eps[0], "gamma": gamma, "model": Model.parse(cfg.model).value, "d": cfg.d, "n": cfg.n,
        "N_R": len(ok), "edges": hist.edges, "underflow": hist.underflow, "total": hist.total,
        "integral": hist.integral(), "modes": summary,
    })
    return ["histogram.csv", "histogram.json"], counts


def _emit_ep(cfg, out, workers):
    keys = list(range(cfg.nr))
    results, counts = farm(cfg, keys, workers, _Parts(out, cfg))
    h0 = initial_spectrum(cfg.model, cfg.d)
    spec = epm.EpGridSpec.around(3.0 * epm.domain_radius(h0.energies, cfg.d, cfg.n), cfg.ep_bins)
    grid = epm.EpDensityGrid.empty(spec)
    cols = [[] for _ in range(5)]
    for k, r in _ok(results, keys):
        m = r["points"].size
        cols[0].append(np.full(m, k))
        cols[1].append(r["points"].real)
        cols[2].append(r["points"].imag)
        cols[3].append(r["gap"])
        cols[4].append(r["converged"].astype(int))
        grid.add(r["points"][r["converged"]])
    grid.skipped = counts["skipped"]
    cols = [np.concatenate(c) if c else np.empty(0) for c in cols]
    write_csv(out / "ep.csv", ["realization", "re_lambda", "im_lambda", "residual_gap", "converged"], cols,
              int_columns=(0, 4))
    re_c = 0.5 * (spec.re_edges[1:] + spec.re_edges[:-1])
    im_c = 0.5 * (spec.im_edges[1:] + spec.im_edges[:-1])
    dens = grid.density()
    write_csv(out / "ep.density.csv", ["re_center"] + [f"im_{j}" for j in range(spec.im_bins)],
              [re_c] + [dens[:, j] for j in range(spec.im_bins)])
    write_json(out / "ep.density.json", {
        "re_edges": spec.re_edges, "im_edges": spec.im_edges, "re_centers": re_c, "im_centers": im_c,
        "columns": "im_j holds the density at im_centers[j]", "total": grid.total, "overflow": grid.overflow,
        "realizations": grid.realizations, "skipped": grid.skipped, "expected_per_realization": epm.ep_count(cfg.d, cfg.n),
        "fraction_within_eq8_bound": epm.eq8_fraction_inside(np.concatenate(grid.points) if grid.points else [],
                                                            h0, cfg.d, cfg.n),
    })
    return ["ep.csv", "ep.density.csv", "ep.density.json"], counts


def _emit_cumulants(cfg, out, workers):
    keys = list(range(cfg.nr))
    results, counts = farm(cfg, keys, workers, _Parts(out, cfg))
    report = stats.CumulantReport([r for _, r in _ok(results, keys)])
    body = report.to_dict()
    res = body["max_residuals"]
    body["identities_hold"] = {
        "mean_energy": res.get("mean_energy", 0.0) < 1e-10, "mean_width": res.get("mean_width", 0.0) < 1e-10,
        "variance_eps": res.get("variance_eps", 0.0) < 1e-8, "variance_gamma": res.get("variance_gamma", 0.0) < 1e-8,
    }
    body.update({"eps": cfg.eps[0], "gamma": cfg.gamma_point(), "model": Model.parse(cfg.model).value, "d": cfg.d,
                 "n": cfg.n})
    write_json(out / "cumulants.json", body)
    return ["cumulants.json"], counts


def _emit_contraction(cfg, out, workers):
    keys = list(range(cfg.nr))
    results, counts = farm(cfg, keys, workers, _Parts(out, cfg))
    ok = _ok(results, keys)
    gammas = cfg.grid().values()
    ratios = np.stack([r["ratios"] for _, r in ok]) if ok else np.full((0, gammas.size), np.nan)
    asym = np.array([r["asymptote"] for _, r in ok])
    m = len(ok)
    se = ratios.std(axis=0, ddof=1) / np.sqrt(m) if m > 1 else np.full(gammas.size, np.nan)
    write_csv(out / "contraction.csv", ["gamma", "ratio", "stderr"], [gammas, ratios.mean(axis=0), se])
    write_json(out / "contraction.json", {
        "model": Model.parse(cfg.model).value, "d": cfg.d, "n": cfg.n, "eps": cfg.eps[0], "N_R": m,
        "ratio_at_largest_gamma": float(ratios.mean(axis=0)[-1]) if m else None,
        "asymptote": float(asym.mean()) if m else None,
        "asymptote_stderr": float(asym.std(ddof=1) / np.sqrt(m)) if m > 1 else None,
        "empirical_formula": stats.empirical_asymptote(cfg.n, cfg.d),
    })
    return ["contraction.csv", "contraction.json"], counts


def _emit_scaling(cfg, out, workers):
    keys = [(d, r) for d, nr in zip(cfg.d_list, cfg.nr_list) for r in range(nr)]
    results, counts = farm(cfg, keys, workers, _Parts(out, cfg))
    rows = []
    for d in cfg.d_list:
        vals = [v for _, v in _ok(results, [k for k in keys if k[0] == d])]
        if vals:
            rows.append(stats.summarize_min_widths(d, [v[0] for v in vals], [v[1] for v in vals]))
    write_csv(out / "ratio.csv", ["d", "ratio_mean", "ratio_std", "N_R"],
              [[r.d for r in rows], [r.ratio_mean for r in rows], [r.ratio_std for r in rows],
               [r.n_realizations for r in rows]], int_columns=(0, 3))
    extra = {"rows": [{"d": r.d, "N_R": r.n_realizations, "ratio_mean": r.ratio_mean, "ratio_std": r.ratio_std,
                       "min_width_ho_mean": r.min_ho_mean, "min_width_pt2_mean": r.min_pt2_mean,
                       "unpaired_ratio": r.unpaired_ratio} for r in rows],
             "gamma_per_d": 16.0}
    if len(rows) >= 2:
        top = rows[-3:]
        extra["loglog_slope_ho"] = stats.loglog_slope([r.d for r in top], [r.min_ho_mean for r in top])
        extra["loglog_slope_pt2"] = stats.loglog_slope([r.d for r in top], [r.min_pt2_mean for r in top])
    write_json(out / "ratio.json", extra)
    return ["ratio.csv", "ratio.json"], counts


def _emit_two_level(cfg, out, workers):
    m = TwoLevelModel(cfg.e1, cfg.e2, cfg.theta)
    gammas = cfg.grid().values()
    cols = [[] for _ in range(6)]
    for e in cfg.eps:
        c = width_curves(m, e, gammas)
        for i, v in enumerate([np.full(gammas.size, e), gammas, c["width1"], c["width2"], c["energy1"], c["energy2"]]):
            cols[i].append(v)
    write_csv(out / "two_level.csv", ["eps", "gamma", "width1", "width2", "energy1", "energy2"],
              [np.concatenate(c) for c in cols])
    return ["two_level.csv"], {}


EMITTERS = {"spectrum": _emit_spectrum, "sweep": _emit_sweep, "widths": _emit_widths, "ep-map": _emit_ep,
            "cumulants": _emit_cumulants, "contraction": _emit_contraction, "scaling": _emit_scaling,
            "two-level": _emit_two_level}


# --------------------------------------------------------------------------- entry points


def run(cfg: RunConfig) -> int:
    """Execute a validated config; returns the exit status."""
    cfg.validate()
    workers = cfg.workers or default_workers()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    with threadpool_limits(limits=1):
        outputs, counts = EMITTERS[cfg.command](cfg, out, workers)
    wall = time.perf_counter() - t0
    errors = counts.get("errors", 0)
    status = EXIT_NUMERICAL if errors else EXIT_OK
    write_json(out / "manifest.json", {
        "config": cfg.to_dict(),
        "config_key": cfg.data_key(),
        "version": {"nhsr": nhsr.__version__, "numpy": np.__version__, "scipy": scipy.__version__,
                    "python": platform.python_version()},
        "timing": {"wall_time_s": wall, "workers": workers},
        "realizations": {k: v for k, v in counts.items() if k != "failures"},
        "failures": counts.get("failures", []),
        "outputs": outputs,
        "exit_status": status,
    })
    return status


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nhsr", description="Non-Hermitian superradiance ensemble driver.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="key = value file; command-line flags override it")
        for f in fields(RunConfig):
            if f.name == "command":
                continue
            s.add_argument("--" + f.name.replace("_", "-"), dest=f.name, default=argparse.SUPPRESS,
                           help=f"(default {_format_value(f.default)})")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = vars(parser.parse_args(argv))
    logging.basicConfig(level=logging.INFO if args.pop("verbose") else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    config_path = args.pop("config", None)
    try:
        raw = {}
        if config_path:
            try:
                raw = parse_key_values(Path(config_path).read_text(encoding="utf-8"))
            except OSError as exc:
                raise ConfigError("config", f"cannot read {config_path}: {exc}") from None
        raw.update(args)
        cfg = RunConfig.from_raw(raw).validate()
    except ConfigError as exc:
        print(f"nhsr: configuration error in field {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        status = run(cfg)
    except ConfigError as exc:
        print(f"nhsr: configuration error in field {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if status == EXIT_NUMERICAL:
        print(f"nhsr: numerical failures recorded in {Path(cfg.out) / 'manifest.json'}", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
