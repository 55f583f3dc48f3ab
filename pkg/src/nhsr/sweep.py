"""Eigenvalue trajectories along lam = eps - i*gamma at fixed eps.

Levels are followed from one gamma to the next by optimal assignment against
a first-order (Hellmann-Feynman) prediction; steps whose assignment is
ambiguous are bisected locally before a flagged match is accepted.
"""
from __future__ import annotations

import dataclasses
import re
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from nhsr.ensemble import DecayingSubspace
from nhsr.errors import ConfigError
from nhsr.open_system import (ComplexSpectrum, eig_matrix, hamiltonian_matrix, symmetric_projector,
                              unperturbed_energies)

SLOPE_CLAMP = 1e-14
MAX_REFINE = 8
AMBIGUITY_FACTOR = 10.0
EP_GAP = 1e-8

_GRID_RE = re.compile(r"^\s*([^:]+):([^:]+):(\d+)\s*(log|lin)?\s*$")


@dataclass(frozen=True)
class GammaGrid:
    gamma_min: float
    gamma_max: float
    points: int
    spacing: str = "log"

    def __post_init__(self):
        if self.spacing not in ("log", "lin"):
            raise ConfigError("grid", f"spacing must be 'log' or 'lin', got {self.spacing!r}")
        if self.points < 2:
            raise ConfigError("grid", "need at least 2 grid points")
        if not self.gamma_max > self.gamma_min:
            raise ConfigError("grid", "gamma_max must exceed gamma_min")
        if self.gamma_min < 0 or (self.spacing == "log" and self.gamma_min <= 0):
            raise ConfigError("grid", "log spacing needs gamma_min > 0")

    @classmethod
    def parse(cls, text: str) -> "GammaGrid":
        """``min:max:N[log|lin]``, e.g. ``1e-2:1e2:200log``."""
        m = _GRID_RE.match(str(text))
        if not m:
            raise ConfigError("grid", f"cannot parse {text!r}; expected min:max:N[log|lin]")
        try:
            lo, hi = float(m.group(1)), float(m.group(2))
        except ValueError:
            raise ConfigError("grid", f"cannot parse {text!r}") from None
        return cls(lo, hi, int(m.group(3)), m.group(4) or "log")

    @classmethod
    def default(cls, d: int) -> "GammaGrid":
        return cls(1e-2, 1e2 * (d / 16), 200, "log")

    def values(self) -> np.ndarray:
        if self.spacing == "log":
            g = np.geomspace(self.gamma_min, self.gamma_max, self.points)
        else:
            g = np.linspace(self.gamma_min, self.gamma_max, self.points)
        g[0], g[-1] = self.gamma_min, self.gamma_max
        return g

    def __str__(self) -> str:
        return f"{self.gamma_min!r}:{self.gamma_max!r}:{self.points}{self.spacing}"


@dataclass
class SweepResult:
    eps: float
    grid: GammaGrid
    gammas: np.ndarray = field(repr=False)
    trajectories: np.ndarray = field(repr=False)
    slopes: np.ndarray = field(repr=False)
    matching_quality: np.ndarray = field(repr=False)
    refinement_events: list[tuple[int, str]] = field(default_factory=list)
    n: int = 0
    derivatives: np.ndarray | None = field(default=None, repr=False)

    @property
    def energies(self) -> np.ndarray:
        return self.trajectories.real

    @property
    def widths(self) -> np.ndarray:
        return -self.trajectories.imag

    def flagged_steps(self) -> set[int]:
        return {step for step, _ in self.refinement_events}


def _values(x) -> np.ndarray:
    return np.asarray(getattr(x, "eigenvalues", x), dtype=complex)


def match_levels(prev, next) -> np.ndarray:
    """Permutation ``perm`` minimizing sum_k |prev[k] - next[perm[k]]|.

    Accepts ComplexSpectrum objects or plain eigenvalue arrays. Among optimal
    assignments the one keeping lower indices paired with lower indices wins.
    """
    a, b = _values(prev), _values(next)
    if a.shape != b.shape:
        raise ConfigError("d", f"cannot match {a.size} levels to {b.size}")
    cost = np.abs(a[:, None] - b[None, :])
    _, perm = linear_sum_assignment(cost)
    perm = np.asarray(perm, dtype=int)
    # deterministic tie-break: undo crossed pairs that cost nothing to uncross
    changed = True
    while changed:
        changed = False
        for i in range(perm.size - 1):
            for j in range(i + 1, perm.size):
                pi, pj = perm[i], perm[j]
                if pi > pj and cost[i, pj] + cost[j, pi] <= cost[i, pi] + cost[j, pj]:
                    perm[i], perm[j] = pj, pi
                    changed = True
    return perm


def _permute(spec: ComplexSpectrum, perm: np.ndarray) -> ComplexSpectrum:
    return dataclasses.replace(spec, eigenvalues=spec.eigenvalues[perm], right_vectors=spec.right_vectors[:, perm],
                               overlaps=spec.overlaps[perm], ep_proximity=spec.ep_proximity[perm])


def _nearest_other(vals: np.ndarray) -> np.ndarray:
    dist = np.abs(vals[:, None] - vals[None, :])
    np.fill_diagonal(dist, np.inf)
    return dist.min(axis=1)


class _Tracker:
    def __init__(self, energies, sub: DecayingSubspace, eps: float, max_refine: int):
        self.energies = energies
        self.sub = sub
        self.eps = eps
        self.proj = symmetric_projector(sub)
        self.max_refine = max_refine
        self.scale = max(1.0, float(np.ptp(energies)), abs(eps))

    def spectrum(self, gamma: float) -> ComplexSpectrum:
        lam = complex(self.eps, -gamma)
        m = hamiltonian_matrix(self.energies, self.sub, lam, self.proj)
        return eig_matrix(m, lam, seed=self.sub.seed, index=self.sub.realization_index)

    def advance(self, ga: float, a: ComplexSpectrum, ha: np.ndarray, gb: float, depth: int = 0):
        """Carry the labelled spectrum ``a`` at ``ga`` to ``gb``; returns (spectrum, derivative, reasons)."""
        b = self.spectrum(gb)
        # dE/dgamma = -i dE/dlam
        predicted = a.eigenvalues - 1j * (gb - ga) * ha
        perm = match_levels(predicted, b.eigenvalues)
        b = _permute(b, perm)
        hb = b.derivative(self.sub)
        miss = np.abs(b.eigenvalues - predicted)
        gap = _nearest_other(b.eigenvalues)
        ambiguous = bool(np.any(gap < AMBIGUITY_FACTOR * miss))
        if ambiguous and depth < self.max_refine:
            mid = np.sqrt(ga * gb) if ga > 0 else 0.5 * (ga + gb)
            m, hm, r1 = self.advance(ga, a, ha, mid, depth + 1)
            b, hb, r2 = self.advance(mid, m, hm, gb, depth + 1)
            return b, hb, r1 + r2
        reasons = []
        if ambiguous:
            reasons.append("ambiguous assignment after maximal refinement")
        if np.min(gap) < EP_GAP * self.scale:
            reasons.append("near-degenerate pair (EP proximity)")
        return b, hb, reasons


def run_sweep(h0, sub: DecayingSubspace, eps: float, grid: GammaGrid | None = None,
              max_refine: int = MAX_REFINE) -> SweepResult:
    energies = unperturbed_energies(h0)
    grid = GammaGrid.default(sub.d) if grid is None else grid
    gammas = grid.values()
    tracker = _Tracker(energies, sub, float(eps), max_refine)
    d, npts = sub.d, gammas.size
    traj = np.empty((d, npts), dtype=complex)
    derivs = np.empty((d, npts), dtype=complex)
    quality = np.empty(npts - 1)
    events: list[tuple[int, str]] = []

    spec = tracker.spectrum(gammas[0])
    h = spec.derivative(sub)
    traj[:, 0], derivs[:, 0] = spec.eigenvalues, h
    for t in range(1, npts):
        prev = spec.eigenvalues
        spec, h, reasons = tracker.advance(gammas[t - 1], spec, h, gammas[t])
        traj[:, t], derivs[:, t] = spec.eigenvalues, h
        quality[t - 1] = float(np.sum(np.abs(spec.eigenvalues - prev)))
        events.extend((t, r) for r in dict.fromkeys(reasons))

    result = SweepResult(eps=float(eps), grid=grid, gammas=gammas, trajectories=traj,
                         slopes=np.empty((d, npts)), matching_quality=quality, refinement_events=events,
                         n=sub.n, derivatives=derivs)
    result.slopes = slopes(result)
    return result


def log_slopes(gammas, widths, clamp: float = SLOPE_CLAMP) -> np.ndarray:
    """d log(width) / d log(gamma) along the last axis.

    Centered (non-uniform, second order) where both neighbours are valid,
    one-sided where only one is; widths below ``clamp * gamma`` are treated as
    zero and give NaN.
    """
    g = np.asarray(gammas, dtype=float)
    w = np.atleast_2d(np.asarray(widths, dtype=float))
    x = np.log(g)
    valid = w > clamp * g
    with np.errstate(divide="ignore", invalid="ignore"):
        y = np.where(valid, np.log(np.where(valid, w, 1.0)), np.nan)
    out = np.full(w.shape, np.nan)
    if g.size < 2:
        return out
    hl = np.diff(x)                      # spacing to the right of point i
    fwd = np.diff(y, axis=-1) / hl        # slope on interval i..i+1
    # interior centered: weighted combination of the two one-sided slopes
    h0, h1 = hl[:-1], hl[1:]
    centred = (h1 * fwd[..., :-1] + h0 * fwd[..., 1:]) / (h0 + h1)
    left_ok = np.isfinite(fwd[..., :-1])
    right_ok = np.isfinite(fwd[..., 1:])
    inner = np.where(left_ok & right_ok, centred,
                     np.where(left_ok, fwd[..., :-1], np.where(right_ok, fwd[..., 1:], np.nan)))
    out[..., 1:-1] = inner
    out[..., 0] = fwd[..., 0]
    out[..., -1] = fwd[..., -1]
    out[~valid] = np.nan
    return out if np.ndim(widths) > 1 else out[0]


def slopes(result: SweepResult) -> np.ndarray:
    return log_slopes(result.gammas, result.widths)


def continuity_violations(result: SweepResult, factor: float = 2.0) -> list[tuple[int, int]]:
    """Steps (t, kappa) where |dE| exceeds ``factor * dgamma * max|dE/dlam|`` at the ends.

    The derivative bound is only a local estimate; flagged refinement steps
    are excluded.
    """
    if result.derivatives is None:
        return []
    flagged = result.flagged_steps()
    dg = np.diff(result.gammas)
    step = np.abs(np.diff(result.trajectories, axis=1))
    rate = np.maximum(np.abs(result.derivatives[:, :-1]), np.abs(result.derivatives[:, 1:]))
    bound = factor * dg * rate + 1e-10 * max(1.0, float(np.max(np.abs(result.trajectories))))
    bad = np.argwhere(step > bound)
    return [(int(t) + 1, int(k)) for k, t in bad if int(t) + 1 not in flagged]
