"""Ensemble statistics: width histograms, trace identities, bounds, contraction, minimal widths."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.ndimage import gaussian_filter1d

from nhsr.ensemble import DecayingSubspace, sample_subspace
from nhsr.open_system import (ComplexSpectrum, closed_limit_probabilities, eigvals_at, symmetric_projector,
                              unperturbed_energies)
from nhsr.quasispin import Model, initial_spectrum

UNDERFLOW = 1e-14
MODE_BANDWIDTH = 3.0
MODE_TROUGH = 0.5
MODE_FLOOR = 0.02


def _eigenvalues(x) -> np.ndarray:
    return np.asarray(getattr(x, "eigenvalues", x), dtype=complex)


# --------------------------------------------------------------------------- histograms


@dataclass
class WidthHistogram:
    edges: np.ndarray = field(repr=False)
    density: np.ndarray = field(repr=False)
    underflow: int
    total: int
    eps: float = float("nan")
    gamma: float = float("nan")
    meta: dict = field(default_factory=dict)
    log_widths: np.ndarray | None = field(default=None, repr=False)

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    def integral(self) -> float:
        return float(np.sum(self.density * np.diff(self.edges)))

    def modes(self) -> list[int]:
        return detect_modes(self.density)


def width_histogram(spectra, gamma: float, bins: int | np.ndarray = 60, eps: float = float("nan"),
                    range_: tuple[float, float] | None = None, **meta) -> WidthHistogram:
    """Pooled histogram of log10(width) over all levels of all spectra.

    Widths below ``1e-14 * gamma`` cannot sit on a log axis; they are counted
    in ``underflow`` and excluded from the density, which integrates to one.
    """
    widths = np.concatenate([-_eigenvalues(s).imag for s in spectra]) if len(spectra) else np.empty(0)
    under = widths < UNDERFLOW * gamma
    logw = np.log10(widths[~under])
    if range_ is None and np.ndim(bins) == 0:
        lo = float(np.min(logw)) if logw.size else np.log10(gamma) - 1
        hi = float(np.max(logw)) if logw.size else np.log10(gamma)
        pad = 1e-9 * max(1.0, abs(hi - lo))
        range_ = (lo - pad, hi + pad) if hi > lo else (lo - 0.5, hi + 0.5)
    counts, edges = np.histogram(logw, bins=bins, range=range_)
    total = int(counts.sum())
    density = counts / (total * np.diff(edges)) if total else np.zeros(counts.size)
    return WidthHistogram(edges=edges, density=density, underflow=int(under.sum()), total=total,
                          eps=float(eps), gamma=float(gamma), meta=dict(meta), log_widths=logw)


def detect_modes(density, bandwidth: float = MODE_BANDWIDTH, trough: float = MODE_TROUGH,
                 floor: float = MODE_FLOOR) -> list[int]:
    """Bin indices of the modes of a histogram.

    Modes are maxima of the Gaussian-smoothed density (``bandwidth`` in bins)
    that are separated from their neighbour by a trough below ``trough`` times
    the lower of the two peaks. Maxima lower than ``floor`` times the global
    maximum are ignored.
    """
    y = gaussian_filter1d(np.asarray(density, dtype=float), bandwidth, mode="constant")
    if y.size == 0 or np.max(y) <= 0:
        return []
    padded = np.concatenate([[-np.inf], y, [-np.inf]])
    peaks = [i for i in range(y.size) if padded[i + 1] > padded[i] and padded[i + 1] >= padded[i + 2]]
    peaks = [p for p in peaks if y[p] >= floor * np.max(y)]
    merged = True
    while merged and len(peaks) > 1:
        merged = False
        for k in range(len(peaks) - 1):
            a, b = peaks[k], peaks[k + 1]
            low = float(np.min(y[a:b + 1]))
            if low >= trough * min(y[a], y[b]):
                peaks.pop(k + 1 if y[a] >= y[b] else k)
                merged = True
                break
    return peaks


def mode_boundaries(density, modes: list[int]) -> np.ndarray:
    """Bin index of the smoothed-density minimum between consecutive modes."""
    y = gaussian_filter1d(np.asarray(density, dtype=float), MODE_BANDWIDTH, mode="constant")
    return np.array([a + int(np.argmin(y[a:b + 1])) for a, b in zip(modes[:-1], modes[1:])], dtype=int)


def bimodality(hist: WidthHistogram, slopes=None) -> dict:
    """Classify a width distribution as unimodal, statically or dynamically bimodal.

    With ``slopes`` (log-log slopes aligned with the histogrammed widths) the
    median slope of each mode decides: modes drifting in opposite directions
    make the bimodality dynamic.
    """
    modes = hist.modes()
    out = {"modes": len(modes), "locations": [float(hist.centers[m]) for m in modes], "kind": "unimodal",
           "median_slopes": []}
    if len(modes) < 2:
        return out
    out["kind"] = "static"
    if slopes is None or hist.log_widths is None:
        return out
    bounds = hist.centers[mode_boundaries(hist.density, modes)]
    label = np.searchsorted(bounds, hist.log_widths)
    s = np.asarray(slopes, dtype=float)
    med = []
    for k in range(len(modes)):
        sel = (label == k) & np.isfinite(s)
        med.append(float(np.median(s[sel])) if np.any(sel) else float("nan"))
    out["median_slopes"] = med
    if np.isfinite(med[0]) and np.isfinite(med[-1]) and np.sign(med[0]) != np.sign(med[-1]):
        out["kind"] = "dynamic"
    return out


# --------------------------------------------------------------------------- trace identities


@dataclass
class IdentityEntry:
    d: int
    n: int
    eps: float
    gamma: float
    mean_energy: float
    mean_width: float
    var_energy: float
    var_width: float
    var_energy_closed: float
    asymmetry: float
    eps_min: float
    rhs_width_relation: float
    residuals: dict[str, float]


def asymmetry_coefficient(energies, sub: DecayingSubspace) -> float:
    """A = (1/n) sum_k (E_k - mean E) <k|P_D|k>."""
    e = unperturbed_energies(energies)
    return float(np.sum((e - e.mean()) * np.sum(sub.phi**2, axis=1)) / sub.n)


def trace_identities(spectrum, closed, h0, sub: DecayingSubspace, eps: float, gamma: float) -> IdentityEntry:
    """Check the four trace identities for one realization.

    ``spectrum`` holds the eigenvalues at eps - i gamma, ``closed`` those at
    eps - i0 (real). Residuals are absolute differences divided by the scale
    of the quantity, s = max(1, max|E0|, |lam|) for means and s^2 for variances.
    """
    if spectrum is None or closed is None:
        raise ValueError("trace identities need both the open and the closed (gamma = 0) spectra")
    e0 = unperturbed_energies(h0)
    d, n = sub.d, sub.n
    x = n / d
    w = _eigenvalues(spectrum)
    wc = _eigenvalues(closed).real
    E, G = w.real, -w.imag
    mean0, var0 = float(np.mean(e0)), float(np.var(e0))
    A = asymmetry_coefficient(e0, sub)
    s1 = max(1.0, float(np.max(np.abs(e0))), abs(complex(eps, -gamma)))
    s2 = s1 * s1

    lhs11 = float(np.mean(E)) - mean0
    lhs12 = float(np.mean(G))
    lhs13 = float(np.var(wc)) - var0
    rhs13 = 2 * eps * x * A + eps**2 * x * (1 - x)
    lhs14 = float(np.var(E)) - float(np.var(wc))
    rhs14 = float(np.var(G)) - gamma**2 * x * (1 - x)
    res = {
        "mean_energy": abs(lhs11 - x * eps) / s1,
        "mean_width": abs(lhs12 - x * gamma) / s1,
        "variance_eps": abs(lhs13 - rhs13) / s2,
        "variance_gamma": abs(lhs14 - rhs14) / s2,
    }
    return IdentityEntry(d=d, n=n, eps=float(eps), gamma=float(gamma), mean_energy=float(np.mean(E)),
                         mean_width=lhs12, var_energy=float(np.var(E)), var_width=float(np.var(G)),
                         var_energy_closed=float(np.var(wc)), asymmetry=A, eps_min=-A * d / (d - n),
                         rhs_width_relation=rhs14, residuals=res)


def identity_entry(h0, sub: DecayingSubspace, eps: float, gamma: float) -> IdentityEntry:
    """Compute the open and closed spectra and check all identities."""
    proj = symmetric_projector(sub)
    full = eigvals_at(h0, sub, complex(eps, -gamma), proj)
    closed = eigvals_at(h0, sub, complex(eps, 0.0), proj)
    return trace_identities(full, closed, h0, sub, eps, gamma)


@dataclass
class CumulantReport:
    entries: list[IdentityEntry]

    def max_residuals(self) -> dict[str, float]:
        keys = self.entries[0].residuals.keys() if self.entries else []
        return {k: max(e.residuals[k] for e in self.entries) for k in keys}

    def aggregate(self, name: str) -> tuple[float, float]:
        v = np.array([getattr(e, name) for e in self.entries], dtype=float)
        err = float(np.std(v, ddof=1) / np.sqrt(v.size)) if v.size > 1 else float("nan")
        return float(np.mean(v)), err

    def to_dict(self) -> dict:
        names = ("mean_energy", "mean_width", "var_energy", "var_width", "var_energy_closed", "asymmetry",
                 "eps_min", "rhs_width_relation")
        return {
            "realizations": len(self.entries),
            "max_residuals": self.max_residuals(),
            "aggregates": {k: dict(zip(("mean", "stderr"), self.aggregate(k))) for k in names},
            "per_realization": [
                {**{k: getattr(e, k) for k in names}, "residuals": e.residuals} for e in self.entries
            ],
        }


# --------------------------------------------------------------------------- bounds


def bound_violations(spectrum, closed, gamma: float, tol: float = 1e-8) -> int:
    """Eigenvalues outside [E1(eps-i0), Ed(eps-i0)] x [0, gamma], beyond tol * scale."""
    w = _eigenvalues(spectrum)
    wc = np.sort(_eigenvalues(closed).real)
    scale = max(1.0, float(np.max(np.abs(wc))), gamma)
    t = tol * scale
    bad = (w.real < wc[0] - t) | (w.real > wc[-1] + t) | (-w.imag < -t) | (-w.imag > gamma + t)
    return int(np.sum(bad))


# --------------------------------------------------------------------------- contraction


def asymptotic_energies(h0, sub: DecayingSubspace, eps: float = 0.0) -> np.ndarray:
    """Real energies in the gamma -> infinity limit: spectra of H0 compressed onto H_D and its complement."""
    e0 = unperturbed_energies(h0)
    q, _ = np.linalg.qr(sub.phi, mode="complete")
    h = np.diag(e0)
    inside = scipy.linalg.eigvalsh(q[:, : sub.n].T @ h @ q[:, : sub.n]) + eps
    outside = scipy.linalg.eigvalsh(q[:, sub.n:].T @ h @ q[:, sub.n:])
    return np.sort(np.concatenate([inside, outside]))


@dataclass
class ContractionCurve:
    gammas: np.ndarray
    ratio: np.ndarray
    stderr: np.ndarray
    asymptote: float
    asymptote_stderr: float
    n_realizations: int


def contraction_curve(model, d: int, n: int, gammas, n_realizations: int, seed: int, eps: float = 0.0,
                      start: int = 0) -> ContractionCurve:
    """Ensemble mean of var(E(gamma)) / var(E0) at ``eps`` (0 by default)."""
    h0 = initial_spectrum(model, d)
    var0 = float(np.var(h0.energies))
    gammas = np.asarray(gammas, dtype=float)
    ratios = np.empty((n_realizations, gammas.size))
    asym = np.empty(n_realizations)
    for r in range(n_realizations):
        sub = sample_subspace(d, n, seed, start + r)
        proj = symmetric_projector(sub)
        for k, g in enumerate(gammas):
            ratios[r, k] = np.var(eigvals_at(h0, sub, complex(eps, -g), proj).real) / var0
        asym[r] = np.var(asymptotic_energies(h0, sub, eps)) / var0
    se = np.std(ratios, axis=0, ddof=1) / np.sqrt(n_realizations) if n_realizations > 1 else np.full(gammas.size, np.nan)
    ase = float(np.std(asym, ddof=1) / np.sqrt(n_realizations)) if n_realizations > 1 else float("nan")
    return ContractionCurve(gammas=gammas, ratio=ratios.mean(axis=0), stderr=se, asymptote=float(asym.mean()),
                            asymptote_stderr=ase, n_realizations=n_realizations)


def empirical_asymptote(n: int, d: int) -> float:
    x = n / d
    return 1.0 - 2.0 * x * (1.0 - x)


# --------------------------------------------------------------------------- minimal widths


def min_width(h0, sub: DecayingSubspace, lam: complex) -> float:
    return float(np.min(-eigvals_at(h0, sub, lam).imag))


@dataclass
class MinWidthRow:
    d: int
    n_realizations: int
    ratio_mean: float
    ratio_std: float
    min_ho_mean: float
    min_pt2_mean: float
    unpaired_ratio: float
    ratios: np.ndarray = field(repr=False)


def min_width_point(model, d: int, seed: int, index: int, gamma_per_d: float = 16.0) -> float:
    """Minimal width at lam = -i * gamma_per_d * d, n = d/2, for one realization."""
    sub = sample_subspace(d, d // 2, seed, index)
    return min_width(initial_spectrum(model, d), sub, complex(0.0, -gamma_per_d * d))


def min_width_ratio(d_list, seed: int, nr_schedule, gamma_per_d: float = 16.0) -> list[MinWidthRow]:
    """Paired HO / PT2 minimal widths at eps = 0, gamma = 16 d, n = d / 2."""
    rows = []
    for d, nr in zip(d_list, nr_schedule):
        ho, pt2 = initial_spectrum(Model.HO, d), initial_spectrum(Model.PT2, d)
        lam = complex(0.0, -gamma_per_d * d)
        g_ho, g_pt2 = np.empty(nr), np.empty(nr)
        for r in range(nr):
            sub = sample_subspace(d, d // 2, seed, r)
            proj = symmetric_projector(sub)
            g_ho[r] = np.min(-eigvals_at(ho, sub, lam, proj).imag)
            g_pt2[r] = np.min(-eigvals_at(pt2, sub, lam, proj).imag)
        rows.append(summarize_min_widths(d, g_ho, g_pt2))
    return rows


def summarize_min_widths(d: int, g_ho, g_pt2) -> MinWidthRow:
    g_ho, g_pt2 = np.asarray(g_ho, dtype=float), np.asarray(g_pt2, dtype=float)
    ratio = g_pt2 / g_ho
    std = float(np.std(ratio, ddof=1)) if ratio.size > 1 else 0.0
    return MinWidthRow(d=int(d), n_realizations=int(ratio.size), ratio_mean=float(ratio.mean()), ratio_std=std,
                       min_ho_mean=float(g_ho.mean()), min_pt2_mean=float(g_pt2.mean()),
                       unpaired_ratio=float(g_pt2.mean() / g_ho.mean()), ratios=ratio)


def loglog_slope(x, y) -> float:
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])


# --------------------------------------------------------------------------- small-gamma limit


def small_gamma_probabilities(h0, sub: DecayingSubspace, eps: float = 0.0):
    """Energies and decay probabilities P_k of H(eps - i0); widths -> gamma * P_k as gamma -> 0."""
    return closed_limit_probabilities(h0, sub, eps)


def isotropy_weights(d: int, n: int, seed: int, n_realizations: int, start: int = 0) -> np.ndarray:
    """Weight factors w_k for each realization, shape (n_realizations, d)."""
    return np.stack([sample_subspace(d, n, seed, start + r).weights() for r in range(n_realizations)])


def point_slopes(spectrum: ComplexSpectrum, sub: DecayingSubspace, gamma: float,
                 clamp: float = UNDERFLOW) -> np.ndarray:
    """Exact log-log slopes gamma * dGamma/dgamma / Gamma at a single point (NaN for underflow widths)."""
    w = spectrum.widths
    with np.errstate(divide="ignore", invalid="ignore"):
        s = gamma * spectrum.width_slope(sub) / w
    s[(w < clamp * gamma) | spectrum.ep_proximity] = np.nan
    return s
