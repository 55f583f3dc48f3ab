"""Exceptional points of the pencil H0 + lam * P_D in the complex lam plane.

The discriminant D(lam) = prod_{k<k'} (E_k - E_k')^2 of H(lam) is a polynomial
of degree 2 n (d - n) here (the remaining EP pairs sit at infinity). Roots are
found in three stages:

1. sample D on a circle, interpolate by FFT and take companion-matrix roots;
2. polish all roots together with Aberth-Ehrlich steps, evaluating D'/D from
   the eigenvalues and their Hellmann-Feynman derivatives (the monomial
   coefficients are far too ill-conditioned to trust at degree ~100);
3. Newton on g(lam) = (E_a - E_b)^2 for the closest pair at each root.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from nhsr.ensemble import DecayingSubspace, sample_subspace
from nhsr.errors import ConfigError, EpCountError, SolverError
from nhsr.open_system import hamiltonian_matrix, symmetric_projector, unperturbed_energies
from nhsr.quasispin import initial_spectrum, spread_constant

log = logging.getLogger(__name__)


def ep_count(d: int, n: int) -> int:
    return 2 * n * (d - n)


def domain_radius(energies, d: int, n: int) -> float:
    """S d^2 / sqrt(n (d - n)) with S the relative linear spread of the levels."""
    e = np.asarray(energies, dtype=float)
    s = np.sqrt(np.var(e)) / d
    return float(s * d**2 / np.sqrt(n * (d - n)))


@dataclass(frozen=True)
class EpConfig:
    radius: float | None = None           # sampling circle; default 2x domain_radius
    oversample: int = 2
    aberth_iters: int = 200
    aberth_tol: float = 1e-13
    newton_iters: int = 30
    newton_tol: float = 1e-14
    backward_tol: float = 1e-10            # Newton step |g/g'| relative to the spectral scale
    gap_tol: float = 1e-6                  # and residual gap <= gap_tol * spectral scale
    dedupe_tol: float = 1e-6
    max_dim: int = 32
    strict: bool = True                    # raise EpCountError on a count mismatch


@dataclass
class EpSet:
    d: int
    n: int
    points: np.ndarray = field(repr=False)
    residual_gap: np.ndarray = field(repr=False)
    newton_iters: np.ndarray = field(repr=False)
    converged: np.ndarray = field(repr=False)
    pairs: np.ndarray = field(repr=False)
    overlap: np.ndarray = field(repr=False)
    backward_error: np.ndarray = field(repr=False)
    seed: int | None = None
    index: int | None = None

    @property
    def expected(self) -> int:
        return ep_count(self.d, self.n)

    @property
    def converged_points(self) -> np.ndarray:
        return self.points[self.converged]

    def conjugate_paired(self, tol: float = 1e-6) -> bool:
        return conjugate_paired(self.converged_points, tol)


def conjugate_paired(points, tol: float = 1e-6) -> bool:
    pts = np.asarray(points, dtype=complex)
    if pts.size == 0:
        return True
    dist = np.abs(pts[:, None] - np.conj(pts)[None, :])
    scale = np.maximum(np.abs(pts), 1.0)[:, None]
    return bool(np.all(np.min(dist / scale, axis=1) <= tol))


class _Pencil:
    """Eigen-evaluations of H0 + lam P for one realization."""

    def __init__(self, energies, sub: DecayingSubspace):
        self.energies = unperturbed_energies(energies)
        self.sub = sub
        self.proj = symmetric_projector(sub)
        self.width = max(1.0, float(np.ptp(self.energies)))
        self.norm0 = float(np.max(np.abs(self.energies)))

    def matrix(self, lam: complex) -> np.ndarray:
        return hamiltonian_matrix(self.energies, self.sub, complex(lam), self.proj)

    def matrices(self, lams) -> np.ndarray:
        lams = np.asarray(lams, dtype=complex)
        m = lams[:, None, None] * self.proj[None, :, :]
        idx = np.arange(self.energies.size)
        m[:, idx, idx] += self.energies
        return m

    def eigvals(self, lam: complex) -> np.ndarray:
        m = self.matrix(lam)
        if complex(lam).imag == 0.0:
            return scipy.linalg.eigvalsh(m.real).astype(complex)
        return scipy.linalg.eigvals(m, check_finite=False)

    def eig_batch(self, lams):
        """Eigenvalues (k, d), dE/dlam (k, d) and unit-vector self-overlaps |v^T v| (k, d)."""
        w, v = np.linalg.eig(self.matrices(lams))
        v = v / np.linalg.norm(v, axis=1, keepdims=True)
        c = np.sum(v * v, axis=1)
        # Hellmann-Feynman with the bilinear normalization v^T v = 1
        p = np.einsum("dl,kdm->klm", self.sub.phi, v)
        safe = np.where(c == 0, 1e-300, c)
        return w, np.sum(p * p, axis=1) / safe, np.abs(c)

    def scale(self, lam) -> np.ndarray:
        return np.maximum(self.width, np.abs(lam))

    def spectral_scale(self, lam) -> np.ndarray:
        """||H0|| + |lam|, an upper bound on ||H(lam)||_2."""
        return np.maximum(1.0, self.norm0 + np.abs(lam))


def _pair_sum(vals: np.ndarray, fn) -> complex:
    iu = np.triu_indices(vals.size, 1)
    return fn(vals[:, None] - vals[None, :])[iu]


def discriminant_profile(h0, sub: DecayingSubspace, samples) -> np.ndarray:
    """Complex logarithm of D(lam_j) = prod_{k<k'} (E_k - E_k')^2 at each sample.

    ``exp`` of the result gives D; the imaginary part is a phase defined
    modulo 2 pi. Working in logs avoids the overflow of O(d^2) squared gaps.
    """
    pencil = _Pencil(h0, sub)
    out = np.empty(len(samples), dtype=complex)
    for j, lam in enumerate(np.asarray(samples, dtype=complex)):
        w = pencil.eigvals(lam)
        diffs = _pair_sum(w, lambda x: x)
        with np.errstate(divide="ignore"):
            out[j] = 2.0 * np.sum(np.log(diffs.astype(complex)))
    return out


def discriminant_values(logd: np.ndarray, rescale: bool = True) -> tuple[np.ndarray, float]:
    """Exponentiate log-discriminants, divided by their geometric-mean magnitude."""
    finite = np.isfinite(logd.real)
    shift = float(np.mean(logd.real[finite])) if rescale and np.any(finite) else 0.0
    return np.exp(logd - shift), shift


def interpolate_roots(h0, sub: DecayingSubspace, radius: float, oversample: int = 2) -> np.ndarray:
    """Companion roots of D interpolated from samples on |lam| = radius.

    Requires at least 2 n (d - n) + 1 samples; ``oversample`` multiplies that.
    """
    degree = ep_count(sub.d, sub.n)
    m = max(degree + 1, int(oversample) * (degree + 1))
    # half-step rotation keeps samples off the real axis
    angles = 2 * np.pi * (np.arange(m) + 0.5) / m
    samples = radius * np.exp(1j * angles)
    vals, _ = discriminant_values(discriminant_profile(h0, sub, samples))
    coeff = np.fft.fft(vals) / m
    # coefficient k picked up exp(i pi k / m) from the rotation
    coeff = coeff * np.exp(-1j * np.pi * np.arange(m) / m)
    coeff = coeff[: degree + 1]
    if coeff[-1] == 0 or not np.all(np.isfinite(coeff)):
        return radius * np.exp(1j * (2 * np.pi * (np.arange(degree) + 0.25) / degree))
    z = np.polynomial.polynomial.polyroots(coeff)
    z = np.where(np.isfinite(z), z, radius)
    return radius * z


def _log_derivatives(pencil: _Pencil, lams) -> np.ndarray:
    """D'/D at each point: 2 sum_{a<b} (h_a - h_b) / (E_a - E_b)."""
    w, h, _ = pencil.eig_batch(lams)
    d = w.shape[1]
    iu = np.triu_indices(d, 1)
    dw = (w[:, :, None] - w[:, None, :])[:, iu[0], iu[1]]
    dh = (h[:, :, None] - h[:, None, :])[:, iu[0], iu[1]]
    with np.errstate(divide="ignore", invalid="ignore"):
        return 2.0 * np.sum(dh / dw, axis=1)


def _upper_half(roots: np.ndarray, count: int) -> np.ndarray:
    """Pick ``count`` starting points in the upper half plane from a root cloud."""
    z = np.asarray(roots, dtype=complex)
    z = z[np.argsort(-z.imag, kind="stable")][:count]
    z = z.real + 1j * np.abs(z.imag)
    scale = max(1.0, float(np.max(np.abs(z)))) if z.size else 1.0
    z = z.real + 1j * np.maximum(z.imag, 1e-3 * scale)
    for i in range(z.size):
        while np.any(np.abs(z[:i] - z[i]) < 1e-9 * scale):
            z[i] += 1e-4 * scale * np.exp(1j * (0.7 + i))
            z[i] = z[i].real + 1j * abs(z[i].imag)
    return z


def aberth(pencil: _Pencil, roots: np.ndarray, iters: int, tol: float) -> tuple[np.ndarray, int]:
    """Simultaneous Aberth-Ehrlich polishing of a conjugate-symmetric root set.

    Only the upper-half-plane members are iterated; their mirror images enter
    the repulsion sums. Returns all roots (upper half first) and the sweep count.
    """
    half = len(roots) // 2
    u = _upper_half(roots, half)
    active = np.ones(half, dtype=bool)
    it = 0
    for it in range(1, iters + 1):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        ld = _log_derivatives(pencil, u[idx])
        full = np.concatenate([u, np.conj(u)])
        diff = u[idx, None] - full[None, :]
        diff[np.arange(idx.size), idx] = np.inf
        with np.errstate(divide="ignore", invalid="ignore"):
            w = 1.0 / ld
            rep = np.sum(1.0 / diff, axis=1)
            step = w / (1.0 - w * rep)
        bad = ~np.isfinite(step)
        step[bad] = 0.0
        u[idx] -= step
        u = u.real + 1j * np.abs(u.imag)
        rel = np.abs(step) / pencil.scale(u[idx])
        active[idx[(rel < tol) | bad]] = False
    return np.concatenate([u, np.conj(u)]), it


def _closest_pairs(w: np.ndarray):
    """Per row of a (k, d) eigenvalue array: indices of the closest pair and its gap."""
    dist = np.abs(w[:, :, None] - w[:, None, :])
    d = w.shape[1]
    dist[:, np.arange(d), np.arange(d)] = np.inf
    flat = dist.reshape(w.shape[0], -1).argmin(axis=1)
    a, b = np.unravel_index(flat, (d, d))
    return np.minimum(a, b), np.maximum(a, b), dist.reshape(w.shape[0], -1)[np.arange(w.shape[0]), flat]


def newton_refine(pencil: _Pencil, lams, iters: int, tol: float, max_move: float = 1e-6):
    """Newton on g(lam) = (E_a - E_b)^2 for the closest pair at each point.

    g' = 2 (E_a - E_b)(h_a - h_b) from the Hellmann-Feynman derivatives.
    Returns (lams, iterations, backward error |g/g'| / scale). A point that
    would drift by more than ``max_move`` (relative) is left where it was.
    """
    start = np.array(lams, dtype=complex)
    lam = start.copy()
    its = np.zeros(lam.size, dtype=int)
    err = np.full(lam.size, np.inf)
    active = np.ones(lam.size, dtype=bool)
    for k in range(1, iters + 1):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        w, h, _ = pencil.eig_batch(lam[idx])
        a, b, _ = _closest_pairs(w)
        r = np.arange(idx.size)
        diff = w[r, a] - w[r, b]
        dg = 2.0 * diff * (h[r, a] - h[r, b])
        with np.errstate(divide="ignore", invalid="ignore"):
            step = diff * diff / dg
        bad = ~np.isfinite(step)
        step[bad] = 0.0
        rel = np.abs(step) / pencil.spectral_scale(lam[idx])
        err[idx] = np.where(bad, err[idx], rel)
        lam[idx] -= step
        its[idx] = k
        active[idx[(rel <= tol) | bad]] = False
    drift = np.abs(lam - start) > max_move * pencil.scale(start)
    lam[drift] = start[drift]
    return lam, its, err


def _point_diagnostics(pencil: _Pencil, lams):
    """Closest-pair gap, pair indices (in E-then-Gamma order) and min |v^T v| at each point."""
    w, _, c = pencil.eig_batch(lams)
    order = np.stack([np.lexsort((-row.imag, row.real)) for row in w])
    w_sorted = np.take_along_axis(w, order, axis=1)
    a, b, gap = _closest_pairs(w_sorted)
    return gap, np.stack([a, b], axis=1), c.min(axis=1)


def _dedupe(points: np.ndarray, tol: float) -> np.ndarray:
    keep = []
    for i, p in enumerate(points):
        if all(abs(p - points[j]) > tol * max(abs(p), abs(points[j]), 1e-300) for j in keep):
            keep.append(i)
    return np.asarray(keep, dtype=int)


def find_eps(h0, sub: DecayingSubspace, config: EpConfig | None = None) -> EpSet:
    """All finite exceptional points of H0 + lam P_D for one realization."""
    cfg = EpConfig() if config is None else config
    d, n = sub.d, sub.n
    if d > cfg.max_dim:
        raise ConfigError("d", f"EP search limited to d <= {cfg.max_dim}, got {d}")
    energies = unperturbed_energies(h0)
    pencil = _Pencil(energies, sub)
    expected = ep_count(d, n)
    radius = cfg.radius if cfg.radius is not None else 2.0 * domain_radius(energies, d, n)
    radius = max(radius, 1e-3 * pencil.width)

    try:
        guesses = interpolate_roots(energies, sub, radius, cfg.oversample)
        polished, _ = aberth(pencil, guesses, cfg.aberth_iters, cfg.aberth_tol)
        upper = polished[: expected // 2]
        upper, its, err = newton_refine(pencil, upper, cfg.newton_iters, cfg.newton_tol)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SolverError(f"EP root search failed: {exc}", seed=sub.seed, index=sub.realization_index) from exc

    pts = np.concatenate([upper, np.conj(upper)])
    its = np.concatenate([its, its])
    err = np.concatenate([err, err])
    gaps, pairs, overlaps = _point_diagnostics(pencil, pts)
    scales = pencil.spectral_scale(pts)
    converged = (err <= cfg.backward_tol) & (gaps <= cfg.gap_tol * scales)

    # deduplicate converged points first; unconverged ones stay as diagnostics
    order = np.argsort(~converged, kind="stable")
    keep = np.sort(order[_dedupe(pts[order], cfg.dedupe_tol)])
    o = keep[np.lexsort((pts[keep].imag, pts[keep].real))]
    result = EpSet(d=d, n=n, points=pts[o], residual_gap=gaps[o], newton_iters=its[o], converged=converged[o],
                   pairs=pairs[o], overlap=overlaps[o], backward_error=err[o], seed=sub.seed,
                   index=sub.realization_index)

    found = int(np.sum(result.converged))
    if found != expected and cfg.strict:
        raise EpCountError(f"found {found} converged EPs, expected {expected} (d={d}, n={n}, "
                           f"seed={sub.seed}, index={sub.realization_index})",
                           deficit=expected - found, candidates=result.points[~result.converged])
    return result


@dataclass(frozen=True)
class EpGridSpec:
    re_min: float
    re_max: float
    re_bins: int
    im_min: float
    im_max: float
    im_bins: int

    @classmethod
    def around(cls, radius: float, bins: int = 100) -> "EpGridSpec":
        return cls(-radius, radius, bins, -radius, radius, bins)

    @property
    def re_edges(self) -> np.ndarray:
        return np.linspace(self.re_min, self.re_max, self.re_bins + 1)

    @property
    def im_edges(self) -> np.ndarray:
        return np.linspace(self.im_min, self.im_max, self.im_bins + 1)


@dataclass
class EpDensityGrid:
    spec: EpGridSpec
    counts: np.ndarray = field(repr=False)     # shape (re_bins, im_bins)
    overflow: int = 0                           # converged EPs outside the grid
    realizations: int = 0
    skipped: int = 0
    points: list[np.ndarray] = field(default_factory=list, repr=False)

    @classmethod
    def empty(cls, spec: EpGridSpec) -> "EpDensityGrid":
        return cls(spec=spec, counts=np.zeros((spec.re_bins, spec.im_bins), dtype=np.int64))

    def add(self, points) -> None:
        pts = np.asarray(points, dtype=complex)
        h, _, _ = np.histogram2d(pts.real, pts.imag, bins=[self.spec.re_edges, self.spec.im_edges])
        h = h.astype(np.int64)
        self.counts += h
        self.overflow += int(pts.size - h.sum())
        self.realizations += 1
        self.points.append(pts)

    def merge(self, other: "EpDensityGrid") -> "EpDensityGrid":
        if other.spec != self.spec:
            raise ConfigError("grid", "cannot merge density grids with different binning")
        return EpDensityGrid(spec=self.spec, counts=self.counts + other.counts, overflow=self.overflow + other.overflow,
                             realizations=self.realizations + other.realizations, skipped=self.skipped + other.skipped,
                             points=self.points + other.points)

    @property
    def total(self) -> int:
        return int(self.counts.sum()) + self.overflow

    def marginal_re(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    def marginal_im(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    def density(self) -> np.ndarray:
        area = np.outer(np.diff(self.spec.re_edges), np.diff(self.spec.im_edges))
        tot = max(self.total, 1)
        return self.counts / (tot * area)


def ep_density(h0_model, d: int, n: int, n_realizations: int, grid_spec: EpGridSpec | None = None, seed: int = 0,
               config: EpConfig | None = None, start: int = 0) -> EpDensityGrid:
    """Accumulate converged EPs of ``n_realizations`` seeded realizations into 2-D bins."""
    h0 = initial_spectrum(h0_model, d)
    if grid_spec is None:
        grid_spec = EpGridSpec.around(3.0 * domain_radius(h0.energies, d, n))
    acc = EpDensityGrid.empty(grid_spec)
    for idx in range(start, start + n_realizations):
        sub = sample_subspace(d, n, seed, idx)
        try:
            eps = find_eps(h0, sub, config)
        except (EpCountError, SolverError) as exc:
            log.warning("realization %d skipped: %s", idx, exc)
            acc.skipped += 1
            continue
        acc.add(eps.converged_points)
    return acc


def eq8_fraction_inside(points, h0, d: int, n: int, factor: float = 1.5) -> float:
    """Fraction of EPs with |lam| <= factor * S d^2 / sqrt(n(d-n))."""
    pts = np.asarray(points, dtype=complex)
    r = factor * spread_constant(h0) * d**2 / np.sqrt(n * (d - n))
    return float(np.mean(np.abs(pts) <= r)) if pts.size else float("nan")
