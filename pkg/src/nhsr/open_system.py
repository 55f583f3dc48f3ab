"""Effective non-Hermitian Hamiltonian H(lam) = H0 + lam * P_D and its spectrum.

``lam = eps - 1j*gamma`` with ``gamma >= 0``. The matrix is complex symmetric,
so left eigenvectors are transposes of right ones and the natural pairing is
the bilinear form ``u.T @ v`` (no conjugation).
"""
from __future__ import annotations

import zlib
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from nhsr.ensemble import DecayingSubspace
from nhsr.errors import ConfigError, SolverError

RESIDUAL_TOL = 1e-8
EP_OVERLAP_TOL = 1e-6
WIDTH_CLAMP = 1e-12


def unperturbed_energies(h0) -> np.ndarray:
    """Accept an InitialSpectrum or a plain sequence of energies."""
    e = getattr(h0, "energies", h0)
    return np.asarray(e, dtype=float)


def symmetric_projector(sub: DecayingSubspace) -> np.ndarray:
    p = sub.phi @ sub.phi.T
    return 0.5 * (p + p.T)


@dataclass(frozen=True)
class OpenHamiltonian:
    energies: np.ndarray = field(repr=False)
    subspace: DecayingSubspace = field(repr=False)
    lam: complex
    matrix: np.ndarray = field(repr=False)

    @property
    def d(self) -> int:
        return self.subspace.d

    @property
    def n(self) -> int:
        return self.subspace.n

    @property
    def eps(self) -> float:
        return float(self.lam.real)

    @property
    def gamma(self) -> float:
        return float(-self.lam.imag)

    def hermitian_part(self) -> np.ndarray:
        """H(eps - i0): the real symmetric matrix at the same eps."""
        return np.diag(self.energies) + self.eps * symmetric_projector(self.subspace)


def hamiltonian_matrix(energies, sub: DecayingSubspace, lam: complex, projector=None) -> np.ndarray:
    p = symmetric_projector(sub) if projector is None else projector
    lam = complex(lam)
    if lam.imag == 0.0:
        m = lam.real * p
    else:
        m = lam * p
    m[np.diag_indices_from(m)] += energies
    return m


def assemble(h0, sub: DecayingSubspace, eps: float = 0.0, gamma: float = 0.0, *, lam=None) -> OpenHamiltonian:
    """Build H0 + (eps - i gamma) P_D in the H0 eigenbasis.

    ``lam`` may be given instead of ``(eps, gamma)``; it may then lie anywhere
    in the complex plane (the EP finder needs both half-planes).
    """
    energies = unperturbed_energies(h0)
    if energies.shape != (sub.d,):
        raise ConfigError("d", f"spectrum has {energies.size} levels, subspace lives in d={sub.d}")
    if lam is None:
        if gamma < 0:
            raise ConfigError("gamma", f"gamma must be >= 0, got {gamma}")
        lam = complex(eps, -gamma)
    lam = complex(lam)
    return OpenHamiltonian(energies=energies, subspace=sub, lam=lam,
                           matrix=hamiltonian_matrix(energies, sub, lam))


@dataclass(frozen=True)
class ComplexSpectrum:
    """Eigenvalues E - i*Gamma sorted by E (then Gamma), with right eigenvectors.

    ``right_vectors[:, k]`` is normalized so that ``v.T @ v == 1`` unless
    ``ep_proximity[k]`` is set, in which case it keeps unit Euclidean norm.
    """

    eigenvalues: np.ndarray
    right_vectors: np.ndarray = field(repr=False)
    overlaps: np.ndarray = field(repr=False)
    ep_proximity: np.ndarray = field(repr=False)
    residual: float
    lam: complex = 0j

    @property
    def d(self) -> int:
        return self.eigenvalues.size

    @property
    def left_vectors(self) -> np.ndarray:
        """Rows are the left eigenvectors (transposes of the right ones)."""
        return self.right_vectors.T

    @property
    def energies(self) -> np.ndarray:
        return self.eigenvalues.real

    @property
    def widths(self) -> np.ndarray:
        """Raw widths, -Im of the eigenvalues (may carry tiny negative noise)."""
        return -self.eigenvalues.imag

    def reported_widths(self, clamp: float = WIDTH_CLAMP) -> np.ndarray:
        w = self.widths.copy()
        w[np.abs(w) < clamp] = 0.0
        return w

    def derivative(self, sub: DecayingSubspace) -> np.ndarray:
        """d(eigenvalue)/d(lam) = <kL|P_D|kR> (Hellmann-Feynman)."""
        c = sub.phi.T @ self.right_vectors
        return np.sum(c * c, axis=0)

    def width_slope(self, sub: DecayingSubspace) -> np.ndarray:
        """dGamma/dgamma at fixed eps, equal to Re <kL|P_D|kR>."""
        return self.derivative(sub).real

    def biorthogonality_error(self, mask=None) -> float:
        v = self.right_vectors
        g = v.T @ v
        ok = ~self.ep_proximity if mask is None else mask
        g = g[np.ix_(ok, ok)]
        return float(np.max(np.abs(g - np.eye(g.shape[0])))) if g.size else 0.0


def _random_orthogonal(d: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


def _normalize(matrix: np.ndarray, w: np.ndarray, v: np.ndarray, lam: complex) -> ComplexSpectrum:
    v = v / np.linalg.norm(v, axis=0)
    hnorm = np.linalg.norm(matrix)
    resid = np.linalg.norm(matrix @ v - v * w, axis=0)
    residual = float(np.max(resid) / hnorm) if hnorm > 0 else float(np.max(resid))
    c = np.sum(v * v, axis=0)
    overlaps = np.abs(c)
    near = overlaps < EP_OVERLAP_TOL
    scale = np.where(near, 1.0, np.sqrt(np.where(near, 1.0, c)))
    v = v / scale
    order = np.lexsort((-w.imag, w.real))
    return ComplexSpectrum(eigenvalues=w[order], right_vectors=v[:, order], overlaps=overlaps[order],
                           ep_proximity=near[order], residual=residual, lam=complex(lam))


def eig_matrix(matrix: np.ndarray, lam: complex = 0j, *, seed=None, index=None) -> ComplexSpectrum:
    matrix = np.asarray(matrix)
    if not np.all(np.isfinite(matrix)):
        raise SolverError("non-finite matrix entries", lam=lam, seed=seed, index=index)
    if not np.iscomplexobj(matrix) or not np.any(matrix.imag):
        w, v = scipy.linalg.eigh(matrix.real)
        return _normalize(matrix, w.astype(complex), v.astype(complex), lam)
    try:
        w, v = scipy.linalg.eig(matrix, check_finite=False)
        spec = _normalize(matrix, w, v, lam)
    except (np.linalg.LinAlgError, ValueError):
        spec = None
    if spec is None or spec.residual > RESIDUAL_TOL:
        # one restart on a randomly rotated copy: same eigenvalues, different QR path
        key = zlib.crc32(np.asarray([lam.real, lam.imag]).tobytes())
        q = _random_orthogonal(matrix.shape[0], key)
        try:
            w, v = scipy.linalg.eig(q.T @ matrix @ q, check_finite=False)
            spec = _normalize(matrix, w, q @ v, lam)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise SolverError(f"eigensolver failed at lam={lam}: {exc}", lam=lam, seed=seed, index=index) from exc
        if spec.residual > RESIDUAL_TOL:
            raise SolverError(f"residual {spec.residual:.3g} above {RESIDUAL_TOL} at lam={lam}",
                              lam=lam, seed=seed, index=index)
    return spec


def eig(h: OpenHamiltonian) -> ComplexSpectrum:
    """Full eigendecomposition of H(lam) with bi-orthonormal eigenvectors."""
    sub = h.subspace
    return eig_matrix(h.matrix, h.lam, seed=sub.seed, index=sub.realization_index)


def eigvals_at(h0, sub: DecayingSubspace, lam: complex, projector=None) -> np.ndarray:
    """Eigenvalues only, sorted like ComplexSpectrum; the fast path for ensembles."""
    m = hamiltonian_matrix(unperturbed_energies(h0), sub, lam, projector)
    if complex(lam).imag == 0.0:
        w = scipy.linalg.eigvalsh(m.real).astype(complex)
    else:
        w = scipy.linalg.eigvals(m, check_finite=False)
    return w[np.lexsort((-w.imag, w.real))]


def closed_limit_probabilities(h0, sub: DecayingSubspace, eps: float) -> tuple[np.ndarray, np.ndarray]:
    """Energies of H(eps - i0) and P_k = sum_l |<phi_l|k>|^2 for its eigenstates."""
    energies = unperturbed_energies(h0)
    h = np.diag(energies) + eps * symmetric_projector(sub)
    e, v = scipy.linalg.eigh(h)
    return e, np.sum((sub.phi.T @ v) ** 2, axis=0)
