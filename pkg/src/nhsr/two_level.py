"""Closed-form d = 2 model: one decaying state at angle theta.

    H(lam) = diag(e1, e2) + lam * u u^T,   u = (cos theta, sin theta)

Used as the analytic oracle for the eigensolver, the sweep and the EP finder.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from nhsr.ensemble import DecayingSubspace
from nhsr.errors import ConfigError


@dataclass(frozen=True)
class TwoLevelModel:
    e1: float = 0.0
    e2: float = 1.0
    theta: float = math.pi / 4

    def __post_init__(self):
        if self.e1 == self.e2:
            raise ConfigError("e2", "e1 and e2 must differ")
        if not 0.0 < self.theta < math.pi:
            raise ConfigError("theta", f"theta must lie in (0, pi), got {self.theta}")

    @property
    def energies(self) -> np.ndarray:
        return np.array([self.e1, self.e2], dtype=float)

    @property
    def subspace(self) -> DecayingSubspace:
        u = np.array([[math.cos(self.theta)], [math.sin(self.theta)]])
        return DecayingSubspace(d=2, n=1, phi=u)

    def matrix(self, lam: complex) -> np.ndarray:
        c, s = math.cos(self.theta), math.sin(self.theta)
        p = np.array([[c * c, c * s], [c * s, s * s]])
        return np.diag(self.energies).astype(complex) + complex(lam) * p


def analytic_eigenvalues(m: TwoLevelModel, lam: complex) -> tuple[complex, complex]:
    """Both eigenvalues from the closed form, principal root first (``+`` branch)."""
    lam = complex(lam)
    half_gap = (m.e1 - m.e2) / 2
    centre = (m.e1 + m.e2 + lam) / 2
    root = cmath.sqrt(half_gap**2 + (lam / 2) ** 2 + lam * half_gap * math.cos(2 * m.theta))
    return centre + root, centre - root


def analytic_eps(m: TwoLevelModel) -> tuple[complex, complex]:
    """The conjugate pair of exceptional points, upper half-plane first."""
    a = -(m.e1 - m.e2) * cmath.exp(2j * m.theta)
    b = -(m.e1 - m.e2) * cmath.exp(-2j * m.theta)
    return (a, b) if a.imag >= b.imag else (b, a)


def width_curves(m: TwoLevelModel, eps: float, gammas) -> dict[str, np.ndarray]:
    """Widths and energies along lam = eps - i*gamma, sorted so width1 <= width2."""
    gammas = np.asarray(gammas, dtype=float)
    out = {k: np.empty_like(gammas) for k in ("width1", "width2", "energy1", "energy2")}
    for i, g in enumerate(gammas):
        a, b = analytic_eigenvalues(m, complex(eps, -g))
        if -a.imag > -b.imag or (-a.imag == -b.imag and a.real > b.real):
            a, b = b, a
        out["width1"][i], out["width2"][i] = -a.imag, -b.imag
        out["energy1"][i], out["energy2"][i] = a.real, b.real
    return out


@dataclass(frozen=True)
class JordanReport:
    lam: complex
    singular_values: tuple[float, float]
    rank: int
    overlap: float


def jordan_check(m: TwoLevelModel, lam: complex | None = None, rank_tol: float = 1e-8) -> JordanReport:
    """Rank of H - E*1 and the self-overlap |v^T v| of the unit eigenvector.

    Defaults to the upper exceptional point; at an EP the rank is 1 and the
    unique eigenvector is self-orthogonal.
    """
    if lam is None:
        lam = analytic_eps(m)[0]
    h = m.matrix(lam)
    e = 0.5 * np.trace(h)
    a, b = analytic_eigenvalues(m, lam)
    if abs(a - b) > rank_tol * max(1.0, abs(e)):
        e = a
    sv = np.linalg.svd(h - e * np.eye(2), compute_uv=False)
    scale = max(1.0, float(np.linalg.norm(h)))
    rank = int(np.sum(sv > rank_tol * scale))
    _, _, vh = np.linalg.svd(h - e * np.eye(2))
    v = vh[-1].conj()
    v = v / np.linalg.norm(v)
    return JordanReport(lam=complex(lam), singular_values=(float(sv[0]), float(sv[1])), rank=rank,
                        overlap=float(abs(v @ v)))
