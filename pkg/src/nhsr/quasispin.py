"""Quasispin operators and the three closed-system spectra (HO, PT1, PT2).

All spectra are affinely mapped onto ``[0, d]``: lowest level at 0, highest at d.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.linalg

from nhsr.errors import ConfigError, SolverError

MAX_DIM = 16384


class Model(str, enum.Enum):
    HO = "ho"
    PT1 = "pt1"
    PT2 = "pt2"

    @classmethod
    def parse(cls, value: "Model | str") -> "Model":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ConfigError("model", f"unknown model {value!r}; expected ho, pt1 or pt2") from None


# coefficient c in J3 - c(j) J1^2
_QUADRATIC = {
    Model.HO: lambda j: 0.0,
    Model.PT1: lambda j: 3.0 / j,
    Model.PT2: lambda j: 1.0 / (2.0 * j),
}


@dataclass(frozen=True)
class QuasispinOps:
    j: float
    d: int
    J1: np.ndarray
    J3: np.ndarray


@dataclass(frozen=True)
class InitialSpectrum:
    model: Model
    d: int
    energies: np.ndarray
    eigenbasis_to_j3: np.ndarray = field(repr=False)
    scale: float
    shift: float

    @property
    def j(self) -> float:
        return (self.d - 1) / 2

    def cumulants(self) -> tuple[float, float, float]:
        return spectrum_cumulants(self)


def _parse_j(j) -> Fraction:
    try:
        jf = Fraction(j).limit_denominator(4)
    except (TypeError, ValueError):
        raise ConfigError("j", f"not a number: {j!r}") from None
    if (2 * jf).denominator != 1 or abs(float(jf) - float(j)) > 1e-12:
        raise ConfigError("j", f"2j must be an integer, got j={j}")
    if jf < Fraction(1, 2):
        raise ConfigError("j", f"j must be >= 1/2, got j={j}")
    return jf


def j_from_dim(d: int) -> float:
    if int(d) != d or d < 2:
        raise ConfigError("d", f"dimension must be an integer >= 2, got {d}")
    return (int(d) - 1) / 2


def build_quasispin(j, max_dim: int = MAX_DIM) -> QuasispinOps:
    """Return J1 and J3 for quasispin ``j`` in the J3 eigenbasis (m ascending)."""
    jf = _parse_j(j)
    d = int(2 * jf + 1)
    if d > max_dim:
        raise ConfigError("d", f"dimension {d} exceeds maximum {max_dim}")
    jv = float(jf)
    m = np.arange(d) - jv
    ladder = 0.5 * np.sqrt(jv * (jv + 1) - m[:-1] * (m[:-1] + 1))
    J1 = np.diag(ladder, 1) + np.diag(ladder, -1)
    J3 = np.diag(m)
    return QuasispinOps(j=jv, d=d, J1=J1, J3=J3)


def raw_hamiltonian(model: Model | str, ops: QuasispinOps) -> np.ndarray:
    model = Model.parse(model)
    c = _QUADRATIC[model](ops.j)
    if c == 0.0:
        return ops.J3.copy()
    return ops.J3 - c * (ops.J1 @ ops.J1)


def build_initial(model: Model | str, j, max_dim: int = MAX_DIM) -> InitialSpectrum:
    model = Model.parse(model)
    ops = build_quasispin(j, max_dim=max_dim)
    d = ops.d
    if model is Model.HO:
        raw = np.diag(ops.J3).copy()
        vecs = np.eye(d)
    else:
        try:
            raw, vecs = scipy.linalg.eigh(raw_hamiltonian(model, ops))
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"diagonalization failed for {model.value}, j={ops.j}: {exc}") from exc
    lo, hi = raw[0], raw[-1]
    scale = d / (hi - lo)
    shift = -lo * scale
    energies = scale * (raw - lo)
    # pin the bounds exactly
    energies[0] = 0.0
    energies[-1] = float(d)
    return InitialSpectrum(model=model, d=d, energies=energies, eigenbasis_to_j3=vecs,
                           scale=float(scale), shift=float(shift))


def initial_spectrum(model: Model | str, d: int, max_dim: int = MAX_DIM) -> InitialSpectrum:
    return build_initial(model, j_from_dim(d), max_dim=max_dim)


def spectrum_cumulants(s: InitialSpectrum) -> tuple[float, float, float]:
    """Mean, central second moment and central third moment of the levels."""
    e = np.asarray(s.energies, dtype=float)
    mean = float(np.mean(e))
    dev = e - mean
    return mean, float(np.mean(dev**2)), float(np.mean(dev**3))


def spread_constant(s: InitialSpectrum) -> float:
    """Linear spread of the levels per dimension, sqrt(variance) / d."""
    return float(np.sqrt(spectrum_cumulants(s)[1]) / s.d)


def pt1_doublet_gaps(d: int, count: int = 1, dps: int = 60) -> list[float]:
    """Splittings of the lowest ``count`` PT1 doublets, in normalized units.

    The doublets are exponentially small in ``d`` and fall below double
    precision around d = 32, so the two parity blocks of the raw operator
    (each tridiagonal) are diagonalized in ``dps``-digit arithmetic.
    """
    import mpmath

    j = mpmath.mpf(d - 1) / 2
    with mpmath.workdps(dps):
        c = 3 / j
        m = [mpmath.mpf(k) - j for k in range(d)]

        def ladder(mm):
            return mpmath.sqrt(j * (j + 1) - mm * (mm + 1)) / 2

        # J1^2 in the m basis: diagonal and +/-2 bands
        diag = []
        off2 = []
        for k in range(d):
            up = ladder(m[k]) if k + 1 < d else 0
            dn = ladder(m[k - 1]) if k > 0 else 0
            diag.append(m[k] - c * (up**2 + dn**2))
            if k + 2 < d:
                off2.append(-c * ladder(m[k]) * ladder(m[k + 1]))

        levels = []
        for parity in (0, 1):
            idx = list(range(parity, d, 2))
            size = len(idx)
            block = mpmath.zeros(size, size)
            for a, k in enumerate(idx):
                block[a, a] = diag[k]
                if a + 1 < size:
                    block[a, a + 1] = block[a + 1, a] = off2[k]
            levels.extend(mpmath.eigsy(block, eigvals_only=True))
        levels = sorted(levels)
        scale = mpmath.mpf(d) / (levels[-1] - levels[0])
        gaps = [(levels[2 * i + 1] - levels[2 * i]) * scale for i in range(count)]
    return [float(g) for g in gaps]
