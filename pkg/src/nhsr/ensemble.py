"""Isotropically random decaying subspaces from GOE eigenframes.

Every realization is a pure function of ``(seed, index)``: the random stream is
derived through ``SeedSequence(seed, spawn_key=(index,))`` so realizations can
be generated in any order, on any worker.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from nhsr.errors import ConfigError


def realization_rng(seed: int, index: int, stream: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=(int(index), int(stream)))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class GoeSample:
    d: int
    matrix: np.ndarray = field(repr=False)
    seed: int
    realization_index: int


@dataclass(frozen=True)
class DecayingSubspace:
    d: int
    n: int
    phi: np.ndarray = field(repr=False)
    seed: int | None = None
    realization_index: int | None = None
    columns: tuple[int, ...] = ()

    @property
    def projector(self) -> np.ndarray:
        return self.phi @ self.phi.T

    def weights(self) -> np.ndarray:
        """w_k = (1/n) sum_l <phi_l|k>^2, i.e. diag(P_D) / n."""
        return np.sum(self.phi**2, axis=1) / self.n


def _goe_matrix(d: int, rng: np.random.Generator) -> np.ndarray:
    a = rng.standard_normal((d, d))
    # mirror one triangle so symmetry is exact; diagonal variance 2, off-diagonal 1
    h = np.triu(a) + np.triu(a, 1).T
    h[np.diag_indices(d)] *= np.sqrt(2.0)
    return h


def sample_goe(d: int, seed: int, index: int) -> GoeSample:
    if int(d) != d or d < 2:
        raise ConfigError("d", f"GOE dimension must be an integer >= 2, got {d}")
    rng = realization_rng(seed, index)
    return GoeSample(d=int(d), matrix=_goe_matrix(int(d), rng), seed=int(seed), realization_index=int(index))


def sample_subspace(d: int, n: int, seed: int, index: int) -> DecayingSubspace:
    """Pick ``n`` random eigenvectors of a GOE matrix as the decaying states."""
    if int(d) != d or d < 2:
        raise ConfigError("d", f"dimension must be an integer >= 2, got {d}")
    if int(n) != n or not 1 <= n <= d - 1:
        raise ConfigError("n", f"need 1 <= n <= d-1, got n={n}, d={d}")
    d, n = int(d), int(n)
    rng = realization_rng(seed, index)
    h = _goe_matrix(d, rng)
    _, frame = scipy.linalg.eigh(h)
    cols = np.sort(rng.choice(d, size=n, replace=False))
    phi = np.ascontiguousarray(frame[:, cols])
    return DecayingSubspace(d=d, n=n, phi=phi, seed=int(seed), realization_index=int(index),
                            columns=tuple(int(c) for c in cols))


def subspace_from_vectors(phi) -> DecayingSubspace:
    """Wrap explicit decaying states (columns of ``phi``), orthonormalizing them."""
    phi = np.atleast_2d(np.asarray(phi, dtype=float))
    if phi.shape[0] < phi.shape[1]:
        phi = phi.T
    d, n = phi.shape
    if not 1 <= n <= d - 1:
        raise ConfigError("n", f"need 1 <= n <= d-1, got n={n}, d={d}")
    q, r = np.linalg.qr(phi)
    q = q * np.sign(np.diag(r))
    return DecayingSubspace(d=d, n=n, phi=q)
