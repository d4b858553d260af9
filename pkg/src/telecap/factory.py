"""Constructors for the named states: GHZ, digit-sum states ``phi_{M,t}``, the
extremal k-separable mixture, isotropic GHZ and random k-separable states."""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb
from typing import Sequence

import numpy as np

from .qstate import DensityMatrix, Ket, SeedLike, SystemLayout, as_generator, haar_vector
from .thresholds import Partition, enumerate_partitions, gme_bound, threshold_T


def ghz(n: int, d: int = 2) -> Ket:
    """``sum_i |i>^(x)n / sqrt(d)``; the usual GHZ state for ``d = 2``."""
    if n < 2 or d < 2:
        raise ValueError(f"need N >= 2 and d >= 2, got N={n}, d={d}")
    layout = SystemLayout.qudits(n, d)
    amps = np.zeros(layout.total_dim, dtype=complex)
    step = sum(d**p for p in range(n))  # index of |11...1>
    amps[[i * step for i in range(d)]] = 1 / np.sqrt(d)
    return Ket(layout, amps)


def phi_mt(m: int, t: int, d: int = 2) -> Ket:
    """Uniform superposition of ``m``-digit strings whose digit sum is ``t`` mod ``d``."""
    if m < 1 or d < 2:
        raise ValueError(f"need M >= 1 and d >= 2, got M={m}, d={d}")
    if not 0 <= t < d:
        raise ValueError(f"t must lie in 0..{d - 1}, got {t}")
    layout = SystemLayout.qudits(m, d)
    digits = np.indices((d,) * m).reshape(m, -1).sum(axis=0)
    amps = np.where(digits % d == t, 1.0, 0.0).astype(complex) / np.sqrt(d ** (m - 1))
    return Ket(layout, amps)


def embed_blocks(blocks: Sequence[tuple[Sequence[int], np.ndarray]], d: int) -> np.ndarray:
    """Tensor block vectors together and place block ``b`` on positions ``b[0]``."""
    order = [p for positions, _ in blocks for p in positions]
    n = len(order)
    if sorted(order) != list(range(n)):
        raise ValueError("blocks must cover every position exactly once")
    vec = np.ones(1, dtype=complex)
    for _, v in blocks:
        vec = np.kron(vec, v)
    return vec.reshape((d,) * n).transpose(np.argsort(order)).reshape(-1)


@dataclass(frozen=True)
class ExtremalStateSpec:
    d: int
    n: int
    k: int

    def __post_init__(self) -> None:
        threshold_T(self.d, self.n, self.k)  # validates ranges

    @property
    def expected_min_fidelity(self) -> Fraction:
        return threshold_T(self.d, self.n, self.k)


def extremal_ksep_state(spec: ExtremalStateSpec) -> DensityMatrix:
    """Uniform mixture over (k-1)-subsets S of ``|0..0>_S (x) phi_{N-k+1,0}`` on the rest."""
    d, n, k = spec.d, spec.n, spec.k
    layout = SystemLayout.qudits(n, d)
    zero = np.zeros(d, dtype=complex)
    zero[0] = 1.0
    block = phi_mt(n - k + 1, 0, d).amplitudes
    rho = np.zeros((layout.total_dim,) * 2, dtype=complex)
    subsets = list(itertools.combinations(range(n), k - 1))
    for subset in subsets:
        rest = [p for p in range(n) if p not in subset]
        vec = embed_blocks([((p,), zero) for p in subset] + [(rest, block)], d)
        rho += np.outer(vec, vec.conj())
    return DensityMatrix(layout, rho / comb(n, k - 1))


def isotropic_ghz(n: int, p: float) -> DensityMatrix:
    """``p |GHZ_N><GHZ_N| + (1-p) I / 2^N`` on N qubits.

    ``p`` equal to 0 or 1 is accepted with a warning.
    """
    if n < 3:
        raise ValueError(f"N must be >= 3, got {n}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    if p in (0.0, 1.0):
        warnings.warn(f"p={p} is on the boundary of (0, 1)", stacklevel=2)
    g = ghz(n, 2)
    dim = 2**n
    rho = p * np.outer(g.amplitudes, g.amplitudes.conj()) + (1 - p) / dim * np.eye(dim)
    return DensityMatrix(g.layout, rho)


def isotropic_ghz_is_gme(n: int, p: float | Fraction) -> bool:
    """Known criterion for genuine N-partite entanglement of the isotropic GHZ state (not verified here)."""
    return p > gme_bound(n)


@lru_cache(maxsize=None)
def _partitions(n: int, k: int) -> tuple[Partition, ...]:
    return tuple(enumerate_partitions(n, k))


def random_sep_pk_pure(partition: Partition, d: int, seed: SeedLike = None) -> Ket:
    """Product over blocks of independent Haar-random block states."""
    rng = as_generator(seed)
    blocks = [(b, haar_vector(d ** len(b), rng)) for b in partition.blocks]
    return Ket(SystemLayout.qudits(partition.n, d), embed_blocks(blocks, d))


def random_ksep_mixture(n: int, k: int, d: int, terms: int, seed: SeedLike = None) -> DensityMatrix:
    """Flat-Dirichlet mixture of ``terms`` random partition-separable pure states.

    Each term draws its own k-block partition uniformly.
    """
    if terms < 1:
        raise ValueError(f"terms must be >= 1, got {terms}")
    rng = as_generator(seed)
    parts = _partitions(n, k)
    weights = rng.dirichlet(np.ones(terms)) if terms > 1 else np.ones(1)
    layout = SystemLayout.qudits(n, d)
    rho = np.zeros((layout.total_dim,) * 2, dtype=complex)
    for w in weights:
        ket = random_sep_pk_pure(parts[rng.integers(len(parts))], d, rng)
        rho += w * np.outer(ket.amplitudes, ket.amplitudes.conj())
    rho /= np.trace(rho).real
    return DensityMatrix(layout, rho)


def random_biseparable_pure(n: int, d: int, seed: SeedLike = None) -> Ket:
    """Random pure state that factorises across a uniformly drawn bipartition."""
    rng = as_generator(seed)
    parts = _partitions(n, 2)
    return random_sep_pk_pure(parts[rng.integers(len(parts))], d, rng)


def product_state(n: int, d: int, seed: SeedLike = None) -> Ket:
    """Fully separable random pure product state."""
    return random_sep_pk_pure(Partition(tuple((i,) for i in range(n))), d, seed)
