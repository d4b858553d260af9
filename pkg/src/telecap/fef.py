"""Fully entangled fraction of two-qudit states and the induced teleportation fidelity.

Maximally entangled vectors are parameterised as ``|e> = (I (x) U)|Phi+>`` with
``|Phi+> = sum_i |ii> / sqrt(d)``, so every solver searches over one ``d x d``
unitary ``U`` and reports the maximiser it found.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from fractions import Fraction

import numpy as np

from .qstate import DensityMatrix, Ket, SeedLike, State, as_density, as_generator, haar_unitary_matrix

_S = 1 / np.sqrt(2)

# Columns: (|00>+|11>)/r2, i(|00>-|11>)/r2, i(|01>+|10>)/r2, (|01>-|10>)/r2.
MAGIC_BASIS = np.array(
    [
        [_S, 1j * _S, 0, 0],
        [0, 0, 1j * _S, _S],
        [0, 0, 1j * _S, -_S],
        [_S, -1j * _S, 0, 0],
    ],
    dtype=complex,
)


class Method(enum.Enum):
    MAGIC_BASIS_EXACT = "MagicBasisExact"
    MANIFOLD_OPTIMIZER = "ManifoldOptimizer"
    RANDOM_SEARCH_ORACLE = "RandomSearchOracle"
    SCHMIDT_EXACT = "SchmidtExact"


@dataclass(frozen=True, eq=False)
class FefResult:
    value: float
    maximizer: np.ndarray
    method: Method
    restarts_used: int = 0
    converged: bool = True


@dataclass(frozen=True)
class FefOptions:
    restarts: int = 20
    max_iter: int = 500
    grad_tol: float = 1e-9
    seed: SeedLike = 0


def phi_plus(d: int) -> np.ndarray:
    return np.eye(d, dtype=complex).reshape(-1) / np.sqrt(d)


def entangled_vector(u: np.ndarray) -> np.ndarray:
    """``(I (x) U)|Phi+>`` as a flat vector."""
    d = u.shape[0]
    return u.T.reshape(-1) / np.sqrt(d)


def overlap(rho_matrix: np.ndarray, u: np.ndarray) -> float:
    """``g(U) = <Phi+|(I (x) U^dag) rho (I (x) U)|Phi+>``."""
    e = entangled_vector(u)
    return float(np.real(np.vdot(e, rho_matrix @ e)))


def _two_qudit_dim(rho: DensityMatrix) -> int:
    if rho.layout.n != 2:
        raise ValueError(f"expected a two-party state, got {rho.layout.n} subsystems")
    d1, d2 = rho.layout.dims
    if d1 != d2:
        raise ValueError(f"local dimensions differ: {d1} != {d2}")
    return d1


def fidelity_from_fraction(f: float | Fraction, d: int) -> float | Fraction:
    """Optimal standard teleportation fidelity ``(d f + 1) / (d + 1)``.

    Exact for :class:`fractions.Fraction` input, float otherwise.
    """
    if d < 2:
        raise ValueError("d must be >= 2")
    if not (-1e-12 <= f <= 1 + 1e-12):
        raise ValueError(f"fraction must lie in [0, 1], got {f}")
    if isinstance(f, Fraction):
        return (d * f + 1) / (d + 1)
    return (d * float(f) + 1.0) / (d + 1)


# ---------------------------------------------------------------------------
# d = 2


def qubit_fraction_unnormalized(blocks: np.ndarray) -> np.ndarray:
    """Largest eigenvalue of ``Re(M^dag B M)`` for stacked 4x4 blocks ``B``.

    Homogeneous of degree one, so an unnormalised branch ``p * sigma`` yields
    ``p * f(sigma)`` directly.
    """
    m = MAGIC_BASIS
    rotated = np.einsum("ai,...ab,bj->...ij", m.conj(), blocks, m, optimize=True).real
    rotated = (rotated + np.swapaxes(rotated, -1, -2)) / 2
    return np.linalg.eigvalsh(rotated)[..., -1]


def fef_exact_qubit(rho: State) -> FefResult:
    """Closed-form fully entangled fraction of a two-qubit state."""
    rho = as_density(rho)
    if rho.layout.dims != (2, 2):
        raise ValueError(f"fef_exact_qubit needs two qubits, got dims {rho.layout.dims}")
    rotated = (MAGIC_BASIS.conj().T @ rho.matrix @ MAGIC_BASIS).real
    vals, vecs = np.linalg.eigh((rotated + rotated.T) / 2)
    e = MAGIC_BASIS @ vecs[:, -1]
    u = np.sqrt(2) * e.reshape(2, 2).T
    return FefResult(float(vals[-1]), u, Method.MAGIC_BASIS_EXACT, 0, True)


# ---------------------------------------------------------------------------
# pure states


def pure_fraction_unnormalized(vectors: np.ndarray, d: int) -> np.ndarray:
    """``(sum of Schmidt values)^2 / d`` for stacked (unnormalised) ``d*d`` vectors."""
    mats = vectors.reshape(vectors.shape[:-1] + (d, d))
    s = np.linalg.svd(mats, compute_uv=False)
    return s.sum(axis=-1) ** 2 / d


def fef_pure(ket: Ket) -> FefResult:
    """Fully entangled fraction of a pure two-qudit state via its Schmidt values."""
    if ket.layout.n != 2 or ket.layout.dims[0] != ket.layout.dims[1]:
        raise ValueError(f"fef_pure needs two equal-dimension qudits, got dims {ket.layout.dims}")
    d = ket.layout.dims[0]
    w, s, vh = np.linalg.svd(ket.amplitudes.reshape(d, d))
    u = (w @ vh).T
    return FefResult(float(s.sum() ** 2 / d), u, Method.SCHMIDT_EXACT, 0, True)


# ---------------------------------------------------------------------------
# general d


def _polar(a: np.ndarray) -> np.ndarray:
    w, _, vh = np.linalg.svd(a)
    return w @ vh


def _ascend(rho_matrix: np.ndarray, u: np.ndarray, max_iter: int, grad_tol: float) -> tuple[np.ndarray, float, bool]:
    """Monotone ascent of ``g`` on U(d) with polar retraction."""
    d = u.shape[0]
    sqrt_d = np.sqrt(d)
    value = overlap(rho_matrix, u)
    step = 1.0
    for _ in range(max_iter):
        e = u.T.reshape(-1) / sqrt_d
        grad = (rho_matrix @ e).reshape(d, d).T / sqrt_d
        a = u.conj().T @ grad
        if np.linalg.norm(a - a.conj().T) < grad_tol:
            return u, value, True
        while True:
            candidate = _polar(u + step * grad)
            cand_value = overlap(rho_matrix, candidate)
            if cand_value > value or step < 1e-12:
                break
            step /= 2
        if cand_value <= value:
            # No representable increase left: stationary to working precision.
            return u, value, True
        u, value = candidate, cand_value
        step = min(step * 2, 1e6)
    e = u.T.reshape(-1) / sqrt_d
    grad = (rho_matrix @ e).reshape(d, d).T / sqrt_d
    a = u.conj().T @ grad
    return u, value, bool(np.linalg.norm(a - a.conj().T) < grad_tol)


def fef_general(
    rho: State,
    options: FefOptions | None = None,
    warm_starts: tuple[np.ndarray, ...] = (),
) -> FefResult:
    """Lower bound on the fully entangled fraction by multi-restart ascent.

    Starts from ``warm_starts``, the identity, then ``options.restarts``
    Haar-random unitaries. The best value wins; ties keep the earliest start.
    """
    options = options or FefOptions()
    rho = as_density(rho)
    d = _two_qudit_dim(rho)
    rng = as_generator(options.seed)
    starts = [np.asarray(w, dtype=complex) for w in warm_starts]
    starts.append(np.eye(d, dtype=complex))
    starts.extend(haar_unitary_matrix(d, rng) for _ in range(options.restarts))
    best_u, best_val, best_conv = None, -np.inf, False
    for start in starts:
        u, val, conv = _ascend(rho.matrix, start, options.max_iter, options.grad_tol)
        if val > best_val:
            best_u, best_val, best_conv = u, val, conv
    return FefResult(best_val, best_u, Method.MANIFOLD_OPTIMIZER, len(starts), best_conv)


def fully_entangled_fraction(rho: State, options: FefOptions | None = None) -> FefResult:
    """Dispatch: Schmidt formula for kets, exact for qubits, optimiser otherwise."""
    if isinstance(rho, Ket):
        return fef_pure(rho)
    if rho.layout.dims == (2, 2):
        return fef_exact_qubit(rho)
    return fef_general(rho, options)


def with_seed(options: FefOptions, seed: SeedLike) -> FefOptions:
    return replace(options, seed=seed)
