"""Controlled-teleportation capability of N-qudit states.

For a pair (i, j) the other N-2 parties measure in local orthonormal bases
``{U^dag |j>}``; the pair then teleports over the conditional state. The pair
fraction is the outcome-averaged fully entangled fraction, maximised over the
controllers' bases, and the fidelity follows from ``(d f + 1) / (d + 1)``.

The outer search is coordinate-wise ascent over the controllers' unitaries,
one traceless Hermitian generator at a time (``U <- U exp(i t G)``), with a
batched grid line search refined by zooming. Every value it reports is
attained by an explicit basis, so it is a lower bound on the true maximum.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from fractions import Fraction
from math import comb
from typing import Sequence

import numpy as np

from .config import DEFAULT_TOLERANCES
from .fef import (
    MAGIC_BASIS,
    FefOptions,
    _ascend,
    fef_exact_qubit,
    fef_general,
    fef_pure,
    fidelity_from_fraction,
    pure_fraction_unnormalized,
)
from .qstate import (
    BranchTable,
    DensityMatrix,
    Ket,
    SeedLike,
    State,
    SystemLayout,
    as_density,
    branch_blocks,
    check_unitary,
    controller_tensor,
    haar_unitary_matrix,
    kron_all,
    measure_product_basis,
)
from .thresholds import threshold_T

__all__ = [
    "BranchTable",
    "CtelOptions",
    "CtelResult",
    "UsefulnessReport",
    "ctel_fraction",
    "ctel_fraction_fixed_basis",
    "fourier_unitary",
    "hadamard",
    "min_pair_fidelity",
    "usefulness_report",
]

_ONE = 1.0 - 1e-12


@dataclass(frozen=True)
class CtelOptions:
    restarts: int = 10
    seed: SeedLike = 0
    max_sweeps: int = 60
    screen_sweeps: int = 2
    screen_keep: int = 3
    sweep_tol: float = 1e-8
    polish_tol: float = 1e-12
    grid: int = 10
    zoom_rounds: int = 2
    refine_rounds: int = 3
    refine_shrink: float = 8.0
    refine_peaks: int = 3
    inner: FefOptions = field(default_factory=lambda: FefOptions(restarts=3, max_iter=500, grad_tol=1e-9))


@dataclass(frozen=True, eq=False)
class CtelResult:
    pair: tuple[str, str]
    fraction: float
    fidelity: float
    maximizing_unitaries: tuple[np.ndarray, ...]
    branch_table: BranchTable
    converged: bool
    d: int


def hadamard() -> np.ndarray:
    return np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


def fourier_unitary(d: int) -> np.ndarray:
    """DFT matrix; equals the Hadamard (X-basis change) for d = 2."""
    w = np.exp(2j * np.pi / d)
    j, k = np.indices((d, d))
    return w ** (j * k) / np.sqrt(d)


def gauge_fix(u: np.ndarray) -> np.ndarray:
    """Remove the global phase: first nonzero entry of column 0 made real positive."""
    col = u[:, 0]
    idx = int(np.argmax(np.abs(col) > 1e-12))
    return u * (abs(col[idx]) / col[idx])


def hermitian_generators(d: int) -> list[np.ndarray]:
    """Generalised Gell-Mann matrices (traceless Hermitian basis of su(d))."""
    gens = []
    for a, b in itertools.combinations(range(d), 2):
        s = np.zeros((d, d), dtype=complex)
        s[a, b] = s[b, a] = 1
        gens.append(s)
        x = np.zeros((d, d), dtype=complex)
        x[a, b], x[b, a] = -1j, 1j
        gens.append(x)
    for l in range(1, d):
        diag = np.zeros(d)
        diag[:l] = 1
        diag[l] = -l
        gens.append(np.diag(diag * np.sqrt(2 / (l * (l + 1)))).astype(complex))
    return gens


def _magic_map() -> np.ndarray:
    # vec(M^dag B M) = vec(B) @ K for row-major vec.
    m = MAGIC_BASIS
    return np.einsum("ai,bj->abij", m.conj(), m).reshape(16, 16)


_MAGIC_MAP = _magic_map()


def _resolve_pair(layout: SystemLayout, i: str | int, j: str | int) -> tuple[int, int]:
    pi, pj = layout.index(i), layout.index(j)
    if pi == pj:
        raise ValueError("pair members must differ")
    return pi, pj


class _PairObjective:
    """Batched evaluation of ``sum_J p_J f(sigma_J)`` over candidate controller bases."""

    def __init__(self, rho: DensityMatrix, pi: int, pj: int, inner: FefOptions) -> None:
        layout = rho.layout
        if layout.n < 3:
            raise ValueError(f"controlled teleportation needs N >= 3, got {layout.n}")
        self.d = layout.uniform_dim()
        self.layout = layout
        self.measured = [p for p in range(layout.n) if p not in (pi, pj)]
        self.kept = [pi, pj]
        self.m = len(self.measured)
        self.dm = self.d**self.m
        self.inner = inner
        t4 = controller_tensor(rho.matrix, layout.dims, self.measured, self.kept)
        self.rho = rho
        evals, evecs = np.linalg.eigh(rho.matrix)
        if evals[-1] > _ONE:
            self.mode = "pure"
            psi = evecs[:, -1].reshape(layout.dims)
            order = self.measured + self.kept
            self.psi = psi.transpose(order).reshape(self.dm, self.d * self.d)
        elif self.d == 2:
            self.mode = "qubit"
            # R[(b,c), (k,l)] = t4[b,k,c,l], pre-rotated into the magic basis.
            r = t4.transpose(0, 2, 1, 3).reshape(self.dm * self.dm, 16)
            self.r_magic = r @ _MAGIC_MAP
        else:
            self.mode = "general"
            self.t4 = t4
            self.inner_u = [np.eye(self.d, dtype=complex) for _ in range(self.dm)]
        self.inner_converged = True

    def joint(self, us: Sequence[np.ndarray]) -> np.ndarray:
        return kron_all(us)[None]

    def values(self, uk: np.ndarray) -> np.ndarray:
        """Objective for a batch ``(T, Dm, Dm)`` of joint controller unitaries."""
        if self.mode == "pure":
            return self._pure_values(uk @ self.psi)
        if self.mode == "qubit":
            w = np.einsum("tjb,tjc->tjbc", uk, uk.conj()).reshape(uk.shape[0], self.dm, -1)
            return self._qubit_values(w @ self.r_magic)
        blocks = branch_blocks(self.t4, uk)
        es = self._inner_vectors()
        return np.einsum("ja,tjab,jb->t", es.conj(), blocks, es).real

    def _pure_values(self, v: np.ndarray) -> np.ndarray:
        return pure_fraction_unnormalized(v, self.d).sum(axis=-1)

    def _qubit_values(self, rot: np.ndarray) -> np.ndarray:
        rot = rot.real.reshape(rot.shape[0], self.dm, 4, 4)
        rot = (rot + np.swapaxes(rot, -1, -2)) / 2
        return np.linalg.eigvalsh(rot)[..., -1].sum(axis=-1)

    def _inner_vectors(self) -> np.ndarray:
        # Lower bound with the current inner maximisers held fixed.
        return np.stack([u.T.reshape(-1) for u in self.inner_u]) / np.sqrt(self.d)

    def line(self, us: Sequence[np.ndarray], c: int, gen: np.ndarray):
        """Batched objective along ``us[c] <- us[c] expm(i t gen)``, returned with its rotation map.

        The joint unitary is ``sum_k exp(i t lam_k) J_k``, so each branch block
        is a trigonometric polynomial in t with precomputed coefficients.
        """
        lam, vecs = np.linalg.eigh(gen)
        left, right = kron_all(us[:c]), kron_all(us[c + 1 :])
        kk = len(lam)
        local = np.einsum("ab,bk,ck->kac", us[c], vecs, vecs.conj())
        big = np.einsum("ab,kcd,ef->kacebdf", left, local, right)
        js = big.reshape(kk, self.dm, self.dm)
        freqs = (lam[:, None] - lam[None, :]).reshape(-1)

        def rotation(t: float) -> np.ndarray:
            return us[c] @ (vecs * np.exp(1j * t * lam)) @ vecs.conj().T

        if self.mode == "pure":
            y = (js @ self.psi).reshape(kk, -1)

            def score(ts: np.ndarray) -> np.ndarray:
                v = np.exp(1j * np.outer(ts, lam)) @ y
                return self._pure_values(v.reshape(len(ts), self.dm, -1))

            return score, rotation
        pairs = np.einsum("kjb,ljc->kljbc", js, js.conj()).reshape(kk * kk, self.dm, self.dm * self.dm)
        if self.mode == "qubit":
            x = (pairs @ self.r_magic).reshape(kk * kk, -1)

            def score(ts: np.ndarray) -> np.ndarray:
                rot = np.exp(1j * np.outer(ts, freqs)) @ x
                return self._qubit_values(rot.reshape(len(ts), self.dm, 16))

            return score, rotation
        es = self._inner_vectors()
        t4 = self.t4.transpose(0, 2, 1, 3).reshape(self.dm * self.dm, -1)
        z = (pairs @ t4).reshape(kk * kk, self.dm, self.d**2, self.d**2)
        s = np.einsum("ja,qjab,jb->q", es.conj(), z, es)

        def score(ts: np.ndarray) -> np.ndarray:
            return (np.exp(1j * np.outer(ts, freqs)) @ s).real

        return score, rotation

    def refresh_inner(self, us: Sequence[np.ndarray], full: bool) -> float:
        """Re-optimise inner maximisers at ``us`` (general mode only); returns the objective."""
        if self.mode != "general":
            return float(self.values(self.joint(us))[0])
        blocks = branch_blocks(self.t4, kron_all(us))
        total = 0.0
        for jdx, block in enumerate(blocks):
            p = float(np.trace(block).real)
            if p < DEFAULT_TOLERANCES.probability_floor:
                continue
            sigma = (block + block.conj().T) / (2 * p)
            if full:
                res = fef_general(DensityMatrix(self.layout.select(self.kept), sigma), self.inner, (self.inner_u[jdx],))
                u, val, conv = res.maximizer, res.value, res.converged
            else:
                u, val, conv = _ascend(sigma, self.inner_u[jdx], self.inner.max_iter, self.inner.grad_tol)
            self.inner_u[jdx] = u
            self.inner_converged = self.inner_converged and conv
            total += p * val
        return total


def _line_search(obj: _PairObjective, us: list[np.ndarray], c: int, gen: np.ndarray, opts: CtelOptions) -> tuple[float, np.ndarray]:
    """Best ``us[c] @ expm(i t gen)`` over one period of t.

    A coarse grid locates candidate peaks; the best few are localised by
    zooming sub-grids, then polished by parabolic steps, all batched.
    """
    score, rotation = obj.line(us, c, gen)
    if obj.d == 2:
        # Only one frequency: the objective has period 2 pi / (lam_max - lam_min).
        lam = np.linalg.eigvalsh(gen)
        period, points = 2 * np.pi / (lam[-1] - lam[0]), opts.grid
    else:
        period, points = 2 * np.pi, 2 * opts.grid
    ts = np.linspace(-period / 2, period / 2, points, endpoint=False)
    vals = score(ts)
    best = int(np.argmax(vals))
    best_t, best_v = float(ts[best]), float(vals[best])
    peaks = np.flatnonzero((vals >= np.roll(vals, 1)) & (vals >= np.roll(vals, -1)))
    centers = ts[peaks[np.argsort(vals[peaks])[::-1][: opts.refine_peaks]]]
    h = period / points

    def probe(offsets: np.ndarray) -> np.ndarray:
        nonlocal best_t, best_v
        ts = (centers[:, None] + offsets[None, :]).reshape(-1)
        vals = score(ts).reshape(len(centers), len(offsets))
        k = int(np.argmax(vals))
        if vals.flat[k] > best_v:
            best_t, best_v = float(ts[k]), float(vals.flat[k])
        return vals

    zoom = np.linspace(-1.0, 1.0, 9)
    for _ in range(opts.zoom_rounds):
        vals = probe(h * zoom)
        centers = centers + h * zoom[np.argmax(vals, axis=1)]
        h /= 4
    for _ in range(opts.refine_rounds):
        vm, v0, vp = probe(h * np.array([-1.0, 0.0, 1.0])).T
        curvature = vm - 2 * v0 + vp
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(curvature < 0, np.clip((vm - vp) / (2 * curvature), -1.0, 1.0), 0.0)
        centers = centers + h * step
        h /= opts.refine_shrink
    probe(np.zeros(1))
    return best_v, rotation(best_t)


def _displacement_generator(old: np.ndarray, new: np.ndarray) -> np.ndarray | None:
    """Hermitian ``H`` with ``new = old expm(i H)``, or None for a negligible move."""
    lam, vecs = np.linalg.eig(old.conj().T @ new)
    h = (vecs * np.angle(lam)) @ np.linalg.inv(vecs)
    h = (h + h.conj().T) / 2
    norm = np.linalg.norm(h)
    return h / norm if norm > 1e-10 else None


def _sweeps(obj: _PairObjective, us: list[np.ndarray], value: float, opts: CtelOptions, budget: int) -> tuple[float, bool]:
    """Run up to ``budget`` coordinate sweeps on ``us`` in place; returns (value, converged)."""
    gens = hermitian_generators(obj.d)
    for _ in range(budget):
        prev = value
        before = [u.copy() for u in us]
        for c in range(obj.m):
            for gen in gens:
                value = _improve(obj, us, c, gen, value, opts)
        # Powell-style extrapolation along each controller's net move this sweep.
        for c in range(obj.m):
            direction = _displacement_generator(before[c], us[c])
            if direction is not None:
                value = _improve(obj, us, c, direction, value, opts)
        if obj.mode == "general":
            value = max(value, obj.refresh_inner(us, full=True))
        if value >= _ONE or value - prev < opts.sweep_tol:
            return value, True
    return value, False


def _improve(obj: _PairObjective, us: list[np.ndarray], c: int, gen: np.ndarray, value: float, opts: CtelOptions) -> float:
    cand_value, cand_u = _line_search(obj, us, c, gen, opts)
    if cand_value <= value:
        return value
    us[c] = cand_u
    if obj.mode == "general":
        return max(cand_value, obj.refresh_inner(us, full=False))
    return cand_value


def _evaluate_fixed(rho: DensityMatrix, pi: int, pj: int, unitaries: Sequence[np.ndarray], inner: FefOptions, warm: Sequence[np.ndarray] | None = None) -> tuple[float, BranchTable, bool]:
    layout = rho.layout
    d = layout.uniform_dim()
    measured = [p for p in range(layout.n) if p not in (pi, pj)]
    labels = [layout.labels[p] for p in measured]
    table = measure_product_basis(rho, labels, unitaries)
    # measure_product_basis keeps systems in layout order; restore (i, j) order.
    swap = pi > pj
    total, converged = 0.0, True
    for jdx, br in enumerate(table.branches):
        if br.degenerate:
            continue
        sigma = br.state
        if swap:
            m = sigma.matrix.reshape(d, d, d, d).transpose(1, 0, 3, 2).reshape(d * d, d * d)
            sigma = DensityMatrix(layout.select([pi, pj]), m)
        evals, evecs = np.linalg.eigh(sigma.matrix)
        if evals[-1] > _ONE:
            value = fef_pure(Ket(sigma.layout, evecs[:, -1])).value
        elif d == 2:
            value = fef_exact_qubit(sigma).value
        else:
            starts = (warm[jdx],) if warm is not None else ()
            res = fef_general(sigma, inner, starts)
            value, converged = res.value, converged and res.converged
        total += br.probability * value
    return total, table, converged


def _finish(rho: DensityMatrix, pi: int, pj: int, us: Sequence[np.ndarray], inner: FefOptions, converged: bool, warm=None) -> CtelResult:
    d = rho.layout.uniform_dim()
    us = tuple(gauge_fix(np.asarray(u, dtype=complex)) for u in us)
    value, table, inner_conv = _evaluate_fixed(rho, pi, pj, us, inner, warm)
    fraction = min(1.0, max(1.0 / d**2, value))
    return CtelResult(
        pair=(rho.layout.labels[pi], rho.layout.labels[pj]),
        fraction=fraction,
        fidelity=float(fidelity_from_fraction(fraction, d)),
        maximizing_unitaries=us,
        branch_table=table,
        converged=converged and inner_conv,
        d=d,
    )


def ctel_fraction_fixed_basis(
    rho: State, i: str | int, j: str | int, unitaries: Sequence[np.ndarray], options: CtelOptions | None = None
) -> CtelResult:
    """Average branch fraction when the controllers measure in the given bases.

    ``unitaries`` follow the layout order of the N-2 controllers.
    """
    options = options or CtelOptions()
    rho = as_density(rho)
    if rho.layout.n < 3:
        raise ValueError(f"controlled teleportation needs N >= 3, got {rho.layout.n}")
    pi, pj = _resolve_pair(rho.layout, i, j)
    d = rho.layout.uniform_dim()
    if len(unitaries) != rho.layout.n - 2:
        raise ValueError(f"need {rho.layout.n - 2} controller unitaries, got {len(unitaries)}")
    us = [check_unitary(u, d) for u in unitaries]
    inner = FefOptions(restarts=FefOptions().restarts, max_iter=options.inner.max_iter, grad_tol=options.inner.grad_tol, seed=options.seed)
    return _finish(rho, pi, pj, us, inner, True)


def ctel_fraction(rho: State, i: str | int, j: str | int, options: CtelOptions | None = None) -> CtelResult:
    """Best pair fraction found over product controller bases.

    Starts: identity basis, Fourier (X) basis, then ``options.restarts``
    Haar-random bases. Ties keep the earliest start.
    """
    options = options or CtelOptions()
    rho = as_density(rho)
    pi, pj = _resolve_pair(rho.layout, i, j)
    obj = _PairObjective(rho, pi, pj, options.inner)
    d, m = obj.d, obj.m
    rng = np.random.default_rng(options.seed)
    starts = [[np.eye(d, dtype=complex)] * m, [fourier_unitary(d)] * m]
    starts += [[haar_unitary_matrix(d, rng) for _ in range(m)] for _ in range(options.restarts)]

    # Screening: every start gets a few sweeps, the best few run to convergence.
    runs = []
    for start in starts:
        us = [u.copy() for u in start]
        if obj.mode == "general":
            obj.inner_u = [np.eye(d, dtype=complex) for _ in range(obj.dm)]
        value = obj.refresh_inner(us, full=True)
        value, conv = _sweeps(obj, us, value, options, options.screen_sweeps)
        runs.append([value, us, conv, list(getattr(obj, "inner_u", []))])
        if value >= _ONE:
            break
    order = sorted(range(len(runs)), key=lambda r: (-runs[r][0], r))
    for r in order[: options.screen_keep]:
        run = runs[r]
        if run[2]:
            continue
        if obj.mode == "general":
            obj.inner_u = list(run[3])
        run[0], run[2] = _sweeps(obj, run[1], run[0], options, options.max_sweeps - options.screen_sweeps)
        run[3] = list(getattr(obj, "inner_u", []))
    best = None
    for run in runs:
        if best is None or run[0] > best[0] + 1e-12:
            best = run
    value, us, conv, warm = best
    if value < _ONE:
        # Only the winner is driven to the tight tolerance.
        if obj.mode == "general":
            obj.inner_u = list(warm)
        value, conv = _sweeps(obj, us, value, replace(options, sweep_tol=options.polish_tol), options.max_sweeps)
        warm = list(getattr(obj, "inner_u", []))
    converged = conv and (obj.mode != "general" or obj.inner_converged)
    return _finish(rho, pi, pj, us, options.inner, converged, warm or None)


def _pair_seed(seed: SeedLike, index: int) -> SeedLike:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.SeedSequence(entropy=0 if seed is None else seed, spawn_key=(index,))


def min_pair_fidelity(rho: State, options: CtelOptions | None = None) -> tuple[float, tuple[str, str], dict[tuple[str, str], CtelResult]]:
    """Minimum pair fidelity over all unordered pairs, pairs in lexicographic order.

    Each pair gets its own RNG stream derived from ``options.seed``.
    """
    options = options or CtelOptions()
    rho = as_density(rho)
    n = rho.layout.n
    if n < 3:
        raise ValueError(f"controlled teleportation needs N >= 3, got {n}")
    results: dict[tuple[str, str], CtelResult] = {}
    best_val, best_pair = np.inf, None
    for idx, (a, b) in enumerate(itertools.combinations(range(n), 2)):
        opts = replace(options, seed=_pair_seed(options.seed, idx))
        res = ctel_fraction(rho, a, b, opts)
        results[res.pair] = res
        if res.fidelity < best_val:
            best_val, best_pair = res.fidelity, res.pair
    return float(best_val), best_pair, results


@dataclass(frozen=True, eq=False)
class UsefulnessReport:
    d: int
    n: int
    min_fidelity: float
    argmin: tuple[str, str]
    thresholds: dict[int, Fraction]
    verdicts: dict[int, bool]
    largest_certified_k: int | None
    smallest_certified_k: int | None
    beats_classical: bool
    pair_results: dict[tuple[str, str], CtelResult]


def usefulness_report(rho: State, options: CtelOptions | None = None, margin: float = DEFAULT_TOLERANCES.verdict_margin) -> UsefulnessReport:
    """Which separability classes the state provably outperforms.

    ``verdicts[k]`` is True when the min pair fidelity exceeds ``T(d, N, k)``
    by more than ``margin``, certifying the state is not k-separable.
    """
    rho = as_density(rho)
    d = rho.layout.uniform_dim()
    n = rho.layout.n
    value, pair, results = min_pair_fidelity(rho, options)
    thresholds = {k: threshold_T(d, n, k) for k in range(2, n + 1)}
    verdicts = {k: value > float(t) + margin for k, t in thresholds.items()}
    certified = [k for k, v in verdicts.items() if v]
    return UsefulnessReport(
        d=d,
        n=n,
        min_fidelity=value,
        argmin=pair,
        thresholds=thresholds,
        verdicts=verdicts,
        largest_certified_k=max(certified) if certified else None,
        smallest_certified_k=min(certified) if certified else None,
        beats_classical=value > 2 / (d + 1) + margin,
        pair_results=results,
    )
