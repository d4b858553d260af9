"""Dense multi-qudit states: layouts, kets, density matrices and measurements.

Subsystem order in a :class:`SystemLayout` fixes mixed-radix indexing with the
leftmost label varying slowest, so ``|i_1 ... i_N>`` sits at index
``sum_t i_t * prod_{s>t} d_s``.
"""

from __future__ import annotations

import json
import math
import os
import string
import tempfile
from dataclasses import dataclass, field
from functools import reduce
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np

from .config import DEFAULT_TOLERANCES, Tolerances, check_dim

SeedLike = Union[int, np.random.Generator, np.random.SeedSequence, None]


def as_generator(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class SystemLayout:
    labels: tuple[str, ...]
    dims: tuple[int, ...]

    def __post_init__(self) -> None:
        labels = tuple(str(label) for label in self.labels)
        dims = tuple(int(d) for d in self.dims)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "dims", dims)
        if len(labels) == 0:
            raise ValueError("layout needs at least one subsystem")
        if len(labels) != len(dims):
            raise ValueError(f"{len(labels)} labels but {len(dims)} dims")
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate subsystem labels in {labels}")
        if any(d < 2 for d in dims):
            raise ValueError(f"local dimensions must be >= 2, got {dims}")

    @classmethod
    def qudits(cls, n: int, d: int) -> "SystemLayout":
        """``n`` subsystems ``A1 .. An`` of local dimension ``d``."""
        return cls(tuple(f"A{i + 1}" for i in range(n)), (d,) * n)

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def total_dim(self) -> int:
        return math.prod(self.dims)

    def index(self, label: str | int) -> int:
        """Position of a subsystem given its label, or an integer position."""
        if isinstance(label, (int, np.integer)) and not isinstance(label, bool):
            if not 0 <= label < self.n:
                raise ValueError(f"subsystem position {label} out of range for {self.n} systems")
            return int(label)
        try:
            return self.labels.index(str(label))
        except ValueError:
            raise ValueError(f"unknown subsystem label {label!r}; layout has {self.labels}") from None

    def select(self, positions: Sequence[int]) -> "SystemLayout":
        return SystemLayout(tuple(self.labels[p] for p in positions), tuple(self.dims[p] for p in positions))

    def __add__(self, other: "SystemLayout") -> "SystemLayout":
        return SystemLayout(self.labels + other.labels, self.dims + other.dims)

    def uniform_dim(self) -> int:
        """The common local dimension; raises if the layout is heterogeneous."""
        if len(set(self.dims)) != 1:
            raise ValueError(f"expected equal local dimensions, got {self.dims}")
        return self.dims[0]


def _frozen(array: np.ndarray) -> np.ndarray:
    out = np.array(array, dtype=complex, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class Ket:
    layout: SystemLayout
    amplitudes: np.ndarray
    tol: Tolerances = field(default=DEFAULT_TOLERANCES, repr=False)

    def __post_init__(self) -> None:
        check_dim(self.layout.total_dim)
        amps = _frozen(np.asarray(self.amplitudes).reshape(-1))
        if amps.shape != (self.layout.total_dim,):
            raise ValueError(f"expected {self.layout.total_dim} amplitudes, got {amps.size}")
        if not np.all(np.isfinite(amps)):
            raise ValueError("amplitudes contain NaN or Inf")
        norm2 = float(np.vdot(amps, amps).real)
        if abs(norm2 - 1.0) > self.tol.norm:
            raise ValueError(f"ket is not normalized: squared norm {norm2!r}")
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_unnormalized(cls, layout: SystemLayout, vector: np.ndarray) -> "Ket":
        vector = np.asarray(vector, dtype=complex).reshape(-1)
        return cls(layout, vector / np.linalg.norm(vector))

    @property
    def dim(self) -> int:
        return self.layout.total_dim

    def density(self) -> "DensityMatrix":
        return DensityMatrix(self.layout, np.outer(self.amplitudes, self.amplitudes.conj()))

    def overlap(self, other: "Ket") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    layout: SystemLayout
    matrix: np.ndarray
    tol: Tolerances = field(default=DEFAULT_TOLERANCES, repr=False)

    def __post_init__(self) -> None:
        check_dim(self.layout.total_dim)
        m = _frozen(self.matrix)
        dim = self.layout.total_dim
        if m.shape != (dim, dim):
            raise ValueError(f"expected a {dim}x{dim} matrix, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("density matrix contains NaN or Inf")
        if np.max(np.abs(m - m.conj().T)) > self.tol.hermiticity:
            raise ValueError("density matrix is not Hermitian")
        tr = np.trace(m)
        if abs(tr - 1.0) > self.tol.trace:
            raise ValueError(f"density matrix trace is {tr!r}, expected 1")
        lam_min = float(np.linalg.eigvalsh((m + m.conj().T) / 2)[0])
        if lam_min < self.tol.psd_slack:
            raise ValueError(f"density matrix is not PSD: min eigenvalue {lam_min!r}")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def maximally_mixed(cls, layout: SystemLayout) -> "DensityMatrix":
        dim = layout.total_dim
        return cls(layout, np.eye(dim) / dim)

    @property
    def dim(self) -> int:
        return self.layout.total_dim

    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def purity(self) -> float:
        return float(np.real(np.vdot(self.matrix, self.matrix)))

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    def expectation(self, ket: np.ndarray | Ket) -> float:
        vec = ket.amplitudes if isinstance(ket, Ket) else np.asarray(ket, dtype=complex)
        return float(np.real(np.vdot(vec, self.matrix @ vec)))


State = Union[Ket, DensityMatrix]


def as_density(state: State) -> DensityMatrix:
    return state.density() if isinstance(state, Ket) else state


def check_unitary(matrix: np.ndarray, dim: int | None = None, tol: float = DEFAULT_TOLERANCES.unitarity) -> np.ndarray:
    """Return ``matrix`` as a complex array after checking ``U^dag U = I``."""
    u = np.asarray(matrix, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ValueError(f"unitary must be square, got shape {u.shape}")
    if dim is not None and u.shape[0] != dim:
        raise ValueError(f"expected a {dim}x{dim} unitary, got {u.shape[0]}x{u.shape[1]}")
    if np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) > tol:
        raise ValueError("matrix is not unitary")
    return u


def kron_all(mats: Iterable[np.ndarray]) -> np.ndarray:
    return reduce(np.kron, mats, np.ones((1, 1), dtype=complex))


def tensor(a: State, b: State) -> State:
    """Kronecker product; ``a`` supplies the slower-varying index."""
    layout = a.layout + b.layout
    if isinstance(a, Ket) and isinstance(b, Ket):
        return Ket(layout, np.kron(a.amplitudes, b.amplitudes))
    return DensityMatrix(layout, np.kron(as_density(a).matrix, as_density(b).matrix))


def partial_trace(rho: State, keep: Iterable[str | int]) -> DensityMatrix:
    """Reduced state on ``keep``; kept subsystems stay in layout order."""
    rho = as_density(rho)
    layout = rho.layout
    keep_pos = sorted({layout.index(label) for label in keep})
    if not keep_pos:
        raise ValueError("keep must name at least one subsystem")
    n = layout.n
    if len(keep_pos) == n:
        return rho
    letters = string.ascii_letters
    rows = [letters[i] for i in range(n)]
    cols = [letters[i] if i not in keep_pos else letters[n + i] for i in range(n)]
    out = "".join(rows[i] for i in keep_pos) + "".join(cols[i] for i in keep_pos)
    tensor_form = rho.matrix.reshape(layout.dims + layout.dims)
    reduced = np.einsum(f"{''.join(rows)}{''.join(cols)}->{out}", tensor_form)
    sub = layout.select(keep_pos)
    return DensityMatrix(sub, reduced.reshape(sub.total_dim, sub.total_dim), tol=rho.tol)


def controller_tensor(matrix: np.ndarray, dims: Sequence[int], measured: Sequence[int], kept: Sequence[int]) -> np.ndarray:
    """Reorder ``matrix`` so measured systems come first.

    Returns an array of shape ``(Dm, Dk, Dm, Dk)`` where ``Dm`` (``Dk``) is the
    product of the measured (kept) local dimensions, each group in the order given.
    """
    n = len(dims)
    order = list(measured) + list(kept)
    t = np.asarray(matrix).reshape(tuple(dims) * 2)
    t = t.transpose(order + [n + p for p in order])
    dm = math.prod(dims[p] for p in measured)
    dk = math.prod(dims[p] for p in kept)
    return t.reshape(dm, dk, dm, dk)


def branch_blocks(tensor4: np.ndarray, u_measured: np.ndarray) -> np.ndarray:
    """Unnormalised conditional states ``<J|U rho U^dag|J>`` for every outcome J.

    ``u_measured`` is the joint unitary on the measured systems, shape
    ``(Dm, Dm)`` or batched ``(T, Dm, Dm)``. Output shape is ``(..., Dm, Dk, Dk)``.
    """
    if u_measured.ndim == 2:
        return np.einsum("jb,bkcl,jc->jkl", u_measured, tensor4, u_measured.conj(), optimize=True)
    return np.einsum("tjb,bkcl,tjc->tjkl", u_measured, tensor4, u_measured.conj(), optimize=True)


def outcome_digits(dims: Sequence[int]) -> list[tuple[int, ...]]:
    """All outcome digit vectors in lexicographic order."""
    return [tuple(int(x) for x in idx) for idx in np.ndindex(*dims)] if dims else [()]


@dataclass(frozen=True, eq=False)
class Branch:
    outcome: tuple[int, ...]
    probability: float
    state: DensityMatrix
    degenerate: bool = False


@dataclass(frozen=True, eq=False)
class BranchTable:
    measured: tuple[str, ...]
    unitaries: tuple[np.ndarray, ...]
    branches: tuple[Branch, ...]

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([b.probability for b in self.branches])

    def average_state(self) -> np.ndarray:
        return sum(b.probability * b.state.matrix for b in self.branches)


def measure_product_basis(
    rho: State,
    parties: Sequence[str | int],
    unitaries: Sequence[np.ndarray],
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> BranchTable:
    """Measure ``parties`` in the product basis ``{U^dag |j>}``.

    Outcome ``J`` occurs with probability ``<J|U rho U^dag|J>``; each branch holds
    the normalised state of the unmeasured systems. Branches below the
    probability floor get a maximally mixed placeholder flagged ``degenerate``.
    """
    rho = as_density(rho)
    layout = rho.layout
    measured = [layout.index(p) for p in parties]
    if len(set(measured)) != len(measured):
        raise ValueError("measured parties must be distinct")
    if len(unitaries) != len(measured):
        raise ValueError(f"need one unitary per measured party: {len(measured)} parties, {len(unitaries)} unitaries")
    kept = [p for p in range(layout.n) if p not in measured]
    if not kept:
        raise ValueError("at least one subsystem must remain unmeasured")
    us = tuple(check_unitary(u, layout.dims[p], tol.unitarity) for u, p in zip(unitaries, measured))
    t4 = controller_tensor(rho.matrix, layout.dims, measured, kept)
    blocks = branch_blocks(t4, kron_all(us))
    kept_layout = layout.select(kept)
    branches = []
    for outcome, block in zip(outcome_digits([layout.dims[p] for p in measured]), blocks):
        prob = float(np.trace(block).real)
        if prob < tol.probability_floor:
            branches.append(Branch(outcome, max(prob, 0.0), DensityMatrix.maximally_mixed(kept_layout), True))
            continue
        state = block / prob
        state = (state + state.conj().T) / 2
        if prob < 1e-6:
            # Rounding in the block is amplified by 1/prob; clip back onto the PSD cone.
            vals, vecs = np.linalg.eigh(state)
            if vals[0] < 0:
                vals = np.clip(vals, 0.0, None)
                state = (vecs * (vals / vals.sum())) @ vecs.conj().T
                state = (state + state.conj().T) / 2
        branches.append(Branch(outcome, prob, DensityMatrix(kept_layout, state, tol=tol)))
    return BranchTable(tuple(layout.labels[p] for p in measured), us, tuple(branches))


def haar_vector(dim: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return z / np.linalg.norm(z)


def haar_unitary_matrix(dim: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    diag = np.diag(r)
    return q * (diag / np.abs(diag))


def haar_random_ket(d: int, seed: SeedLike = None, label: str = "A1") -> Ket:
    """Haar-distributed pure state of one ``d``-level system."""
    if d < 2:
        raise ValueError("d must be >= 2")
    return Ket(SystemLayout((label,), (d,)), haar_vector(d, as_generator(seed)))


def haar_random_unitary(d: int, seed: SeedLike = None) -> np.ndarray:
    """Haar-distributed ``d x d`` unitary (QR of a Ginibre matrix, phase-fixed)."""
    if d < 2:
        raise ValueError("d must be >= 2")
    return haar_unitary_matrix(d, as_generator(seed))


# ---------------------------------------------------------------------------
# State files


class StateFormatError(ValueError):
    """A state file could not be parsed into a valid state."""


def _fmt(x: float) -> str:
    text = format(float(x), ".17g")
    if text in {"nan", "inf", "-inf"}:
        raise ValueError("cannot serialise non-finite value")
    return text


def state_to_json(state: State) -> str:
    if isinstance(state, Ket):
        kind, values = "ket", state.amplitudes
    else:
        kind, values = "density", state.matrix.reshape(-1)
    data = ",".join(f"[{_fmt(v.real)},{_fmt(v.imag)}]" for v in values)
    return (
        "{"
        f'"kind": {json.dumps(kind)}, '
        f'"labels": {json.dumps(list(state.layout.labels))}, '
        f'"dims": {json.dumps(list(state.layout.dims))}, '
        f'"data": [{data}]'
        "}\n"
    )


def state_from_json(text: str) -> State:
    try:
        doc = json.loads(text)
        kind = doc["kind"]
        layout = SystemLayout(tuple(doc["labels"]), tuple(int(d) for d in doc["dims"]))
        values = np.array([complex(float(re), float(im)) for re, im in doc["data"]])
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise StateFormatError(f"malformed state file: {exc}") from exc
    dim = layout.total_dim
    try:
        if kind == "ket":
            return Ket(layout, values)
        if kind == "density":
            if values.size != dim * dim:
                raise StateFormatError(f"density data has {values.size} entries, expected {dim * dim}")
            return DensityMatrix(layout, values.reshape(dim, dim))
    except StateFormatError:
        raise
    except ValueError as exc:
        raise StateFormatError(str(exc)) from exc
    raise StateFormatError(f"unknown state kind {kind!r}")


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    """Write via a temporary file in the target directory, then rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_state(path: str | os.PathLike, state: State) -> None:
    atomic_write_text(path, state_to_json(state))


def read_state(path: str | os.PathLike) -> State:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise StateFormatError(f"cannot read {path}: {exc}") from exc
    return state_from_json(text)
