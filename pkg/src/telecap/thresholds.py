"""Exact separability thresholds for controlled teleportation and the partition
combinatorics behind them.

Every threshold is a :class:`fractions.Fraction`; floats appear only when rows
are serialised.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import comb
from typing import Iterator, Sequence

N_ENUM_MAX = 12


@dataclass(frozen=True)
class Partition:
    """Partition of parties ``0 .. n-1`` into nonempty blocks.

    Blocks are stored sorted internally and ordered by smallest member.
    """

    blocks: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        blocks = tuple(sorted((tuple(sorted(b)) for b in self.blocks), key=lambda b: b[0] if b else -1))
        if any(len(b) == 0 for b in blocks):
            raise ValueError("partition blocks must be nonempty")
        members = [x for b in blocks for x in b]
        if len(set(members)) != len(members):
            raise ValueError("partition blocks overlap")
        if sorted(members) != list(range(len(members))):
            raise ValueError(f"blocks must cover 0..{len(members) - 1} exactly")
        object.__setattr__(self, "blocks", blocks)

    @classmethod
    def from_rgs(cls, rgs: Sequence[int]) -> "Partition":
        k = max(rgs) + 1
        return cls(tuple(tuple(i for i, a in enumerate(rgs) if a == b) for b in range(k)))

    @property
    def n(self) -> int:
        return sum(len(b) for b in self.blocks)

    @property
    def k(self) -> int:
        return len(self.blocks)

    def block_of(self, party: int) -> int:
        for idx, block in enumerate(self.blocks):
            if party in block:
                return idx
        raise ValueError(f"party {party} not in partition")

    def together(self, i: int, j: int) -> bool:
        return self.block_of(i) == self.block_of(j)

    def intra_block_pairs(self) -> int:
        return sum(comb(len(b), 2) for b in self.blocks)

    def describe(self, labels: Sequence[str] | None = None) -> str:
        labels = labels or [f"A{i + 1}" for i in range(self.n)]
        return "".join("{" + "".join(labels[i] for i in b) + "}" for b in self.blocks)


def _check_dnk(d: int, n: int, k: int) -> None:
    if d < 2:
        raise ValueError(f"d must be >= 2, got {d}")
    if n < 3:
        raise ValueError(f"N must be >= 3, got {n}")
    if not 2 <= k <= n:
        raise ValueError(f"k must satisfy 2 <= k <= N={n}, got {k}")


def threshold_T(d: int, n: int, k: int) -> Fraction:
    """Largest min-pair fidelity any ``k``-separable ``N``-qudit state can reach."""
    _check_dnk(d, n, k)
    return Fraction(2, d + 1) + Fraction(d - 1, d + 1) * Fraction((n - k + 1) * (n - k), n * (n - 1))


def min_entangled_parties(n: int) -> int:
    return -(-n // 2)


def threshold_Te(d: int, n: int, m: int) -> Fraction:
    """Bound for biseparable states whose pure components entangle at most ``m`` parties."""
    if d < 2:
        raise ValueError(f"d must be >= 2, got {d}")
    if n < 3:
        raise ValueError(f"N must be >= 3, got {n}")
    if not min_entangled_parties(n) <= m <= n - 1:
        raise ValueError(f"m must satisfy ceil(N/2)={min_entangled_parties(n)} <= m <= N-1={n - 1}, got {m}")
    return 1 - Fraction(2 * (d - 1) * m * (n - m), (d + 1) * n * (n - 1))


def threshold_Te_limit(d: int, gamma: Fraction | int) -> Fraction:
    """Large-N limit of ``threshold_Te(d, N, gamma N)``."""
    gamma = Fraction(gamma)
    if d < 2:
        raise ValueError(f"d must be >= 2, got {d}")
    if not Fraction(1, 2) <= gamma <= 1:
        raise ValueError(f"gamma must lie in [1/2, 1], got {gamma}")
    return 1 - Fraction(2 * (d - 1), d + 1) * gamma * (1 - gamma)


def restricted_growth_strings(n: int, k: int) -> Iterator[tuple[int, ...]]:
    """Restricted growth strings of length ``n`` using exactly ``k`` values, in lex order."""
    if n == 0:
        if k == 0:
            yield ()
        return
    a = [0] * n

    def rec(pos: int, top: int) -> Iterator[tuple[int, ...]]:
        remaining = n - pos
        if remaining == 0:
            if top + 1 == k:
                yield tuple(a)
            return
        # Not enough positions left to open the missing blocks.
        if top + 1 + remaining < k:
            return
        for v in range(min(top + 2, k)):
            a[pos] = v
            yield from rec(pos + 1, max(top, v))

    a[0] = 0
    yield from rec(1, 0)


def enumerate_partitions(n: int, k: int) -> Iterator[Partition]:
    """Every partition of ``n`` parties into exactly ``k`` blocks."""
    if not 1 <= k <= n <= N_ENUM_MAX:
        raise ValueError(f"need 1 <= k <= N <= {N_ENUM_MAX}, got N={n}, k={k}")
    for rgs in restricted_growth_strings(n, k):
        yield Partition.from_rgs(rgs)


def stirling2(n: int, k: int) -> int:
    """Stirling number of the second kind by the standard recurrence."""
    table = [[0] * (k + 1) for _ in range(n + 1)]
    table[0][0] = 1
    for i in range(1, n + 1):
        for j in range(1, min(i, k) + 1):
            table[i][j] = j * table[i - 1][j] + table[i - 1][j - 1]
    return table[n][k]


def max_intra_block_pairs(n: int, k: int) -> tuple[int, Partition]:
    """Brute-force max of ``sum_t C(|P_t|, 2)`` over ``k``-block partitions.

    The first maximiser in enumeration order is returned as the witness.
    """
    if not 2 <= k <= n <= N_ENUM_MAX:
        raise ValueError(f"need 2 <= k <= N <= {N_ENUM_MAX}, got N={n}, k={k}")
    best, witness = -1, None
    for part in enumerate_partitions(n, k):
        value = part.intra_block_pairs()
        if value > best:
            best, witness = value, part
    return best, witness


def fij_upper_bound_for_mixture(
    weights: Sequence[tuple[Partition, Fraction]], i: int, j: int, d: int
) -> Fraction:
    """Upper bound on the pair fraction of a mixture of partition-separable states.

    ``1/d + (d-1)/d * (total weight of partitions keeping i and j together)``.
    """
    if i == j:
        raise ValueError("pair members must differ")
    total = Fraction(0)
    together = Fraction(0)
    for part, w in weights:
        w = Fraction(w)
        if w < 0:
            raise ValueError(f"negative weight {w}")
        total += w
        if part.together(i, j):
            together += w
    if total != 1:
        raise ValueError(f"weights must sum to 1, got {total}")
    return Fraction(1, d) + Fraction(d - 1, d) * together


def extremal_pair_fraction(d: int, n: int, k: int) -> Fraction:
    """Pair fraction of the symmetric extremal ``k``-separable state."""
    _check_dnk(d, n, k)
    return Fraction(1, d) + Fraction(d - 1, d) * Fraction(comb(n - 2, k - 1), comb(n, k - 1))


def gme_bound(n: int) -> Fraction:
    """Mixing weight above which the isotropic GHZ state is genuinely N-partite entangled."""
    return Fraction(2 ** (n - 1) - 1, 2**n - 1)


# ---------------------------------------------------------------------------
# table rows: (d, N, k_or_m, numerator, denominator, float)

Row = tuple[int, int, int, int, int, float]

M_SPECS = ("half", "twothirds", "nminus1")


def m_for_spec(n: int, spec: str) -> int | None:
    """Entangled-party cap for a named proportion, or None when not an integer."""
    if spec == "half":
        return n // 2 if n % 2 == 0 else None
    if spec == "twothirds":
        return 2 * n // 3 if n % 3 == 0 else None
    if spec == "nminus1":
        return n - 1
    raise ValueError(f"unknown m-spec {spec!r}; expected one of {M_SPECS}")


def _row(d: int, n: int, x: int, value: Fraction) -> Row:
    return (d, n, x, value.numerator, value.denominator, float(value))


def threshold_table(d: int, n_min: int, n_max: int, k: int | None = None) -> list[Row]:
    """Rows of ``threshold_T`` in (N, k) order; ``k=None`` means every k."""
    rows = []
    for n in range(n_min, n_max + 1):
        ks = range(2, n + 1) if k is None else ([k] if 2 <= k <= n else [])
        rows.extend(_row(d, n, kk, threshold_T(d, n, kk)) for kk in ks)
    return rows


def te_table(d: int, n_min: int, n_max: int, spec: str) -> list[Row]:
    rows = []
    for n in range(n_min, n_max + 1):
        m = m_for_spec(n, spec)
        if m is None or not min_entangled_parties(n) <= m <= n - 1:
            continue
        rows.append(_row(d, n, m, threshold_Te(d, n, m)))
    return rows
