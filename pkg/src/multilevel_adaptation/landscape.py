"""NK performance landscapes with block-structured interdependence.

Bit conventions used throughout the package:

* A full solution of ``N`` decisions is a sequence of 0/1 values, decision 0
  first.  Its integer code puts decision 0 in the most significant bit, so the
  integer order equals the lexicographic order of the bitstring.
* Decisions are split into ``M`` consecutive blocks of ``S = N / M``; block
  ``m`` covers decisions ``m*S .. m*S + S - 1``.
* Each decision ``n`` owns a payoff table of ``2**(K+1)`` uniform draws.  The
  table index is formed from ``(d_n, d_i1, ..., d_iK)`` with ``d_n`` as the
  most significant bit and the dependencies in ascending decision order.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit

from ._rng import MASK64
from ._validation import check_count

MAX_ENUMERATION_BITS = 24


class Structure(str, enum.Enum):
    DECOMPOSED = "decomposed"
    INTERDEPENDENT = "interdependent"
    ROLL = "roll"
    CUSTOM = "custom"


def as_bits(d, length: int | None = None) -> np.ndarray:
    """Coerce a bitstring, 0/1 sequence or array into a uint8 vector."""
    if isinstance(d, str):
        if not set(d) <= {"0", "1"}:
            raise ValueError(f"not a bitstring: {d!r}")
        bits = np.frombuffer(d.encode(), dtype=np.uint8) - ord("0")
    else:
        bits = np.asarray(d)
        if bits.ndim != 1 or not np.isin(bits, (0, 1)).all():
            raise ValueError("solution must be a 1-d sequence of 0/1 values")
        bits = bits.astype(np.uint8)
    if length is not None and bits.size != length:
        raise ValueError(f"expected {length} bits, got {bits.size}")
    return bits


def bits_to_int(bits) -> int:
    value = 0
    for b in as_bits(bits):
        value = (value << 1) | int(b)
    return value


def int_to_bits(value: int, length: int) -> np.ndarray:
    if not 0 <= value < (1 << length):
        raise ValueError(f"{value} does not fit in {length} bits")
    shifts = np.arange(length - 1, -1, -1)
    return ((value >> shifts) & 1).astype(np.uint8)


def bits_to_str(bits) -> str:
    return "".join(str(int(b)) for b in as_bits(bits))


@dataclass(frozen=True)
class InterdependenceMatrix:
    """Which decisions co-determine each payoff contribution.

    ``rows[n]`` lists, in ascending order, the ``k`` decisions other than
    ``n`` itself that enter the contribution of decision ``n``.
    """

    n_decisions: int
    m_subtasks: int
    kind: Structure
    k: int
    rows: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        check_count("n_decisions", self.n_decisions, 1)
        check_count("m_subtasks", self.m_subtasks, 1)
        if self.n_decisions % self.m_subtasks:
            raise ValueError(
                f"invalid divisibility: {self.n_decisions} decisions cannot be split "
                f"into {self.m_subtasks} equal subtasks"
            )
        object.__setattr__(self, "kind", Structure(self.kind))
        rows = tuple(tuple(int(i) for i in row) for row in self.rows)
        object.__setattr__(self, "rows", rows)
        if len(rows) != self.n_decisions:
            raise ValueError(f"expected {self.n_decisions} rows, got {len(rows)}")
        for n, row in enumerate(rows):
            if len(row) != self.k:
                raise ValueError(f"row {n} has {len(row)} dependencies, expected k={self.k}")
            if list(row) != sorted(set(row)):
                raise ValueError(f"row {n} must list distinct indices in ascending order")
            if n in row:
                raise ValueError(f"row {n} lists itself as a dependency")
            if row and not (0 <= row[0] and row[-1] < self.n_decisions):
                raise ValueError(f"row {n} has an index outside [0, {self.n_decisions})")

    @property
    def block_size(self) -> int:
        return self.n_decisions // self.m_subtasks

    def block_of(self, n: int) -> int:
        return n // self.block_size

    def to_array(self) -> np.ndarray:
        """Boolean N x N pattern including the diagonal."""
        a = np.eye(self.n_decisions, dtype=bool)
        for n, row in enumerate(self.rows):
            a[n, list(row)] = True
        return a

    def to_text(self) -> str:
        return "".join(
            "".join("x" if v else "0" for v in line) + "\n" for line in self.to_array()
        )

    @classmethod
    def from_text(cls, text: str, m_subtasks: int) -> "InterdependenceMatrix":
        """Parse the ``0``/``x`` grid format (one row per line, diagonal set)."""
        lines = [ln.strip() for ln in text.splitlines()]
        lines = [ln for ln in lines if ln and not ln.startswith("#")]
        n = len(lines)
        if n == 0:
            raise ValueError("matrix file is empty")
        rows = []
        for i, line in enumerate(lines):
            if len(line) != n or not set(line) <= {"0", "x"}:
                raise ValueError(
                    f"matrix line {i + 1}: expected {n} characters from '0'/'x', got {line!r}"
                )
            if line[i] != "x":
                raise ValueError(f"matrix line {i + 1}: diagonal entry must be 'x'")
            rows.append(tuple(j for j, ch in enumerate(line) if ch == "x" and j != i))
        ks = {len(r) for r in rows}
        if len(ks) != 1:
            raise ValueError(f"every row needs the same number of dependencies, got {sorted(ks)}")
        return cls(n, m_subtasks, Structure.CUSTOM, ks.pop(), tuple(rows))

    @classmethod
    def load(cls, path, m_subtasks: int) -> "InterdependenceMatrix":
        return cls.from_text(Path(path).read_text(), m_subtasks)


def build_matrix(kind, n: int, m_subtasks: int, k: int) -> InterdependenceMatrix:
    """Construct one of the built-in interdependence patterns.

    ``interdependent`` couples each decision to the rest of its own block and
    to the ``k - (S - 1)`` decisions immediately after the block (cyclically).
    ``roll`` couples decision ``n`` to ``n+1 .. n+k`` modulo ``n``.
    """
    kind = Structure(kind)
    check_count("n", n, 1)
    check_count("m_subtasks", m_subtasks, 1)
    if n % m_subtasks:
        raise ValueError(f"invalid divisibility: n={n} is not a multiple of m_subtasks={m_subtasks}")
    if not 0 <= k < n:
        raise ValueError(f"k out of range: need 0 <= k < {n}, got {k}")
    s = n // m_subtasks
    rows = []
    if kind is Structure.DECOMPOSED:
        if k != s - 1:
            raise ValueError(
                f"decomposed with cross k: a block of {s} decisions supports only k={s - 1}, got {k}"
            )
        for i in range(n):
            start = (i // s) * s
            rows.append(tuple(j for j in range(start, start + s) if j != i))
    elif kind is Structure.INTERDEPENDENT:
        extra = k - (s - 1)
        if extra < 0 or extra > n - s:
            raise ValueError(
                f"k out of range: interdependent blocks of {s} need {s - 1} <= k <= {n - 1}, got {k}"
            )
        for i in range(n):
            start = (i // s) * s
            own = [j for j in range(start, start + s) if j != i]
            following = [(start + s + j) % n for j in range(extra)]
            rows.append(tuple(sorted(own + following)))
    elif kind is Structure.ROLL:
        for i in range(n):
            rows.append(tuple(sorted((i + j) % n for j in range(1, k + 1))))
    else:
        raise ValueError("custom matrices are loaded from a file, not built")
    return InterdependenceMatrix(n, m_subtasks, kind, k, tuple(rows))


@dataclass(frozen=True, eq=False)
class Landscape:
    matrix: InterdependenceMatrix
    tables: np.ndarray  # (N, 2**(K+1)) payoffs
    seed: int
    optimum: tuple[np.ndarray, float] = field(default=None)
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_decisions(self) -> int:
        return self.matrix.n_decisions

    @property
    def optimum_value(self) -> float:
        return self.optimum[1]

    def index_positions(self) -> np.ndarray:
        """Decision positions addressing each table, own decision first, shape (N, K+1)."""
        m = self.matrix
        positions = np.array([(n,) + row for n, row in enumerate(m.rows)], dtype=np.int64)
        return positions.reshape(m.n_decisions, m.k + 1)

    def contribution_table(self) -> np.ndarray:
        """Contributions of every decision for every full solution, shape (2**N, N)."""
        if "contrib" not in self._cache:
            n = self.n_decisions
            if n > MAX_ENUMERATION_BITS:
                raise ValueError(f"n too large for enumeration: {n} > {MAX_ENUMERATION_BITS}")
            self._cache["contrib"] = _contributions(self, np.arange(1 << n, dtype=np.int64))
        return self._cache["contrib"]

    def performance_table(self) -> np.ndarray:
        """Performance of every full solution, indexed by its integer code."""
        if "perf" not in self._cache:
            self._cache["perf"] = _row_mean(self.contribution_table())
        return self._cache["perf"]


@njit(cache=True)
def _lookup(codes, positions, tables, out):
    n_decisions, width = positions.shape
    for i in range(codes.size):
        x = codes[i]
        for n in range(n_decisions):
            index = 0
            for j in range(width):
                index = (index << 1) | ((x >> (n_decisions - 1 - positions[n, j])) & 1)
            out[i, n] = tables[n, index]


def _contributions(landscape: Landscape, codes: np.ndarray) -> np.ndarray:
    positions = landscape.index_positions()
    out = np.empty((codes.size, landscape.n_decisions))
    _lookup(codes, positions, landscape.tables, out)
    return out


def _row_mean(contrib: np.ndarray) -> np.ndarray:
    # left-to-right accumulation so results equal sum(row) / N bit for bit
    total = contrib[:, 0].copy()
    for n in range(1, contrib.shape[1]):
        total += contrib[:, n]
    return total / contrib.shape[1]


def generate(matrix: InterdependenceMatrix, seed: int) -> Landscape:
    """Draw payoff tables from Philox-4x64 keyed by ``seed`` and locate the optimum."""
    seed = int(seed) & MASK64
    rng = np.random.Generator(np.random.Philox(seed))
    tables = rng.random((matrix.n_decisions, 1 << (matrix.k + 1)))
    landscape = Landscape(matrix, tables, seed)
    object.__setattr__(landscape, "optimum", global_optimum(landscape))
    return landscape


def contribution(landscape: Landscape, d, n: int) -> float:
    N = landscape.n_decisions
    bits = as_bits(d, N)
    if not 0 <= n < N:
        raise IndexError(f"decision index {n} out of range [0, {N})")
    index = 0
    for pos in (n,) + landscape.matrix.rows[n]:
        index = (index << 1) | int(bits[pos])
    return float(landscape.tables[n, index])


def performance(landscape: Landscape, d) -> float:
    """Mean contribution over all decisions."""
    N = landscape.n_decisions
    bits = as_bits(d, N)
    if "perf" in landscape._cache:
        return float(landscape._cache["perf"][bits_to_int(bits)])
    return sum(contribution(landscape, bits, n) for n in range(N)) / N


def global_optimum(landscape: Landscape) -> tuple[np.ndarray, float]:
    """Exhaustive maximum; ties go to the smallest integer code."""
    N = landscape.n_decisions
    if N > MAX_ENUMERATION_BITS:
        raise ValueError(f"n too large for enumeration: {N} > {MAX_ENUMERATION_BITS}")
    if N <= 16:
        perf = landscape.performance_table()
        best = int(np.argmax(perf))
        return int_to_bits(best, N), float(perf[best])
    best, best_value = 0, -np.inf
    chunk = 1 << 16
    for start in range(0, 1 << N, chunk):
        codes = np.arange(start, start + chunk, dtype=np.int64)
        perf = _row_mean(_contributions(landscape, codes))
        i = int(np.argmax(perf))
        if perf[i] > best_value:
            best, best_value = start + i, float(perf[i])
    return int_to_bits(best, N), best_value
