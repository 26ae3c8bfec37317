"""The XOR grid as a linear code over GF(2).

Every level-k bit of the XOR grid is the root bit plus a sum of edge-noise
bits, so level k is described by a parity matrix H_k whose first column is
the root coefficient and whose other columns are the edges of levels 1..k.

Edge columns are ordered level-major, then by child position, then by side:
the edge from the left parent (n-1, j-1) comes before the edge from the right
parent (n-1, j).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, ParameterError
from .grid_core import K_MAX_DEFAULT, XOR, exact_tv_distance

MAGIC = b"GF2H"
HEADER = struct.Struct("<4sIII")  # magic, k, rows, cols: 16 bytes
MAX_K = 64

LEFT, RIGHT = 0, 1


def lucas_parity(k: int, j: int) -> int:
    """binom(k, j) mod 2, by Lucas: odd iff the bits of j are a subset of k's."""
    if k < 0 or not 0 <= j <= k:
        raise ParameterError(f"need 0 <= j <= k, got k={k}, j={j}")
    return int(j & k == j)


class BitMatrix:
    """Dense GF(2) matrix, rows packed into little-endian 64-bit words."""

    __slots__ = ("rows", "cols", "_words")

    def __init__(self, rows: int, cols: int, words: np.ndarray):
        n_words = (cols + 63) // 64
        words = np.asarray(words, dtype=np.uint64)
        if words.shape != (rows, n_words):
            raise ContractError(f"expected word array of shape {(rows, n_words)}, got {words.shape}")
        self.rows = rows
        self.cols = cols
        self._words = words.copy()
        self._words.flags.writeable = False

    @classmethod
    def from_int_rows(cls, row_ints: list[int], cols: int) -> BitMatrix:
        n_words = (cols + 63) // 64
        words = np.zeros((len(row_ints), n_words), dtype=np.uint64)
        for i, x in enumerate(row_ints):
            if x >> cols:
                raise ContractError("row has bits beyond the column count")
            for w in range(n_words):
                words[i, w] = (x >> (64 * w)) & 0xFFFFFFFFFFFFFFFF
        return cls(len(row_ints), cols, words)

    @classmethod
    def from_dense(cls, a) -> BitMatrix:
        a = np.asarray(a, dtype=np.int64) % 2
        rows = [int("".join(map(str, r[::-1])), 2) if len(r) else 0 for r in a.tolist()]
        return cls.from_int_rows(rows, a.shape[1])

    @property
    def words(self) -> np.ndarray:
        return self._words

    def row_int(self, i: int) -> int:
        x = 0
        for w in reversed(self._words[i].tolist()):
            x = (x << 64) | int(w)
        return x

    def row_ints(self) -> list[int]:
        return [self.row_int(i) for i in range(self.rows)]

    def __getitem__(self, ij: tuple[int, int]) -> int:
        i, j = ij
        if not (0 <= i < self.rows and 0 <= j < self.cols):
            raise IndexError(ij)
        return int(self._words[i, j // 64] >> np.uint64(j % 64)) & 1

    def column(self, j: int) -> list[int]:
        return [self[i, j] for i in range(self.rows)]

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.rows, self.cols), dtype=np.uint8)
        for i, x in enumerate(self.row_ints()):
            for j in range(self.cols):
                out[i, j] = (x >> j) & 1
        return out

    def matvec(self, v) -> list[int]:
        """H v over GF(2); v is a 0/1 sequence of length cols."""
        if len(v) != self.cols:
            raise ContractError("vector length does not match column count")
        x = sum(1 << j for j, b in enumerate(v) if b & 1)
        return [(r & x).bit_count() & 1 for r in self.row_ints()]

    def rank(self) -> int:
        """GF(2) rank by elimination: leftmost pivot column, first available row."""
        rows = self.row_ints()
        rank = 0
        for j in range(self.cols):
            bit = 1 << j
            p = next((i for i in range(rank, len(rows)) if rows[i] & bit), None)
            if p is None:
                continue
            rows[rank], rows[p] = rows[p], rows[rank]
            for i in range(len(rows)):
                if i != rank and rows[i] & bit:
                    rows[i] ^= rows[rank]
            rank += 1
            if rank == len(rows):
                break
        return rank

    def __eq__(self, other) -> bool:
        return (isinstance(other, BitMatrix) and self.rows == other.rows and self.cols == other.cols
                and np.array_equal(self._words, other._words))

    def __repr__(self) -> str:
        return f"BitMatrix({self.rows}x{self.cols})"


@dataclass(frozen=True)
class ParityMatrix:
    k: int
    H: BitMatrix
    edge_index: dict  # (level, position, side) -> column

    @property
    def n_edges(self) -> int:
        return len(self.edge_index)


def edge_order(k: int) -> dict[tuple[int, int, int], int]:
    """Column of every edge (level n, child position j, side) for levels 1..k."""
    out = {}
    col = 1
    for n in range(1, k + 1):
        for j in range(n + 1):
            for side in (LEFT, RIGHT):
                parent = j - 1 if side == LEFT else j
                if 0 <= parent <= n - 1:
                    out[(n, j, side)] = col
                    col += 1
    return out


def build_parity_matrix(k: int) -> ParityMatrix:
    """Forward recursion: a vertex row is the XOR of its parents' rows plus
    the indicator of each incoming edge."""
    if not 1 <= k <= MAX_K:
        raise ParameterError(f"k must lie in [1, {MAX_K}]")
    idx = edge_order(k)
    level = [1]  # root: X_0 itself (column 0)
    for n in range(1, k + 1):
        nxt = []
        for j in range(n + 1):
            row = 0
            for side in (LEFT, RIGHT):
                col = idx.get((n, j, side))
                if col is not None:
                    parent = j - 1 if side == LEFT else j
                    row ^= level[parent] ^ (1 << col)
            nxt.append(row)
        level = nxt
    return ParityMatrix(k, BitMatrix.from_int_rows(level, 1 + len(idx)), idx)


def _power_of_two_exponent(k: int) -> int:
    if k < 2 or k & (k - 1):
        raise ParameterError(f"k={k} is not a power of two >= 2")
    return k.bit_length() - 1


def special_codeword(k: int) -> tuple[list[int], bool]:
    """omega^k: root plus the two outermost edges into level k. Returns the
    vector and whether H_k omega^k = 0."""
    _power_of_two_exponent(k)
    pm = build_parity_matrix(k)
    omega = [0] * pm.H.cols
    omega[0] = 1
    omega[pm.edge_index[(k, 0, RIGHT)]] = 1  # (k-1, 0) -> (k, 0)
    omega[pm.edge_index[(k, k, LEFT)]] = 1  # (k-1, k-1) -> (k, k)
    return omega, not any(pm.H.matvec(omega))


def exact_ml_error_xor(delta: float, k: int, k_max: int = K_MAX_DEFAULT) -> float:
    """Minimum probability of error for recovering X_0 from level k."""
    if k < 1:
        raise ParameterError("k must be >= 1")
    return 0.5 * (1.0 - exact_tv_distance(XOR, delta, k, k_max))


def erasure_error_lower_bound(delta: float, m: int) -> float:
    """(1/2) P(A_m) with P(A_m) = 1 - (1 - 4 delta^2)^m; bounds the ML error at k = 2^m."""
    if m < 1:
        raise ParameterError("m must be >= 1")
    if not 0 < delta < 0.5:
        raise ParameterError("delta must lie strictly between 0 and 1/2")
    return 0.5 * (1.0 - (1.0 - 4.0 * delta * delta) ** m)


# ---------------------------------------------------------------- serialization

def to_text(H: BitMatrix) -> str:
    """One line of 0/1 characters per row."""
    dense = H.to_dense()
    return "".join("".join("1" if b else "0" for b in row) + "\n" for row in dense)


def from_text(text: str) -> BitMatrix:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or any(set(ln) - {"0", "1"} for ln in lines):
        raise ParameterError("text matrix must be non-empty lines of 0/1")
    if len({len(ln) for ln in lines}) != 1:
        raise ParameterError("ragged text matrix")
    return BitMatrix.from_dense([[int(c) for c in ln] for ln in lines])


def to_bytes(H: BitMatrix, k: int) -> bytes:
    return HEADER.pack(MAGIC, k, H.rows, H.cols) + H.words.astype("<u8").tobytes()


def from_bytes(data: bytes) -> tuple[int, BitMatrix]:
    if len(data) < HEADER.size:
        raise ParameterError("truncated header")
    magic, k, rows, cols = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ParameterError(f"bad magic {magic!r}")
    n_words = (cols + 63) // 64
    body = data[HEADER.size:]
    if len(body) != 8 * rows * n_words:
        raise ParameterError("payload size does not match header")
    words = np.frombuffer(body, dtype="<u8").reshape(rows, n_words)
    return k, BitMatrix(rows, cols, words)
