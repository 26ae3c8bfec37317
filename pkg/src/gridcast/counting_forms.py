"""Counting forms: rational combinations of pattern-counting clauses over the
alphabet {0, 1, u}, with acyclic/cyclic evaluation, purification, the one-step
conditional expectation operator, and coefficient-vector encodings.

Strings are plain Python str over "01u". The index of a rank-s pattern reads
the string as a base-3 numeral with u = 2 and the leftmost letter most
significant, so "000" < "001" < "00u" < "010" < ... < "uuu".
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import product
from math import lcm
from types import MappingProxyType

import numpy as np

from .errors import ContractError, ParameterError
from .grid_core import NAND, GateRule, channel_matrix, get_rule
from .rational import to_fraction

ALPHABET = "01u"
_CODE = {"0": 0, "1": 1, "u": 2}
_TO_DIGITS = str.maketrans("u", "2")


def check_pattern(v: str) -> str:
    if not isinstance(v, str) or not v or any(c not in _CODE for c in v):
        raise ContractError(f"not a non-empty string over {{0,1,u}}: {v!r}")
    return v


def pattern_index(v: str) -> int:
    return int(check_pattern(v).translate(_TO_DIGITS), 3)


def index_pattern(i: int, s: int) -> str:
    out = []
    for _ in range(s):
        i, t = divmod(i, 3)
        out.append(ALPHABET[t])
    if i:
        raise ParameterError("index out of range for rank")
    return "".join(reversed(out))


def all_strings(s: int) -> list[str]:
    """All strings of length s in index order."""
    return ["".join(p) for p in product(ALPHABET, repeat=s)]


def in_star(y: str, r: int) -> bool:
    """True when |y| >= r and the first and last r letters are u-free."""
    return len(y) >= r and "u" not in y[:r] and "u" not in y[-r:]


def _sort_key(v: str) -> tuple[int, int]:
    return len(v), pattern_index(v)


class CountingForm:
    """Immutable finite map pattern -> nonzero Fraction."""

    __slots__ = ("_terms",)

    def __init__(self, terms=None):
        acc: dict[str, Fraction] = {}
        items = terms.items() if hasattr(terms, "items") else (terms or ())
        for v, c in items:
            check_pattern(v)
            acc[v] = acc.get(v, Fraction(0)) + to_fraction(c)
        self._terms = {v: acc[v] for v in sorted(acc, key=_sort_key) if acc[v] != 0}

    @property
    def terms(self):
        return MappingProxyType(self._terms)

    def items(self):
        return self._terms.items()

    def __len__(self) -> int:
        return len(self._terms)

    def __bool__(self) -> bool:
        return bool(self._terms)

    @property
    def rank(self) -> int:
        return max((len(v) for v in self._terms), default=0)

    @property
    def is_pure(self) -> bool:
        return len({len(v) for v in self._terms}) <= 1

    @property
    def is_u_only(self) -> bool:
        return all("u" in v for v in self._terms)

    def coefficient(self, v: str) -> Fraction:
        return self._terms.get(v, Fraction(0))

    def __add__(self, other: CountingForm) -> CountingForm:
        if not isinstance(other, CountingForm):
            return NotImplemented
        acc = dict(self._terms)
        for v, c in other.items():
            acc[v] = acc.get(v, Fraction(0)) + c
        return CountingForm(acc)

    def __neg__(self) -> CountingForm:
        return CountingForm({v: -c for v, c in self.items()})

    def __sub__(self, other: CountingForm) -> CountingForm:
        if not isinstance(other, CountingForm):
            return NotImplemented
        return self + (-other)

    def __mul__(self, a) -> CountingForm:
        a = to_fraction(a)
        return CountingForm({v: a * c for v, c in self.items()})

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        return isinstance(other, CountingForm) and self._terms == other._terms

    def __hash__(self) -> int:
        return hash(tuple(self._terms.items()))

    def __repr__(self) -> str:
        if not self._terms:
            return "CountingForm(0)"
        parts = [f"{c}{{{v}}}" for v, c in self.items()]
        return "CountingForm(" + " + ".join(parts) + ")"

    def to_json(self) -> dict:
        return {
            "rank": self.rank,
            "terms": [{"pattern": v, "num": c.numerator, "den": c.denominator} for v, c in self.items()],
        }

    @classmethod
    def from_json(cls, d: dict) -> CountingForm:
        try:
            terms = [(t["pattern"], Fraction(int(t["num"]), int(t.get("den", 1)))) for t in d["terms"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise ParameterError(f"malformed counting form: {exc}") from None
        return cls(terms)


ZERO = CountingForm()


def clause(v: str, coeff=1) -> CountingForm:
    return CountingForm({v: coeff})


def _count(v: str, y: str) -> int:
    n, i = 0, y.find(v)
    while i >= 0:
        n += 1
        i = y.find(v, i + 1)
    return n


def eval_acyclic(w: CountingForm, y: str) -> Fraction:
    check_pattern(y)
    return sum((c * _count(v, y) for v, c in w.items()), Fraction(0))


def eval_cyclic(w: CountingForm, y: str) -> Fraction:
    check_pattern(y)
    k = len(y)
    total = Fraction(0)
    for v, c in w.items():
        if len(v) <= k:
            total += c * _count(v, y + y[: len(v) - 1])
    return total


def purify(w: CountingForm, t: int, side: str = "right") -> CountingForm:
    """Rewrite every clause as the sum of its extensions to length t.

    Right purification appends letters, left purification prepends them.
    For u-only w the result agrees with w on strings whose first and last t
    letters are u-free; cyclically it agrees on all strings of length >= t.
    """
    if t < w.rank:
        raise ParameterError(f"t={t} is below rank {w.rank}")
    if side not in ("right", "left"):
        raise ParameterError("side must be 'right' or 'left'")
    acc: dict[str, Fraction] = {}
    for v, c in w.items():
        for ext in all_strings(t - len(v)) if t > len(v) else [""]:
            key = v + ext if side == "right" else ext + v
            acc[key] = acc.get(key, Fraction(0)) + c
    return CountingForm(acc)


@lru_cache(maxsize=64)
def _pair_kernel(rule: GateRule, delta: Fraction) -> tuple:
    """q[a][b][c] = P(gate(W(a), W(b)) = c) over letter codes."""
    w = channel_matrix(delta)
    q = [[[Fraction(0)] * 3 for _ in range(3)] for _ in range(3)]
    for a, b, x, y in product(range(3), repeat=4):
        p = w[a][x] * w[b][y]
        if p:
            q[a][b][rule.coupled_table[x][y]] += p
    return tuple(tuple(tuple(row) for row in qa) for qa in q)


def transition_prob(v: str, z: str, rule=NAND, delta=0) -> Fraction:
    """P(next-level interior window = v | current window = z), |z| = |v| + 1."""
    check_pattern(v)
    check_pattern(z)
    if len(z) != len(v) + 1:
        raise ParameterError("need len(z) == len(v) + 1")
    q = _pair_kernel(get_rule(rule), to_fraction(delta))
    p = Fraction(1)
    for i, c in enumerate(v):
        p *= q[_CODE[z[i]]][_CODE[z[i + 1]]][_CODE[c]]
        if not p:
            break
    return p


def cond_expectation(w: CountingForm, rule=NAND, delta=0) -> CountingForm:
    """The form whose value on a level is the expected value of w one level on."""
    q = _pair_kernel(get_rule(rule), to_fraction(delta))
    acc: dict[str, Fraction] = {}
    for v, coeff in w.items():
        target = [_CODE[c] for c in v]
        # extend z letter by letter, keeping only prefixes of positive probability
        frontier = [((a,), coeff) for a in range(3)]
        for c in target:
            nxt = []
            for z, p in frontier:
                for b in range(3):
                    pb = q[z[-1]][b][c]
                    if pb:
                        nxt.append((z + (b,), p * pb))
            frontier = nxt
        for z, p in frontier:
            key = "".join(ALPHABET[a] for a in z)
            acc[key] = acc.get(key, Fraction(0)) + p
    return CountingForm(acc)


def harmonic_form() -> CountingForm:
    return CountingForm({"u": 2, "u1": 1, "1u": 1, "u10": 1, "01u": 1, "0u0": -2})


def rho(v: str) -> CountingForm:
    """sum_z ({vz} - {zv}); cyclically null of pure rank len(v) + 1."""
    check_pattern(v)
    acc: dict[str, Fraction] = {}
    for z in ALPHABET:
        acc[v + z] = acc.get(v + z, Fraction(0)) + 1
        acc[z + v] = acc.get(z + v, Fraction(0)) - 1
    return CountingForm(acc)


@dataclass(frozen=True)
class CoeffVector:
    rank: int
    entries: tuple[Fraction, ...]

    def __post_init__(self):
        if len(self.entries) != 3**self.rank:
            raise ContractError(f"rank {self.rank} needs {3 ** self.rank} entries")


def to_coeff_vector(w: CountingForm, rank: int | None = None) -> CoeffVector:
    s = w.rank if rank is None else rank
    if not w.is_pure or (w and w.rank != s):
        raise ContractError("coefficient vectors need a pure-rank form")
    if s < 1:
        raise ContractError("rank must be >= 1")
    x = [Fraction(0)] * 3**s
    for v, c in w.items():
        x[pattern_index(v)] = c
    return CoeffVector(s, tuple(x))


def from_coeff_vector(x) -> CountingForm:
    if isinstance(x, CoeffVector):
        s, entries = x.rank, x.entries
    else:
        entries = list(x)
        s = round(np.log(len(entries)) / np.log(3))
        if 3**s != len(entries):
            raise ContractError("length is not a power of 3")
    return CountingForm({index_pattern(i, s): c for i, c in enumerate(entries) if c})


# ---------------------------------------------------------------- vectorized evaluation

@lru_cache(maxsize=16)
def string_digits(k: int) -> np.ndarray:
    """All 3^k strings of length k as code rows, in index order."""
    idx = np.arange(3**k, dtype=np.int64)
    out = np.empty((3**k, k), dtype=np.int64)
    for j in range(k - 1, -1, -1):
        idx, out[:, j] = np.divmod(idx, 3)
    out.flags.writeable = False
    return out


def integer_scaled(w: CountingForm) -> tuple[dict[str, int], int]:
    den = lcm(*(c.denominator for _, c in w.items())) if w else 1
    return {v: int(c * den) for v, c in w.items()}, den


def evaluate_rows(w: CountingForm, digits: np.ndarray, cyclic: bool) -> tuple[np.ndarray, int]:
    """Evaluate w on every row of a code matrix; returns (numerators, den)."""
    coeffs, den = integer_scaled(w)
    n, k = digits.shape
    total = np.zeros(n, dtype=np.int64)
    by_len: dict[int, np.ndarray] = {}
    for v, c in coeffs.items():
        table = by_len.setdefault(len(v), np.zeros(3 ** len(v), dtype=np.int64))
        table[pattern_index(v)] = c
    for s, table in by_len.items():
        if s > k:
            continue
        starts = range(k) if cyclic else range(k - s + 1)
        for i in starts:
            code = np.zeros(n, dtype=np.int64)
            for j in range(s):
                code = code * 3 + digits[:, (i + j) % k]
            total += table[code]
    return total, den


def evaluate_all(w: CountingForm, k: int, cyclic: bool) -> tuple[np.ndarray, int]:
    return evaluate_rows(w, string_digits(k), cyclic)
