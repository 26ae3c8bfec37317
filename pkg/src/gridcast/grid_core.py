"""Coupled 2D regular grids: alphabets, gate rules, the coupled edge channel,
Monte Carlo and exact simulators, percolation, bounds, and the 3D-majority /
Toom PCA coupling check.

Letters are stored as small integer codes: 0, 1 and 2 for the "unknown"
letter (u, or 1u in the AND alphabet). Vertex (k, j) of the grid has parents
(k-1, j-1) and (k-1, j); the boundary vertices (k, 0) and (k, k) copy their
single parent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from fractions import Fraction
from functools import lru_cache
from itertools import product

import numpy as np

from .errors import ContractError, ParameterError, ResourceError
from .rational import to_fraction

K_MAX_DEFAULT = 18


class Letter(IntEnum):
    ZERO = 0
    ONE = 1
    U = 2

    def __str__(self) -> str:
        return "01u"[self]


class AndLetter(IntEnum):
    ZERO_C = 0
    ONE_C = 1
    ONE_U = 2

    def __str__(self) -> str:
        return ("0c", "1c", "1u")[self]


def _unfold(code: int) -> tuple[int, ...]:
    return (0, 1) if code == 2 else (code,)


def coupled_table_from_marginal(marginal) -> tuple[tuple[int, ...], ...]:
    """Lift a {0,1}^2 -> {0,1} table to the three-letter alphabet.

    The output is the common value when every unfolding of the unknown
    letter into {0,1} gives the same bit, and unknown otherwise.
    """
    table = []
    for a in range(3):
        row = []
        for b in range(3):
            outs = {marginal[x][y] for x in _unfold(a) for y in _unfold(b)}
            row.append(outs.pop() if len(outs) == 1 else 2)
        table.append(tuple(row))
    return tuple(table)


@dataclass(frozen=True)
class GateRule:
    kind: str
    marginal_table: tuple[tuple[int, int], tuple[int, int]]
    coupled_table: tuple[tuple[int, ...], ...]
    alphabet: type

    def __post_init__(self):
        for x in (0, 1):
            for y in (0, 1):
                if self.coupled_table[x][y] != self.marginal_table[x][y]:
                    raise ContractError(f"{self.kind}: coupled table disagrees with marginal at ({x},{y})")

    def __str__(self) -> str:
        return self.kind

    def letter(self, code: int):
        return self.alphabet(code)

    def boundary(self, y):
        """Boundary vertices copy their single parent."""
        return y


def _make_rule(kind: str, fn, alphabet=Letter) -> GateRule:
    marginal = tuple(tuple(fn(x, y) for y in (0, 1)) for x in (0, 1))
    return GateRule(kind, marginal, coupled_table_from_marginal(marginal), alphabet)


NAND = _make_rule("nand", lambda x, y: 1 - (x & y))
AND = _make_rule("and", lambda x, y: x & y, AndLetter)
XOR = _make_rule("xor", lambda x, y: x ^ y)
IMP = _make_rule("imp", lambda x, y: (1 - x) | y)

RULES = {r.kind: r for r in (AND, NAND, XOR, IMP)}


def get_rule(rule) -> GateRule:
    if isinstance(rule, GateRule):
        return rule
    try:
        return RULES[str(rule).lower()]
    except KeyError:
        raise ParameterError(f"unknown rule {rule!r}; expected one of {sorted(RULES)}") from None


def start_letter(rule: GateRule):
    return rule.alphabet(2)


def _check_delta(delta) -> None:
    if not 0 <= delta <= 0.5:
        raise ParameterError(f"delta out of range [0, 1/2]: {delta}")


def channel_matrix(delta) -> tuple[tuple[Fraction, ...], ...]:
    """Row-stochastic coupled channel W over codes (0, 1, u), exact."""
    d = to_fraction(delta)
    _check_delta(d)
    return (
        (1 - d, d, Fraction(0)),
        (d, 1 - d, Fraction(0)),
        (d, d, 1 - 2 * d),
    )


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator; identical seeds give identical streams."""
    return np.random.Generator(np.random.Philox(int(seed) & (2**64 - 1)))


def _apply_channel(codes: np.ndarray, u: np.ndarray, delta: float) -> np.ndarray:
    # One uniform per edge: below delta a fresh 1, below 2*delta a fresh 0,
    # otherwise the input is copied. Both coupled copies see the same draw.
    out = codes.copy()
    out[u < 2 * delta] = 0
    out[u < delta] = 1
    return out


def coupled_channel_step(letter, delta: float, rng: np.random.Generator):
    _check_delta(delta)
    kind = type(letter)
    if kind not in (Letter, AndLetter):
        raise ContractError(f"not a coupled letter: {letter!r}")
    out = _apply_channel(np.array([int(letter)]), np.array([rng.random()]), float(delta))
    return kind(int(out[0]))


def gate_eval(rule: GateRule, y1, y2):
    rule = get_rule(rule)
    if type(y1) is not rule.alphabet or type(y2) is not rule.alphabet:
        raise ContractError(f"{rule.kind} expects letters of {rule.alphabet.__name__}")
    return rule.alphabet(rule.coupled_table[int(y1)][int(y2)])


@dataclass(frozen=True)
class CoupledLayer:
    level: int
    letters: tuple

    def __post_init__(self):
        if len(self.letters) != self.level + 1:
            raise ContractError(f"level {self.level} needs {self.level + 1} letters")
        kinds = {type(x) for x in self.letters}
        if len(kinds) != 1 or kinds.pop() not in (Letter, AndLetter):
            raise ContractError("letters must come from exactly one alphabet")

    @property
    def n_u(self) -> int:
        return sum(1 for x in self.letters if int(x) == 2)


def step_layer(codes: np.ndarray, table: np.ndarray, delta: float, rng: np.random.Generator) -> np.ndarray:
    """Advance one level of integer codes. Edge draws are taken per parent,
    left to right, edge to child j before edge to child j+1."""
    u = rng.random((codes.size, 2))
    lower = _apply_channel(codes, u[:, 0], delta)
    upper = _apply_channel(codes, u[:, 1], delta)
    out = np.empty(codes.size + 1, dtype=codes.dtype)
    out[0] = lower[0]
    out[-1] = upper[-1]
    out[1:-1] = table[upper[:-1], lower[1:]]
    return out


def next_layer(layer: CoupledLayer, rule: GateRule, delta: float, rng: np.random.Generator) -> CoupledLayer:
    rule = get_rule(rule)
    if type(layer.letters[0]) is not rule.alphabet:
        raise ContractError("layer alphabet does not match rule")
    codes = step_layer(np.array([int(x) for x in layer.letters], dtype=np.int8),
                       np.array(rule.coupled_table, dtype=np.int8), float(delta), rng)
    return CoupledLayer(layer.level + 1, tuple(rule.alphabet(int(c)) for c in codes))


@dataclass(frozen=True)
class TrajectoryStats:
    n_u_per_level: tuple[int, ...]
    coupling_time: int | None
    max_depth: int
    seed: int

    def summary(self) -> dict:
        return {"coupling_time": self.coupling_time, "n_levels": len(self.n_u_per_level), "seed": self.seed}


def simulate_coupled_grid(rule, delta: float, max_depth: int, seed: int,
                          stop_at_coupling: bool = True) -> TrajectoryStats:
    """Run the coupled grid from the unknown root letter.

    With stop_at_coupling the record ends at the first u-free level, since
    no u can reappear afterwards.
    """
    rule = get_rule(rule)
    _check_delta(delta)
    if max_depth < 1:
        raise ParameterError("max_depth must be >= 1")
    rng = make_rng(seed)
    table = np.array(rule.coupled_table, dtype=np.int8)
    codes = np.array([2], dtype=np.int8)
    counts = [1]
    coupling = None
    d = float(delta)
    for k in range(1, max_depth + 1):
        codes = step_layer(codes, table, d, rng)
        n = int(np.count_nonzero(codes == 2))
        counts.append(n)
        if n == 0 and coupling is None:
            coupling = k
            if stop_at_coupling:
                break
    return TrajectoryStats(tuple(counts), coupling, max_depth, int(seed))


# ---------------------------------------------------------------- exact engine

def _bsc(delta: float) -> np.ndarray:
    return np.array([[1 - delta, delta], [delta, 1 - delta]])


def _gate_kernel(rule: GateRule, delta: float) -> np.ndarray:
    """K[a, b, c] = P(f(a + Z1, b + Z2) = c) for independent BSC noise."""
    w = _bsc(delta)
    k = np.zeros((2, 2, 2))
    for a, b, x, y in product((0, 1), repeat=4):
        k[a, b, rule.marginal_table[x][y]] += w[a, x] * w[b, y]
    return k


def _advance(p: np.ndarray, n: int, k0: np.ndarray, kg: np.ndarray) -> np.ndarray:
    """One level of forward propagation; p has shape (batch, 2**n) with the
    leftmost vertex as the most significant bit."""
    b = p.shape[0]
    a = p.reshape(b, 2, 2 ** (n - 1))
    a = np.einsum("bar,ac->bcar", a, k0)
    for j in range(1, n):
        a = a.reshape(b, 2**j, 2, 2, 2 ** (n - 1 - j))
        a = np.einsum("bnxyr,xyc->bncyr", a, kg)
    a = a.reshape(b, 2**n, 2)
    a = np.einsum("bnx,xc->bnc", a, k0)
    return a.reshape(b, 2 ** (n + 1))


def forward_distributions(rule, delta: float, k: int, k_max: int = K_MAX_DEFAULT) -> np.ndarray:
    """Exact laws of level k given root 0 (row 0) and root 1 (row 1)."""
    rule = get_rule(rule)
    _check_delta(delta)
    if k < 0:
        raise ParameterError("k must be >= 0")
    if k > k_max:
        raise ResourceError(f"k={k} exceeds k_max={k_max}; 2^(k+1) states per law (raise --k-max to override)")
    d = float(delta)
    k0, kg = _bsc(d), _gate_kernel(rule, d)
    p = np.eye(2)
    for n in range(1, k + 1):
        p = _advance(p, n, k0, kg)
    return p


def _tv(p: np.ndarray) -> float:
    return 0.5 * math.fsum(np.abs(p[0] - p[1]).tolist())


def exact_tv_distance(rule, delta: float, k: int, k_max: int = K_MAX_DEFAULT) -> float:
    if k < 1:
        raise ParameterError("k must be >= 1")
    return _tv(forward_distributions(rule, delta, k, k_max))


def tv_sequence(rule, delta: float, k_last: int, k_max: int = K_MAX_DEFAULT) -> list[float]:
    """TV distances for k = 1..k_last from a single forward pass."""
    rule = get_rule(rule)
    if k_last > k_max:
        raise ResourceError(f"k={k_last} exceeds k_max={k_max}")
    d = float(delta)
    _check_delta(d)
    k0, kg = _bsc(d), _gate_kernel(rule, d)
    p = np.eye(2)
    out = []
    for n in range(1, k_last + 1):
        p = _advance(p, n, k0, kg)
        out.append(_tv(p))
    return out


def exact_mutual_information(rule, delta: float, k: int, k_max: int = K_MAX_DEFAULT) -> float:
    """I(X_0; X_k) in nats for a uniform root bit."""
    p = forward_distributions(rule, delta, k, k_max)
    m = 0.5 * (p[0] + p[1])
    terms = []
    for row in p:
        nz = row > 0
        terms.extend((0.5 * row[nz] * np.log(row[nz] / m[nz])).tolist())
    return max(0.0, math.fsum(terms))


def mi_upper_bound(delta: float, k: int) -> float:
    _check_delta(delta)
    if k < 0:
        raise ParameterError("k must be >= 0")
    return math.log(2) * (2 * (1 - 2 * delta) ** 2) ** k


def layer_growth_bound(delta: float, d: int, k: float) -> float:
    """Layer size below which reconstruction is impossible for any gates."""
    if not 0 < delta < 0.5:
        raise ParameterError("delta must lie strictly between 0 and 1/2")
    if d < 1 or k < 2:
        raise ParameterError("need d >= 1 and k >= 2")
    return math.log(k) / (d * math.log(1 / (2 * delta)))


# ---------------------------------------------------------------- percolation

@dataclass(frozen=True)
class PercolationLevel:
    level: int
    alive: bool
    right: int
    left: int


def simulate_percolation(p: float, max_depth: int, seed: int) -> list[PercolationLevel]:
    """Oriented bond percolation from the root; -1 marks a dead cluster."""
    if not 0 <= p <= 1:
        raise ParameterError(f"p out of range [0, 1]: {p}")
    if max_depth < 0:
        raise ParameterError("max_depth must be >= 0")
    rng = make_rng(seed)
    wet = np.array([True])
    out = [PercolationLevel(0, True, 0, 0)]
    for k in range(1, max_depth + 1):
        if not out[-1].alive:
            out.append(PercolationLevel(k, False, -1, -1))
            continue
        open_ = rng.random((wet.size, 2)) < p
        nxt = np.zeros(wet.size + 1, dtype=bool)
        nxt[:-1] |= wet & open_[:, 0]
        nxt[1:] |= wet & open_[:, 1]
        wet = nxt
        idx = np.flatnonzero(wet)
        if idx.size:
            out.append(PercolationLevel(k, True, int(idx[-1]), int(idx[0])))
        else:
            out.append(PercolationLevel(k, False, -1, -1))
    return out


# ---------------------------------------------------------------- Toom check

@dataclass(frozen=True)
class ToomReport:
    equal: bool
    first_mismatch: tuple[int, int, int] | None
    n_checked: int


def _majority(a, b, c):
    return (a & b) | (a & c) | (b & c)


def _simulate_majority_3d(root: int, z: np.ndarray, sel: np.ndarray, K: int) -> np.ndarray:
    """z[v1, v2, v3, i] is the noise on the edge into v along axis i; sel[v]
    picks the lower of the two axes at plane vertices."""
    x = np.zeros((K + 1,) * 3, dtype=np.int8)
    x[0, 0, 0] = root
    for s in range(1, K + 1):
        for v1 in range(s + 1):
            for v2 in range(s + 1 - v1):
                v = (v1, v2, s - v1 - v2)
                axes = [i for i in range(3) if v[i] > 0]
                inputs = {}
                for i in axes:
                    w = list(v)
                    w[i] -= 1
                    inputs[i] = x[tuple(w)] ^ z[v + (i,)]
                if len(axes) == 1:
                    x[v] = inputs[axes[0]]
                elif len(axes) == 2:
                    x[v] = inputs[axes[0]] if sel[v] else inputs[axes[1]]
                else:
                    x[v] = _majority(inputs[0], inputs[1], inputs[2])
    return x


def _simulate_toom(root: int, zt: np.ndarray, st: np.ndarray, K: int) -> np.ndarray:
    """zt[k, x1, x2, n] is the noise on neighbour n (0: -e1, 1: -e2, 2: the
    site itself) feeding site x at time k+1; st[k, x1, x2] picks the -e_i
    input at axis sites and the -e1 input on the diagonal."""
    xi = np.zeros((K + 1, K + 1, K + 1), dtype=np.int8)
    xi[0, 0, 0] = root
    for k in range(K):
        old, new, z = xi[k], xi[k + 1], zt[k]
        for x1 in range(k + 2):
            for x2 in range(k + 2 - x1):
                left = old[x1 - 1, x2] ^ z[x1, x2, 0] if x1 > 0 else None
                down = old[x1, x2 - 1] ^ z[x1, x2, 1] if x2 > 0 else None
                here = old[x1, x2] ^ z[x1, x2, 2] if x1 + x2 <= k else None
                if x1 == 0 and x2 == 0:
                    new[x1, x2] = here
                elif x1 == k + 1:
                    new[x1, x2] = left
                elif x2 == k + 1:
                    new[x1, x2] = down
                elif x1 + x2 == k + 1:
                    new[x1, x2] = left if st[k, x1, x2] else down
                elif x2 == 0:
                    new[x1, x2] = left if st[k, x1, x2] else here
                elif x1 == 0:
                    new[x1, x2] = down if st[k, x1, x2] else here
                else:
                    new[x1, x2] = _majority(left, here, down)
    return xi


def _couple_noise(z: np.ndarray, sel: np.ndarray, K: int) -> tuple[np.ndarray, np.ndarray]:
    """Map 3D noise to the PCA: the edge into (x1, x2, k+1-x1-x2) along axis
    i feeds site x at time k+1 from neighbour -e_i (axis 3: the site itself)."""
    zt = np.zeros((K, K + 1, K + 1, 3), dtype=np.int8)
    st = np.zeros((K, K + 1, K + 1), dtype=bool)
    for k in range(K):
        for x1 in range(k + 2):
            for x2 in range(k + 2 - x1):
                v = (x1, x2, k + 1 - x1 - x2)
                zt[k, x1, x2] = z[v]
                st[k, x1, x2] = sel[v]
    return zt, st


def toom_coupled_check(delta: float, K: int, seed: int, decoupled: bool = False) -> ToomReport:
    """Replay the majority 3D grid and the boundary Toom PCA on shared noise
    and compare X_v with xi_{|v|}(v1, v2) for |v| <= K.

    decoupled=True draws the PCA noise and selections from an independent
    stream (negative control); the root bit stays shared.
    """
    _check_delta(delta)
    if K < 1:
        raise ParameterError("K must be >= 1")
    rng = make_rng(seed)
    root = int(rng.integers(2))
    shape = (K + 1,) * 3
    z = (rng.random(shape + (3,)) < delta).astype(np.int8)
    sel = rng.random(shape) < 0.5
    x = _simulate_majority_3d(root, z, sel, K)
    if decoupled:
        rng2 = make_rng(seed ^ 0x9E3779B97F4A7C15)
        z = (rng2.random(shape + (3,)) < delta).astype(np.int8)
        sel = rng2.random(shape) < 0.5
    zt, st = _couple_noise(z, sel, K)
    xi = _simulate_toom(root, zt, st, K)
    n = 0
    for s in range(K + 1):
        for v1 in range(s + 1):
            for v2 in range(s + 1 - v1):
                n += 1
                if x[v1, v2, s - v1 - v2] != xi[s, v1, v2]:
                    return ToomReport(False, (v1, v2, s - v1 - v2), n)
    return ToomReport(True, None, n)
