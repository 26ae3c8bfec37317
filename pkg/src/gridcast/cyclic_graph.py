"""Cyclic order of counting forms via the de Bruijn-style graph G_r(w).

Vertices are the 3^r strings of length r (by pattern index). Vertex v has an
edge to v[1:] + t for every letter t, and each edge carries the weight of its
source vertex. A form is cyclically non-negative exactly when this graph has
no negative cycle.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import exact_linalg
from .counting_forms import (
    CountingForm,
    all_strings,
    evaluate_all,
    index_pattern,
    purify,
    rho,
    string_digits,
    to_coeff_vector,
)
from .errors import ContractError, ParameterError, ResourceError
from .rational import fraction_json
from .simplex import solve_inequalities

MAX_BRUTE_L = 12


@dataclass(frozen=True)
class FormGraph:
    rank: int
    weights: tuple

    @property
    def n_vertices(self) -> int:
        return 3**self.rank

    def successors(self, i: int) -> tuple[int, int, int]:
        base = (i % 3 ** (self.rank - 1)) * 3
        return base, base + 1, base + 2

    def edges(self) -> list[tuple[int, int]]:
        return [(i, j) for i in range(self.n_vertices) for j in self.successors(i)]

    def vertex(self, i: int) -> str:
        return index_pattern(i, self.rank)


def build_graph(w: CountingForm, rank: int | None = None) -> FormGraph:
    if not w.is_pure:
        raise ContractError("build_graph needs a pure-rank form; purify first")
    r = rank if rank is not None else w.rank
    if r < 1 or (w and w.rank != r):
        raise ContractError("rank mismatch")
    return FormGraph(r, to_coeff_vector(w, r).entries)


@dataclass(frozen=True)
class CycleCertificate:
    vertices: tuple[str, ...]
    total_weight: Fraction

    def replay_string(self) -> str:
        """First letters around the cycle, repeated r times."""
        r = len(self.vertices[0])
        return "".join(v[0] for v in self.vertices) * r

    def to_json(self) -> dict:
        return {"cycle": list(self.vertices), "total_weight": fraction_json(Fraction(self.total_weight))}


@dataclass(frozen=True)
class NonnegResult:
    nonneg: bool
    certificate: CycleCertificate | None = None

    def __bool__(self) -> bool:
        return self.nonneg


def _bellman_ford(g: FormGraph, weights, order: str, eps) -> list[int] | None:
    """Negative cycle (vertex indices, in walk order) or None."""
    n = g.n_vertices
    src = n - 1  # the all-u vertex
    dist = [None] * n
    pred = [-1] * n
    dist[src] = 0
    vertices = range(n) if order == "forward" else range(n - 1, -1, -1)

    def relax() -> int:
        last = -1
        for a in vertices:
            da = dist[a]
            if da is None:
                continue
            nd = da + weights[a]
            for b in g.successors(a):
                db = dist[b]
                if db is None or nd < db - eps:
                    dist[b] = nd
                    pred[b] = a
                    last = b
        return last

    for _ in range(n - 1):
        if relax() < 0:
            return None
    x = relax()
    if x < 0:
        return None
    for _ in range(g.rank * n):
        x = pred[x]
    cycle = [x]
    y = pred[x]
    while y != x:
        cycle.append(y)
        y = pred[y]
    cycle.reverse()
    return cycle


def negative_cycle(rank: int, weights, order: str = "forward") -> list[int] | None:
    """Vertex indices of a negative cycle of G_rank with the given vertex
    weights (exact if the weights are Fractions), or None."""
    return _bellman_ford(FormGraph(rank, tuple(weights)), list(weights), order, 0)


def potentials(rank: int, weights) -> list | None:
    """z with weights[v] + z[v] - z[t] >= 0 on every edge v -> t, from
    shortest distances out of a virtual source; None on a negative cycle."""
    g = FormGraph(rank, tuple(weights))
    n = g.n_vertices
    dist = [0 * weights[0]] * n
    for _ in range(n + 1):
        changed = False
        for a in range(n):
            nd = dist[a] + weights[a]
            for b in g.successors(a):
                if nd < dist[b]:
                    dist[b] = nd
                    changed = True
        if not changed:
            return dist
    return None


def is_cyclically_nonneg(w: CountingForm, mode: str = "exact", eps: float = 1e-9,
                         slack=0, rank: int | None = None, order: str = "forward") -> NonnegResult:
    """Decide w >=_c 0 by negative-cycle detection on G_r(w).

    slack is added to every vertex weight before the search. In "float" mode
    weights below eps in magnitude are treated as zero and relaxations must
    improve by more than eps.
    """
    if not w.is_u_only:
        warnings.warn("form is not u-only; the cyclic verdict does not transfer to acyclic evaluation",
                      stacklevel=2)
    r = max(w.rank, 1) if rank is None else rank
    if r < w.rank:
        raise ParameterError("rank below the form's rank")
    g = build_graph(purify(w, r), r)
    if mode == "exact":
        s = Fraction(slack)
        weights = [x + s for x in g.weights]
        tol = 0
    elif mode == "float":
        weights = [float(x) + float(slack) for x in g.weights]
        weights = [0.0 if abs(x) < eps else x for x in weights]
        tol = eps
    else:
        raise ParameterError(f"unknown mode {mode!r}")
    cycle = _bellman_ford(g, weights, order, tol)
    if cycle is None:
        return NonnegResult(True)
    total = sum((weights[i] for i in cycle), Fraction(0) if mode == "exact" else 0.0)
    return NonnegResult(False, CycleCertificate(tuple(g.vertex(i) for i in cycle), total))


def is_cyclically_zero(w: CountingForm) -> bool:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return bool(is_cyclically_nonneg(w)) and bool(is_cyclically_nonneg(-w))


def rho_generator_matrix(s: int, drop_zero: bool = False) -> tuple[list[list[Fraction]], list[str]]:
    """Columns are the coefficient vectors of rho_v, v of length s-1."""
    if s < 2:
        raise ParameterError("s must be >= 2")
    labels = all_strings(s - 1)
    if drop_zero:
        labels = labels[1:]
    cols = [to_coeff_vector(rho(v), s).entries for v in labels]
    return exact_linalg.transpose(cols), labels


@dataclass(frozen=True)
class SpanResult:
    member: bool
    certificate: dict[str, Fraction] | None = None


def rho_span_membership(w: CountingForm, rank: int | None = None) -> SpanResult:
    """Express a pure-rank form as a combination of the rho generators.

    The generators sum to zero, so rho_{0...0} is dropped and the remaining
    ones form a basis; the certificate is then unique.
    """
    s = w.rank if rank is None else rank
    if not w.is_pure or s < 2 or (w and w.rank != s):
        raise ContractError("rho_span_membership needs a pure form of rank >= 2")
    a, labels = rho_generator_matrix(s, drop_zero=True)
    x = exact_linalg.solve(a, list(to_coeff_vector(w, s).entries))
    if x is None:
        return SpanResult(False)
    return SpanResult(True, {v: c for v, c in zip(labels, x) if c})


def nonneg_plus_rho(w: CountingForm, rank: int | None = None) -> SpanResult:
    """Try to write w (purified to `rank`) as a form with non-negative
    coefficients plus a rho-span element; such a w is cyclically non-negative.
    The converse is not known in general, so a negative answer proves nothing."""
    s = max(w.rank, 2) if rank is None else rank
    b = list(to_coeff_vector(purify(w, s), s).entries)
    a, labels = rho_generator_matrix(s, drop_zero=True)
    # b - A x >= 0
    res = solve_inequalities([[-v for v in row] for row in a], [-v for v in b])
    if res.status != "feasible":
        return SpanResult(False)
    return SpanResult(True, {v: c for v, c in zip(labels, res.x) if c})


def rho_span_rank(s: int) -> int:
    return exact_linalg.rank(rho_generator_matrix(s)[0])


def brute_force_min_cyclic(w: CountingForm, L: int, max_L: int = MAX_BRUTE_L) -> Fraction:
    """min of the cyclic value over all strings with rank(w) <= |y| <= L."""
    r = max(w.rank, 1)
    if L < r:
        raise ParameterError("L must be at least the rank")
    if L > max_L:
        raise ResourceError(f"L={L} exceeds the enumeration limit {max_L}")
    best = None
    den = 1
    for k in range(r, L + 1):
        vals, den = evaluate_all(w, k, cyclic=True)
        m = int(vals.min())
        best = m if best is None else min(best, m)
    return Fraction(best, den)


def brute_force_min_acyclic_star(w: CountingForm, r: int, L: int) -> Fraction | None:
    """min of the acyclic value over strings of length <= L whose first and
    last r letters are u-free (None when no such string exists)."""
    if L > max(MAX_BRUTE_L, 10):
        raise ResourceError("L too large")
    best = None
    den = 1
    for k in range(r, L + 1):
        digits = string_digits(k)
        keep = np.all(digits[:, :r] != 2, axis=1) & np.all(digits[:, k - r:] != 2, axis=1)
        vals, den = evaluate_all(w, k, cyclic=False)
        if keep.any():
            m = int(vals[keep].min())
            best = m if best is None else min(best, m)
    return None if best is None else Fraction(best, den)
