"""Supermartingale witnesses for the coupled NAND grid.

A witness is a u-only form w of rank r-1 with w - E(w) and w - C{u} both
cyclically non-negative. Cyclic non-negativity of a rank-r form with
coefficient vector beta is equivalent to the existence of potentials z with
beta_src(e) + z_src(e) - z_dst(e) >= 0 on every edge e of G_r, so the search
for w is a linear feasibility problem in (alpha, z1, z2).

All matrices are dense lists of Fractions indexed by pattern index.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from fractions import Fraction
from itertools import product

from . import exact_linalg
from .counting_forms import (
    CoeffVector,
    all_strings,
    clause,
    cond_expectation,
    from_coeff_vector,
    purify,
    rho,
    to_coeff_vector,
)
from .cyclic_graph import is_cyclically_nonneg, negative_cycle, potentials
from .errors import ParameterError, ResourceError
from .grid_core import NAND, GateRule, get_rule
from .rational import fraction_json, snap_rational, to_fraction
from .simplex import solve_inequalities

Matrix = list[list[Fraction]]
Poly = tuple[Fraction, ...]  # coefficients, lowest degree first

# purified harmonic form (rank 3) and the integer first-order correction
W0_STAR = (0, 0, 0, 0, 0, 1, -2, 0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 2, 2, 2, 4, 3, 3, 2, 2, 2)
W1_STAR = (0, 0, 2, 0, 0, 4, 4, 4, 3, 0, 0, 4, 0, 0, 4, 4, 4, 4, 2, 4, 4, 4, 4, 4, 3, 4, 2)


def _pmul(p: Poly, q: Poly) -> Poly:
    out = [Fraction(0)] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        if a:
            for j, b in enumerate(q):
                out[i + j] += a * b
    return tuple(out)


def _padd(p: Poly, q: Poly) -> Poly:
    n = max(len(p), len(q))
    return tuple((p[i] if i < len(p) else 0) + (q[i] if i < len(q) else 0) for i in range(n))


def _peval(p: Poly, x: Fraction) -> Fraction:
    acc = Fraction(0)
    for c in reversed(p):
        acc = acc * x + c
    return acc


_ONE, _D, _NIL = (Fraction(1),), (Fraction(0), Fraction(1)), (Fraction(0),)
# coupled channel rows as polynomials in delta; codes 0, 1, u
_W_POLY = (
    ((Fraction(1), Fraction(-1)), _D, _NIL),
    (_D, (Fraction(1), Fraction(-1)), _NIL),
    (_D, _D, (Fraction(1), Fraction(-2))),
)


def c1_polynomial(rule=NAND) -> list[list[Poly]]:
    """9 x 3 matrix: row = index of the parent pair, column = child letter."""
    rule = get_rule(rule)
    out = [[_NIL] * 3 for _ in range(9)]
    for a, b, x, y in product(range(3), repeat=4):
        c = rule.coupled_table[x][y]
        out[3 * a + b][c] = _padd(out[3 * a + b][c], _pmul(_W_POLY[a][x], _W_POLY[b][y]))
    return out


@dataclass(frozen=True)
class TransitionMatrix:
    s: int
    delta: Fraction
    entries: tuple[tuple[Fraction, ...], ...]
    coefficients: tuple[tuple[tuple[Fraction, ...], ...], ...]  # C^(0), ..., C^(2s)

    def evaluate(self, delta) -> Matrix:
        d = to_fraction(delta)
        out = [[Fraction(0)] * 3**self.s for _ in range(3 ** (self.s + 1))]
        power = Fraction(1)
        for ck in self.coefficients:
            for i, row in enumerate(ck):
                for j, v in enumerate(row):
                    if v:
                        out[i][j] += v * power
            power *= d
        return out


def _digits(i: int, n: int) -> list[int]:
    out = []
    for _ in range(n):
        i, t = divmod(i, 3)
        out.append(t)
    return out[::-1]


def build_transition_matrix(s: int, delta, rule=NAND) -> TransitionMatrix:
    """C_s(delta): rows index parent windows of length s+1, columns child
    windows of length s; entry = product over positions of C_1 entries."""
    if s < 1:
        raise ParameterError("s must be >= 1")
    d = to_fraction(delta)
    c1p = c1_polynomial(rule)
    c1 = [[_peval(p, d) for p in row] for row in c1p]
    n_rows, n_cols = 3 ** (s + 1), 3**s
    entries = []
    polys = []
    for a in range(n_rows):
        z = _digits(a, s + 1)
        pairs = [3 * z[i] + z[i + 1] for i in range(s)]
        erow, prow = [], []
        for b in range(n_cols):
            v = _digits(b, s)
            val, poly = Fraction(1), _ONE
            for i in range(s):
                val *= c1[pairs[i]][v[i]]
                poly = _pmul(poly, c1p[pairs[i]][v[i]])
            erow.append(val)
            prow.append(poly + (Fraction(0),) * (2 * s + 1 - len(poly)))
        entries.append(tuple(erow))
        polys.append(prow)
    coeffs = tuple(tuple(tuple(polys[a][b][k] for b in range(n_cols)) for a in range(n_rows))
                   for k in range(2 * s + 1))
    return TransitionMatrix(s, d, tuple(entries), coeffs)


def build_purify_matrix(s: int) -> list[list[int]]:
    """P_s: row a (length s+1) has a 1 at column a // 3 (drop the last letter)."""
    if s < 1:
        raise ParameterError("s must be >= 1")
    return [[1 if a // 3 == b else 0 for b in range(3**s)] for a in range(3 ** (s + 1))]


@dataclass(frozen=True)
class IncidenceSet:
    r: int
    b_out: tuple[tuple[int, ...], ...]
    b_in: tuple[tuple[int, ...], ...]

    @property
    def b(self) -> list[list[int]]:
        return [[o - i for o, i in zip(ro, ri)] for ro, ri in zip(self.b_out, self.b_in)]


def build_incidence(r: int) -> IncidenceSet:
    """Edges of G_r are keyed by (r+1)-strings: source = prefix, target = suffix."""
    if r < 1:
        raise ParameterError("r must be >= 1")
    n, m = 3**r, 3 ** (r + 1)
    b_out = tuple(tuple(1 if e // 3 == v else 0 for e in range(m)) for v in range(n))
    b_in = tuple(tuple(1 if e % n == v else 0 for e in range(m)) for v in range(n))
    return IncidenceSet(r, b_out, b_in)


def build_psi(r: int) -> list[int]:
    if r < 1:
        raise ParameterError("r must be >= 1")
    return [1 if v[0] == "u" else 0 for v in all_strings(r)]


def binary_indices(s: int) -> list[int]:
    """Indices of the u-free strings of length s."""
    return [i for i, v in enumerate(all_strings(s)) if "u" not in v]


@dataclass(frozen=True)
class WitnessLP:
    delta: Fraction
    r: int
    rule: GateRule
    a: tuple[tuple[Fraction, ...], ...]
    xi: tuple[Fraction, ...]
    pinned_zero_indices: tuple[int, ...]

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.a), len(self.a[0])


def assemble_lp(delta, r: int = 4, rule=NAND) -> WitnessLP:
    """Rows: one per edge for w - E(w) (top), one per edge for w - {u} (bottom).
    Columns: alpha (3^(r-1)), z1 (3^r), z2 (3^r)."""
    if r < 2:
        raise ParameterError("r must be >= 2")
    d = to_fraction(delta)
    rule = get_rule(rule)
    c = build_transition_matrix(r - 1, d, rule).entries
    na, nv, ne = 3 ** (r - 1), 3**r, 3 ** (r + 1)
    psi = build_psi(r)
    zero = Fraction(0)
    top, bottom, xi_top, xi_bottom = [], [], [], []
    for e in range(ne):
        src, dst = e // 3, e % nv
        row_t = [zero] * (na + 2 * nv)
        row_b = [zero] * (na + 2 * nv)
        for j in range(na):
            row_t[j] = (1 if src // 3 == j else 0) - c[src][j]
        row_b[src // 3] = Fraction(1)
        if src != dst:
            row_t[na + src] += 1
            row_t[na + dst] -= 1
            row_b[na + nv + src] += 1
            row_b[na + nv + dst] -= 1
        top.append(tuple(row_t))
        bottom.append(tuple(row_b))
        xi_top.append(zero)
        xi_bottom.append(Fraction(psi[src]))
    return WitnessLP(d, r, rule, tuple(top + bottom), tuple(xi_top + xi_bottom),
                     tuple(binary_indices(r - 1)))


@dataclass(frozen=True)
class Witness:
    alpha: CoeffVector
    z1: tuple[Fraction, ...]
    z2: tuple[Fraction, ...]
    delta: Fraction
    r: int
    verified: dict | None = None

    @property
    def form(self):
        return from_coeff_vector(self.alpha)

    def to_json(self) -> dict:
        return {
            "delta": fraction_json(self.delta),
            "r": self.r,
            "alpha": [fraction_json(x) for x in self.alpha.entries],
            "z1": [fraction_json(x) for x in self.z1],
            "z2": [fraction_json(x) for x in self.z2],
            "checks": self.verified or {},
        }


@dataclass(frozen=True)
class Infeasible:
    farkas: tuple[Fraction, ...]

    def to_json(self) -> dict:
        return {"infeasible": True, "farkas": {str(i): fraction_json(y) for i, y in enumerate(self.farkas) if y}}


def residuals(lp: WitnessLP, phi) -> list[Fraction]:
    return [a - b for a, b in zip(exact_linalg.matvec([list(r) for r in lp.a], list(phi)), lp.xi)]


def _cycle_edges(cycle: list[int], n_vertices: int) -> list[int]:
    return [v * 3 + cycle[(i + 1) % len(cycle)] % 3 for i, v in enumerate(cycle)]


def solve_feasibility(lp: WitnessLP, minimize_l1: bool = True, max_rounds: int = 500) -> Witness | Infeasible:
    """Exact solve by cycle generation.

    For fixed alpha the potentials exist iff neither constraint graph has a
    negative cycle, and the weight of a cycle is linear in alpha. So the LP
    is solved over alpha alone against a growing set of cycle constraints
    (exact two-phase simplex, l1 objective to keep it bounded); each round an
    exact Bellman-Ford pass either finds a violated cycle to add or certifies
    the point, after which z1, z2 are read off as shortest-path potentials.
    An infeasible master problem yields a Farkas vector over cycles, which is
    mapped back to the edge rows of the full system.
    """
    r, nv, ne = lp.r, 3**lp.r, 3 ** (lp.r + 1)
    na = 3 ** (r - 1)
    pinned = set(lp.pinned_zero_indices)
    free = [j for j in range(na) if j not in pinned]
    top = [lp.a[3 * v][:na] for v in range(nv)]
    bot = [lp.a[ne + 3 * v][:na] for v in range(nv)]
    psi = [lp.xi[ne + 3 * v] for v in range(nv)]
    zero = Fraction(0)
    cuts: list[tuple[int, list[int]]] = []  # (0 top / 1 bottom, cycle)
    rows: list[list[Fraction]] = []
    rhs: list[Fraction] = []
    alpha = [zero] * na
    for _ in range(max_rounds):
        w_top = [sum((t[j] * alpha[j] for j in free if t[j]), zero) for t in top]
        w_bot = [sum((b[j] * alpha[j] for j in free if b[j]), zero) - p for b, p in zip(bot, psi)]
        found = False
        for side, weights in ((0, w_top), (1, w_bot)):
            cyc = negative_cycle(r, weights)
            if cyc is None:
                continue
            found = True
            src = top if side == 0 else bot
            rows.append([sum((src[v][j] for v in cyc), zero) for j in range(na)])
            rhs.append(zero if side == 0 else sum((psi[v] for v in cyc), zero))
            cuts.append((side, cyc))
        if not found:
            z1 = potentials(r, w_top)
            z2 = potentials(r, w_bot)
            phi = list(alpha) + list(z1) + list(z2)
            if min(residuals(lp, phi)) < 0:
                raise AssertionError("recovered point violates the constraints")
            return Witness(CoeffVector(r - 1, tuple(alpha)), tuple(z1), tuple(z2), lp.delta, r)
        l1 = free if minimize_l1 else ()
        res = solve_inequalities(rows, rhs, pinned, l1_columns=l1)
        if res.status == "infeasible":
            y = [zero] * (2 * ne)
            for (side, cyc), lam in zip(cuts, res.farkas):
                if lam:
                    for e in _cycle_edges(cyc, nv):
                        y[e + side * ne] += lam
            return Infeasible(tuple(y))
        alpha = res.x
    raise ResourceError(f"no convergence after {max_rounds} cycle-generation rounds")


def verify_witness(alpha, delta, C=1, tolerance=0, rule=NAND, r: int | None = None) -> dict:
    """Check the three witness conditions independently of the LP, by
    negative-cycle search with `tolerance` added to every vertex weight."""
    if not isinstance(alpha, CoeffVector):
        entries = tuple(to_fraction(x) for x in alpha)
        alpha = CoeffVector(_rank_of(len(entries)), entries)
    d = to_fraction(delta)
    c = to_fraction(C)
    if c <= 0:
        raise ParameterError("C must be positive")
    tol = to_fraction(tolerance)
    s = alpha.rank
    r = s + 1 if r is None else r
    w = from_coeff_vector(alpha)
    bad = [all_strings(s)[i] for i in binary_indices(s) if alpha.entries[i]]
    report = {"u_only": {"pass": not bad, "nonzero_binary": bad}}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        sup = is_cyclically_nonneg(purify(w, r) - purify(cond_expectation(w, rule, d), r),
                                   slack=tol, rank=r)
        low = is_cyclically_nonneg(purify(w - c * clause("u"), r), slack=tol, rank=r)
    for name, res in (("supermartingale", sup), ("lower_bound", low)):
        report[name] = {"pass": res.nonneg,
                        "certificate": res.certificate.to_json() if res.certificate else None}
    report["all_pass"] = all(v["pass"] for k, v in report.items() if isinstance(v, dict))
    return report


def _rank_of(n: int) -> int:
    s = 0
    while 3**s < n:
        s += 1
    if 3**s != n:
        raise ParameterError(f"{n} is not a power of 3")
    return s


def find_witness(delta, r: int = 4, rule=NAND, minimize_l1: bool = True) -> tuple[Witness | Infeasible, dict]:
    """Assemble, solve and verify in exact mode. Float delta is snapped to a
    rational with denominator <= 10^6; the snap is reported in the info dict."""
    d, snapped = snap_rational(delta)
    lp = assemble_lp(d, r, rule)
    out = solve_feasibility(lp, minimize_l1=minimize_l1)
    info = {"delta": d, "snapped": snapped, "lp_shape": lp.shape}
    if isinstance(out, Witness):
        report = verify_witness(out.alpha, d, 1, 0, rule, r)
        out = Witness(out.alpha, out.z1, out.z2, out.delta, out.r, report)
    return out, info


# ---------------------------------------------------------------- perturbation LP

def rho_columns(s: int) -> tuple[Matrix, list[str]]:
    """Columns zeta_s(rho_v) for v of length s-1 containing a u, ascending."""
    labels = [v for v in all_strings(s - 1) if "u" in v]
    cols = [to_coeff_vector(rho(v), s).entries for v in labels]
    return exact_linalg.transpose(cols), labels


@dataclass(frozen=True)
class PerturbationResult:
    w_hat_1: tuple[Fraction, ...]
    x_1: tuple[Fraction, ...]
    reference_feasible: bool
    reference_x_1: tuple[Fraction, ...] | None
    zeroth_order_in_span: bool
    zeroth_order_certificate: tuple[Fraction, ...] | None

    def to_json(self) -> dict:
        def vec(x):
            return None if x is None else [fraction_json(v) for v in x]

        return {
            "w_hat_1": vec(self.w_hat_1),
            "x_1": vec(self.x_1),
            "reference_w_hat_1": list(W1_STAR),
            "reference_feasible": self.reference_feasible,
            "reference_x_1": vec(self.reference_x_1),
            "zeroth_order_in_span": self.zeroth_order_in_span,
        }


def perturbation_system() -> tuple[Matrix, list[Fraction], Matrix, list[Fraction]]:
    """First-order system in (w1, x1): (P3 - C3^(0)) w1 + D3 x1 >= C3^(1) w0.
    Returns (A, rhs, P3 - C3^(0), w0)."""
    tm = build_transition_matrix(3, 0)
    c0, c1 = tm.coefficients[0], tm.coefficients[1]
    p3 = build_purify_matrix(3)
    d3, _ = rho_columns(4)
    w0 = [Fraction(x) for x in W0_STAR]
    m0 = [[Fraction(p3[i][j]) - c0[i][j] for j in range(27)] for i in range(81)]
    rhs = exact_linalg.matvec([list(r) for r in c1], w0)
    a = [m0[i] + d3[i] for i in range(81)]
    return a, rhs, m0, w0


def perturbation_lp():
    a, rhs, m0, w0 = perturbation_system()
    pins = binary_indices(3)
    res = solve_inequalities(a, rhs, pins)
    if res.status == "infeasible":
        return Infeasible(tuple(res.farkas))
    # reference vector: pin w1 and solve for x1 alone
    w1 = [Fraction(x) for x in W1_STAR]
    shifted = [b - sum(m0[i][j] * w1[j] for j in range(27)) for i, b in enumerate(rhs)]
    ref = solve_inequalities([row[27:] for row in a], shifted)
    ref_ok = ref.status == "feasible" and all(v == 0 for j, v in enumerate(w1) if j in pins)
    d3 = [row[27:] for row in a]
    span = exact_linalg.solve(d3, exact_linalg.matvec(m0, w0))
    return PerturbationResult(
        tuple(res.x[:27]), tuple(res.x[27:]), ref_ok,
        tuple(ref.x) if ref.status == "feasible" else None,
        span is not None, tuple(span) if span is not None else None,
    )
