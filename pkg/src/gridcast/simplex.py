"""Two-phase primal simplex over exact rationals (Dantzig pricing with a
Bland fallback against cycling).

The tableau is kept as sparse rows (dict column -> Fraction), which suits
the incidence-structured constraint systems built in lp_witness.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

ZERO = Fraction(0)


@dataclass
class LPResult:
    status: str  # "optimal" or "infeasible"
    x: list[Fraction] | None = None
    farkas: list[Fraction] | None = None
    objective: Fraction | None = None
    pivots: int = 0


@dataclass
class _Tableau:
    rows: list[dict[int, Fraction]]
    rhs: list[Fraction]
    basis: list[int]
    n_cols: int
    blocked: set[int] = field(default_factory=set)
    pivots: int = 0
    pricing: str = "dantzig"
    stall: int = 50

    def pivot(self, r: int, j: int, obj: dict[int, Fraction], obj_val: list[Fraction]) -> None:
        row = self.rows[r]
        inv = 1 / row[j]
        for c in row:
            row[c] *= inv
        self.rhs[r] *= inv
        b = self.rhs[r]
        items = list(row.items())
        for i, other in enumerate(self.rows):
            if i == r:
                continue
            f = other.get(j)
            if f:
                for c, v in items:
                    nv = other.get(c, ZERO) - f * v
                    if nv:
                        other[c] = nv
                    else:
                        other.pop(c, None)
                self.rhs[i] -= f * b
        f = obj.get(j)
        if f:
            for c, v in items:
                nv = obj.get(c, ZERO) - f * v
                if nv:
                    obj[c] = nv
                else:
                    obj.pop(c, None)
            obj_val[0] -= f * b
        self.basis[r] = j
        self.pivots += 1

    def run(self, obj: dict[int, Fraction], obj_val: list[Fraction]) -> bool:
        """Minimise; obj holds reduced costs, obj_val[0] the negated objective.
        Returns False when unbounded.

        Pricing is by most negative reduced cost; after `stall` consecutive
        degenerate pivots it switches to Bland's rule (lowest eligible index
        enters, ties in the ratio test go to the lowest basic index) until
        the objective moves again, which rules out cycling.
        """
        degenerate = 0
        while True:
            eligible = [(v, c) for c, v in obj.items() if v < 0 and c not in self.blocked]
            if not eligible:
                return True
            if self.pricing == "bland" or degenerate >= self.stall:
                entering = min(c for _, c in eligible)
            else:
                entering = min(eligible)[1]
            best = None
            for i, row in enumerate(self.rows):
                a = row.get(entering)
                if a is not None and a > 0:
                    ratio = self.rhs[i] / a
                    key = (ratio, self.basis[i])
                    if best is None or key < best[0]:
                        best = (key, i)
            if best is None:
                return False
            degenerate = degenerate + 1 if best[0][0] == 0 else 0
            self.pivot(best[1], entering, obj, obj_val)


def solve_standard(rows: list[dict[int, Fraction]], b: list[Fraction], n_cols: int,
                   cost: dict[int, Fraction] | None = None, pricing: str = "dantzig") -> LPResult:
    """min cost.x subject to rows.x = b, x >= 0 (cost None: feasibility only).

    A row that already contains a column appearing with coefficient +1 in
    that row alone starts with it basic; other rows get an artificial.
    """
    rows = [{c: Fraction(v) for c, v in r.items() if v} for r in rows]
    b = [Fraction(v) for v in b]
    sign = [1] * len(rows)
    for i in range(len(rows)):
        if b[i] < 0:
            rows[i] = {c: -v for c, v in rows[i].items()}
            b[i] = -b[i]
            sign[i] = -1
    col_rows: dict[int, list[int]] = {}
    for i, r in enumerate(rows):
        for c in r:
            col_rows.setdefault(c, []).append(i)
    basis = [-1] * len(rows)
    for c, where in col_rows.items():
        if len(where) == 1 and rows[where[0]][c] == 1 and basis[where[0]] < 0:
            basis[where[0]] = c
    art = []
    next_col = n_cols
    for i in range(len(rows)):
        if basis[i] < 0:
            rows[i][next_col] = Fraction(1)
            basis[i] = next_col
            art.append(next_col)
            next_col += 1
    initial = list(basis)
    art_set = set(art)
    tab = _Tableau(rows, b, basis, next_col, blocked=art_set, pricing=pricing)
    obj: dict[int, Fraction] = {}
    obj_val = [ZERO]
    for i, r in enumerate(rows):
        if basis[i] in art_set:
            for c, v in r.items():
                if c not in art_set:
                    obj[c] = obj.get(c, ZERO) - v
            obj_val[0] -= b[i]
    obj = {c: v for c, v in obj.items() if v}
    tab.run(obj, obj_val)
    if -obj_val[0] > 0:
        # the reduced cost of the initial unit column of row i is c_i - y_i
        y = []
        for i, col in enumerate(initial):
            ci = 1 if col in art_set else 0
            y.append(sign[i] * (ci - obj.get(col, ZERO)))
        return LPResult("infeasible", farkas=y, objective=-obj_val[0], pivots=tab.pivots)
    # drive basic artificials (at value 0) out of the basis
    keep = []
    for i in range(len(tab.rows)):
        if tab.basis[i] in art_set:
            j = min((c for c in tab.rows[i] if c not in art_set), default=None)
            if j is None:
                continue  # redundant row
            tab.pivot(i, j, obj, obj_val)
        keep.append(i)
    tab.rows = [tab.rows[i] for i in keep]
    tab.rhs = [tab.rhs[i] for i in keep]
    tab.basis = [tab.basis[i] for i in keep]
    for r in tab.rows:
        for c in art:
            r.pop(c, None)
    objective = None
    if cost:
        obj = {c: Fraction(v) for c, v in cost.items() if v}
        obj_val = [ZERO]
        for i, bc in enumerate(tab.basis):
            cb = obj.get(bc)
            if cb:
                for c, v in tab.rows[i].items():
                    nv = obj.get(c, ZERO) - cb * v
                    if nv:
                        obj[c] = nv
                    else:
                        obj.pop(c, None)
                obj_val[0] -= cb * tab.rhs[i]
        if not tab.run(obj, obj_val):
            return LPResult("unbounded", pivots=tab.pivots)
        objective = -obj_val[0]
    x = [ZERO] * n_cols
    for i, bc in enumerate(tab.basis):
        if bc < n_cols:
            x[bc] = tab.rhs[i]
    return LPResult("optimal", x=x, objective=objective, pivots=tab.pivots)


@dataclass
class InequalityResult:
    status: str  # "feasible" or "infeasible"
    x: list[Fraction] | None = None
    farkas: list[Fraction] | None = None
    pivots: int = 0


def solve_inequalities(a: list[list[Fraction]], xi: list[Fraction], pinned=(),
                       l1_columns=(), pricing: str = "dantzig") -> InequalityResult:
    """Find x with a.x >= xi, x_j = 0 for j in pinned, all other x_j free.

    Free variables are split as x = p - q with p, q >= 0. Rows with xi <= 0
    are negated so their slack starts basic. With l1_columns, phase two
    minimises the sum of |x_j| over those columns.

    On infeasibility the certificate y satisfies y >= 0, y.a = 0 on the
    unpinned columns and y.xi > 0.
    """
    n = len(a[0]) if a else 0
    pinned = set(pinned)
    free = [j for j in range(n) if j not in pinned]
    plus = {j: 2 * k for k, j in enumerate(free)}
    n_split = 2 * len(free)
    rows: list[dict[int, Fraction]] = []
    rhs: list[Fraction] = []
    flip: list[int] = []
    for i, (row, b) in enumerate(zip(a, xi)):
        s = -1 if b <= 0 else 1
        d: dict[int, Fraction] = {}
        for j, v in enumerate(row):
            if v and j in plus:
                d[plus[j]] = s * Fraction(v)
                d[plus[j] + 1] = -s * Fraction(v)
        d[n_split + i] = Fraction(-s)
        rows.append(d)
        rhs.append(s * Fraction(b))
        flip.append(s)
    cost = None
    if l1_columns:
        cost = {}
        for j in l1_columns:
            if j in plus:
                cost[plus[j]] = Fraction(1)
                cost[plus[j] + 1] = Fraction(1)
    res = solve_standard(rows, rhs, n_split + len(a), cost, pricing)
    if res.status == "infeasible":
        y = [s * v for s, v in zip(flip, res.farkas)]
        return InequalityResult("infeasible", farkas=y, pivots=res.pivots)
    x = [Fraction(0)] * n
    for j, k in plus.items():
        x[j] = res.x[k] - res.x[k + 1]
    return InequalityResult("feasible", x=x, pivots=res.pivots)

