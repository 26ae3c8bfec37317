from fractions import Fraction

from hypothesis import given
from hypothesis import strategies as st

from gridcast import exact_linalg
from gridcast.simplex import solve_inequalities, solve_standard

F = Fraction


def test_infeasible_pair():
    res = solve_inequalities([[1], [-1]], [1, 0])
    assert res.status == "infeasible"
    y = res.farkas
    assert all(v >= 0 for v in y)
    assert y[0] * 1 + y[1] * -1 == 0
    assert y[0] * 1 + y[1] * 0 > 0


def test_small_optimum():
    # min x0 + x1 st x0 + 2 x1 = 4, 3 x0 + x1 = 7
    res = solve_standard([{0: 1, 1: 2}, {0: 3, 1: 1}], [4, 7], 2, cost={0: 1, 1: 1})
    assert res.status == "optimal"
    assert res.x == [F(2), F(1)]
    assert res.objective == 3
    assert all(isinstance(v, Fraction) for v in res.x)


def test_pinned_columns_stay_zero():
    res = solve_inequalities([[1, 1], [1, -1]], [2, 0], pinned=[1])
    assert res.status == "feasible"
    assert res.x[1] == 0 and res.x[0] >= 2


def test_l1_objective():
    res = solve_inequalities([[1, 1]], [3], l1_columns=[0, 1])
    assert res.status == "feasible"
    assert abs(res.x[0]) + abs(res.x[1]) == 3


@given(st.lists(st.lists(st.integers(-3, 3), min_size=3, max_size=3), min_size=1, max_size=6),
       st.lists(st.integers(-3, 3), min_size=6, max_size=6))
def test_feasible_or_certified(rows, rhs):
    rhs = rhs[:len(rows)]
    res = solve_inequalities(rows, rhs)
    if res.status == "feasible":
        assert all(v >= b for v, b in zip(exact_linalg.matvec(rows, res.x), rhs))
    else:
        y = res.farkas
        assert all(v >= 0 for v in y)
        for j in range(3):
            assert sum(y[i] * rows[i][j] for i in range(len(rows))) == 0
        assert sum(a * b for a, b in zip(y, rhs)) > 0


def test_bland_pricing_agrees():
    rows = [[1, 2, 0], [0, 1, 1], [1, 0, 1]]
    a = solve_inequalities(rows, [1, 1, 1], pricing="bland")
    b = solve_inequalities(rows, [1, 1, 1])
    assert a.status == b.status == "feasible"


def test_rref_and_solve():
    a = [[F(1), F(2)], [F(2), F(4)]]
    assert exact_linalg.rank(a) == 1
    assert exact_linalg.solve(a, [F(3), F(6)]) == [F(3), F(0)]
    assert exact_linalg.solve(a, [F(3), F(7)]) is None
