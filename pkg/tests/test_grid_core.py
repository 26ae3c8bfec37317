import math
from fractions import Fraction
from itertools import product

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gridcast.errors import ContractError, ParameterError, ResourceError
from gridcast.grid_core import (
    AND,
    IMP,
    NAND,
    RULES,
    XOR,
    AndLetter,
    CoupledLayer,
    Letter,
    _apply_channel,
    channel_matrix,
    coupled_channel_step,
    exact_mutual_information,
    exact_tv_distance,
    forward_distributions,
    gate_eval,
    layer_growth_bound,
    make_rng,
    mi_upper_bound,
    next_layer,
    simulate_coupled_grid,
    simulate_percolation,
    toom_coupled_check,
    tv_sequence,
)

Z, O, U = Letter.ZERO, Letter.ONE, Letter.U


def test_nand_coupled_table():
    expected = {
        (Z, Z): O, (Z, O): O, (Z, U): O,
        (O, Z): O, (O, O): Z, (O, U): U,
        (U, Z): O, (U, O): U, (U, U): U,
    }
    for (a, b), c in expected.items():
        assert gate_eval(NAND, a, b) == c


def test_and_coupled_table():
    c0, c1, cu = AndLetter.ZERO_C, AndLetter.ONE_C, AndLetter.ONE_U
    assert gate_eval(AND, c0, cu) == c0
    assert gate_eval(AND, cu, c0) == c0
    assert gate_eval(AND, c1, cu) == cu
    assert gate_eval(AND, cu, cu) == cu
    assert gate_eval(AND, c1, c1) == c1


def test_xor_and_imp_tables():
    assert XOR.coupled_table == ((0, 1, 2), (1, 0, 2), (2, 2, 2))
    assert IMP.coupled_table == ((1, 1, 1), (0, 1, 2), (2, 1, 2))


def test_tables_agree_with_marginals():
    for rule in RULES.values():
        for x, y in product((0, 1), repeat=2):
            assert rule.coupled_table[x][y] == rule.marginal_table[x][y]


def test_gate_rejects_mixed_alphabets():
    with pytest.raises(ContractError):
        gate_eval(NAND, AndLetter.ONE_C, Letter.ONE)
    with pytest.raises(ContractError):
        gate_eval(AND, Letter.ONE, Letter.ONE)


def test_channel_matrix_rows():
    d = Fraction(1, 10)
    w = channel_matrix(d)
    assert w[0] == (Fraction(9, 10), d, 0)
    assert w[2] == (d, d, Fraction(8, 10))
    assert all(sum(row) == 1 for row in w)


def test_channel_noiseless_copy():
    rng = make_rng(0)
    assert all(coupled_channel_step(U, 0.0, rng) == U for _ in range(100))


def test_channel_delta_out_of_range():
    with pytest.raises(ParameterError):
        coupled_channel_step(U, 0.6, make_rng(0))
    with pytest.raises(ParameterError):
        channel_matrix(-0.1)


def test_channel_frequencies_from_u():
    # 10^6 draws through the channel kernel, 3 sigma binomial bands
    n, d = 10**6, 0.1
    rng = make_rng(12345)
    out = _apply_channel(np.full(n, 2), rng.random(n), d)
    for code, p in ((0, d), (1, d), (2, 1 - 2 * d)):
        freq = np.count_nonzero(out == code) / n
        assert abs(freq - p) <= 3 * math.sqrt(p * (1 - p) / n)


def test_channel_step_frequencies_from_zero():
    n, d = 20000, 0.25
    rng = make_rng(5)
    flips = sum(coupled_channel_step(Z, d, rng) == O for _ in range(n))
    assert abs(flips / n - d) <= 4 * math.sqrt(d * (1 - d) / n)


def test_coupled_layer_length():
    with pytest.raises(ContractError):
        CoupledLayer(2, (U, U))
    with pytest.raises(ContractError):
        CoupledLayer(1, (U, AndLetter.ONE_U))
    layer = CoupledLayer(0, (U,))
    nxt = next_layer(layer, NAND, 0.1, make_rng(1))
    assert nxt.level == 1 and len(nxt.letters) == 2


def test_simulation_is_deterministic():
    a = simulate_coupled_grid("nand", 0.2, 300, seed=99)
    b = simulate_coupled_grid("nand", 0.2, 300, seed=99)
    assert a == b


@given(st.integers(0, 2**32), st.sampled_from(sorted(RULES)), st.sampled_from([0.05, 0.2, 0.4]))
def test_trajectory_invariants(seed, rule, delta):
    s = simulate_coupled_grid(rule, delta, 60, seed, stop_at_coupling=False)
    assert s.n_u_per_level[0] == 1
    for k, n in enumerate(s.n_u_per_level):
        assert 0 <= n <= k + 1
    if s.coupling_time is not None:
        assert all(n == 0 for n in s.n_u_per_level[s.coupling_time:])


def _brute_level_law(rule, delta, k):
    """Law of level k by summing over every edge-noise pattern."""
    edges = [(n, j, side) for n in range(1, k + 1) for j in range(n + 1) for side in (0, 1)
             if 0 <= (j - 1 if side == 0 else j) <= n - 1]
    out = np.zeros((2, 2 ** (k + 1)))
    for root in (0, 1):
        for flips in product((0, 1), repeat=len(edges)):
            p = 1.0
            z = {}
            for e, f in zip(edges, flips):
                z[e] = f
                p *= delta if f else 1 - delta
            level = [root]
            for n in range(1, k + 1):
                nxt = []
                for j in range(n + 1):
                    ins = []
                    if j >= 1:
                        ins.append(level[j - 1] ^ z[(n, j, 0)])
                    if j <= n - 1:
                        ins.append(level[j] ^ z[(n, j, 1)])
                    nxt.append(ins[0] if len(ins) == 1 else rule.marginal_table[ins[0]][ins[1]])
                level = nxt
            idx = int("".join(map(str, level)), 2)
            out[root, idx] += p
    return out


@pytest.mark.parametrize("rule", [NAND, AND, XOR, IMP])
def test_forward_engine_matches_enumeration(rule):
    for k in (1, 2, 3):
        assert np.allclose(forward_distributions(rule, 0.13, k), _brute_level_law(rule, 0.13, k), atol=1e-13)


def test_tv_first_level():
    for rule in RULES:
        assert exact_tv_distance(rule, 0.1, 1) == pytest.approx(0.8, abs=1e-12)


def test_tv_sequence_matches_single_calls():
    seq = tv_sequence("nand", 0.2, 6)
    assert seq == pytest.approx([exact_tv_distance("nand", 0.2, k) for k in range(1, 7)], abs=1e-14)


def test_forward_engine_resource_limit():
    with pytest.raises(ResourceError):
        forward_distributions("xor", 0.1, 19)


def test_mutual_information_bounds():
    for rule in RULES:
        for k in (1, 4, 8):
            mi = exact_mutual_information(rule, 0.25, k)
            assert 0 <= mi <= mi_upper_bound(0.25, k) + 1e-12
    assert exact_mutual_information("nand", 0.5, 3) == pytest.approx(0, abs=1e-15)


def test_layer_growth_bound():
    assert layer_growth_bound(0.25, 2, 16) == pytest.approx(math.log(16) / (2 * math.log(2)))
    with pytest.raises(ParameterError):
        layer_growth_bound(0.5, 2, 16)


def test_percolation_extremes():
    full = simulate_percolation(1.0, 20, 0)
    assert all(lv.alive and lv.left == 0 and lv.right == lv.level for lv in full)
    empty = simulate_percolation(0.0, 5, 0)
    assert not empty[1].alive and empty[1].right == -1
    assert all(not lv.alive for lv in empty[1:])


@given(st.integers(0, 2**32), st.floats(0.3, 0.9))
def test_percolation_invariants(seed, p):
    levels = simulate_percolation(p, 40, seed)
    dead = False
    for lv in levels:
        if dead:
            assert not lv.alive
        if lv.alive:
            assert 0 <= lv.left <= lv.right <= lv.level
        else:
            dead = True
            assert lv.left == lv.right == -1


def test_toom_equivalence_and_control():
    assert all(toom_coupled_check(0.2, 6, s).equal for s in range(10))
    misses = sum(not toom_coupled_check(0.3, 6, s, decoupled=True).equal for s in range(10))
    assert misses >= 8
