import warnings
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from gridcast.counting_forms import CountingForm, clause, eval_cyclic, from_coeff_vector, harmonic_form, purify, rho
from gridcast.cyclic_graph import (
    brute_force_min_cyclic,
    build_graph,
    is_cyclically_nonneg,
    is_cyclically_zero,
    negative_cycle,
    nonneg_plus_rho,
    potentials,
    rho_generator_matrix,
    rho_span_membership,
    rho_span_rank,
)
from gridcast.errors import ContractError, ResourceError

warnings.simplefilter("ignore", UserWarning)


def u_only_forms(max_len=3):
    pat = st.text(alphabet="01u", min_size=1, max_size=max_len).filter(lambda v: "u" in v)
    return st.dictionaries(pat, st.integers(-3, 3), min_size=1, max_size=5).map(CountingForm)


def test_graph_shape():
    g = build_graph(purify(clause("u"), 2))
    assert g.n_vertices == 9
    assert g.successors(0) == (0, 1, 2)
    assert g.vertex(8) == "uu"
    assert len(g.edges()) == 27


def test_negative_self_loop():
    res = is_cyclically_nonneg(clause("uu", -1))
    assert not res
    assert res.certificate.vertices == ("uu",)
    assert res.certificate.total_weight == -1


def test_certificate_replays_negative():
    w = CountingForm({"u0": -3, "0u": 1, "uu": 1})
    res = is_cyclically_nonneg(w)
    assert not res
    y = res.certificate.replay_string()
    assert eval_cyclic(w, y) < 0


def test_rho_is_zero():
    assert is_cyclically_zero(rho("0u"))
    assert is_cyclically_zero(purify(rho("u"), 3) - rho("u"))


def test_harmonic_not_zero():
    assert not is_cyclically_zero(harmonic_form())


@given(u_only_forms())
def test_agrees_with_brute_force(w):
    got = bool(is_cyclically_nonneg(w))
    want = brute_force_min_cyclic(w, 7) >= 0
    if got != want:
        want = brute_force_min_cyclic(w, 10) >= 0
    assert got == want


@given(u_only_forms())
def test_orders_and_modes_agree(w):
    a = is_cyclically_nonneg(w)
    assert bool(is_cyclically_nonneg(w, order="reverse")) == bool(a)
    assert bool(is_cyclically_nonneg(w, mode="float")) == bool(a)
    if not a:
        assert a.certificate.total_weight < 0


@given(u_only_forms())
def test_potentials_certify(w):
    p = purify(w, 3)
    g = build_graph(p, 3)
    z = potentials(3, list(g.weights))
    if is_cyclically_nonneg(w, rank=3):
        assert z is not None
        for a, b in g.edges():
            assert g.weights[a] + z[a] - z[b] >= 0
    else:
        assert z is None
        cyc = negative_cycle(3, list(g.weights))
        assert sum(g.weights[i] for i in cyc) < 0


def test_slack_shifts_verdict():
    w = clause("uu", Fraction(-1, 100))
    assert not is_cyclically_nonneg(w)
    assert is_cyclically_nonneg(w, slack=Fraction(1, 100))


def test_non_u_only_warns():
    with pytest.warns(UserWarning):
        is_cyclically_nonneg(clause("00"))


def test_rho_span_ranks():
    assert [rho_span_rank(s) for s in (2, 3, 4)] == [2, 8, 26]


def test_rho_span_certificate_reconstructs():
    w = 2 * rho("0u") - rho("uu") + Fraction(1, 3) * rho("10")
    res = rho_span_membership(w, 3)
    assert res.member
    rebuilt = CountingForm()
    for v, c in res.certificate.items():
        rebuilt = rebuilt + c * rho(v)
    assert rebuilt == w


def test_rho_span_rejects_nonnull():
    assert not rho_span_membership(purify(clause("u"), 2)).member
    with pytest.raises(ContractError):
        rho_span_membership(CountingForm({"u": 1, "uu": 1}))


def test_generator_matrix_shape():
    a, labels = rho_generator_matrix(3)
    assert len(a) == 27 and len(a[0]) == 9 and labels[0] == "00"


def test_brute_force_limit():
    with pytest.raises(ResourceError):
        brute_force_min_cyclic(clause("u"), 13)


def test_coefficients_of_zero_form_vector():
    w = from_coeff_vector([0] * 9)
    assert not w


def test_nonneg_plus_rho_decomposition():
    w = 3 * rho("0u") + clause("u0u", 2) - rho("uu")
    res = nonneg_plus_rho(w, 3)
    assert res.member
    rest = purify(w, 3)
    for v, c in res.certificate.items():
        rest = rest - c * rho(v)
    assert all(c > 0 for _, c in rest.items())
    assert not nonneg_plus_rho(clause("uu", -1)).member


@given(u_only_forms())
def test_decomposition_implies_nonneg(w):
    if nonneg_plus_rho(w, 3).member:
        assert is_cyclically_nonneg(w)
