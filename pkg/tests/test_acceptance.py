"""Acceptance checks. Each check prints one PASS/FAIL line; run this file
directly (python tests/test_acceptance.py) or through pytest, where the
lines are also collected into the terminal summary."""

import json
import random
import time
import warnings
from fractions import Fraction
from importlib import resources

from gridcast.counting_forms import (
    CountingForm,
    all_strings,
    cond_expectation,
    eval_acyclic,
    harmonic_form,
    in_star,
    purify,
)
from gridcast.cyclic_graph import (
    brute_force_min_acyclic_star,
    brute_force_min_cyclic,
    is_cyclically_nonneg,
    rho_span_membership,
    rho_span_rank,
)
from gridcast.grid_core import (
    NAND,
    RULES,
    channel_matrix,
    exact_mutual_information,
    mi_upper_bound,
    simulate_coupled_grid,
    toom_coupled_check,
    tv_sequence,
)
from gridcast.lp_witness import Infeasible, Witness, find_witness, perturbation_lp, verify_witness
from gridcast.rational import snap_rational
from gridcast.xor_code import erasure_error_lower_bound, exact_ml_error_xor, special_codeword

warnings.simplefilter("ignore", UserWarning)

TABLE_DELTAS = [0.0001, 0.001, 0.01, 0.02, 0.05, 0.1, 0.2]
TABLE_TOL = Fraction(5, 1000)  # covers 4-decimal rounding of the published columns
FLOAT_TOL = 1e-12


def line(n, ok, name, detail):
    return f"criterion {n:>2} {'PASS' if ok else 'FAIL'}: {name} ({detail})"


def check_1():
    worst, ok_count = 0.0, 0
    fails = []
    for d in TABLE_DELTAS:
        q, _ = snap_rational(d)
        t = time.perf_counter()
        out, _ = find_witness(q, r=4)
        dt = time.perf_counter() - t
        worst = max(worst, dt)
        good = isinstance(out, Witness) and out.verified["all_pass"] and dt <= 120
        ok_count += good
        if not good:
            fails.append(str(d))
    ok = ok_count == len(TABLE_DELTAS)
    return ok, f"{ok_count}/{len(TABLE_DELTAS)} exact witnesses verified, slowest {worst:.1f}s" + (
        f", failed {fails}" if fails else "")


def reference_columns():
    data = json.loads(resources.files("gridcast").joinpath("reference_witnesses.json").read_text())
    return [(Fraction(c["delta"]), [Fraction(x) for x in c["alpha"]]) for c in data["columns"]]


def check_2():
    n_ok, worst = 0, 0.0
    cols = reference_columns()
    for d, alpha in cols:
        t = time.perf_counter()
        rep = verify_witness(alpha, d, 1, TABLE_TOL, NAND, 4)
        dt = time.perf_counter() - t
        worst = max(worst, dt)
        n_ok += rep["all_pass"] and dt <= 10
    return n_ok == len(cols), f"{n_ok}/{len(cols)} columns pass at tolerance 5e-3, slowest {worst:.2f}s"


def check_3():
    w = harmonic_form()
    diff = cond_expectation(w, NAND, 0) - w
    lo = brute_force_min_acyclic_star(diff, 4, 10)
    hi = brute_force_min_acyclic_star(-diff, 4, 10)
    span = rho_span_membership(purify(diff, 4))
    ok = lo == 0 and hi == 0 and span.member
    return ok, f"min {lo}, max {-hi} over star strings up to length 10; rho-span member {span.member}"


def random_u_only_form(rng, max_rank=3):
    pats = [v for s in range(1, max_rank + 1) for v in all_strings(s) if "u" in v]
    terms = {}
    for _ in range(rng.randint(1, 5)):
        terms[rng.choice(pats)] = rng.randint(-3, 3)
    return CountingForm(terms)


def check_4():
    rng = random.Random(2024)
    agree, escalated = 0, 0
    for _ in range(500):
        w = random_u_only_form(rng)
        if not w:
            w = CountingForm({"u": rng.choice([-1, 1])})
        got = bool(is_cyclically_nonneg(w))
        want = brute_force_min_cyclic(w, 9) >= 0
        if got != want:
            escalated += 1
            want = brute_force_min_cyclic(w, 12) >= 0
        agree += got == want
    return agree == 500, f"{agree}/500 agree, {escalated} escalated to L=12"


def next_level_expectation(w, y, d):
    """E[w(Y_{k+1}) | Y_k = y] by exact enumeration: the next level's letters
    are independent given y (no shared edges), so each window probability is
    a product of per-letter laws."""
    ch = channel_matrix(d)
    code = {"0": 0, "1": 1, "u": 2}
    z = [code[c] for c in y]
    laws = [list(ch[z[0]])]
    for a, b in zip(z, z[1:]):
        p = [Fraction(0)] * 3
        for x in range(3):
            for x2 in range(3):
                p[NAND.coupled_table[x][x2]] += ch[a][x] * ch[b][x2]
        laws.append(p)
    laws.append(list(ch[z[-1]]))
    total = Fraction(0)
    for v, c in w.items():
        for i in range(len(laws) - len(v) + 1):
            p = Fraction(1)
            for j, letter in enumerate(v):
                p *= laws[i + j][code[letter]]
                if not p:
                    break
            total += c * p
    return total


def random_star_string(rng, n, r):
    while True:
        y = "".join(rng.choice("01u") if r <= i < n - r else rng.choice("01") for i in range(n))
        if in_star(y, r):
            return y


def check_5():
    rng = random.Random(77)
    mismatches, checked, nontrivial = 0, 0, 0
    for _ in range(50):
        w = random_u_only_form(rng) or CountingForm({"u": 1})
        d = rng.choice([Fraction(0), Fraction(1, 10), Fraction(1, 4), Fraction(1, 3)])
        e = cond_expectation(w, NAND, d)
        for k in range(3, 7):
            for _ in range(200):
                y = random_star_string(rng, k + 1, 4)
                checked += 1
                mismatches += eval_acyclic(e, y) != next_level_expectation(w, y, d)
        # strengthened: star of order 3 leaves room for u's in the middle
        for k in range(6, 10):
            for _ in range(20):
                y = random_star_string(rng, k + 1, 3)
                checked += 1
                nontrivial += "u" in y
                mismatches += eval_acyclic(e, y) != next_level_expectation(w, y, d)
    return mismatches == 0, f"{mismatches} mismatches in {checked} checks ({nontrivial} strings containing u)"


def check_6():
    ranks = {s: rho_span_rank(s) for s in (2, 3, 4)}
    ok = all(ranks[s] == 3 ** (s - 1) - 1 for s in ranks)
    return ok, f"ranks {ranks}"


def check_7():
    codewords = {k: special_codeword(k)[1] for k in (2, 4, 8, 16, 32)}
    seq = [exact_ml_error_xor(0.2, k) for k in range(1, 13)]
    mono = all(b >= a - FLOAT_TOL for a, b in zip(seq, seq[1:]))
    bounds = all(exact_ml_error_xor(0.2, 2**m) >= erasure_error_lower_bound(0.2, m) for m in (1, 2, 3))
    first = abs(seq[0] - 0.2) <= FLOAT_TOL
    ok = all(codewords.values()) and mono and bounds and first
    return ok, (f"H omega = 0 for {sorted(k for k, v in codewords.items() if v)}; monotone {mono}; "
                f"above erasure bound {bounds}; P_e(k=1) = {seq[0]:.15f}")


def check_8():
    res = {}
    for d, depth, need in ((0.3, 200, 0.99), (0.05, 2000, 0.95)):
        n = sum(simulate_coupled_grid("and", d, depth, seed).coupling_time is not None for seed in range(500))
        res[d] = (n / 500, need)
    ok = all(frac >= need for frac, need in res.values())
    return ok, ", ".join(f"delta={d}: {frac:.3f} coupled (need {need})" for d, (frac, need) in res.items())


def check_9():
    res = perturbation_lp()
    if isinstance(res, Infeasible):
        return False, "perturbation LP infeasible"
    ok = res.reference_feasible and res.zeroth_order_in_span
    return ok, f"feasible, reference w1 with phase-1 x1 {res.reference_feasible}, zeroth-order span {res.zeroth_order_in_span}"


def check_10():
    eq = {d: sum(toom_coupled_check(d, 8, s).equal for s in range(100)) for d in (0.1, 0.3)}
    miss = sum(not toom_coupled_check(0.3, 8, s, decoupled=True).equal for s in range(100))
    ok = eq[0.1] == 100 and eq[0.3] == 100 and miss >= 90
    return ok, f"coupled equal {eq[0.1]}/100 and {eq[0.3]}/100; decoupled mismatch {miss}/100"


def check_11():
    worst = None
    bad = 0
    for rule in RULES:
        for d in (0.16, 0.25, 0.4):
            for k in range(1, 11):
                mi, ub = exact_mutual_information(rule, d, k), mi_upper_bound(d, k)
                bad += mi > ub
                gap = ub - mi
                worst = gap if worst is None else min(worst, gap)
    return bad == 0, f"{bad} violations, smallest slack {worst:.3e} nats"


def check_12():
    bad = []
    for rule in RULES:
        for d in (0.1, 0.25):
            seq = tv_sequence(rule, d, 12)
            if abs(seq[0] - (1 - 2 * d)) > FLOAT_TOL or any(b > a + FLOAT_TOL for a, b in zip(seq, seq[1:])):
                bad.append((rule, d))
    return not bad, f"{8 - len(bad)}/8 (rule, delta) sequences non-increasing with TV(1) = 1 - 2 delta"


NAMES = {
    1: "witness LP feasible at every table delta",
    2: "published columns verify",
    3: "harmonic fixed point",
    4: "negative-cycle test vs brute force",
    5: "conditional expectation operator vs enumeration",
    6: "rho-span dimension",
    7: "XOR endpoints",
    8: "AND coupling",
    9: "perturbation LP",
    10: "3D majority vs Toom replay",
    11: "mutual information bound",
    12: "TV monotonicity",
}
CHECKS = {n: globals()[f"check_{n}"] for n in NAMES}


def _run(n, log=None):
    t = time.perf_counter()
    ok, detail = CHECKS[n]()
    text = line(n, ok, NAMES[n], f"{detail}; {time.perf_counter() - t:.1f}s")
    print(text)
    if log is not None:
        log.append(text)
    return ok


def test_criterion_1(acceptance_log):
    assert _run(1, acceptance_log)


def test_criterion_2(acceptance_log):
    assert _run(2, acceptance_log)


def test_criterion_3(acceptance_log):
    assert _run(3, acceptance_log)


def test_criterion_4(acceptance_log):
    assert _run(4, acceptance_log)


def test_criterion_5(acceptance_log):
    assert _run(5, acceptance_log)


def test_criterion_6(acceptance_log):
    assert _run(6, acceptance_log)


def test_criterion_7(acceptance_log):
    assert _run(7, acceptance_log)


def test_criterion_8(acceptance_log):
    assert _run(8, acceptance_log)


def test_criterion_9(acceptance_log):
    assert _run(9, acceptance_log)


def test_criterion_10(acceptance_log):
    assert _run(10, acceptance_log)


def test_criterion_11(acceptance_log):
    assert _run(11, acceptance_log)


def test_criterion_12(acceptance_log):
    assert _run(12, acceptance_log)


if __name__ == "__main__":
    results = [_run(n) for n in NAMES]
    print(f"{sum(results)}/{len(results)} criteria pass")
