"""Command-line front end.

Every output carries the fully resolved run configuration: JSON outputs under
a "config" key, CSV outputs as a first line "# config: {...}". Exit codes:
0 success, 1 a check failed, 2 bad input, 3 infeasible LP, 4 resource limit.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .counting_forms import (
    CountingForm,
    all_strings,
    cond_expectation,
    eval_acyclic,
    harmonic_form,
    in_star,
    purify,
)
from .cyclic_graph import brute_force_min_acyclic_star, is_cyclically_nonneg, is_cyclically_zero, rho_span_membership
from .errors import GridcastError, ParameterError
from .grid_core import RULES, simulate_coupled_grid, simulate_percolation, toom_coupled_check
from .lp_witness import Infeasible, find_witness, perturbation_lp, verify_witness
from .rational import fraction_from_json, fraction_json, snap_rational, to_fraction
from .xor_code import (
    build_parity_matrix,
    erasure_error_lower_bound,
    exact_ml_error_xor,
    to_bytes,
    to_text,
)

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_RESOURCE = 0, 1, 2, 3, 4


# ---------------------------------------------------------------- parsing helpers

def parse_rational(text: str) -> Fraction:
    """Exact parse of "p/q" or a decimal string."""
    try:
        return Fraction(str(text).strip())
    except (ValueError, ZeroDivisionError):
        raise ParameterError(f"not a rational number: {text!r}") from None


def resolve_delta(text: str) -> dict:
    q, _ = snap_rational(parse_rational(text))
    return {"input": str(text), "num": q.numerator, "den": q.denominator}


def delta_of(cfg: dict) -> Fraction:
    return Fraction(cfg["delta"]["num"], cfg["delta"]["den"])


def n_workers(requested: int | None) -> int:
    cap = os.environ.get("GRIDCAST_THREADS")
    n = requested or os.cpu_count() or 1
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise ParameterError(f"GRIDCAST_THREADS must be an integer, got {cap!r}") from None
    return max(1, n)


def fan_out(fn, jobs: list, workers: int) -> list:
    """Map in order; results come back to a single writer."""
    if workers <= 1 or len(jobs) <= 1:
        return [fn(*j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, *zip(*jobs)))


def trial_seed(seed: int, i: int) -> int:
    return int(np.random.SeedSequence([seed, i]).generate_state(1, np.uint64)[0])


def dumps(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=False) + "\n"


def write_text(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)


def csv_text(config: dict, header: str, rows) -> str:
    lines = ["# config: " + json.dumps(config, sort_keys=True), header]
    lines += [",".join("" if v is None else str(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def read_csv(text: str) -> tuple[dict, list[str], list[list[str]]]:
    """Parse a CSV written by this tool into (config, header, rows)."""
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# config: "):
        raise ParameterError("missing config header line")
    config = json.loads(lines[0][len("# config: "):])
    header = lines[1].split(",")
    return config, header, [ln.split(",") for ln in lines[2:] if ln]


def load_json(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParameterError(f"{path}: invalid JSON ({exc})") from None


def reference_columns() -> dict[str, list[str]]:
    data = json.loads(resources.files("gridcast").joinpath("reference_witnesses.json").read_text())
    return {c["delta"]: c["alpha"] for c in data["columns"]}


def parse_terms(text: str) -> CountingForm:
    """"pattern:coeff,pattern:coeff" -> CountingForm."""
    terms = []
    for part in text.split(","):
        if not part.strip():
            continue
        try:
            v, c = part.split(":")
        except ValueError:
            raise ParameterError(f"bad term {part!r}; expected pattern:coeff") from None
        terms.append((v.strip(), parse_rational(c)))
    return CountingForm(terms)


# ---------------------------------------------------------------- subcommands

def _one_trajectory(rule: str, delta: float, depth: int, seed: int):
    return simulate_coupled_grid(rule, delta, depth, seed)


def cmd_simulate(args, cfg) -> int:
    d = float(delta_of(cfg))
    seeds = [trial_seed(args.seed, i) for i in range(args.trials)]
    cfg["trial_seeds"] = seeds
    runs = fan_out(_one_trajectory, [(args.rule, d, args.depth, s) for s in seeds], n_workers(args.workers))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i, st in enumerate(runs):
        tcfg = dict(cfg, trial=i, trial_seed=seeds[i])
        (out / f"trial_{i:05d}.csv").write_text(
            csv_text(tcfg, "level,n_u", enumerate(st.n_u_per_level)))
    times = [st.coupling_time for st in runs]
    hist = Counter(t for t in times if t is not None)
    summary = {
        "config": cfg,
        "n_trials": len(runs),
        "n_coupled": sum(t is not None for t in times),
        "coupling_times": times,
        "coupling_time_histogram": {str(k): hist[k] for k in sorted(hist)},
    }
    (out / "summary.json").write_text(dumps(summary))
    print(f"{summary['n_coupled']}/{len(runs)} trials coupled within depth {args.depth}; wrote {out}")
    return EXIT_OK


def _alpha_from(entries) -> list[Fraction]:
    return [fraction_from_json(x) if not isinstance(x, float) else to_fraction(x) for x in entries]


def cmd_find_witness(args, cfg) -> int:
    d = delta_of(cfg)
    out, info = find_witness(d, r=args.r, rule=args.rule, minimize_l1=not args.no_l1)
    if isinstance(out, Infeasible):
        write_text(args.out, dumps({"config": cfg, **out.to_json()}))
        print("infeasible: Farkas certificate written", file=sys.stderr)
        return EXIT_INFEASIBLE
    if args.format == "csv":
        rows = [(v, str(a)) for v, a in zip(all_strings(args.r - 1), out.alpha.entries)]
        write_text(args.out, csv_text(dict(cfg, checks_pass=out.verified["all_pass"]), "pattern,alpha", rows))
    else:
        write_text(args.out, dumps({"config": cfg, **out.to_json()}))
    ok = out.verified["all_pass"]
    print("witness verified" if ok else "witness FAILED verification", file=sys.stderr)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_verify_witness(args, cfg) -> int:
    if args.reference is not None:
        cols = reference_columns()
        key = str(args.reference)
        match = [k for k in cols if parse_rational(k) == parse_rational(key)]
        if not match:
            raise ParameterError(f"no reference column for delta={key}; have {sorted(cols)}")
        alpha = [parse_rational(x) for x in cols[match[0]]]
        d = parse_rational(match[0])
        r = 4
    else:
        if args.file is None:
            raise ParameterError("give --file or --reference")
        data = load_json(args.file)
        try:
            alpha = _alpha_from(data["alpha"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ParameterError(f"{args.file}: cannot read alpha ({exc})") from None
        if args.delta is not None:
            d = delta_of(cfg)
        elif "delta" in data:
            d = fraction_from_json(data["delta"])
        else:
            raise ParameterError("delta missing from file; pass --delta")
        r = args.r or int(data.get("r", 0)) or None
    cfg["delta_resolved"] = fraction_json(d)
    tol = parse_rational(args.tolerance)
    report = verify_witness(alpha, d, parse_rational(args.C), tol, args.rule, r)
    write_text(args.out, dumps({"config": cfg, "report": report}))
    return EXIT_OK if report["all_pass"] else EXIT_FAIL


def cmd_verify_form(args, cfg) -> int:
    if args.check == "harmonic":
        d = delta_of(cfg) if args.delta is not None else Fraction(0)
        w = harmonic_form()
        diff = cond_expectation(w, args.rule, d) - w
        pure = purify(diff, 4)
        span = rho_span_membership(pure)
        star_min = brute_force_min_acyclic_star(diff, 4, args.max_len)
        star_max = brute_force_min_acyclic_star(-diff, 4, args.max_len)
        ok = span.member and star_min == 0 and (star_max is None or star_max == 0)
        report = {
            "check": "harmonic",
            "cyclically_zero": is_cyclically_zero(pure),
            "rho_span_member": span.member,
            "rho_certificate": {v: fraction_json(c) for v, c in (span.certificate or {}).items()},
            "acyclic_min_on_star": None if star_min is None else fraction_json(star_min),
            "acyclic_max_on_star": None if star_max is None else fraction_json(-star_max),
            "max_len": args.max_len,
            "fixed_point": ok,
        }
        write_text(args.out, dumps({"config": cfg, "report": report}))
        return EXIT_OK if ok else EXIT_FAIL
    if args.terms is not None:
        w = parse_terms(args.terms)
    elif args.file is not None:
        w = CountingForm.from_json(load_json(args.file))
    else:
        raise ParameterError("give --file, --terms or --check harmonic")
    if not w:
        raise ParameterError("empty form")
    r = args.r or w.rank
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = is_cyclically_nonneg(w, rank=r)
        zero = res.nonneg and bool(is_cyclically_nonneg(-w, rank=r))
    report = {
        "form": w.to_json(),
        "u_only": w.is_u_only,
        "cyclically_nonneg": res.nonneg,
        "cyclically_zero": zero,
        "certificate": res.certificate.to_json() if res.certificate else None,
        "replay": res.certificate.replay_string() if res.certificate else None,
    }
    write_text(args.out, dumps({"config": cfg, "report": report}))
    return EXIT_OK if res.nonneg else EXIT_FAIL


def cmd_xor(args, cfg) -> int:
    d = float(delta_of(cfg))
    rows = []
    for k in range(1, args.kmax + 1):
        bound = None
        if k >= 2 and k & (k - 1) == 0 and 0 < d < 0.5:
            bound = repr(erasure_error_lower_bound(d, k.bit_length() - 1))
        rows.append((k, repr(exact_ml_error_xor(d, k, args.k_max)), bound))
    write_text(args.out, csv_text(cfg, "k,ml_error,lower_bound", rows))
    if args.matrix is not None:
        pm = build_parity_matrix(args.matrix)
        if args.matrix_out is None:
            raise ParameterError("--matrix needs --matrix-out")
        if args.matrix_format == "text":
            Path(args.matrix_out).write_text(to_text(pm.H))
        else:
            Path(args.matrix_out).write_bytes(to_bytes(pm.H, pm.k))
    return EXIT_OK


def _one_percolation(p: float, depth: int, seed: int):
    levels = simulate_percolation(p, depth, seed)
    last = levels[-1]
    death = next((lv.level for lv in levels if not lv.alive), None)
    return last.alive, death, last.right, last.left


def cmd_percolate(args, cfg) -> int:
    seeds = [trial_seed(args.seed, i) for i in range(args.trials)]
    res = fan_out(_one_percolation, [(args.p, args.depth, s) for s in seeds], n_workers(args.workers))
    rows = [(i, s, int(a), death, r, l) for i, (s, (a, death, r, l)) in enumerate(zip(seeds, res))]
    cfg = dict(cfg, survival_fraction=sum(r[0] for r in res) / max(1, len(res)))
    write_text(args.out, csv_text(cfg, "trial,seed,alive_at_depth,extinction_level,right,left", rows))
    return EXIT_OK


def _one_toom(delta: float, K: int, seed: int, decoupled: bool):
    rep = toom_coupled_check(delta, K, seed, decoupled)
    return rep.equal, rep.first_mismatch, rep.n_checked


def cmd_toom(args, cfg) -> int:
    d = float(delta_of(cfg))
    seeds = list(range(args.seed, args.seed + args.seeds))
    res = fan_out(_one_toom, [(d, args.K, s, args.decoupled) for s in seeds], n_workers(args.workers))
    runs = [{"seed": s, "equal": e, "first_mismatch": list(m) if m else None, "n_checked": n}
            for s, (e, m, n) in zip(seeds, res)]
    n_eq = sum(r["equal"] for r in runs)
    out = {"config": cfg, "all_equal": n_eq == len(runs), "n_equal": n_eq,
           "mismatch_fraction": 1 - n_eq / max(1, len(runs)), "runs": runs}
    write_text(args.out, dumps(out))
    if args.decoupled:
        return EXIT_OK
    return EXIT_OK if out["all_equal"] else EXIT_FAIL


def cmd_perturb(args, cfg) -> int:
    res = perturbation_lp()
    if isinstance(res, Infeasible):
        write_text(args.out, dumps({"config": cfg, **res.to_json()}))
        return EXIT_INFEASIBLE
    out = {"config": cfg, **res.to_json()}
    write_text(args.out, dumps(out))
    return EXIT_OK if res.reference_feasible and res.zeroth_order_in_span else EXIT_FAIL


def cmd_reference(args, cfg) -> int:
    cols = reference_columns()
    match = [k for k in cols if parse_rational(k) == delta_of(cfg)]
    if not match:
        raise ParameterError(f"no reference column for delta={args.delta}; have {sorted(cols)}")
    d = parse_rational(match[0])
    write_text(args.out, dumps({"config": cfg, "delta": fraction_json(d), "r": 4, "alpha": cols[match[0]]}))
    return EXIT_OK


# ---------------------------------------------------------------- argument parsing

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gridcast", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="subcommand", required=True)
    rules = sorted(RULES)

    s = sub.add_parser("simulate", help="Monte Carlo runs of the coupled grid")
    s.add_argument("--rule", choices=rules, default="nand")
    s.add_argument("--delta", required=True)
    s.add_argument("--depth", type=int, default=500)
    s.add_argument("--trials", type=int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--workers", type=int)
    s.add_argument("--out", default="simulate_out", help="output directory")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("find-witness", help="solve the witness LP exactly and verify the result")
    s.add_argument("--delta", required=True)
    s.add_argument("--r", type=int, default=4)
    s.add_argument("--rule", choices=rules, default="nand")
    s.add_argument("--no-l1", action="store_true", help="skip the l1 objective (any feasible point)")
    s.add_argument("--format", choices=("json", "csv"), default="json")
    s.add_argument("--out")
    s.set_defaults(func=cmd_find_witness)

    s = sub.add_parser("verify-witness", help="check a coefficient vector against the witness conditions")
    s.add_argument("--file")
    s.add_argument("--reference", help="use the bundled reference column for this delta")
    s.add_argument("--delta")
    s.add_argument("--r", type=int)
    s.add_argument("--C", default="1")
    s.add_argument("--tolerance", default="0")
    s.add_argument("--rule", choices=rules, default="nand")
    s.add_argument("--out")
    s.set_defaults(func=cmd_verify_witness)

    s = sub.add_parser("verify-form", help="cyclic order verdicts for a counting form")
    s.add_argument("--file")
    s.add_argument("--terms", help='inline form, e.g. "uu:-1,0u:2"')
    s.add_argument("--check", choices=("harmonic",))
    s.add_argument("--delta")
    s.add_argument("--rule", choices=rules, default="nand")
    s.add_argument("--r", type=int)
    s.add_argument("--max-len", type=int, default=8)
    s.add_argument("--out")
    s.set_defaults(func=cmd_verify_form)

    s = sub.add_parser("xor", help="exact ML error of the XOR grid and the erasure bound")
    s.add_argument("--delta", required=True)
    s.add_argument("--kmax", type=int, default=12)
    s.add_argument("--k-max", type=int, default=18, help="resource limit of the exact engine")
    s.add_argument("--matrix", type=int, help="also export H_k for this k")
    s.add_argument("--matrix-out")
    s.add_argument("--matrix-format", choices=("text", "binary"), default="text")
    s.add_argument("--out")
    s.set_defaults(func=cmd_xor)

    s = sub.add_parser("percolate", help="oriented bond percolation from the root")
    s.add_argument("--p", type=float, required=True)
    s.add_argument("--depth", type=int, default=200)
    s.add_argument("--trials", type=int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--workers", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_percolate)

    s = sub.add_parser("toom", help="coupled 3D majority grid vs Toom PCA replay")
    s.add_argument("--delta", required=True)
    s.add_argument("--K", type=int, default=8)
    s.add_argument("--seeds", type=int, default=100)
    s.add_argument("--seed", type=int, default=0, help="first seed")
    s.add_argument("--decoupled", action="store_true", help="negative control with independent noise")
    s.add_argument("--workers", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_toom)

    s = sub.add_parser("perturb", help="first-order perturbation LP around the harmonic form")
    s.add_argument("--out")
    s.set_defaults(func=cmd_perturb)

    s = sub.add_parser("reference", help="export a bundled reference witness column")
    s.add_argument("--delta", required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_reference)
    return p


def resolved_config(args) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k not in ("func", "out", "workers") and v is not None}
    if getattr(args, "delta", None) is not None:
        cfg["delta"] = resolve_delta(args.delta)
    cfg["version"] = __version__
    return cfg


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolved_config(args)
        return args.func(args, cfg)
    except GridcastError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ValueError, TypeError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
