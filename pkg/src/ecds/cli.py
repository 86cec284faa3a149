"""Command line front end: gen, encode, corrupt, query, bench, verify, diagnose."""

from __future__ import annotations

import argparse
import sys
from fractions import Fraction
from math import prod

import numpy as np
from sympy import isprime

from .container import (KIND_MEMBERSHIP, KIND_POLYEVAL, KIND_RAW, KINDS, ContainerError,
                        read_container, write_container)
from .core import (BOTTOM, BOTTOM_CODE, CorruptionSpec, ProbeView, RandomSource, STRATEGIES,
                   corrupt, failure_scorer, hamming_distance)
from .harness import (ExperimentConfig, calibrate_tau, clean_word, closed_form_length,
                      declared_tau, emit_report, load_structure, membership_check,
                      membership_metadata, polyeval_check, polyeval_metadata, run_bench)
from .membership import (ConstructionError, MembershipStructure, MemParams, build_membership,
                         expansion_audit, mem_diagnose)
from .polyeval import (PolyEvalParams, PolyEvalStructure, TrivialPolyEval, collision_audit)


def _parse_ints(text: str) -> list[int]:
    return [int(x) for x in text.replace(" ", "").split(",") if x]


def _build(kind: str, args: argparse.Namespace, item: list[int]):
    if kind == "membership":
        params = MemParams(args.n, args.s, Fraction(args.eps), args.scale)
        st = build_membership(item, params, args.seed, reps=args.reps)
        return KIND_MEMBERSHIP, st, membership_metadata(st)
    params = PolyEvalParams(args.n, args.s, args.C, args.lam)
    mode = args.mode
    if mode == "auto":
        mode = "trivial" if params.is_trivial else "full"
    st = TrivialPolyEval(params, item) if mode == "trivial" else PolyEvalStructure(params, item)
    return KIND_POLYEVAL, st, polyeval_metadata(st)


def _maybe_calibrate(kind: int, st, word, args, meta) -> None:
    if not getattr(args, "calibrate", False) or isinstance(st, TrivialPolyEval):
        return
    if kind == KIND_MEMBERSHIP:
        cal = calibrate_tau(st, word, membership_check(st), list(range(st.params.n)), 200, args.seed)
    else:
        cal = calibrate_tau(st, word, polyeval_check(st), list(range(st.params.n)), 4, args.seed,
                            probe_trials=1)
    st.tau = cal.tau
    meta["tau_measured"] = repr(cal.tau)
    print(f"measured tau = {cal.tau:.6g}")


def cmd_gen(args: argparse.Namespace) -> int:
    rng = RandomSource(args.seed)
    if args.kind == "membership":
        item = sorted(int(i) for i in rng.generator.choice(args.n, size=args.s, replace=False))
    else:
        item = [int(c) for c in rng.integers(0, args.n, size=args.s + 1)]
    kind, st, meta = _build(args.kind, args, item)
    word = clean_word(st)
    _maybe_calibrate(kind, st, word, args, meta)
    write_container(args.output, kind, meta, word)
    print(f"wrote {args.output}: {KINDS[kind]}, N={len(word)}")
    return 0


def cmd_encode(args: argparse.Namespace) -> int:
    item = _parse_ints(args.item)
    kind, st, meta = _build(args.kind, args, item)
    word = clean_word(st)
    _maybe_calibrate(kind, st, word, args, meta)
    write_container(args.output, kind, meta, word)
    print(f"wrote {args.output}: {KINDS[kind]}, N={len(word)}")
    return 0


def cmd_corrupt(args: argparse.Namespace) -> int:
    kind, meta, word = read_container(args.input)
    if (args.budget is None) == (args.delta is None):
        raise ValueError("give exactly one of --budget or --delta")
    budget = args.budget if args.budget is not None else int(args.delta * len(word))
    if args.conformance:
        tau = declared_tau(kind, meta)
        if budget > int(tau * len(word)):
            raise ValueError(f"budget {budget} exceeds floor(tau*N) = {int(tau * len(word))} "
                             f"(tau={tau:.6g}) in conformance mode")
    spec = CorruptionSpec(budget, args.strategy, args.seed, args.k)
    target = scorer = None
    if kind != KIND_RAW:
        st = load_structure(kind, meta)
        if hasattr(st, "corruption_target"):
            target = st.corruption_target()
            if args.strategy == "worst-of-k":
                scorer = failure_scorer(st, list(target.target_queries()), 16, args.seed)
    out = corrupt(word, spec, target, scorer)
    meta = dict(meta)
    meta.update({"corruption.strategy": args.strategy, "corruption.budget": budget,
                 "corruption.seed": args.seed, "corruption.flipped": hamming_distance(word, out)})
    write_container(args.output, kind, meta, out)
    print(f"flipped {meta['corruption.flipped']} of {len(word)} bits")
    return 0


def cmd_query(args: argparse.Namespace) -> int:
    kind, meta, word = read_container(args.input)
    st = load_structure(kind, meta)
    view = ProbeView(word)
    out = st.decode(view, args.q, RandomSource(args.seed))
    print(f"query={args.q} answer={'⊥' if out is BOTTOM else out} probes={view.probes}")
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    kind, meta, word = read_container(args.input)
    st = load_structure(kind, meta)
    if isinstance(st, TrivialPolyEval):
        raise ValueError("bench supports the membership and full polynomial structures")
    clean = clean_word(st)
    if len(clean) != len(word):
        raise ValueError("container word does not match its recorded parameters")
    cfg = ExperimentConfig(
        deltas=[float(x) for x in args.deltas.split(",")],
        strategies=args.strategies.split(","),
        trials=args.trials,
        query_policy="all" if args.queries == "all" else "random-k",
        query_k=args.query_k,
        seed=args.seed,
        worst_k=args.k,
        conformance=args.conformance,
        tau=declared_tau(kind, meta),
    )
    text, record = emit_report(run_bench(st, clean, cfg))
    print(text, end="")
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(record)
    return 0


def _verify_membership(st: MembershipStructure, word) -> list[tuple[str, bool]]:
    p, g = st.params, st.graph
    adj = g.adjacency
    checks = [
        ("left degree exactly d, distinct neighbors",
         adj.shape[1] == p.degree and bool((np.diff(adj, axis=1) > 0).all())),
        ("expansion audit >= 0.99 (conforming instances)",
         not p.conforming or expansion_audit(g, p, RandomSource(g.seed), 2000) >= 0.99),
        ("vote agreement >= (1-eps) d for every left vertex",
         bool(((st.votes[adj] == np.isin(np.arange(p.universe), list(st.members))[:, None])
               .sum(axis=1) >= p.agreement_needed).all())),
        ("partition covers padded right side exactly once",
         bool(np.array_equal(np.sort(st.partition.bins.ravel()), np.arange(p.padded_size)))),
        ("unique-neighbor bins >= b/4 for every query", bool((4 * (st.unique >= 0).sum(axis=1) >= p.bins).all())),
        ("length matches closed form", len(word) == closed_form_length(st)),
    ]
    return checks


def _verify_polyeval(st, word) -> list[tuple[str, bool]]:
    if isinstance(st, TrivialPolyEval):
        return [("length matches closed form", len(word) == st.length)]
    checks = []
    for name, basis in (("P1", st.P1), ("P2", st.P2)):
        lt = np.log2(float(basis.T)) if basis.T < 2**1000 else basis.T.bit_length()
        checks.append((f"{name} all prime", all(isprime(p) for p in basis.primes)))
        checks.append((f"{name} product of first K exceeds T", prod(basis.primes[: basis.K]) > basis.T))
        checks.append((f"{name} primes in (log T, 500 log T)", all(lt < p < 500 * lt for p in basis.primes)))
        checks.append((f"{name} rate 1/2", basis.N == 2 * basis.K))
    checks.append(("length matches closed form", len(word) == closed_form_length(st)))
    return checks


def cmd_verify(args: argparse.Namespace) -> int:
    kind, meta, word = read_container(args.input)
    st = load_structure(kind, meta)
    checks = _verify_membership(st, word) if kind == KIND_MEMBERSHIP else _verify_polyeval(st, word)
    for name, ok in checks:
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
    return 0 if all(ok for _, ok in checks) else 1


def cmd_diagnose(args: argparse.Namespace) -> int:
    kind, meta, word = read_container(args.input)
    st = load_structure(kind, meta)
    if kind == KIND_MEMBERSHIP:
        d = mem_diagnose(st, clean_word(st), word)
        print(f"delta={d.delta:.6g} heavy_bins={len(d.heavy_bins)} min_beta={d.beta.min():.4f}")
        print(f"|A|={len(d.bad_indices)} sd/40={st.params.s * st.graph.degree / 40:g} "
              f"precondition={d.claim_precondition}")
        print(f"|B(A)|={len(d.heavy_queries)} s/2={st.params.s / 2:g} holds={d.claim_holds}")
        return 0
    if isinstance(st, TrivialPolyEval):
        print("small-degree mode: no prime pairs to audit")
        return 0
    worst, ok = 0.0, True
    for p1, p2 in st.tables.pairs:
        mass, bound, holds = collision_audit(st.params, p1, p2)
        worst = max(worst, mass * p2 / 4)
        ok &= holds
    print(f"pairs={len(st.tables.pairs)} max mass/(4/p2)={worst:.4f} holds={ok}")
    return 0 if ok else 1


def _add_structure_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("kind", choices=["membership", "polyeval"])
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eps", default="1/10", help="membership vote error parameter")
    p.add_argument("--scale", type=int, default=1, help="divide large constants (non-conforming)")
    p.add_argument("--reps", type=int, default=64, help="membership decoder repetitions")
    p.add_argument("--C", type=float, default=2.0)
    p.add_argument("--lam", type=float, default=0.05)
    p.add_argument("--mode", choices=["auto", "full", "trivial"], default="auto")
    p.add_argument("--calibrate", action="store_true", help="measure tau and record it")
    p.add_argument("-o", "--output", required=True)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ecds", description=__doc__)
    sub = ap.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("gen", help="build a structure for a random item")
    _add_structure_args(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("encode", help="build a structure for a given set or coefficient list")
    _add_structure_args(p)
    p.add_argument("--item", required=True, help="comma-separated set elements or coefficients")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("corrupt", help="flip bits of a container word")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--budget", type=int)
    p.add_argument("--delta", type=float)
    p.add_argument("--strategy", choices=STRATEGIES, default="uniform-random")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k", type=int, default=8)
    p.add_argument("--conformance", action="store_true")
    p.set_defaults(func=cmd_corrupt)

    p = sub.add_parser("query", help="decode one query")
    p.add_argument("input")
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("bench", help="measure the contract over a noise grid")
    p.add_argument("input")
    p.add_argument("--deltas", default="0")
    p.add_argument("--strategies", default="uniform-random")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--queries", default="all", help="'all' or 'random-k'")
    p.add_argument("--query-k", type=int, default=4096)
    p.add_argument("--k", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--conformance", action="store_true")
    p.add_argument("--report", help="write the key=value record here")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("verify", help="re-run construction checks on a container")
    p.add_argument("input")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("diagnose", help="heavy-query or collision diagnostics")
    p.add_argument("input")
    p.set_defaults(func=cmd_diagnose)
    return ap


def cli_run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ContainerError, ConstructionError, ValueError, IndexError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli_run())


if __name__ == "__main__":
    main()
