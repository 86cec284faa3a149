"""Experiment runner: structure (de)serialization, noise calibration, contract reports."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .container import KIND_MEMBERSHIP, KIND_POLYEVAL, KIND_RAW
from .core import (BitWord, ContractReport, CorruptionSpec, RandomSource, measure_contract,
                   run_trials)
from .membership import (MembershipStructure, MemParams, build_expander, build_membership,
                         build_partition, bmrv_encode, induced_tau, membership_length)
from .polyeval import (PolyEvalParams, PolyEvalStructure, TrivialPolyEval, polyeval_length,
                       table_layout)


# ---------------------------------------------------------------------------
# Metadata round trip


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x != ""]


def _join(values) -> str:
    return ",".join(str(int(v)) for v in values)


def membership_metadata(st: MembershipStructure) -> dict[str, object]:
    p = st.params
    meta: dict[str, object] = {
        "kind": "membership",
        "n": p.n,
        "s": p.s,
        "eps_bmrv": str(p.eps_bmrv),
        "scale": p.scale,
        "conforming": int(p.conforming),
        "reps": st.reps,
        "epsilon": repr(st.epsilon),
        "expander_seed": st.graph.seed,
        "partition_seed": st.partition.seed,
        "block_code": st.scheme.code.name,
        "accept_fraction": str(st.scheme.accept_fraction),
        "tau_induced": repr(induced_tau(p, st.scheme.markov_constant)),
        "item": _join(sorted(st.members)),
    }
    if st.tau:
        meta["tau_measured"] = repr(st.tau)
    return meta


def polyeval_metadata(st: PolyEvalStructure | TrivialPolyEval) -> dict[str, object]:
    p = st.params
    meta: dict[str, object] = {
        "kind": "polyeval",
        "mode": "trivial" if isinstance(st, TrivialPolyEval) else "full",
        "n": p.n,
        "s": p.s,
        "C": repr(p.C),
        "lambda": repr(p.lam),
        "prime_rule": p.prime_rule,
        "d": p.d,
        "m": p.m,
    }
    if isinstance(st, PolyEvalStructure):
        meta["P1"] = _join(st.P1.primes)
        meta["P1_K"] = st.P1.K
        meta["P2"] = _join(st.P2.primes)
        meta["P2_K"] = st.P2.K
        meta["epsilon"] = repr(st.epsilon)
        meta["block_code"] = st.scheme.code.name
        meta["inner_bits"] = st.ecc.ell
        if st.tau:
            meta["tau_measured"] = repr(st.tau)
    else:
        meta["parity_bytes"] = st.parity
    meta["item"] = _join(st.coeffs)
    return meta


def load_structure(kind: int, meta: dict[str, str]):
    """Rebuild the decoder side (and the item, for truth values) from metadata."""
    if kind == KIND_MEMBERSHIP:
        params = MemParams(int(meta["n"]), int(meta["s"]), Fraction(meta["eps_bmrv"]),
                           int(meta["scale"]))
        graph = build_expander(params, int(meta["expander_seed"]))
        part = build_partition(graph, params, int(meta["partition_seed"]))
        members = frozenset(_ints(meta.get("item", "")))
        votes = bmrv_encode(members, graph, params)
        return MembershipStructure(params, graph, part, reps=int(meta["reps"]),
                                   epsilon=float(meta["epsilon"]),
                                   tau=float(meta.get("tau_measured", 0.0)),
                                   members=members, votes=votes)
    if kind == KIND_POLYEVAL:
        params = PolyEvalParams(int(meta["n"]), int(meta["s"]), float(meta["C"]),
                                float(meta["lambda"]), meta.get("prime_rule", "compact"))
        coeffs = _ints(meta.get("item", "")) or None
        if meta.get("mode") == "trivial":
            return TrivialPolyEval(params, coeffs, int(meta["parity_bytes"]))
        st = PolyEvalStructure(params, coeffs, tables=table_layout(params),
                               epsilon=float(meta["epsilon"]),
                               tau=float(meta.get("tau_measured", 0.0)))
        if _join(st.P1.primes) != meta["P1"] or _join(st.P2.primes) != meta["P2"]:
            raise ValueError("recorded prime bases do not match the parameters")
        return st
    raise ValueError(f"no structure for container kind {kind}")


def clean_word(st) -> BitWord:
    if isinstance(st, MembershipStructure):
        return st.encode_votes(st.votes)
    if isinstance(st, PolyEvalStructure) and st.tables.values is None:
        st = PolyEvalStructure(st.params, st.coeffs)
    return st.encode()


def closed_form_length(st) -> int:
    if isinstance(st, MembershipStructure):
        return membership_length(st.params)
    if isinstance(st, PolyEvalStructure):
        return polyeval_length(st.tables, st.ecc)
    return st.length


def declared_tau(kind: int, meta: dict[str, str]) -> float:
    if "tau_measured" in meta:
        return float(meta["tau_measured"])
    return float(meta.get("tau_induced", 0.0))


# ---------------------------------------------------------------------------
# Contract checks used for calibration


def membership_check(st: MembershipStructure) -> Callable[[ContractReport], bool]:
    """Answer-or-BOTTOM >= 0.624 for all queries; success >= 0.51 on >= 1 - s/2n of them."""
    lam = st.params.s / (2 * st.params.n)

    def check(rep: ContractReport) -> bool:
        return rep.worst_answer_or_bottom >= 0.624 and float(np.mean(rep.success >= 0.51)) >= 1 - lam

    return check


def polyeval_check(st: PolyEvalStructure) -> Callable[[ContractReport], bool]:
    """Answer-or-BOTTOM >= 3/4 for all queries; success >= 3/4 on >= 1 - lambda of them."""

    def check(rep: ContractReport) -> bool:
        return rep.worst_answer_or_bottom >= 0.75 and float(np.mean(rep.success >= 0.75)) >= 1 - st.params.lam

    return check


@dataclass
class Calibration:
    tau: float
    history: list[tuple[float, bool, int]] = field(default_factory=list)  # (delta, passed, flips)


def calibrate_tau(st, clean: BitWord, check: Callable[[ContractReport], bool],
                  queries: Sequence[int], trials: int, seed: int, k: int = 8,
                  exponents: tuple[int, int] = (2, 30), probe_trials: int = 16) -> Calibration:
    """Largest delta = 2^-e passing `check` under the worst-of-k adversary.

    Bisection over e assumes passing is monotone in the noise level.
    """
    lo, hi = exponents  # 2^-lo assumed failing, 2^-hi assumed passing
    hist: list[tuple[float, bool, int]] = []
    cache: dict[int, bool] = {}

    def passes(e: int) -> bool:
        if e not in cache:
            delta = 2.0**-e
            budget = int(delta * len(clean))
            spec = CorruptionSpec(budget, "worst-of-k", seed + e, k)
            rep = measure_contract(st, queries, spec, trials, RandomSource(seed + e), clean=clean,
                                   probe_trials=probe_trials)
            cache[e] = check(rep)
            hist.append((delta, cache[e], rep.flipped))
        return cache[e]

    if passes(lo):
        return Calibration(2.0**-lo, hist)
    if not passes(hi):
        return Calibration(0.0, hist)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if passes(mid):
            hi = mid
        else:
            lo = mid
    return Calibration(2.0**-hi, hist)


# ---------------------------------------------------------------------------
# Bench and reports


@dataclass
class ExperimentConfig:
    deltas: list[float]
    strategies: list[str]
    trials: int
    query_policy: str = "all"  # "all" or "random-k"
    query_k: int = 4096
    seed: int = 0
    worst_k: int = 8
    conformance: bool = False
    tau: float = 1.0
    output: str | None = None

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.query_policy not in ("all", "random-k"):
            raise ValueError("query policy must be 'all' or 'random-k'")
        if self.conformance and any(d > self.tau for d in self.deltas):
            raise ValueError(f"conformance mode: every delta must be <= tau={self.tau}")


def select_queries(n: int, policy: str, k: int, rng: RandomSource) -> list[int]:
    if policy == "all" or n <= k:
        return list(range(n))
    return sorted(int(q) for q in rng.generator.choice(n, size=k, replace=False))


def run_bench(st, clean: BitWord, cfg: ExperimentConfig) -> list[dict[str, object]]:
    master = RandomSource(cfg.seed)
    n = st.params.n
    queries = select_queries(n, cfg.query_policy, cfg.query_k, master.spawn(0))
    rows = []
    for di, delta in enumerate(cfg.deltas):
        for si, strat in enumerate(cfg.strategies):
            budget = int(delta * len(clean))
            spec = CorruptionSpec(budget, strat, master.spawn(1, di, si).seed, cfg.worst_k)
            rep = measure_contract(st, queries, spec, cfg.trials, master.spawn(2, di, si), clean=clean)
            c = st.contract
            rows.append({
                "delta": delta,
                "strategy": strat,
                "budget": budget,
                "flipped": rep.flipped,
                "queries": len(queries),
                "query_policy": cfg.query_policy,
                "trials": cfg.trials,
                "epsilon": c.epsilon,
                "eps_hat": rep.worst_error,
                "lambda_hat": 1.0 - rep.good_fraction,
                "good_fraction": rep.good_fraction,
                "min_answer_or_bottom": rep.worst_answer_or_bottom,
                "bottom_rate": float(np.mean(rep.bottom)),
                "mean_probes": rep.mean_probes,
                "max_probes": rep.max_probes,
                "t": c.t,
                "N": len(clean),
                "N_formula": closed_form_length(st),
            })
    return rows


REPORT_COLUMNS = ("delta", "strategy", "flipped", "eps_hat", "lambda_hat", "bottom_rate",
                  "mean_probes", "max_probes", "t", "N", "N_formula")


def _fmt(v: object) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def emit_report(rows: Sequence[dict[str, object]]) -> tuple[str, str]:
    """Aligned text table plus one key=value line per row."""
    if not rows:
        raise ValueError("no results to report")
    table = [list(REPORT_COLUMNS)] + [[_fmt(r[c]) for c in REPORT_COLUMNS] for r in rows]
    widths = [max(len(line[i]) for line in table) for i in range(len(REPORT_COLUMNS))]
    text = "\n".join("  ".join(cell.rjust(w) for cell, w in zip(line, widths)) for line in table)
    record = "\n".join(" ".join(f"{k}={_fmt(v)}" for k, v in r.items()) for r in rows)
    return text + "\n", record + "\n"


def zero_noise_ok(st, clean: BitWord, queries: Sequence[int], trials: int, seed: int) -> bool:
    success, *_ = run_trials(st, clean, queries, trials, RandomSource(seed))
    return bool((success == 1.0).all())


__all__ = [
    "Calibration",
    "ExperimentConfig",
    "KIND_MEMBERSHIP",
    "KIND_POLYEVAL",
    "KIND_RAW",
    "build_membership",
    "calibrate_tau",
    "clean_word",
    "closed_form_length",
    "emit_report",
    "load_structure",
    "membership_check",
    "membership_metadata",
    "polyeval_check",
    "polyeval_metadata",
    "run_bench",
    "select_queries",
]
