"""Noise-tolerant evaluation of a degree-s polynomial over Z_n.

The polynomial g is rewritten as an m-variate polynomial of per-variable degree
below d (base-d digits of exponents). For every pair of primes (p1, p2) from two
CRT bases, the encoding stores the reduced polynomial's values at the points
reached by reducing lifted inputs mod p1 then mod p2. A query combines one value
per pair through two levels of CRT decoding.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import ceil, log2
from typing import Sequence

import numpy as np
import reedsolo

from .codes import InnerEcc
from .core import BOTTOM, BOTTOM_CODE, BitWord, DsContract, ProbeView, RandomSource
from .crt import CrtBasis, crt_decode_unique, select_primes
from .rldc import RldcScheme, nb_decode_all, nb_decode_value, nb_encode_values, rldc_length


@dataclass(frozen=True)
class PolyEvalParams:
    n: int
    s: int
    C: float = 2.0
    lam: float = 0.05
    prime_rule: str = "compact"

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ValueError("modulus n must be >= 2")
        if self.s < 1:
            raise ValueError("degree bound s must be >= 1")
        if self.C <= 1:
            raise ValueError("C must exceed 1")
        if not 0 < self.lam < 1:
            raise ValueError("lambda must lie in (0, 1)")

    @property
    def d(self) -> int:
        return max(2, ceil(log2(self.s) ** self.C)) if self.s > 1 else 2

    @property
    def m(self) -> int:
        m = 1
        while self.d**m < self.s + 1:
            m += 1
        return m

    @property
    def T1(self) -> int:
        return self.d**self.m * self.n ** (self.d * self.m + 1)

    @property
    def lam0(self) -> float:
        return self.lam**3 * 2.0**-36

    @property
    def trivial_threshold(self) -> float:
        return log2(self.n)

    @property
    def is_trivial(self) -> bool:
        return self.s <= self.trivial_threshold

    def bases(self) -> tuple[CrtBasis, CrtBasis]:
        P1 = select_primes(self.T1, self.prime_rule)
        T2 = self.d**self.m * max(P1.primes) ** (self.d * self.m + 1)
        return P1, select_primes(T2, self.prime_rule)


def check_poly(coeffs: Sequence[int], params: PolyEvalParams) -> tuple[int, ...]:
    c = tuple(int(x) for x in coeffs)
    if len(c) > params.s + 1:
        raise ValueError(f"degree {len(c) - 1} exceeds s={params.s}")
    if any(not 0 <= x < params.n for x in c):
        raise ValueError(f"coefficients must lie in [0, {params.n})")
    return c


def eval_uni(coeffs: Sequence[int], a: int, n: int) -> int:
    acc = 0
    for c in reversed(coeffs):
        acc = (acc * a + c) % n
    return acc


@dataclass(frozen=True)
class MultiPoly:
    """Sparse m-variate polynomial: exponent tuple -> coefficient (reduced mod `modulus`)."""

    terms: tuple[tuple[tuple[int, ...], int], ...]
    d: int
    m: int
    modulus: int

    def __post_init__(self) -> None:
        for exps, _ in self.terms:
            if len(exps) != self.m or any(not 0 <= e < self.d for e in exps):
                raise ValueError(f"exponent tuple {exps} outside [0, {self.d})^{self.m}")

    def as_dict(self) -> dict[tuple[int, ...], int]:
        return dict(self.terms)

    def evaluate(self, point: Sequence[int], modulus: int | None = None) -> int:
        """Value at `point`; over the integers unless a modulus is given."""
        total = 0
        for exps, c in self.terms:
            term = c
            for x, e in zip(point, exps):
                term *= pow(int(x), e) if modulus is None else pow(int(x), e, modulus)
            total += term
            if modulus is not None:
                total %= modulus
        return total


def multilinear_extend(coeffs: Sequence[int], d: int, m: int, modulus: int) -> MultiPoly:
    """Send X^i to prod_j X_j^{i_j} where i_j are the base-d digits of i."""
    if len(coeffs) > d**m:
        raise ValueError(f"degree {len(coeffs) - 1} needs more than {m} base-{d} digits")
    acc: dict[tuple[int, ...], int] = {}
    for i, c in enumerate(coeffs):
        c = int(c) % modulus
        if c == 0:
            continue
        digits, r = [], i
        for _ in range(m):
            r, dig = divmod(r, d)
            digits.append(dig)
        key = tuple(digits)
        acc[key] = (acc.get(key, 0) + c) % modulus
    return MultiPoly(tuple(sorted((k, v) for k, v in acc.items() if v)), d, m, modulus)


def lift_point(a: int, n: int, d: int, m: int) -> tuple[int, ...]:
    """(a, a^d, a^(d^2), ..., a^(d^(m-1))) mod n by repeated d-th powers."""
    out, x = [], a % n
    for _ in range(m):
        out.append(x)
        x = pow(x, d, n)
    return tuple(out)


def reduce_point(point: Sequence[int], p: int) -> tuple[int, ...]:
    return tuple(int(x) % p for x in point)


def reduce_poly(h: MultiPoly, p: int) -> MultiPoly:
    terms = tuple((e, c % p) for e, c in h.terms if c % p)
    return MultiPoly(terms, h.d, h.m, p)


# ---------------------------------------------------------------------------
# Tables


@dataclass
class EvalTables:
    P1: CrtBasis
    P2: CrtBasis
    pairs: list[tuple[int, int]]
    point_index: np.ndarray  # (pairs, n): row of each input's point in that pair's table
    sizes: np.ndarray  # |B| per pair
    reps: np.ndarray  # r per pair
    offsets: np.ndarray  # flat answer offset of each pair's block
    L: int
    width: int  # bits per stored value
    values: np.ndarray | None = None  # flat answers, present when built from a polynomial
    points: list[np.ndarray] | None = field(default=None, repr=False)

    @property
    def total_answers(self) -> int:
        return int((self.sizes * self.reps).sum())

    @property
    def p_max(self) -> int:
        return max(self.P2.primes)


def _lifted(params: PolyEvalParams) -> np.ndarray:
    return np.array([lift_point(a, params.n, params.d, params.m) for a in range(params.n)],
                    dtype=object)


def table_layout(params: PolyEvalParams, with_points: bool = False) -> EvalTables:
    """Point sets, repetition counts and flat offsets (independent of the polynomial)."""
    P1, P2 = params.bases()
    lifted = _lifted(params).astype(np.int64) if params.n < 2**62 else None
    if lifted is None:
        raise ValueError("modulus too large for table layout")
    pairs, idx_rows, sizes, pts = [], [], [], []
    for p1 in P1.primes:
        r1 = lifted % p1
        for p2 in P2.primes:
            q = r1 % p2
            uniq, inv = np.unique(q, axis=0, return_inverse=True)
            pairs.append((p1, p2))
            idx_rows.append(inv.reshape(-1))
            sizes.append(len(uniq))
            if with_points:
                pts.append(uniq)
    sizes_a = np.array(sizes, dtype=np.int64)
    L = int(sizes_a.max())
    reps = -(-L // sizes_a)
    offsets = np.concatenate([[0], np.cumsum(sizes_a * reps)[:-1]])
    return EvalTables(P1, P2, pairs, np.array(idx_rows, dtype=np.int64), sizes_a, reps, offsets,
                      L, ceil(log2(max(P2.primes))), None, pts if with_points else None)


def build_tables(coeffs: Sequence[int], params: PolyEvalParams) -> EvalTables:
    """Layout plus the flat answer list: pair -> copy -> point order."""
    coeffs = check_poly(coeffs, params)
    tables = table_layout(params, with_points=True)
    g = multilinear_extend(coeffs, params.d, params.m, params.n)
    lifted = _lifted(params)
    flat = np.zeros(tables.total_answers, dtype=np.int64)
    pair = 0
    for p1 in tables.P1.primes:
        g1 = reduce_poly(g, p1)
        pts1 = [reduce_point(pt, p1) for pt in lifted]
        v1 = [g1.evaluate(pt) for pt in pts1]  # exact integers below T2
        for p2 in tables.P2.primes:
            size, r, off = int(tables.sizes[pair]), int(tables.reps[pair]), int(tables.offsets[pair])
            vals = np.zeros(size, dtype=np.int64)
            vals[tables.point_index[pair]] = [v % p2 for v in v1]
            flat[off : off + size * r] = np.tile(vals, r)
            pair += 1
    tables.values = flat
    return tables


def polyeval_length(tables: EvalTables, ecc: InnerEcc | None = None) -> int:
    ecc = ecc or InnerEcc(tables.width)
    return rldc_length(tables.total_answers * ecc.ell_out)


# ---------------------------------------------------------------------------
# Structure


class PolyEvalStructure:
    """Encoder/decoder for the full (non-trivial) construction."""

    def __init__(self, params: PolyEvalParams, coeffs: Sequence[int] | None = None,
                 tables: EvalTables | None = None, epsilon: float = 0.25, tau: float = 0.0):
        self.params = params
        self.coeffs = None if coeffs is None else check_poly(coeffs, params)
        if tables is None:
            tables = build_tables(self.coeffs, params) if self.coeffs is not None else table_layout(params)
        self.tables = tables
        self.ecc = InnerEcc(tables.width)
        self.scheme = RldcScheme(tables.total_answers * self.ecc.ell_out)
        self.epsilon = epsilon
        self.tau = tau
        self.P1, self.P2 = tables.P1, tables.P2
        self._n1, self._n2 = self.P1.N, self.P2.N
        rng = np.random.Generator(np.random.PCG64(params.n * 7919 + params.s))
        self.probe_queries = tuple(int(a) for a in rng.permutation(params.n)[: min(16, params.n)])

    @property
    def length(self) -> int:
        return self.scheme.length

    @property
    def answers_per_query(self) -> int:
        return len(self.tables.pairs)

    @property
    def probes_per_answer(self) -> int:
        """Upper bound on distinct bits one multi-bit answer can touch."""
        k, n = self.scheme.block_size, self.scheme.block_length
        return (ceil((self.ecc.ell_out - 1) / k) + 1) * n

    @property
    def contract(self) -> DsContract:
        return DsContract(t=self.answers_per_query * self.probes_per_answer, delta=self.tau,
                          epsilon=self.epsilon, lam=self.params.lam, length=self.length)

    def truth(self, a: int) -> int:
        if self.coeffs is None:
            raise ValueError("polynomial unknown")
        return eval_uni(self.coeffs, a, self.params.n)

    def encode(self) -> BitWord:
        if self.tables.values is None:
            raise ValueError("tables carry no values")
        return nb_encode_values(self.tables.values, self.scheme, self.ecc)

    def _check_query(self, a: int) -> None:
        if not 0 <= a < self.params.n:
            raise IndexError(f"evaluation point {a} outside [0, {self.params.n})")

    def _answer_indices(self, a: int, copies: np.ndarray) -> np.ndarray:
        t = self.tables
        return t.offsets + copies * t.sizes + t.point_index[:, a]

    def _draw_copies(self, rng: RandomSource, trials: int) -> np.ndarray:
        reps = self.tables.reps
        if (reps == 1).all():
            return np.zeros((trials, len(reps)), dtype=np.int64)
        return (rng.random((trials, len(reps))) * reps).astype(np.int64)

    def _combine(self, answers: np.ndarray, memo: dict | None = None) -> int:
        """Two CRT levels over one answer per pair (BOTTOM_CODE marks erasures)."""
        grid = answers.reshape(self._n1, self._n2)
        top = []
        for row, p1 in zip(grid, self.P1.primes):
            key = (p1, row.tobytes())
            v = memo.get(key) if memo is not None else None
            if v is None:
                # a stored value can never reach p2, so such a decode is a detected erasure
                word = [BOTTOM if x < 0 or x >= p2 else int(x) for x, p2 in zip(row, self.P2.primes)]
                v = crt_decode_unique(word, self.P2)
                if memo is not None:
                    memo[key] = v
            top.append(BOTTOM if v is BOTTOM else v % p1)
        key = ("top", tuple(-1 if v is BOTTOM else v for v in top))
        out = memo.get(key) if memo is not None else None
        if out is None:
            out = crt_decode_unique(top, self.P1)
            if memo is not None:
                memo[key] = out
        return BOTTOM_CODE if out is BOTTOM else int(out) % self.params.n

    def decode(self, view: ProbeView, a: int, rng: RandomSource):
        self._check_query(a)
        copies = self._draw_copies(rng, 1)[0]
        idx = self._answer_indices(a, copies)
        answers = np.array([nb_decode_value(view, int(q), self.scheme, self.ecc) for q in idx])
        out = self._combine(answers)
        return BOTTOM if out == BOTTOM_CODE else out

    def prepare(self, word: BitWord) -> dict:
        if len(word) != self.length:
            raise ValueError(f"word length {len(word)} != {self.length}")
        return {"answers": nb_decode_all(word, self.scheme, self.ecc), "memo": {}}

    def _probe_counts(self, idx: np.ndarray) -> np.ndarray:
        """Distinct bits read when decoding the answers idx (rows sorted ascending)."""
        k, n, lp = self.scheme.block_size, self.scheme.block_length, self.ecc.ell_out
        first = idx * lp // k
        last = (idx * lp + lp - 1) // k
        span = (last - first + 1).sum(axis=1)
        overlap = np.maximum(0, last[:, :-1] - first[:, 1:] + 1).sum(axis=1)
        return (span - overlap) * n

    def decode_trials(self, prepared: dict, a: int, trials: int, rng: RandomSource
                      ) -> tuple[np.ndarray, np.ndarray]:
        self._check_query(a)
        copies = self._draw_copies(rng, trials)
        idx = self._answer_indices(a, copies)
        patterns, inverse = np.unique(idx, axis=0, return_inverse=True)
        answers = prepared["answers"]
        outs = np.array([self._combine(answers[row], prepared["memo"]) for row in patterns])
        probes = self._probe_counts(np.sort(patterns, axis=1))
        inverse = inverse.reshape(-1)
        return outs[inverse].astype(np.int64), probes[inverse]

    def corruption_target(self) -> "_PeTarget":
        return _PeTarget(self)


class _PeTarget:
    def __init__(self, st: PolyEvalStructure):
        self.st = st

    def segments(self) -> np.ndarray:
        """One region per prime pair: the blocks holding that pair's table."""
        st, t = self.st, self.st.tables
        lp, k, n = st.ecc.ell_out, st.scheme.block_size, st.scheme.block_length
        lo = (t.offsets * lp // k) * n
        hi = (((t.offsets + t.sizes * t.reps) * lp - 1) // k + 1) * n
        return np.stack([lo, hi], axis=1)

    def footprint(self, a: int) -> np.ndarray:
        st, t = self.st, self.st.tables
        lp, k, n = st.ecc.ell_out, st.scheme.block_size, st.scheme.block_length
        blocks = []
        for c in range(int(t.reps.max())):
            live = t.reps > c
            idx = (t.offsets + c * t.sizes + t.point_index[:, a])[live]
            for q in idx:
                blocks.extend(range(q * lp // k, (q * lp + lp - 1) // k + 1))
        starts = np.unique(np.array(blocks, dtype=np.int64)) * n
        return np.stack([starts, starts + n], axis=1)

    def target_queries(self) -> Sequence[int]:
        return self.st.probe_queries

    def burst_sizes(self) -> Sequence[int]:
        return self.st.scheme.burst_sizes()


def collision_audit(params: PolyEvalParams, p1: int, p2: int, samples: int | None = None,
                    rng: RandomSource | None = None) -> tuple[float, float, bool]:
    """Largest probability mass of one reduced point; (max mass, 4/p2, within bound)."""
    if samples is None or samples >= params.n:
        a = np.arange(params.n)
    else:
        rng = rng or RandomSource(0)
        a = rng.integers(0, params.n, size=samples)
    pts = np.array([reduce_point(reduce_point(lift_point(int(x), params.n, params.d, params.m), p1), p2)
                    for x in a])
    _, counts = np.unique(pts, axis=0, return_counts=True)
    mass = counts.max() / len(a)
    return float(mass), 4 / p2, bool(mass <= 4 / p2)


collision_probability_audit = collision_audit


def pe_encode(coeffs: Sequence[int], params: PolyEvalParams) -> BitWord:
    return PolyEvalStructure(params, coeffs).encode()


def pe_decode(view: ProbeView, a: int, structure: PolyEvalStructure, rng: RandomSource):
    return structure.decode(view, a, rng)


# ---------------------------------------------------------------------------
# Small-degree mode: store the coefficients under one Reed-Solomon codeword


class TrivialPolyEval:
    """Coefficient table protected by a byte-level Reed-Solomon code; reads everything."""

    def __init__(self, params: PolyEvalParams, coeffs: Sequence[int] | None = None,
                 parity: int | None = None):
        if not params.is_trivial:
            raise ValueError(f"s={params.s} above the small-degree threshold log2 n")
        self.params = params
        self.coeffs = None if coeffs is None else check_poly(coeffs, params)
        self.value_bytes = ceil(ceil(log2(params.n)) / 8)
        self.data_bytes = (params.s + 1) * self.value_bytes
        self.parity = parity if parity is not None else max(2, self.data_bytes)
        if self.data_bytes + self.parity > 255:
            raise ValueError("coefficient table too large for one Reed-Solomon codeword")
        self.codec = reedsolo.RSCodec(self.parity)
        self.length = 8 * (self.data_bytes + self.parity)

    def truth(self, a: int) -> int:
        return eval_uni(self.coeffs, a, self.params.n)

    def encode(self) -> BitWord:
        c = list(self.coeffs) + [0] * (self.params.s + 1 - len(self.coeffs))
        raw = b"".join(int(x).to_bytes(self.value_bytes, "little") for x in c)
        enc = np.frombuffer(bytes(self.codec.encode(raw)), dtype=np.uint8)
        return BitWord(enc.copy(), self.length)

    def decode(self, view: ProbeView, a: int, rng: RandomSource | None = None):
        if not 0 <= a < self.params.n:
            raise IndexError(f"evaluation point {a} outside [0, {self.params.n})")
        bits = view.read_range(0, self.length)
        try:
            data = self.codec.decode(bytes(np.packbits(bits, bitorder="little")))[0]
        except reedsolo.ReedSolomonError:
            return BOTTOM
        vb = self.value_bytes
        c = [int.from_bytes(data[i : i + vb], "little") for i in range(0, len(data), vb)]
        if any(x >= self.params.n for x in c):
            return BOTTOM
        return eval_uni(c, a, self.params.n)


def pe_encode_trivial(coeffs: Sequence[int], params: PolyEvalParams) -> BitWord:
    return TrivialPolyEval(params, coeffs).encode()


def pe_decode_trivial(word: BitWord, a: int, params: PolyEvalParams):
    return TrivialPolyEval(params).decode(ProbeView(word), a)
