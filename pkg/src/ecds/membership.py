"""Noise-tolerant membership: expander vote encoding, bin partition, blockwise protection.

Layout of an encoded set S of [n] (queries are 0-indexed):
  y = vote vector over the right side of a random bipartite graph (left side 20n)
  y is split into b bins; each bin is protected by the blockwise code
  word = concatenation of the b protected bins

A query i picks random bins; in a bin containing exactly one neighbor j of i it
decodes y_j from that bin's protected segment.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import ceil, log2
from typing import Iterable, Sequence

import numpy as np

from .core import (BOTTOM, BOTTOM_CODE, BitWord, DsContract, ProbeView, RandomSource,
                   diff_positions)
from .rldc import RldcScheme, block_ints, decode_message_bits, rldc_decode_bit, rldc_encode

ABSTAIN = -2


class ConstructionError(RuntimeError):
    pass


@dataclass(frozen=True)
class MemParams:
    """Sizes of the membership structure.

    scale > 1 divides the large constants (vote-vector length factor, bin size,
    heavy-bin threshold) for fast experiments; such instances are not conforming.
    """

    n: int
    s: int
    eps_bmrv: Fraction = Fraction(1, 10)
    scale: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "eps_bmrv", Fraction(self.eps_bmrv))
        if self.n < 1 or not 0 <= self.s <= self.n:
            raise ValueError("need n >= 1 and 0 <= s <= n")
        if not 0 < self.eps_bmrv < 1:
            raise ValueError("eps_bmrv must lie in (0, 1)")
        if self.scale < 1:
            raise ValueError("scale must be >= 1")
        if self.degree > self.right_size:
            raise ValueError("degree exceeds right side size")
        if self.right_size > self.padded_size:
            raise ValueError("bins cannot hold the vote vector; lower eps_bmrv or scale")

    @property
    def universe(self) -> int:
        return 20 * self.n

    @property
    def log_universe(self) -> float:
        return log2(self.universe)

    @property
    def degree(self) -> int:
        return ceil(self.log_universe / self.eps_bmrv)

    @property
    def right_size(self) -> int:
        """Vote vector length before padding to whole bins."""
        factor = 100 / self.eps_bmrv**2
        return ceil(float(factor) * max(self.s, 1) * self.log_universe / self.scale)

    @property
    def bins(self) -> int:
        return ceil(10 * self.log_universe)

    @property
    def bin_size(self) -> int:
        return ceil(1000 * max(self.s, 1) / self.scale)

    @property
    def padded_size(self) -> int:
        return self.bins * self.bin_size

    @property
    def heavy_factor(self) -> float:
        """Bins whose corruption exceeds heavy_factor * delta are flagged."""
        return 1e5 / self.scale

    @property
    def agreement_needed(self) -> int:
        return ceil((1 - self.eps_bmrv) * self.degree)

    @property
    def conforming(self) -> bool:
        return self.scale == 1 and self.eps_bmrv == Fraction(1, 10)


@dataclass(frozen=True)
class ExpanderGraph:
    adjacency: np.ndarray  # (20n, d) sorted right neighbors of each left vertex
    right_size: int
    seed: int

    @property
    def degree(self) -> int:
        return self.adjacency.shape[1]

    def right_neighbors(self) -> tuple[np.ndarray, np.ndarray]:
        """CSR form of the reverse adjacency: (indptr, left vertex ids)."""
        flat = self.adjacency.ravel()
        order = np.argsort(flat, kind="stable")
        counts = np.bincount(flat, minlength=self.right_size)
        indptr = np.concatenate([[0], np.cumsum(counts)])
        return indptr, (order // self.degree).astype(np.int64)


def build_expander(params: MemParams, seed: int) -> ExpanderGraph:
    """d distinct uniformly random right neighbors per left vertex."""
    rng = np.random.Generator(np.random.PCG64(seed))
    m, d = params.right_size, params.degree
    adj = np.sort(rng.integers(0, m, size=(params.universe, d)), axis=1)
    dup = np.flatnonzero((np.diff(adj, axis=1) == 0).any(axis=1))
    for i in dup:
        adj[i] = np.sort(rng.choice(m, size=d, replace=False))
    adj.flags.writeable = False
    return ExpanderGraph(adj, m, seed)


def expansion_audit(graph: ExpanderGraph, params: MemParams, rng: RandomSource,
                    samples: int = 10_000, max_size: int | None = None) -> float:
    """Fraction of random left sets S with |N(S)| >= (1 - eps/2) |S| d."""
    max_size = max_size or max(1, min(2 * params.s, 12))
    gen = rng.generator
    need = 1 - params.eps_bmrv / 2
    ok = 0
    for _ in range(samples):
        size = int(gen.integers(1, max_size + 1))
        left = gen.choice(params.universe, size=size, replace=False)
        if np.unique(graph.adjacency[left]).size >= need * size * graph.degree:
            ok += 1
    return ok / samples


def bmrv_encode(S: Iterable[int], graph: ExpanderGraph, params: MemParams,
                max_steps: int | None = None) -> np.ndarray:
    """Vote vector y where every left vertex agrees with >= (1-eps) d of its neighbors.

    Starts from the neighbor majority and greedily flips the y-bit that most
    reduces total violation. Raises ConstructionError if the bound is not reached.
    """
    members = sorted(set(int(i) for i in S))
    if len(members) > params.s:
        raise ValueError(f"set has {len(members)} elements, more than s={params.s}")
    if members and (members[0] < 0 or members[-1] >= params.n):
        raise ValueError("set element outside [0, n)")
    U, m = params.universe, graph.right_size
    adj = graph.adjacency
    x = np.zeros(U, dtype=np.uint8)
    x[members] = 1
    deg = np.bincount(adj.ravel(), minlength=m)
    ones = np.bincount(adj[members].ravel(), minlength=m) if members else np.zeros(m, np.int64)
    y = (2 * ones > deg).astype(np.uint8)
    need = params.agreement_needed
    agree = (y[adj] == x[:, None]).sum(axis=1).astype(np.int64)
    if (agree >= need).all():
        return y
    indptr, lefts = graph.right_neighbors()
    max_steps = max_steps or 20 * graph.degree * max(len(members), 1) + 1000
    steps = 0
    violators = {int(i) for i in np.flatnonzero(agree < need)}
    while violators:
        if steps >= max_steps:
            raise ConstructionError(f"vote repair stalled; violating left vertices {sorted(violators)[:10]}")
        i = max(violators, key=lambda v: (need - agree[v], -v))
        best_j, best_delta = -1, None
        for j in adj[i]:
            if y[j] == x[i]:
                continue
            nb = lefts[indptr[j] : indptr[j + 1]]
            gain = x[nb] == x[i]
            a = agree[nb]
            delta = int(np.sum(~gain & (a <= need))) - int(np.sum(gain & (a < need)))
            if best_delta is None or delta < best_delta:
                best_j, best_delta = int(j), delta
        if best_j < 0:
            raise ConstructionError(f"left vertex {i} has no flippable neighbor")
        y[best_j] ^= 1
        nb = lefts[indptr[best_j] : indptr[best_j + 1]]
        agree[nb] += np.where(x[nb] == y[best_j], 1, -1)
        for v in nb:
            v = int(v)
            if agree[v] < need:
                violators.add(v)
            else:
                violators.discard(v)
        steps += 1
    if not ((y[adj] == x[:, None]).sum(axis=1) >= need).all():
        raise AssertionError("vote repair bookkeeping diverged")
    return y


@dataclass(frozen=True)
class Partition:
    bins: np.ndarray  # (b, bin_size) right vertices per bin, ascending
    bin_of: np.ndarray
    pos_in_bin: np.ndarray
    seed: int


def unique_neighbor_table(graph: ExpanderGraph, partition: Partition, n: int) -> np.ndarray:
    """(n, b) table: the single neighbor of query i in bin k, or -1."""
    b = partition.bins.shape[0]
    adj = graph.adjacency[:n]
    kb = partition.bin_of[adj]
    counts = np.zeros((n, b), dtype=np.int32)
    rows = np.repeat(np.arange(n), adj.shape[1])
    np.add.at(counts, (rows, kb.ravel()), 1)
    table = np.full((n, b), -1, dtype=np.int64)
    single = counts[rows, kb.ravel()] == 1
    table[rows[single], kb.ravel()[single]] = adj.ravel()[single]
    return table


def build_partition(graph: ExpanderGraph, params: MemParams, seed: int,
                    max_retries: int = 16) -> Partition:
    """Random equal bins; each query must have a unique neighbor in >= b/4 bins."""
    b, size = params.bins, params.bin_size
    master = np.random.SeedSequence(seed)
    worst = (None, -1)
    for attempt in range(max_retries):
        rng = np.random.Generator(np.random.PCG64(master.spawn(1)[0] if attempt else seed))
        bins = np.sort(rng.permutation(params.padded_size).reshape(b, size), axis=1)
        bin_of = np.empty(params.padded_size, dtype=np.int64)
        pos = np.empty(params.padded_size, dtype=np.int64)
        bin_of[bins] = np.arange(b)[:, None]
        pos[bins] = np.arange(size)[None, :]
        part = Partition(bins, bin_of, pos, seed)
        good = (unique_neighbor_table(graph, part, params.n) >= 0).sum(axis=1)
        if (4 * good >= b).all():
            return part
        i = int(np.argmin(good))
        worst = (i, int(good[i]))
    raise ConstructionError(f"no valid partition; worst query {worst[0]} has {worst[1]} unique bins")


def claim_audit(graph: ExpanderGraph, params: MemParams, A: Sequence[int]) -> np.ndarray:
    """Heavy queries: i in [n] with at least d/10 neighbors inside A."""
    mark = np.zeros(graph.right_size, dtype=bool)
    mark[np.asarray(A, dtype=np.int64)] = True
    hits = mark[graph.adjacency[: params.n]].sum(axis=1)
    return np.flatnonzero(10 * hits >= graph.degree)


@dataclass
class MemDiagnostics:
    delta: float
    bin_corruption: np.ndarray
    heavy_bins: np.ndarray
    beta: np.ndarray
    bad_indices: np.ndarray  # A
    heavy_queries: np.ndarray  # B(A)
    good_queries: np.ndarray  # G
    claim_precondition: bool  # |A| < s d / 40
    claim_holds: bool  # |B(A)| < s / 2


@dataclass
class MembershipStructure:
    params: MemParams
    graph: ExpanderGraph
    partition: Partition
    reps: int = 64
    epsilon: float = 0.05
    tau: float = 0.0
    members: frozenset[int] = frozenset()
    votes: np.ndarray | None = None
    probe_queries: tuple[int, ...] = ()
    _unique: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        self.scheme = RldcScheme(self.params.bin_size)
        if self._unique is None:
            self._unique = unique_neighbor_table(self.graph, self.partition, self.params.n)
        if not self.probe_queries:
            rng = np.random.Generator(np.random.PCG64(self.partition.seed))
            others = rng.permutation(self.params.n)[:8]
            self.probe_queries = tuple(sorted(self.members)) + tuple(
                int(i) for i in others if int(i) not in self.members)

    # -- layout -----------------------------------------------------------
    @property
    def segment_length(self) -> int:
        return self.scheme.length

    @property
    def length(self) -> int:
        return self.params.bins * self.segment_length

    @property
    def unique(self) -> np.ndarray:
        return self._unique

    @property
    def beta(self) -> np.ndarray:
        return (self._unique >= 0).mean(axis=1)

    @property
    def contract(self) -> DsContract:
        return DsContract(t=self.reps * self.scheme.block_length, delta=self.tau,
                          epsilon=self.epsilon, lam=self.params.s / (2 * self.params.n),
                          length=self.length)

    def truth(self, i: int) -> int:
        return int(i in self.members)

    # -- encoding ---------------------------------------------------------
    def encode_votes(self, y: np.ndarray) -> BitWord:
        if y.size != self.params.right_size:
            raise ValueError(f"vote vector has {y.size} entries, expected {self.params.right_size}")
        padded = np.zeros(self.params.padded_size, dtype=np.uint8)
        padded[: y.size] = y
        # each bin is encoded on its own; padding a bin to whole blocks and encoding all
        # bins in one pass gives the same bits
        per_bin = self.scheme.block_count * self.scheme.block_size
        buf = np.zeros((self.params.bins, per_bin), dtype=np.uint8)
        buf[:, : self.params.bin_size] = padded[self.partition.bins]
        return rldc_encode(buf.reshape(-1), RldcScheme(buf.size))

    # -- decoding ---------------------------------------------------------
    def _check_query(self, i: int) -> None:
        if not 0 <= i < self.params.n:
            raise IndexError(f"query {i} outside [0, {self.params.n})")

    def decode(self, view: ProbeView, i: int, rng: RandomSource):
        """One decode: majority over `reps` random bins; random bit if no bin had a vote."""
        self._check_query(i)
        ks = rng.integers(0, self.params.bins, size=self.reps)
        votes = []
        for k in ks:
            j = int(self._unique[i, k])
            if j < 0:
                continue
            seg = view.window(int(k) * self.segment_length, self.segment_length)
            votes.append(rldc_decode_bit(seg, int(self.partition.pos_in_bin[j]), self.scheme))
        fallback = rng.bit()
        if not votes:
            return fallback
        ones = sum(1 for v in votes if v == 1)
        zeros = sum(1 for v in votes if v == 0)
        if 2 * ones > len(votes):
            return 1
        if 2 * zeros > len(votes):
            return 0
        return BOTTOM

    def prepare(self, word: BitWord) -> np.ndarray:
        """Outcome of decoding the unique neighbor of every (query, bin): 0/1/BOTTOM_CODE/ABSTAIN."""
        if len(word) != self.length:
            raise ValueError(f"word length {len(word)} != {self.length}")
        s = self.scheme
        total_blocks = self.params.bins * s.block_count
        msgs, flips = s.code.decode_ints(block_ints(word, s, 0, total_blocks))
        ok = flips <= s.accept_radius
        u = self._unique
        j = np.where(u >= 0, u, 0)
        k = np.broadcast_to(np.arange(self.params.bins), u.shape)
        p = self.partition.pos_in_bin[j]
        blk = k * s.block_count + p // s.block_size
        bit = ((msgs[blk] >> (p % s.block_size).astype(np.uint64)) & np.uint64(1)).astype(np.int8)
        out = np.where(ok[blk], bit, np.int8(BOTTOM_CODE)).astype(np.int8)
        return np.where(u >= 0, out, np.int8(ABSTAIN))

    def decode_trials(self, prepared: np.ndarray, i: int, trials: int, rng: RandomSource
                      ) -> tuple[np.ndarray, np.ndarray]:
        """`trials` independent decodes of query i from a prepared outcome table."""
        self._check_query(i)
        ks = rng.integers(0, self.params.bins, size=(trials, self.reps))
        fallback = rng.integers(0, 2, size=trials)
        v = prepared[i][ks]
        voting = v != ABSTAIN
        nv = voting.sum(axis=1)
        ones = (v == 1).sum(axis=1)
        zeros = (v == 0).sum(axis=1)
        out = np.where(2 * ones > nv, 1, np.where(2 * zeros > nv, 0, BOTTOM_CODE))
        out = np.where(nv == 0, fallback, out).astype(np.int64)
        srt = np.sort(np.where(voting, ks, -1), axis=1)
        distinct = (srt[:, 0] >= 0).astype(np.int64) + (
            (srt[:, 1:] != srt[:, :-1]) & (srt[:, 1:] >= 0)).sum(axis=1)
        return out, distinct * self.scheme.block_length

    # -- adversary hooks --------------------------------------------------
    def corruption_target(self) -> "_MemTarget":
        return _MemTarget(self)

    # -- diagnostics ------------------------------------------------------
    def bad_indices(self, word: BitWord) -> np.ndarray:
        """Right vertices whose protected bit does not decode to its vote (BOTTOM or wrong)."""
        if self.votes is None:
            raise ValueError("votes unknown; build the structure from its set")
        s = self.scheme
        msgs, flips = s.code.decode_ints(block_ints(word, s, 0, self.params.bins * s.block_count))
        ok = flips <= s.accept_radius
        j = np.arange(self.params.right_size)
        k = self.partition.bin_of[j]
        p = self.partition.pos_in_bin[j]
        blk = k * s.block_count + p // s.block_size
        bit = (msgs[blk] >> (p % s.block_size).astype(np.uint64)) & np.uint64(1)
        good = ok[blk] & (bit.astype(np.uint8) == self.votes)
        return np.flatnonzero(~good)


class _MemTarget:
    def __init__(self, st: MembershipStructure):
        self.st = st

    def segments(self) -> np.ndarray:
        L = self.st.segment_length
        starts = np.arange(self.st.params.bins) * L
        return np.stack([starts, starts + L], axis=1)

    def footprint(self, i: int) -> np.ndarray:
        st = self.st
        ks = np.flatnonzero(st.unique[i] >= 0)
        p = st.partition.pos_in_bin[st.unique[i, ks]]
        n = st.scheme.block_length
        start = ks * st.segment_length + (p // st.scheme.block_size) * n
        return np.stack([start, start + n], axis=1)

    def target_queries(self) -> Sequence[int]:
        return self.st.probe_queries

    def burst_sizes(self) -> Sequence[int]:
        return self.st.scheme.burst_sizes()


def mem_diagnose(structure: MembershipStructure, clean: BitWord, word: BitWord) -> MemDiagnostics:
    """Compare a corrupted word with its clean encoding and evaluate the heavy-query bound."""
    st, params = structure, structure.params
    flips = diff_positions(clean, word)
    per_bin = np.bincount(flips // st.segment_length, minlength=params.bins) / st.segment_length
    delta = flips.size / len(clean)
    heavy_bins = np.flatnonzero(per_bin > params.heavy_factor * delta) if delta > 0 else np.zeros(0, np.int64)
    A = st.bad_indices(word)
    B = claim_audit(st.graph, params, A)
    G = np.setdiff1d(np.arange(params.n), B)
    return MemDiagnostics(
        delta=delta,
        bin_corruption=per_bin,
        heavy_bins=heavy_bins,
        beta=st.beta,
        bad_indices=A,
        heavy_queries=B,
        good_queries=G,
        claim_precondition=40 * A.size < params.s * st.graph.degree,
        claim_holds=2 * B.size < params.s,
    )


def induced_tau(params: MemParams, markov_constant: float) -> float:
    """Noise level at which the counting argument keeps |A| below s d / 40.

    Heavy bins hold at most m / heavy_factor bad indices; each light bin at most
    c * heavy_factor * delta of its indices.
    """
    m = params.padded_size
    budget = params.s * params.degree / 40 - m / params.heavy_factor
    return max(0.0, budget / (markov_constant * params.heavy_factor * m))


def membership_length(params: MemParams) -> int:
    """Closed form: bins * ceil(bin_size / 12) * 24 for the default block code."""
    from .rldc import rldc_length

    return params.bins * rldc_length(params.bin_size)


def build_membership(S: Iterable[int], params: MemParams, seed: int, reps: int = 64,
                     epsilon: float = 0.05, max_attempts: int = 8,
                     audit_samples: int = 10_000) -> MembershipStructure:
    """Build graph, votes and partition for S, reseeding when a gate fails."""
    S = frozenset(int(i) for i in S)
    master = RandomSource(seed)
    errors = []
    for attempt in range(max_attempts):
        gseed = master.spawn(1, attempt).seed
        graph = build_expander(params, gseed)
        if audit_samples:
            frac = expansion_audit(graph, params, master.spawn(2, attempt), audit_samples)
            # scaled-down instances have too few right vertices to expand; only
            # conforming instances are gated on the audit
            if frac < 0.99 and params.conforming:
                errors.append(f"attempt {attempt}: expansion audit {frac:.4f}")
                continue
        try:
            y = bmrv_encode(S, graph, params)
            part = build_partition(graph, params, master.spawn(3, attempt).seed)
        except ConstructionError as exc:
            errors.append(f"attempt {attempt}: {exc}")
            continue
        return MembershipStructure(params, graph, part, reps=reps, epsilon=epsilon,
                                   members=S, votes=y)
    raise ConstructionError("; ".join(errors))


def mem_encode(S: Iterable[int], params: MemParams, seed: int = 0, **kwargs) -> BitWord:
    st = build_membership(S, params, seed, **kwargs)
    return st.encode_votes(st.votes)


def mem_decode(view: ProbeView, i: int, structure: MembershipStructure, rng: RandomSource):
    return structure.decode(view, i, rng)
