"""Shared building blocks: bit words, contracts, randomness, noise, measurement."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Protocol, Sequence

import numpy as np


class _Bottom:
    """The "don't know" decoder output. Use the module-level BOTTOM instance."""

    _instance: "_Bottom | None" = None

    def __new__(cls) -> "_Bottom":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "BOTTOM"

    def __str__(self) -> str:
        return "⊥"

    def __reduce__(self):
        return (_Bottom, ())


BOTTOM = _Bottom()

# Integer code for BOTTOM inside numpy outcome arrays (answers are never negative).
BOTTOM_CODE = -1


def is_bottom(value: object) -> bool:
    return value is BOTTOM


# ---------------------------------------------------------------------------
# Contracts


@dataclass(frozen=True)
class DsContract:
    """Probe budget t, noise rate delta, error bound epsilon, loss fraction lam, length N."""

    t: int
    delta: float
    epsilon: float
    lam: float
    length: int

    def __post_init__(self) -> None:
        if self.t < 1:
            raise ValueError(f"t must be >= 1, got {self.t}")
        if self.length < 1:
            raise ValueError(f"length must be >= 1, got {self.length}")
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError(f"delta out of [0,1]: {self.delta}")
        if not 0.0 <= self.epsilon <= 0.5:
            raise ValueError(f"epsilon out of [0,1/2]: {self.epsilon}")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lambda out of [0,1]: {self.lam}")


# ---------------------------------------------------------------------------
# Randomness


class RandomSource:
    """Seeded PCG64 stream. Same seed and same call order give the same draws."""

    def __init__(self, seed: int):
        seed = int(seed)
        if not 0 <= seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        self.seed = seed
        self.generator = np.random.Generator(np.random.PCG64(seed))

    def spawn(self, *keys: int) -> "RandomSource":
        """Independent child stream determined by (seed, keys); does not consume draws."""
        ss = np.random.SeedSequence(self.seed, spawn_key=tuple(int(k) for k in keys))
        return RandomSource(int(ss.generate_state(1, dtype=np.uint64)[0]))

    def integers(self, low, high=None, size=None) -> np.ndarray:
        return self.generator.integers(low, high, size=size)

    def random(self, size=None):
        return self.generator.random(size)

    def bit(self) -> int:
        return int(self.generator.integers(0, 2))

    def next_seed(self) -> int:
        return int(self.generator.integers(0, 2**63))


# ---------------------------------------------------------------------------
# Bit words


class BitWord:
    """Immutable bit string stored packed, bit j at byte j//8, position j%8 (LSB first)."""

    __slots__ = ("_packed", "_length")

    def __init__(self, packed: np.ndarray, length: int):
        packed = np.asarray(packed, dtype=np.uint8)
        length = int(length)
        if length < 0 or packed.ndim != 1 or packed.size != (length + 7) // 8:
            raise ValueError("packed buffer size does not match length")
        if length % 8 and packed.size:
            # keep padding bits zero so equality and hashing are well defined
            mask = np.uint8((1 << (length % 8)) - 1)
            if packed[-1] & ~mask:
                packed = packed.copy()
                packed[-1] &= mask
        packed = packed.copy() if packed.flags.writeable else packed
        packed.flags.writeable = False
        self._packed = packed
        self._length = length

    @classmethod
    def from_bits(cls, bits: Iterable[int] | np.ndarray) -> "BitWord":
        arr = np.asarray(list(bits) if not isinstance(bits, np.ndarray) else bits, dtype=np.uint8)
        if arr.ndim != 1:
            raise ValueError("bits must be one-dimensional")
        if arr.size and arr.max() > 1:
            raise ValueError("bits must be 0 or 1")
        return cls(np.packbits(arr, bitorder="little"), arr.size)

    @classmethod
    def from_str(cls, text: str) -> "BitWord":
        if any(c not in "01" for c in text):
            raise ValueError("bit string may contain only 0 and 1")
        return cls.from_bits([int(c) for c in text])

    @classmethod
    def zeros(cls, length: int) -> "BitWord":
        return cls(np.zeros((length + 7) // 8, dtype=np.uint8), length)

    def __len__(self) -> int:
        return self._length

    @property
    def packed(self) -> np.ndarray:
        return self._packed

    def bits(self) -> np.ndarray:
        return np.unpackbits(self._packed, count=self._length, bitorder="little")

    def __getitem__(self, i: int) -> int:
        i = int(i)
        if not 0 <= i < self._length:
            raise IndexError(f"bit index {i} out of range for length {self._length}")
        return int((self._packed[i >> 3] >> (i & 7)) & 1)

    def segment(self, start: int, stop: int) -> np.ndarray:
        """Bits [start, stop) as a uint8 array."""
        if not 0 <= start <= stop <= self._length:
            raise IndexError(f"range [{start},{stop}) out of bounds for length {self._length}")
        lo, hi = start >> 3, (stop + 7) >> 3
        chunk = np.unpackbits(self._packed[lo:hi], bitorder="little")
        off = start - (lo << 3)
        return chunk[off : off + (stop - start)]

    def flip(self, positions: Sequence[int] | np.ndarray) -> "BitWord":
        pos = np.asarray(positions, dtype=np.int64)
        if pos.size == 0:
            return self
        if pos.min() < 0 or pos.max() >= self._length:
            raise IndexError("flip position out of range")
        packed = self._packed.copy()
        # np.bitwise_xor.at handles repeated bytes correctly
        np.bitwise_xor.at(packed, pos >> 3, (1 << (pos & 7)).astype(np.uint8))
        return BitWord(packed, self._length)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BitWord):
            return NotImplemented
        return self._length == other._length and np.array_equal(self._packed, other._packed)

    def __hash__(self) -> int:
        return hash((self._length, self._packed.tobytes()))

    def __repr__(self) -> str:
        if self._length <= 64:
            return f"BitWord('{''.join(map(str, self.bits()))}')"
        return f"BitWord(length={self._length})"


def hamming_distance(a: BitWord, b: BitWord) -> int:
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    return int(np.bitwise_count(np.bitwise_xor(a.packed, b.packed)).sum())


def diff_positions(a: BitWord, b: BitWord) -> np.ndarray:
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    x = np.bitwise_xor(a.packed, b.packed)
    nz = np.flatnonzero(x)
    bits = np.unpackbits(x[nz, None], axis=1, bitorder="little")
    rows, cols = np.nonzero(bits)
    return (nz[rows].astype(np.int64) << 3) + cols


class ProbeView:
    """Read-only view of a word that records which positions a decoder reads.

    Probes are counted as distinct positions; windows share the parent's log.
    """

    def __init__(self, word: BitWord, offset: int = 0, length: int | None = None,
                 _log: list | None = None):
        self._word = word
        self._offset = offset
        self._length = len(word) - offset if length is None else length
        if offset < 0 or self._length < 0 or offset + self._length > len(word):
            raise IndexError("window outside word")
        self._log: list[tuple[int, int]] = [] if _log is None else _log

    def __len__(self) -> int:
        return self._length

    def window(self, start: int, length: int) -> "ProbeView":
        if start < 0 or start + length > self._length:
            raise IndexError("window outside view")
        return ProbeView(self._word, self._offset + start, length, self._log)

    def read(self, i: int) -> int:
        if not 0 <= i < self._length:
            raise IndexError(f"probe {i} out of range for length {self._length}")
        g = self._offset + i
        self._log.append((g, g + 1))
        return self._word[g]

    def read_range(self, start: int, stop: int) -> np.ndarray:
        if not 0 <= start <= stop <= self._length:
            raise IndexError(f"probe range [{start},{stop}) out of range")
        g = self._offset + start
        self._log.append((g, g + stop - start))
        return self._word.segment(g, g + stop - start)

    @property
    def probes(self) -> int:
        """Number of distinct positions read so far."""
        if not self._log:
            return 0
        total, cur_lo, cur_hi = 0, -1, -1
        for lo, hi in sorted(self._log):
            if lo > cur_hi:
                total += cur_hi - cur_lo
                cur_lo, cur_hi = lo, hi
            elif hi > cur_hi:
                cur_hi = hi
        return total + cur_hi - cur_lo


def majority_vote(votes: Sequence[object]) -> object:
    """Strict-majority value among votes (BOTTOM counts as a vote), else BOTTOM."""
    counts: dict[object, int] = {}
    for v in votes:
        counts[v] = counts.get(v, 0) + 1
    for v, c in counts.items():
        if 2 * c > len(votes):
            return v
    return BOTTOM


# ---------------------------------------------------------------------------
# Corruption

STRATEGIES = ("uniform-random", "targeted-block", "targeted-query-neighborhood", "worst-of-k")


@dataclass(frozen=True)
class CorruptionSpec:
    budget: int
    strategy: str = "uniform-random"
    seed: int = 0
    k: int = 8

    def __post_init__(self) -> None:
        if self.budget < 0:
            raise ValueError("budget must be nonnegative")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; choose from {STRATEGIES}")
        if self.k < 1:
            raise ValueError("k must be >= 1")


class CorruptionTarget(Protocol):
    """What a structure exposes so structured adversaries know where to aim."""

    def segments(self) -> np.ndarray:
        """(S, 2) array of [start, stop) word ranges forming independent regions."""

    def footprint(self, q: int) -> np.ndarray:
        """(B, 2) array of word ranges (decoder blocks) a query may read."""

    def target_queries(self) -> Sequence[int]:
        """Queries a targeted adversary should go after, in preference order."""

    def burst_sizes(self) -> Sequence[int]:
        """Flip counts per block that defeat the block decoder (erase, mislead)."""


def _sample_in_range(rng: np.random.Generator, lo: int, hi: int, k: int) -> np.ndarray:
    return lo + rng.choice(hi - lo, size=k, replace=False)


def _uniform_positions(length: int, budget: int, rng: np.random.Generator) -> np.ndarray:
    return np.sort(rng.choice(length, size=budget, replace=False)).astype(np.int64)


def _block_positions(length: int, budget: int, rng: np.random.Generator,
                     target: CorruptionTarget | None) -> np.ndarray:
    segs = target.segments() if target is not None else np.array([[0, length]])
    # start at a random segment; spill over into the following ones only if the budget
    # exceeds the segment size
    start = int(rng.integers(len(segs)))
    order = list(range(start, len(segs))) + list(range(0, start))
    out, left = [], budget
    for si in order:
        if left == 0:
            break
        lo, hi = int(segs[si][0]), int(segs[si][1])
        take = min(left, hi - lo)
        out.append(_sample_in_range(rng, lo, hi, take))
        left -= take
    return np.sort(np.concatenate(out)) if out else np.zeros(0, dtype=np.int64)


def _neighborhood_positions(length: int, budget: int, rng: np.random.Generator,
                            target: CorruptionTarget | None, burst: int | None) -> np.ndarray:
    if target is None:
        return _uniform_positions(length, budget, rng)
    queries = list(target.target_queries())
    if burst is None:
        burst = int(rng.choice(list(target.burst_sizes())))
    chosen: set[int] = set()
    used_blocks: set[tuple[int, int]] = set()
    left = budget
    for q in rng.permutation(len(queries)):
        if left == 0:
            break
        blocks = target.footprint(queries[q])
        for bi in rng.permutation(len(blocks)):
            if left == 0:
                break
            lo, hi = int(blocks[bi][0]), int(blocks[bi][1])
            if (lo, hi) in used_blocks:
                continue
            used_blocks.add((lo, hi))
            take = min(left, burst, hi - lo)
            for p in _sample_in_range(rng, lo, hi, take):
                if int(p) not in chosen:
                    chosen.add(int(p))
                    left -= 1
    if left > 0:
        # footprints exhausted: spend the remainder uniformly
        rest = np.setdiff1d(_uniform_positions(length, min(length, budget + len(chosen)), rng),
                            np.fromiter(chosen, dtype=np.int64), assume_unique=True)
        chosen.update(int(p) for p in rest[:left])
    return np.sort(np.fromiter(chosen, dtype=np.int64))


BASE_PLAN = (
    ("uniform-random", None),
    ("targeted-block", None),
    ("targeted-query-neighborhood", 0),
    ("targeted-query-neighborhood", 1),
)


def corruption_positions(w: BitWord, spec: CorruptionSpec, target: CorruptionTarget | None = None,
                         scorer: Callable[[BitWord], float] | None = None) -> np.ndarray:
    """Sorted distinct positions to flip, as chosen by the strategy in spec."""
    n = len(w)
    if spec.budget > n:
        raise ValueError(f"budget {spec.budget} exceeds word length {n}")
    if spec.budget == 0:
        return np.zeros(0, dtype=np.int64)
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    if spec.strategy == "uniform-random":
        return _uniform_positions(n, spec.budget, rng)
    if spec.strategy == "targeted-block":
        return _block_positions(n, spec.budget, rng, target)
    if spec.strategy == "targeted-query-neighborhood":
        return _neighborhood_positions(n, spec.budget, rng, target, None)

    # worst-of-k: cycle through the base plans with derived seeds, keep the worst one
    bursts = list(target.burst_sizes()) if target is not None else [1]
    best, best_score = None, -np.inf
    for c in range(spec.k):
        name, burst_idx = BASE_PLAN[c % len(BASE_PLAN)]
        sub = np.random.Generator(np.random.PCG64(np.random.SeedSequence(spec.seed, spawn_key=(c,))))
        if name == "uniform-random":
            pos = _uniform_positions(n, spec.budget, sub)
        elif name == "targeted-block":
            pos = _block_positions(n, spec.budget, sub, target)
        else:
            burst = bursts[burst_idx % len(bursts)]
            pos = _neighborhood_positions(n, spec.budget, sub, target, burst)
        score = scorer(w.flip(pos)) if scorer is not None else 0.0
        if score > best_score:
            best, best_score = pos, score
    return best


def corrupt(w: BitWord, spec: CorruptionSpec, target: CorruptionTarget | None = None,
            scorer: Callable[[BitWord], float] | None = None) -> BitWord:
    """Flip at most spec.budget distinct bits of w according to the strategy."""
    return w.flip(corruption_positions(w, spec, target, scorer))


# ---------------------------------------------------------------------------
# Measurement


class Structure(Protocol):
    """Interface every encoded structure offers to the measurement engine."""

    contract: DsContract

    def truth(self, q: int) -> int: ...

    def prepare(self, word: BitWord): ...

    def decode_trials(self, prepared, q: int, trials: int, rng: RandomSource
                      ) -> tuple[np.ndarray, np.ndarray]: ...

    def corruption_target(self) -> CorruptionTarget: ...


@dataclass
class ContractReport:
    queries: np.ndarray
    success: np.ndarray  # Pr[out = truth]
    answer_or_bottom: np.ndarray  # Pr[out in {truth, BOTTOM}]
    bottom: np.ndarray  # Pr[out = BOTTOM]
    epsilon: float
    max_probes: int
    mean_probes: float
    flipped: int
    length: int
    extra: dict = field(default_factory=dict)

    @property
    def good_fraction(self) -> float:
        return float(np.mean(self.success >= 1.0 - self.epsilon))

    @property
    def worst_error(self) -> float:
        """Largest per-query rate of wrong (non-BOTTOM) answers."""
        return float(np.max(1.0 - self.answer_or_bottom))

    @property
    def worst_answer_or_bottom(self) -> float:
        return float(np.min(self.answer_or_bottom))


def run_trials(structure: Structure, word: BitWord, queries: Sequence[int], trials: int,
               rng: RandomSource) -> tuple[np.ndarray, np.ndarray, np.ndarray, int, float]:
    """Decode each query `trials` times; returns success, ok, bottom rates and probe stats."""
    prepared = structure.prepare(word)
    k = len(queries)
    success, ok, bot = np.zeros(k), np.zeros(k), np.zeros(k)
    max_probes, probe_sum = 0, 0
    for idx, q in enumerate(queries):
        out, probes = structure.decode_trials(prepared, int(q), trials, rng.spawn(int(q)))
        truth = structure.truth(int(q))
        success[idx] = np.mean(out == truth)
        bot[idx] = np.mean(out == BOTTOM_CODE)
        ok[idx] = success[idx] + bot[idx]
        max_probes = max(max_probes, int(probes.max()))
        probe_sum += int(probes.sum())
    return success, ok, bot, max_probes, probe_sum / (k * trials)


def failure_scorer(structure: Structure, probe_queries: Sequence[int], trials: int,
                   seed: int) -> Callable[[BitWord], float]:
    """Score used by worst-of-k: mean failure rate plus mean wrong-answer rate."""

    def score(word: BitWord) -> float:
        s, ok, _, _, _ = run_trials(structure, word, probe_queries, trials, RandomSource(seed))
        return float(np.mean(1.0 - s) + np.mean(1.0 - ok))

    return score


def measure_contract(structure: Structure, queries: Sequence[int], spec: CorruptionSpec,
                     trials: int, rng: RandomSource, *, clean: BitWord,
                     epsilon: float | None = None, probe_queries: Sequence[int] | None = None,
                     probe_trials: int = 16) -> ContractReport:
    """Corrupt the clean encoding as `spec` describes and estimate the contract quantities.

    `probe_queries` is the set the worst-of-k adversary scores candidates on; it
    defaults to the structure's preferred targets.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    target = structure.corruption_target()
    scorer = None
    if spec.strategy == "worst-of-k":
        pq = list(probe_queries if probe_queries is not None else target.target_queries())
        scorer = failure_scorer(structure, pq, probe_trials, rng.next_seed())
    word = corrupt(clean, spec, target, scorer)
    success, ok, bot, max_probes, mean_probes = run_trials(structure, word, queries, trials, rng)
    eps = structure.contract.epsilon if epsilon is None else epsilon
    return ContractReport(
        queries=np.asarray(queries),
        success=success,
        answer_or_bottom=ok,
        bottom=bot,
        epsilon=eps,
        max_probes=max_probes,
        mean_probes=mean_probes,
        flipped=hamming_distance(clean, word),
        length=len(clean),
    )
