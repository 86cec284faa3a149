"""Relaxed locally decodable code (reference block construction) and the multi-bit wrapper.

The reference scheme splits the message into k-bit blocks and encodes each with a
small linear code. A bit is decoded by reading its whole block, finding the nearest
codeword, and answering only if at most floor(accept_fraction * n) bits had to be
flipped; otherwise the decoder says BOTTOM. Decoding is deterministic, so whole
words can be pre-decoded block by block with identical results.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import ceil, floor
from typing import Sequence

import numpy as np

from .codes import BinaryLinearCode, InnerEcc, U64, golay24, ints_to_rows, rows_to_ints
from .core import BOTTOM, BOTTOM_CODE, BitWord, DsContract, ProbeView, RandomSource, majority_vote

_GOLAY: BinaryLinearCode | None = None


def default_block_code() -> BinaryLinearCode:
    global _GOLAY
    if _GOLAY is None:
        _GOLAY = golay24()
    return _GOLAY


@dataclass(frozen=True)
class RldcScheme:
    """Blockwise code for messages of `message_length` bits."""

    message_length: int
    code: BinaryLinearCode = field(default_factory=default_block_code)
    accept_fraction: Fraction = Fraction(1, 8)
    epsilon: float = 1 / 32

    def __post_init__(self) -> None:
        if self.message_length < 1:
            raise ValueError("message length must be positive")
        if self.code.relative_distance < Fraction(1, 4):
            raise ValueError("block code needs relative distance >= 1/4")
        if 2 * self.accept_radius >= self.code.min_distance:
            raise ValueError("acceptance radius must be below half the block distance")

    @property
    def block_size(self) -> int:
        return self.code.k

    @property
    def block_length(self) -> int:
        return self.code.n

    @property
    def block_count(self) -> int:
        return ceil(self.message_length / self.code.k)

    @property
    def length(self) -> int:
        return self.block_count * self.code.n

    @property
    def accept_radius(self) -> int:
        return floor(self.accept_fraction * self.code.n)

    @property
    def markov_constant(self) -> float:
        """c with lambda <= c * delta: a block needs > accept_fraction*n flips to go bad."""
        return float(1 / self.accept_fraction)

    @property
    def adversarial_tau(self) -> float:
        """Noise fraction below which no block can decode to a wrong codeword."""
        flips_to_mislead = self.code.min_distance - self.accept_radius
        return (flips_to_mislead - 1) / self.length

    def burst_sizes(self) -> tuple[int, int]:
        """Flips per block that force BOTTOM, and that can force a wrong codeword."""
        return (self.accept_radius + 1, self.code.min_distance - self.accept_radius)

    def contract(self, delta: float) -> DsContract:
        return DsContract(t=self.code.n, delta=delta, epsilon=self.epsilon,
                          lam=min(1.0, self.markov_constant * delta), length=self.length)


def rldc_length(message_length: int, code: BinaryLinearCode | None = None) -> int:
    code = code or default_block_code()
    return ceil(message_length / code.k) * code.n


# ---------------------------------------------------------------------------
# Encoding


def _codewords_to_word(cw: np.ndarray, n: int) -> BitWord:
    if n % 8 == 0:
        raw = cw.astype("<u8").view(np.uint8).reshape(-1, 8)[:, : n // 8]
        return BitWord(raw.reshape(-1).copy(), len(cw) * n)
    bits = ints_to_rows(cw, n).reshape(-1)
    return BitWord.from_bits(bits)


def rldc_encode(message, scheme: RldcScheme) -> BitWord:
    bits = np.asarray(message, dtype=np.uint8).reshape(-1)
    if bits.size != scheme.message_length:
        raise ValueError(f"message has {bits.size} bits, scheme expects {scheme.message_length}")
    k = scheme.code.k
    padded = np.zeros(scheme.block_count * k, dtype=np.uint8)
    padded[: bits.size] = bits
    msgs = rows_to_ints(padded.reshape(-1, k))
    return _codewords_to_word(scheme.code.encode_ints(msgs), scheme.code.n)


# ---------------------------------------------------------------------------
# Decoding


def block_ints(word: BitWord, scheme: RldcScheme, first: int, count: int, offset: int = 0) -> np.ndarray:
    """Received blocks [first, first+count) of the codeword starting at bit `offset`."""
    n = scheme.code.n
    start = offset + first * n
    if n % 8 == 0 and start % 8 == 0:
        nb = n // 8
        raw = word.packed[start // 8 : start // 8 + count * nb].reshape(count, nb)
        out = np.zeros(count, dtype=U64)
        for c in range(nb):
            out |= raw[:, c].astype(U64) << U64(8 * c)
        return out
    return rows_to_ints(word.segment(start, start + count * n).reshape(count, n))


def decode_blocks(word: BitWord, scheme: RldcScheme, offset: int = 0, first: int = 0,
                  count: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Decode whole blocks: (message ints, accepted flags)."""
    count = scheme.block_count - first if count is None else count
    msgs, flips = scheme.code.decode_ints(block_ints(word, scheme, first, count, offset))
    return msgs, flips <= scheme.accept_radius


def decode_message_bits(word: BitWord, scheme: RldcScheme, offset: int = 0
                        ) -> tuple[np.ndarray, np.ndarray]:
    """Outcome of decoding every message index: (bits, accepted) arrays of message length."""
    msgs, ok = decode_blocks(word, scheme, offset)
    k = scheme.code.k
    bits = ints_to_rows(msgs, k).reshape(-1)[: scheme.message_length]
    acc = np.repeat(ok, k)[: scheme.message_length]
    return bits, acc


def rldc_decode_bit(view: ProbeView, index: int, scheme: RldcScheme, rng: RandomSource | None = None):
    """Decode message bit `index`: 0, 1, or BOTTOM. Reads exactly one block."""
    if not 0 <= index < scheme.message_length:
        raise IndexError(f"message index {index} out of range")
    k, n = scheme.code.k, scheme.code.n
    b, pos = divmod(index, k)
    received = rows_to_ints(view.read_range(b * n, (b + 1) * n)[None, :])
    msg, flips = scheme.code.decode_ints(received)
    if flips[0] > scheme.accept_radius:
        return BOTTOM
    return int((int(msg[0]) >> pos) & 1)


def amplify(decode_once, reps: int, rng: RandomSource):
    """Strict majority over `reps` independent decoder runs (BOTTOM counts as a vote)."""
    if reps < 1:
        raise ValueError("reps must be >= 1")
    return majority_vote([decode_once(rng) for _ in range(reps)])


# ---------------------------------------------------------------------------
# Multi-bit answers: inner ECC per answer, then the blockwise code over everything


def nb_scheme(num_answers: int, ecc: InnerEcc, code: BinaryLinearCode | None = None) -> RldcScheme:
    return RldcScheme(num_answers * ecc.ell_out, code or default_block_code())


def values_to_bits(values: Sequence[int], ell: int) -> np.ndarray:
    v = np.asarray(values, dtype=np.int64)
    if v.size and (v.min() < 0 or v.max() >= 1 << ell):
        raise ValueError(f"value does not fit in {ell} bits")
    return ((v[:, None] >> np.arange(ell)) & 1).astype(np.uint8)


def bits_to_values(bits: np.ndarray) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.int64)
    return (bits << np.arange(bits.shape[1])).sum(axis=1)


def nb_encode_values(values: Sequence[int], scheme: RldcScheme, ecc: InnerEcc) -> BitWord:
    values = np.asarray(values, dtype=np.int64)
    if values.size * ecc.ell_out != scheme.message_length:
        raise ValueError("scheme message length does not match answers * inner codeword length")
    return rldc_encode(ecc.encode_values(values).reshape(-1), scheme)


def nb_encode(answers, scheme: RldcScheme, ecc: InnerEcc) -> BitWord:
    """Encode a list of ell-bit answers (each a 0/1 sequence, bit j = 2^j place)."""
    rows = [np.asarray(a, dtype=np.uint8).reshape(-1) for a in answers]
    if any(r.size != ecc.ell for r in rows):
        raise ValueError(f"every answer must have exactly {ecc.ell} bits")
    if not rows:
        raise ValueError("need at least one answer")
    return nb_encode_values(bits_to_values(np.stack(rows)), scheme, ecc)


def _answer_span(q: int, scheme: RldcScheme, ecc: InnerEcc) -> tuple[int, int, int]:
    lo = q * ecc.ell_out
    hi = lo + ecc.ell_out
    k = scheme.code.k
    return lo, lo // k, (hi - 1) // k


def nb_decode_value(view: ProbeView, q: int, scheme: RldcScheme, ecc: InnerEcc,
                    rng: RandomSource | None = None) -> int:
    """Answer q as an integer, or BOTTOM_CODE."""
    if not 0 <= q < scheme.message_length // ecc.ell_out:
        raise IndexError(f"answer index {q} out of range")
    lo, b0, b1 = _answer_span(q, scheme, ecc)
    k, n = scheme.code.k, scheme.code.n
    # every bit of the answer goes through the single-bit decoder; bits sharing a
    # block share one read
    received = view.read_range(b0 * n, (b1 + 1) * n).reshape(-1, n)
    msgs, flips = scheme.code.decode_ints(rows_to_ints(received))
    bits = ints_to_rows(msgs, k).reshape(-1)
    ok = np.repeat(flips <= scheme.accept_radius, k)
    off = lo - b0 * k
    bits, ok = bits[off : off + ecc.ell_out], ok[off : off + ecc.ell_out]
    return _finish_answer(bits, ~ok, ecc)


def _finish_answer(bits: np.ndarray, erased: np.ndarray, ecc: InnerEcc) -> int:
    if 8 * int(erased.sum()) >= ecc.ell_out:
        return BOTTOM_CODE
    v = ecc.decode_value(bits, erased)
    return BOTTOM_CODE if v is None else v


def nb_decode(view: ProbeView, q: int, scheme: RldcScheme, ecc: InnerEcc,
              rng: RandomSource | None = None):
    """Answer q as a tuple of ell bits, or BOTTOM."""
    v = nb_decode_value(view, q, scheme, ecc, rng)
    if v == BOTTOM_CODE:
        return BOTTOM
    return tuple(int(b) for b in values_to_bits([v], ecc.ell)[0])


def nb_decode_all(word: BitWord, scheme: RldcScheme, ecc: InnerEcc, offset: int = 0,
                  chunk: int = 1 << 15) -> np.ndarray:
    """Decode every answer of a wrapped word at once (value or BOTTOM_CODE per answer)."""
    total = scheme.message_length // ecc.ell_out
    out = np.empty(total, dtype=np.int64)
    k, lp = scheme.code.k, ecc.ell_out
    for a0 in range(0, total, chunk):
        a1 = min(total, a0 + chunk)
        lo, hi = a0 * lp, a1 * lp
        b0, b1 = lo // k, (hi - 1) // k + 1
        msgs, ok = decode_blocks(word, scheme, offset, b0, b1 - b0)
        bits = ints_to_rows(msgs, k).reshape(-1)[lo - b0 * k : hi - b0 * k].reshape(-1, lp)
        erased = ~np.repeat(ok, k)[lo - b0 * k : hi - b0 * k].reshape(-1, lp)
        nerased = erased.sum(axis=1)
        vals = np.full(a1 - a0, BOTTOM_CODE, dtype=np.int64)
        clean = nerased == 0
        if clean.any():
            vals[clean] = ecc.lookup_clean(bits[clean])
        todo = np.flatnonzero((8 * nerased < lp) & ~(clean & (vals >= 0)))
        if todo.size:
            vals[todo] = ecc.decode_values(bits[todo], erased[todo])
        out[a0:a1] = vals
    return out


# ---------------------------------------------------------------------------
# Empirical constants of the reference scheme


@dataclass
class RldcConstants:
    deltas: list[float]
    bad_fraction: list[float]  # indices not decoded correctly
    wrong_fraction: list[float]  # indices decoded to the wrong bit
    c_hat: float
    tau_hat: float


def empirical_constants(scheme: RldcScheme, rng: RandomSource, deltas: Sequence[float],
                        trials: int = 8) -> RldcConstants:
    """Measure lambda/delta and the largest delta with no wrong answers under random noise."""
    from .core import CorruptionSpec, corrupt

    bad, wrong = [], []
    for delta in deltas:
        worst_bad = worst_wrong = 0.0
        for _ in range(trials):
            msg = rng.integers(0, 2, scheme.message_length).astype(np.uint8)
            clean = rldc_encode(msg, scheme)
            spec = CorruptionSpec(int(delta * scheme.length), "uniform-random", rng.next_seed())
            bits, acc = decode_message_bits(corrupt(clean, spec), scheme)
            worst_bad = max(worst_bad, float(np.mean(~acc | (bits != msg))))
            worst_wrong = max(worst_wrong, float(np.mean(acc & (bits != msg))))
        bad.append(worst_bad)
        wrong.append(worst_wrong)
    c_hat = max((b / d for b, d in zip(bad, deltas) if d > 0), default=0.0)
    clean_deltas = [d for d, w in zip(deltas, wrong) if w == 0.0]
    return RldcConstants(list(deltas), bad, wrong, c_hat, max(clean_deltas, default=0.0))
