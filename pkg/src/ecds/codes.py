"""Small binary linear codes with exhaustive verification and table-driven decoding.

Codewords and messages are handled as Python/numpy integers where bit j of the
integer is coordinate j. All tables are built by XOR-combining per-byte tables,
so encoding and syndrome computation are a few lookups per block.
"""

from __future__ import annotations

from fractions import Fraction
from functools import cached_property
from itertools import combinations
from math import ceil

import numpy as np

U64 = np.uint64


def _gf2_rank_rows(rows: list[int]) -> int:
    basis: list[int] = []
    for r in rows:
        for b in basis:
            r = min(r, r ^ b)
        if r:
            basis.append(r)
    return len(basis)


def _byte_tables(contributions: list[int], width: int) -> np.ndarray:
    """Tables T[c, v] = XOR of contributions[8c + i] over set bits i of byte v."""
    nbytes = (width + 7) // 8
    tab = np.zeros((nbytes, 256), dtype=U64)
    for c in range(nbytes):
        for i in range(8):
            j = 8 * c + i
            if j >= width:
                break
            bit = np.arange(256) >> i & 1
            tab[c] ^= np.where(bit == 1, U64(contributions[j]), U64(0))
    return tab


def _apply_tables(tab: np.ndarray, values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=U64)
    out = np.zeros(values.shape, dtype=U64)
    for c in range(tab.shape[0]):
        out ^= tab[c][(values >> U64(8 * c)) & U64(0xFF)]
    return out


def bits_to_int(bits) -> int:
    v = 0
    for j, b in enumerate(bits):
        if b:
            v |= 1 << j
    return v


def int_to_bits(value: int, width: int) -> np.ndarray:
    return np.array([(value >> j) & 1 for j in range(width)], dtype=np.uint8)


def rows_to_ints(bits2d: np.ndarray) -> np.ndarray:
    """(M, w) bit matrix with w <= 64 to uint64 integers (column j -> bit j)."""
    bits2d = np.asarray(bits2d, dtype=np.uint8)
    m, w = bits2d.shape
    if w > 64:
        raise ValueError("at most 64 bits per row")
    packed = np.packbits(bits2d, axis=1, bitorder="little")
    out = np.zeros(m, dtype=U64)
    for c in range(packed.shape[1]):
        out |= packed[:, c].astype(U64) << U64(8 * c)
    return out


def ints_to_rows(values: np.ndarray, width: int) -> np.ndarray:
    values = np.asarray(values, dtype=U64)
    shifts = np.arange(width, dtype=U64)
    return ((values[:, None] >> shifts) & U64(1)).astype(np.uint8)


class BinaryLinearCode:
    """Binary [n, k] linear code given by a k x n generator matrix (n <= 63, k <= 20).

    Decoding is nearest-codeword via a full syndrome (coset leader) table, so it is
    exact maximum-likelihood decoding.
    """

    def __init__(self, generator: np.ndarray, name: str = "code"):
        g = np.asarray(generator, dtype=np.uint8) & 1
        if g.ndim != 2:
            raise ValueError("generator must be a matrix")
        self.k, self.n = g.shape
        if self.n > 63 or self.k > 20:
            raise ValueError("table decoding supports n <= 63 and k <= 20")
        rows = [bits_to_int(r) for r in g]
        if _gf2_rank_rows(rows) != self.k:
            raise ValueError("generator rows are linearly dependent")
        self.name = name
        self.generator = g
        self._rows = rows
        self._enc_tab = _byte_tables(rows, self.k)
        self.info_set, inv = self._information_set()
        # message = (codeword restricted to info_set) @ inv
        contrib = [0] * self.n
        for t, j in enumerate(self.info_set):
            contrib[j] = bits_to_int(inv[t])
        self._msg_tab = _byte_tables(contrib, self.n)
        self._build_syndromes()

    def _information_set(self) -> tuple[list[int], np.ndarray]:
        g = self.generator
        chosen: list[int] = []
        for j in range(self.n):
            cand = chosen + [j]
            if _gf2_rank_rows([bits_to_int(g[:, c]) for c in cand]) == len(cand):
                chosen = cand
                if len(chosen) == self.k:
                    break
        sub = g[:, chosen].copy()  # k x k, invertible: msg @ sub = codeword[chosen]
        aug = np.concatenate([sub, np.eye(self.k, dtype=np.uint8)], axis=1)
        for col in range(self.k):
            piv = next(r for r in range(col, self.k) if aug[r, col])
            aug[[col, piv]] = aug[[piv, col]]
            for r in range(self.k):
                if r != col and aug[r, col]:
                    aug[r] ^= aug[col]
        return chosen, aug[:, self.k :]

    def _build_syndromes(self) -> None:
        # parity-check columns: syndrome of unit vector e_j, using a basis of the dual code
        g = self.generator
        dual: list[int] = []
        # solve for dual basis by Gaussian elimination on G
        red = g.copy()
        pivots: list[int] = []
        r = 0
        for col in range(self.n):
            p = next((i for i in range(r, self.k) if red[i, col]), None)
            if p is None:
                continue
            red[[r, p]] = red[[p, r]]
            for i in range(self.k):
                if i != r and red[i, col]:
                    red[i] ^= red[r]
            pivots.append(col)
            r += 1
        free = [c for c in range(self.n) if c not in pivots]
        for f in free:
            h = np.zeros(self.n, dtype=np.uint8)
            h[f] = 1
            for i, pc in enumerate(pivots):
                h[pc] = red[i, f]
            dual.append(bits_to_int(h))
        self.redundancy = len(dual)
        col_syn = []
        for j in range(self.n):
            s = 0
            for t, h in enumerate(dual):
                if (h >> j) & 1:
                    s |= 1 << t
            col_syn.append(s)
        self._syn_tab = _byte_tables(col_syn, self.n)
        size = 1 << self.redundancy
        leader = np.zeros(size, dtype=U64)
        weight = np.full(size, -1, dtype=np.int16)
        weight[0] = 0
        filled = 1
        w = 0
        while filled < size:
            w += 1
            for pos in combinations(range(self.n), w):
                s = 0
                e = 0
                for j in pos:
                    s ^= col_syn[j]
                    e |= 1 << j
                if weight[s] < 0:
                    weight[s] = w
                    leader[s] = e
                    filled += 1
        self._leader = leader
        self._leader_weight = weight
        self.covering_radius = w

    # -- encoding ---------------------------------------------------------
    def encode_int(self, message: int) -> int:
        return int(_apply_tables(self._enc_tab, np.array([message]))[0])

    def encode_ints(self, messages: np.ndarray) -> np.ndarray:
        return _apply_tables(self._enc_tab, messages)

    def encode(self, message_bits) -> np.ndarray:
        bits = np.asarray(message_bits, dtype=np.uint8)
        if bits.shape != (self.k,):
            raise ValueError(f"message must have {self.k} bits")
        return int_to_bits(self.encode_int(bits_to_int(bits)), self.n)

    # -- decoding ---------------------------------------------------------
    def syndromes(self, words: np.ndarray) -> np.ndarray:
        return _apply_tables(self._syn_tab, words)

    def decode_ints(self, words: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Nearest codeword for each received word: (message ints, flip counts)."""
        words = np.asarray(words, dtype=U64)
        syn = self.syndromes(words).astype(np.int64)
        corrected = words ^ self._leader[syn]
        return _apply_tables(self._msg_tab, corrected), self._leader_weight[syn].astype(np.int64)

    def message_of(self, codewords: np.ndarray) -> np.ndarray:
        return _apply_tables(self._msg_tab, codewords)

    # -- verification -----------------------------------------------------
    @cached_property
    def codebook(self) -> np.ndarray:
        return self.encode_ints(np.arange(1 << self.k, dtype=U64))

    @cached_property
    def min_distance(self) -> int:
        """Exact minimum distance by enumerating every nonzero codeword."""
        return int(np.bitwise_count(self.codebook[1:]).min())

    @property
    def relative_distance(self) -> Fraction:
        return Fraction(self.min_distance, self.n)

    def __repr__(self) -> str:
        return f"BinaryLinearCode({self.name}: [{self.n},{self.k}])"


def golay24() -> BinaryLinearCode:
    """Extended binary Golay code [24, 12, 8] in systematic form."""
    gpoly = [1, 0, 1, 0, 1, 1, 1, 0, 0, 0, 1, 1]  # 1 + x^2 + x^4 + x^5 + x^6 + x^10 + x^11
    rows = np.zeros((12, 24), dtype=np.uint8)
    for i in range(12):
        rows[i, i : i + 12] = gpoly
        rows[i, 23] = rows[i, :23].sum() & 1
    # row-reduce to [I | B]
    for col in range(12):
        piv = next(r for r in range(col, 12) if rows[r, col])
        rows[[col, piv]] = rows[[piv, col]]
        for r in range(12):
            if r != col and rows[r, col]:
                rows[r] ^= rows[col]
    return BinaryLinearCode(rows, "golay24")


def repetition(k: int, reps: int) -> BinaryLinearCode:
    """Each message bit repeated `reps` times consecutively."""
    g = np.zeros((k, k * reps), dtype=np.uint8)
    for i in range(k):
        g[i, i * reps : (i + 1) * reps] = 1
    return BinaryLinearCode(g, f"repetition{reps}x{k}")


def extended_hamming8() -> BinaryLinearCode:
    g = np.array(
        [
            [1, 0, 0, 0, 1, 1, 0, 1],
            [0, 1, 0, 0, 1, 0, 1, 1],
            [0, 0, 1, 0, 0, 1, 1, 1],
            [0, 0, 0, 1, 1, 1, 1, 0],
        ],
        dtype=np.uint8,
    )
    return BinaryLinearCode(g, "ext-hamming8")


# ---------------------------------------------------------------------------
# GF(16) and the concatenated inner code used for multi-bit answers

_GF16_EXP = [0] * 30
_GF16_LOG = [0] * 16
_x = 1
for _i in range(15):
    _GF16_EXP[_i] = _x
    _GF16_LOG[_x] = _i
    _x <<= 1
    if _x & 0x10:
        _x ^= 0x13  # x^4 + x + 1
for _i in range(15, 30):
    _GF16_EXP[_i] = _GF16_EXP[_i - 15]


def gf16_mul(a: int, b: int) -> int:
    if a == 0 or b == 0:
        return 0
    return _GF16_EXP[_GF16_LOG[a] + _GF16_LOG[b]]


def gf16_pow(a: int, e: int) -> int:
    if e == 0:
        return 1
    if a == 0:
        return 0
    return _GF16_EXP[(_GF16_LOG[a] * e) % 15]


class InnerEcc:
    """Binary code for ell-bit answers with relative distance >= 3/8.

    Outer Reed-Solomon evaluation code over GF(16) (ceil(ell/4) symbols), each
    symbol re-encoded with the extended Hamming [8,4,4] code. The distance is
    checked over all 2^ell codewords at construction. Decoding is exhaustive
    nearest-codeword search over the non-erased coordinates, accepted only when
    2*errors + erasures < (3/8) * codeword length.
    """

    RELATIVE_DISTANCE = Fraction(3, 8)
    MAX_BITS = 16

    def __init__(self, ell: int):
        if not 1 <= ell <= self.MAX_BITS:
            raise ValueError(f"answer width must be in [1, {self.MAX_BITS}], got {ell}")
        self.ell = ell
        self.symbols_in = ceil(ell / 4)
        self.symbols_out = max(self.symbols_in, 4 * self.symbols_in - 4, 1)
        self.ell_out = 8 * self.symbols_out
        inner = extended_hamming8()
        points = [_GF16_EXP[i] for i in range(self.symbols_out)]
        gen = np.zeros((ell, self.ell_out), dtype=np.uint8)
        for bit in range(ell):
            j, b = divmod(bit, 4)
            coeff = 1 << b
            for i, x in enumerate(points):
                sym = gf16_mul(coeff, gf16_pow(x, j))
                gen[bit, 8 * i : 8 * i + 8] = inner.encode(int_to_bits(sym, 4))
        self.generator = gen
        self.words = (self.ell_out + 63) // 64
        self.codebook = self._build_codebook()
        self.min_distance = int(np.bitwise_count(self.codebook[1:]).sum(axis=1).min()) if ell else 0
        if Fraction(self.min_distance, self.ell_out) < self.RELATIVE_DISTANCE:
            raise AssertionError(f"inner code distance {self.min_distance}/{self.ell_out} below 3/8")
        self._clean = {tuple(int(v) for v in row): i for i, row in enumerate(self.codebook)}

    def _pack(self, bits2d: np.ndarray) -> np.ndarray:
        bits2d = np.asarray(bits2d, dtype=np.uint8)
        out = np.zeros((bits2d.shape[0], self.words), dtype=U64)
        for w in range(self.words):
            chunk = bits2d[:, 64 * w : 64 * (w + 1)]
            out[:, w] = rows_to_ints(chunk)
        return out

    def _build_codebook(self) -> np.ndarray:
        rows = self._pack(self.generator)
        book = np.zeros((1, self.words), dtype=U64)
        for r in rows:
            book = np.concatenate([book, book ^ r[None, :]])
        return book  # row index = message value

    @property
    def relative_distance(self) -> Fraction:
        return Fraction(self.min_distance, self.ell_out)

    def encode(self, msg_bits) -> np.ndarray:
        bits = np.asarray(msg_bits, dtype=np.uint8)
        if bits.shape != (self.ell,):
            raise ValueError(f"message must have {self.ell} bits")
        return self.encode_values(np.array([bits_to_int(bits)]))[0]

    def encode_values(self, values: np.ndarray) -> np.ndarray:
        """(M,) integer answers -> (M, ell_out) codeword bits."""
        values = np.asarray(values, dtype=np.int64)
        if values.size and (values.min() < 0 or values.max() >= 1 << self.ell):
            raise ValueError(f"answer does not fit in {self.ell} bits")
        words = self.codebook[values]
        out = np.zeros((len(values), self.ell_out), dtype=np.uint8)
        for w in range(self.words):
            width = min(64, self.ell_out - 64 * w)
            out[:, 64 * w : 64 * w + width] = ints_to_rows(words[:, w], width)
        return out

    def accepts(self, errors: int, erasures: int) -> bool:
        return 8 * (2 * errors + erasures) < 3 * self.ell_out

    def decode_value(self, bits: np.ndarray, erased: np.ndarray | None = None) -> int | None:
        """Nearest codeword on non-erased coordinates; None when outside the radius."""
        bits = np.asarray(bits, dtype=np.uint8)
        if bits.shape != (self.ell_out,):
            raise ValueError(f"received word must have {self.ell_out} symbols")
        erased = np.zeros(self.ell_out, dtype=bool) if erased is None else np.asarray(erased, bool)
        s = int(erased.sum())
        if not self.accepts(0, s):
            return None
        r = self._pack(np.where(erased, 0, bits)[None, :])[0]
        keep = self._pack((~erased).astype(np.uint8)[None, :])[0]
        if s == 0:
            hit = self._clean.get(tuple(int(v) for v in r))
            if hit is not None:
                return hit
        dist = np.bitwise_count((self.codebook ^ r) & keep).sum(axis=1)
        best = int(np.argmin(dist))
        if not self.accepts(int(dist[best]), s):
            return None
        return best

    def decode_values(self, bits2d: np.ndarray, erased2d: np.ndarray, chunk: int = 1024) -> np.ndarray:
        """Row-wise decode_value; -1 where decoding fails."""
        bits2d = np.asarray(bits2d, dtype=np.uint8)
        erased2d = np.asarray(erased2d, dtype=bool)
        out = np.full(len(bits2d), -1, dtype=np.int64)
        s = erased2d.sum(axis=1)
        for lo in range(0, len(bits2d), chunk):
            hi = min(len(bits2d), lo + chunk)
            r = self._pack(np.where(erased2d[lo:hi], 0, bits2d[lo:hi]))
            keep = self._pack((~erased2d[lo:hi]).astype(np.uint8))
            dist = np.zeros((hi - lo, len(self.codebook)), dtype=np.int64)
            for w in range(self.words):
                dist += np.bitwise_count((self.codebook[None, :, w] ^ r[:, None, w]) & keep[:, None, w])
            best = np.argmin(dist, axis=1)
            e = dist[np.arange(hi - lo), best]
            ok = 8 * (2 * e + s[lo:hi]) < 3 * self.ell_out
            out[lo:hi] = np.where(ok, best, -1)
        return out

    def decode(self, received) -> np.ndarray | None:
        """Symbols in {0, 1, None}; None marks an erasure. Returns ell bits or None."""
        if len(received) != self.ell_out:
            raise ValueError(f"received word must have {self.ell_out} symbols")
        erased = np.array([r is None for r in received])
        bits = np.array([0 if r is None else int(r) for r in received], dtype=np.uint8)
        v = self.decode_value(bits, erased)
        return None if v is None else int_to_bits(v, self.ell)

    def lookup_clean(self, bits2d: np.ndarray) -> np.ndarray:
        """Vectorized exact-codeword lookup: message value, or -1 if not a codeword."""
        packed = self._pack(bits2d)
        return np.array([self._clean.get(tuple(int(v) for v in row), -1) for row in packed],
                        dtype=np.int64)
