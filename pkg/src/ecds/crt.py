"""Chinese-remainder codes: prime bases, encoding, unique decoding, brute-force oracle."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import floor, log, log2, prod
from typing import Sequence

import numpy as np
from sympy import isprime, nextprime, prime

from .core import BOTTOM

ERASURE_GUARD = Fraction(1, 16)
BRUTEFORCE_LIMIT = 1 << 24


@dataclass(frozen=True)
class CrtBasis:
    """Increasing primes p_1 < ... < p_N; the first K of them multiply past T."""

    primes: tuple[int, ...]
    K: int
    T: int
    _cache: dict = field(default_factory=dict, repr=False, compare=False, hash=False)

    def __post_init__(self) -> None:
        ps = tuple(int(p) for p in self.primes)
        object.__setattr__(self, "primes", ps)
        if not 1 <= self.K < len(ps):
            raise ValueError(f"need 1 <= K < N, got K={self.K}, N={len(ps)}")
        if any(a >= b for a, b in zip(ps, ps[1:])):
            raise ValueError("primes must be strictly increasing")
        if not all(isprime(p) for p in ps):
            raise ValueError("basis contains a non-prime")
        if self.T < 1 or prod(ps[: self.K]) < self.T:
            raise ValueError("product of the first K primes is below T")

    @property
    def N(self) -> int:
        return len(self.primes)

    def context(self, erased: tuple[int, ...] = ()) -> "_DecodeContext":
        ctx = self._cache.get(erased)
        if ctx is None:
            ctx = _DecodeContext(self, erased)
            if len(self._cache) < 4096:
                self._cache[erased] = ctx
        return ctx


def decoding_radius(primes: Sequence[int], K: int) -> int:
    """floor(log p_min / (log p_min + log p_max) * (N - K)) errors, never negative."""
    if len(primes) <= K:
        return 0
    lo, hi = log(min(primes)), log(max(primes))
    return max(0, floor(lo / (lo + hi) * (len(primes) - K)))


class _DecodeContext:
    """Precomputed CRT data for one erasure pattern of a basis."""

    def __init__(self, basis: CrtBasis, erased: tuple[int, ...]):
        gone = set(erased)
        self.index = [i for i in range(basis.N) if i not in gone]
        self.primes = [basis.primes[i] for i in self.index]
        self.P = prod(self.primes)
        self.coeffs = []
        for p in self.primes:
            q = self.P // p
            self.coeffs.append(q * pow(q % p, -1, p))
        self.radius = decoding_radius(self.primes, basis.K) if self.primes else 0
        largest = sorted(self.primes, reverse=True)
        self.bounds = [prod(largest[:e]) for e in range(1, self.radius + 1)]


def _indexed_count(T: int) -> int:
    lt = log2(T)
    return floor(12 * lt / log2(lt))


def select_primes(T: int, rule: str = "indexed") -> CrtBasis:
    """Rate-1/2 basis of 2K primes for messages below T.

    rule="indexed": K = floor(12 log T / log log T) and the primes are the K-th
    through (3K-1)-th primes (1-indexed, q_1 = 2).
    rule="compact": the 2K consecutive primes after log2 T with the smallest K
    whose first K primes multiply past T. Same shape and bounds, far fewer primes.
    """
    T = int(T)
    if T < 16:
        raise ValueError("T must be at least 16")
    lt = log2(T)
    if rule == "indexed":
        K = _indexed_count(T)
        if K < 2:
            raise ValueError(f"T={T} too small for K >= 2")
        primes = [prime(i) for i in range(K, 3 * K)]
    elif rule == "compact":
        primes = [int(nextprime(floor(lt)))]
        acc = primes[0]
        while acc <= T:
            primes.append(int(nextprime(primes[-1])))
            acc *= primes[-1]
        K = max(2, len(primes))
        while len(primes) < 2 * K:
            primes.append(int(nextprime(primes[-1])))
    else:
        raise ValueError(f"unknown prime rule {rule!r}")
    if prod(primes[:K]) <= T:
        raise AssertionError("first K primes do not exceed T")
    if not all(lt < p < 500 * lt for p in primes):
        raise AssertionError("prime outside (log T, 500 log T)")
    return CrtBasis(tuple(primes), K, T)


def crt_encode(m: int, basis: CrtBasis | Sequence[int]) -> tuple[int, ...]:
    """Residues of m; a bare tuple of moduli skips the range check."""
    m = int(m)
    if not isinstance(basis, CrtBasis):
        if m < 0:
            raise ValueError("message must be nonnegative")
        return tuple(m % int(p) for p in basis)
    if not 0 <= m < basis.T:
        raise ValueError(f"message {m} outside [0, {basis.T})")
    return tuple(m % p for p in basis.primes)


def _check_word(received: Sequence, basis: CrtBasis) -> tuple[int, ...]:
    if len(received) != basis.N:
        raise ValueError(f"expected {basis.N} symbols, got {len(received)}")
    erased = []
    for i, (r, p) in enumerate(zip(received, basis.primes)):
        if r is BOTTOM or r is None:
            erased.append(i)
        elif not isinstance(r, (int, np.integer)) or not 0 <= r < p:
            raise ValueError(f"symbol {i} = {r!r} is not a residue mod {p}")
    return tuple(erased)


def crt_decode_unique(received: Sequence, basis: CrtBasis,
                      erasure_guard: Fraction | None = ERASURE_GUARD):
    """Unique decoding up to the radius of the non-erased primes, else BOTTOM.

    Erasures are BOTTOM (or None). With more than an `erasure_guard` fraction of
    erasures the word is rejected outright.
    """
    erased = _check_word(received, basis)
    if erasure_guard is not None and len(erased) * erasure_guard.denominator > (
            erasure_guard.numerator * basis.N):
        return BOTTOM
    ctx = basis.context(erased)
    if not ctx.primes:
        return BOTTOM
    res = [int(received[i]) for i in ctx.index]
    P = ctx.P
    z = sum(r * c for r, c in zip(res, ctx.coeffs)) % P
    T = basis.T
    if z < T:
        return z if P >= T else BOTTOM
    if not ctx.bounds:
        return BOTTOM
    # Extended Euclid on (P, z) keeping r_j = t_j * z mod P. An error locator E
    # (product of the wrong primes) satisfies E*z = E*m mod P with E*m small.
    r0, r1, t0, t1 = P, z, 0, 1
    seq = [(r1, t1)]
    while r1:
        q = r0 // r1
        r0, r1 = r1, r0 - q * r1
        t0, t1 = t1, t0 - q * t1
        seq.append((r1, t1))
    j = 0
    radius = ctx.radius
    for bound in ctx.bounds:
        while j + 1 < len(seq) and abs(seq[j + 1][1]) <= bound:
            j += 1
        r, t = seq[j]
        if t < 0:
            r, t = -r, -t
        if t == 0 or r % t:
            continue
        m = r // t
        if not 0 <= m < T:
            continue
        wrong = 0
        for x, p in zip(res, ctx.primes):
            if m % p != x:
                wrong += 1
                if wrong > radius:
                    break
        if wrong <= radius:
            return m
    return BOTTOM


def crt_decode_bruteforce(received: Sequence, basis: CrtBasis,
                          limit: int = BRUTEFORCE_LIMIT) -> tuple[int, int]:
    """Minimum-disagreement message by enumeration; ties go to the smaller message."""
    if basis.T > limit:
        raise ValueError(f"T={basis.T} above enumeration guard {limit}")
    erased = set(_check_word(received, basis))
    agree = np.zeros(basis.T, dtype=np.int32)
    for i, (r, p) in enumerate(zip(received, basis.primes)):
        if i not in erased:
            agree[int(r) :: p] += 1
    m = int(np.argmax(agree))
    return m, basis.N - len(erased) - int(agree[m])
