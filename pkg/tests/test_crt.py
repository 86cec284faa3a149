import itertools
from math import log, prod

import pytest
from hypothesis import given, settings
from hypothesis import strategies as hst
from sympy import prime

from ecds import BOTTOM
from ecds.crt import (CrtBasis, crt_decode_bruteforce, crt_decode_unique, crt_encode,
                      decoding_radius, select_primes)

SMALL = CrtBasis((101, 103, 107, 109, 113), 2, 10403)


def test_encode_examples():
    assert crt_encode(23, (3, 5, 7)) == (2, 3, 2)
    assert crt_encode(5000, SMALL) == (51, 56, 78, 95, 28)
    assert crt_encode(0, SMALL) == (0,) * 5
    with pytest.raises(ValueError):
        crt_encode(10403, SMALL)


def test_radius_small_basis():
    assert decoding_radius(SMALL.primes, SMALL.K) == 1


def test_decode_one_corrupted_residue():
    word = list(crt_encode(5000, SMALL))
    for i in range(5):
        bad = list(word)
        bad[i] = (bad[i] + 17) % SMALL.primes[i]
        assert crt_decode_unique(bad, SMALL) == 5000
        assert crt_decode_bruteforce(bad, SMALL) == (5000, 1)
    assert crt_decode_bruteforce(word, SMALL) == (5000, 0)


def test_decode_rejects_malformed_symbols():
    with pytest.raises(ValueError):
        crt_decode_unique([0, 0, 0, 0, 113], SMALL)
    with pytest.raises(ValueError):
        crt_decode_unique([0, 0, 0], SMALL)


def test_erasure_guard():
    basis = select_primes(2**20)
    word = list(crt_encode(12345, basis))
    limit = basis.N // 16
    ok = list(word)
    for i in range(limit):
        ok[i] = BOTTOM
    assert crt_decode_unique(ok, basis) == 12345
    ok[limit] = BOTTOM
    assert crt_decode_unique(ok, basis) is BOTTOM


def test_bruteforce_tie_goes_to_smaller_message():
    # independent oracle: count disagreements of every message against every word
    basis = CrtBasis((3, 5, 7), 2, 15)
    for word in itertools.product(range(3), range(5), range(7)):
        dis = [sum(m % p != r for p, r in zip(basis.primes, word)) for m in range(15)]
        best = min(dis)
        assert crt_decode_bruteforce(list(word), basis) == (dis.index(best), best)


def test_bruteforce_guard():
    with pytest.raises(ValueError):
        crt_decode_bruteforce([0] * 4, CrtBasis((5, 7, 11, 13), 2, 35), limit=10)


def test_indexed_rule_example():
    basis = select_primes(2**20)
    assert basis.K == 55 and basis.N == 110
    assert basis.primes == tuple(prime(i) for i in range(55, 165))
    assert all(20 < p < 10000 for p in basis.primes)


@pytest.mark.parametrize("T", [2**10, 2**16, 2**20, 2**24, 3**40])
@pytest.mark.parametrize("rule", ["indexed", "compact"])
def test_select_primes_bounds(T, rule):
    basis = select_primes(T, rule)
    lt = log(T, 2)
    assert basis.N == 2 * basis.K
    assert prod(basis.primes[: basis.K]) > T
    assert all(lt < p < 500 * lt for p in basis.primes)


@pytest.mark.parametrize("T", [2**10, 2**16, 2**20, 2**24])
def test_indexed_rule_prime_counting_bounds(T):
    basis = select_primes(T, "indexed")
    K = basis.K
    assert basis.primes[0] > K * log(K) / 6
    assert basis.primes[-1] < 13 * (3 * K - 1) * log(3 * K - 1)


def test_select_primes_too_small():
    with pytest.raises(ValueError):
        select_primes(8)


_BASES = {(T, rule): select_primes(T, rule) for T in (2**10, 2**14, 2**20) for rule in ("indexed", "compact")}


@settings(max_examples=150, deadline=None)
@given(hst.sampled_from(sorted(_BASES)), hst.data())
def test_unique_decoder_agrees_with_oracle(key, data):
    basis = _BASES[key]
    radius = decoding_radius(basis.primes, basis.K)
    m = data.draw(hst.integers(0, basis.T - 1))
    e = data.draw(hst.integers(0, radius))
    pos = data.draw(hst.lists(hst.integers(0, basis.N - 1), min_size=e, max_size=e, unique=True))
    word = list(crt_encode(m, basis))
    for i in pos:
        word[i] = (word[i] + data.draw(hst.integers(1, basis.primes[i] - 1))) % basis.primes[i]
    got = crt_decode_unique(word, basis)
    oracle, dis = crt_decode_bruteforce(word, basis)
    assert got == oracle == m
    assert dis == e


@settings(max_examples=60, deadline=None)
@given(hst.lists(hst.integers(0, 112), min_size=5, max_size=5))
def test_unique_decoder_never_wrong_beyond_radius(noise):
    # arbitrary words: output is BOTTOM or the message within the radius
    word = [x % p for x, p in zip(noise, SMALL.primes)]
    got = crt_decode_unique(word, SMALL)
    if got is not BOTTOM:
        assert sum(got % p != r for p, r in zip(SMALL.primes, word)) <= 1
