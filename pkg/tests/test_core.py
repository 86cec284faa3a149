import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as hst

from ecds import BOTTOM, BitWord, CorruptionSpec, DsContract, ProbeView, RandomSource, corrupt, hamming_distance
from ecds.container import (KIND_RAW, ContainerError, dump_bytes, load_bytes, read_container,
                            write_container)
from ecds.core import corruption_positions, majority_vote

bit_lists = hst.lists(hst.integers(0, 1), min_size=1, max_size=300)


@pytest.mark.parametrize("a,b,expected", [("0000", "0000", 0), ("0000", "1111", 4), ("10110", "10011", 2)])
def test_hamming_examples(a, b, expected):
    assert hamming_distance(BitWord.from_str(a), BitWord.from_str(b)) == expected


def test_hamming_length_mismatch():
    with pytest.raises(ValueError):
        hamming_distance(BitWord.from_str("01"), BitWord.from_str("011"))


@given(bit_lists)
def test_bitword_round_trip(bits):
    w = BitWord.from_bits(bits)
    assert len(w) == len(bits)
    assert w.bits().tolist() == bits
    assert [w[i] for i in range(len(bits))] == bits


@given(bit_lists, hst.data())
def test_hamming_matches_naive_count(bits, data):
    other = data.draw(hst.lists(hst.integers(0, 1), min_size=len(bits), max_size=len(bits)))
    naive = sum(x != y for x, y in zip(bits, other))
    assert hamming_distance(BitWord.from_bits(bits), BitWord.from_bits(other)) == naive


def test_corrupt_zero_budget_is_identity():
    w = BitWord.from_str("1011001")
    assert corrupt(w, CorruptionSpec(0, "uniform-random", 3)) == w


def test_corrupt_seeded_uniform_distance():
    w = BitWord.from_str("00000")
    out = corrupt(w, CorruptionSpec(2, "uniform-random", 7))
    assert hamming_distance(w, out) == 2
    assert corrupt(w, CorruptionSpec(2, "uniform-random", 7)) == out


def test_corrupt_budget_above_length():
    with pytest.raises(ValueError):
        corrupt(BitWord.from_str("000"), CorruptionSpec(4))


class _Blocks:
    def __init__(self, n_blocks, size):
        starts = np.arange(n_blocks) * size
        self._seg = np.stack([starts, starts + size], axis=1)

    def segments(self):
        return self._seg

    def footprint(self, q):
        return self._seg[q : q + 1]

    def target_queries(self):
        return [0]

    def burst_sizes(self):
        return (4, 5)


def test_targeted_block_stays_in_one_block():
    w = BitWord.zeros(24 * 10)
    target = _Blocks(10, 24)
    for seed in range(20):
        pos = corruption_positions(w, CorruptionSpec(12, "targeted-block", seed), target)
        assert len(pos) == 12
        assert len(set(pos // 24)) == 1


@settings(max_examples=50)
@given(hst.integers(1, 400), hst.integers(0, 2**32), hst.sampled_from(["uniform-random", "targeted-block"]))
def test_corrupt_flips_exactly_budget(budget, seed, strategy):
    w = BitWord.zeros(400)
    out = corrupt(w, CorruptionSpec(budget, strategy, seed), _Blocks(20, 20))
    assert hamming_distance(w, out) == budget


def test_probe_view_counts_distinct_positions():
    w = BitWord.from_str("1100110011")
    v = ProbeView(w)
    v.read(0)
    v.read(0)
    v.read_range(2, 6)
    sub = v.window(4, 6)
    sub.read(0)  # position 4, already counted
    sub.read(5)  # position 9
    assert v.probes == 6
    assert sub.read_range(0, 2).tolist() == [1, 1]


def test_probe_view_out_of_range():
    with pytest.raises(IndexError):
        ProbeView(BitWord.zeros(4)).read(4)


def test_random_source_spawn_is_deterministic():
    a, b = RandomSource(5).spawn(1, 2), RandomSource(5).spawn(1, 2)
    assert a.integers(0, 1000, 10).tolist() == b.integers(0, 1000, 10).tolist()
    assert RandomSource(5).spawn(1).seed != RandomSource(5).spawn(2).seed


def test_majority_vote():
    assert majority_vote([1, 1, 0]) == 1
    assert majority_vote([1, BOTTOM, BOTTOM]) is BOTTOM
    assert majority_vote([1, 0]) is BOTTOM


def test_contract_validation():
    DsContract(t=1, delta=0.1, epsilon=0.1, lam=0.0, length=8)
    with pytest.raises(ValueError):
        DsContract(t=0, delta=0.1, epsilon=0.1, lam=0.0, length=8)
    with pytest.raises(ValueError):
        DsContract(t=1, delta=0.1, epsilon=0.7, lam=0.0, length=8)


@given(bit_lists, hst.dictionaries(hst.text("abcxyz_.", min_size=1, max_size=8),
                                   hst.text("0123456789,", max_size=12), max_size=5))
def test_container_round_trip(bits, meta):
    w = BitWord.from_bits(bits)
    kind, back_meta, back = load_bytes(dump_bytes(KIND_RAW, meta, w))
    assert kind == KIND_RAW and back == w
    assert back_meta == {k: str(v) for k, v in meta.items()}


def test_container_file_round_trip(tmp_path):
    w = BitWord.from_str("101")
    write_container(tmp_path / "x.ecds", KIND_RAW, {"a": 1}, w)
    assert read_container(tmp_path / "x.ecds") == (KIND_RAW, {"a": "1"}, w)


def test_container_rejects_bad_magic_and_version():
    data = dump_bytes(KIND_RAW, {}, BitWord.from_str("1"))
    with pytest.raises(ContainerError, match="magic"):
        load_bytes(b"XXXX" + data[4:])
    with pytest.raises(ContainerError, match="version"):
        load_bytes(data[:4] + bytes([9]) + data[5:])
    with pytest.raises(ContainerError):
        load_bytes(data[:-1])
