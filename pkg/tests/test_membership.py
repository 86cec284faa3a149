import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as hst

from ecds import BOTTOM, CorruptionSpec, ProbeView, RandomSource, corrupt
from ecds.core import BOTTOM_CODE, measure_contract
from ecds.membership import (ExpanderGraph, MemParams, bmrv_encode, build_expander, build_membership,
                             build_partition, claim_audit, induced_tau, mem_decode, mem_diagnose,
                             mem_encode, membership_length)

PARAMS = MemParams(64, 4, scale=10)
MEMBERS = (3, 9, 17, 60)


@pytest.fixture(scope="module")
def st():
    return build_membership(MEMBERS, PARAMS, seed=1)


@pytest.fixture(scope="module")
def clean(st):
    return st.encode_votes(st.votes)


def test_full_constant_sizes():
    p = MemParams(512, 8)
    assert p.conforming
    assert (p.universe, p.degree, p.bins, p.bin_size) == (10240, 134, 134, 8000)
    assert p.right_size == 1065755 and p.padded_size == 1072000
    assert membership_length(p) == 134 * 667 * 24  # ceil(8000 / 12) Golay blocks per bin


def test_params_validation():
    with pytest.raises(ValueError):
        MemParams(10, 11)
    with pytest.raises(ValueError):
        MemParams(10, 2, scale=0)


def test_expander_degree_and_determinism():
    g1, g2 = build_expander(PARAMS, 5), build_expander(PARAMS, 5)
    assert np.array_equal(g1.adjacency, g2.adjacency)
    assert g1.adjacency.shape == (PARAMS.universe, PARAMS.degree)
    assert (np.diff(g1.adjacency, axis=1) > 0).all()
    assert g1.adjacency.max() < PARAMS.right_size


def test_empty_set_all_zero_votes():
    g = build_expander(PARAMS, 2)
    assert not bmrv_encode([], g, PARAMS).any()
    st = build_membership([], PARAMS, seed=2)
    assert not st.encode_votes(st.votes).bits().any()


def test_single_element_collision_free():
    p = MemParams(1, 1)
    d = p.degree
    adj = np.arange(p.universe * d).reshape(p.universe, d)  # pairwise disjoint neighborhoods
    g = ExpanderGraph(adj, p.right_size, 0)
    y = bmrv_encode([0], g, p)
    assert y[:d].all() and not y[d:].any()


def test_single_element_unique_neighbors(st):
    g = build_expander(PARAMS, 9)
    y = bmrv_encode([5], g, PARAMS)
    deg = np.bincount(g.adjacency.ravel(), minlength=PARAMS.right_size)
    only_mine = [j for j in g.adjacency[5] if deg[j] == 1]
    assert all(y[j] == 1 for j in only_mine)


def test_vote_agreement_gate(st):
    x = np.isin(np.arange(PARAMS.universe), MEMBERS)
    agree = (st.votes[st.graph.adjacency] == x[:, None]).sum(axis=1)
    assert agree.min() >= PARAMS.agreement_needed


def test_bmrv_rejects_bad_sets():
    g = build_expander(PARAMS, 2)
    with pytest.raises(ValueError):
        bmrv_encode([1, 2, 3, 4, 5], g, PARAMS)
    with pytest.raises(ValueError):
        bmrv_encode([64], g, PARAMS)


def test_partition_audit_and_determinism(st):
    p1 = build_partition(st.graph, PARAMS, 4)
    p2 = build_partition(st.graph, PARAMS, 4)
    assert np.array_equal(p1.bins, p2.bins)
    assert np.array_equal(np.sort(p1.bins.ravel()), np.arange(PARAMS.padded_size))
    assert (4 * (st.unique >= 0).sum(axis=1) >= PARAMS.bins).all()


def test_unique_table_by_direct_count(st):
    for i in range(0, PARAMS.n, 7):
        nb = st.graph.adjacency[i]
        for k in range(PARAMS.bins):
            inside = [int(j) for j in nb if st.partition.bin_of[j] == k]
            assert st.unique[i, k] == (inside[0] if len(inside) == 1 else -1)


def test_build_is_deterministic(clean):
    again = build_membership(MEMBERS, PARAMS, seed=1)
    assert again.encode_votes(again.votes) == clean


def test_length_closed_form(st, clean):
    assert len(clean) == membership_length(PARAMS) == st.length


def test_zero_noise_decode_all(st, clean):
    rng = RandomSource(3)
    for i in range(PARAMS.n):
        assert mem_decode(ProbeView(clean), i, st, rng.spawn(i)) == int(i in MEMBERS)
    prepared = st.prepare(clean)
    for i in range(PARAMS.n):
        out, _ = st.decode_trials(prepared, i, 50, rng.spawn(100 + i))
        assert (out == int(i in MEMBERS)).all()


def test_scalar_and_batch_agree(st, clean):
    word = corrupt(clean, CorruptionSpec(len(clean) // 50, "uniform-random", 8))
    prepared = st.prepare(word)
    for i in range(0, PARAMS.n, 5):
        for seed in range(5):
            view = ProbeView(word)
            scalar = st.decode(view, i, RandomSource(seed))
            out, probes = st.decode_trials(prepared, i, 1, RandomSource(seed))
            assert (BOTTOM_CODE if scalar is BOTTOM else scalar) == out[0]
            assert view.probes == probes[0]


def test_probes_within_contract(st, clean):
    rep = measure_contract(st, list(range(PARAMS.n)), CorruptionSpec(0), 20, RandomSource(1), clean=clean)
    assert rep.good_fraction == 1.0
    assert rep.max_probes <= st.contract.t


def test_query_out_of_range(st, clean):
    with pytest.raises(IndexError):
        st.decode(ProbeView(clean), PARAMS.n, RandomSource(0))


def test_diagnose_zero_noise(st, clean):
    diag = mem_diagnose(st, clean, clean)
    assert diag.bad_indices.size == 0 and diag.heavy_queries.size == 0
    assert diag.good_queries.tolist() == list(range(PARAMS.n))


@settings(max_examples=30, deadline=None)
@given(hst.integers(0, 2**32))
def test_claim_audit_matches_direct_count(seed):
    g = build_expander(PARAMS, 3)
    rng = np.random.default_rng(seed)
    A = rng.choice(PARAMS.right_size, size=int(rng.integers(0, 400)), replace=False)
    aset = set(int(a) for a in A)
    expected = [i for i in range(PARAMS.n)
                if 10 * sum(int(j) in aset for j in g.adjacency[i]) >= g.degree]
    assert claim_audit(g, PARAMS, A).tolist() == expected


def test_induced_tau_is_tiny():
    assert 0 < induced_tau(MemParams(512, 8), 8.0) < 1e-9


def test_mem_encode_matches_structure(clean):
    assert mem_encode(MEMBERS, PARAMS, seed=1) == clean
