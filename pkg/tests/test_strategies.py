import itertools
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from difight.network import Network, generate_connected_network
from difight.strategies import (SelectionStrategy, expected_comms, message_length,
                                participation_probabilities, participation_probability,
                                sample_group, sample_groups)


def path(L):
    return Network.from_edges(L, [(i, i + 1) for i in range(L - 1)])


def star(L):
    return Network.from_edges(L, [(0, i) for i in range(1, L)])


def test_kind_parsing_and_validation():
    assert SelectionStrategy("rgnp", 2).kind == "RGNP"
    assert SelectionStrategy("RP", 5).r == 1
    with pytest.raises(ValueError):
        SelectionStrategy("RX")
    with pytest.raises(ValueError):
        SelectionStrategy("RGP", 11).validate(10)
    with pytest.raises(ValueError):
        SelectionStrategy("RP", weights=(0.5, 0.6))


def test_strategy_json_round_trip():
    s = SelectionStrategy("RGNP", 3)
    assert SelectionStrategy.from_dict(s.to_dict()) == s
    assert s.label == "RGNP_3"


def test_rp_frequencies_are_uniform(rng):
    net = generate_connected_network(10, seed=1)
    mask = sample_groups(SelectionStrategy("RP"), net, rng, 100_000)
    assert (mask.sum(axis=1) == 1).all()
    np.testing.assert_allclose(mask.mean(axis=0), 0.1, atol=0.01)


def test_rnp_on_star(rng):
    net = star(5)
    pi = participation_probabilities(SelectionStrategy("RNP"), net)
    np.testing.assert_allclose(pi, [1.0, 0.4, 0.4, 0.4, 0.4])
    mask = sample_groups(SelectionStrategy("RNP"), net, rng, 100_000)
    np.testing.assert_allclose(mask.mean(axis=0), pi, atol=0.01)


def test_rgp_groups_have_r_distinct_members(rng):
    net = generate_connected_network(10, seed=2)
    mask = sample_groups(SelectionStrategy("RGP", 2), net, rng, 100_000)
    assert (mask.sum(axis=1) == 2).all()
    np.testing.assert_allclose(mask.mean(axis=0), 0.2, atol=0.01)
    # every pair is equally likely
    pairs = [tuple(np.flatnonzero(m)) for m in mask[:45_000]]
    counts = np.array([pairs.count(p) for p in itertools.combinations(range(10), 2)])
    assert counts.min() > 800 and counts.max() < 1200


def test_rgnp_matches_pair_enumeration():
    net = path(4)
    s = SelectionStrategy("RGNP", 2)
    closed = net.adjacency.astype(bool) | np.eye(4, dtype=bool)
    oracle = np.zeros(4)
    for g in itertools.combinations(range(4), 2):
        oracle += closed[list(g)].any(axis=0)
    oracle /= comb(4, 2)
    np.testing.assert_allclose(participation_probabilities(s, net), oracle, atol=1e-15)
    # path end: outside its closed neighbourhood there are 2 nodes, 1 pair of 6 misses it
    assert participation_probability(s, net, 0) == pytest.approx(5 / 6)


def test_rgnp_when_neighbourhood_leaves_fewer_than_r_outside():
    net = star(6)
    pi = participation_probabilities(SelectionStrategy("RGNP", 3), net)
    assert pi[0] == 1.0
    assert pi[1] == pytest.approx(1 - comb(4, 3) / comb(6, 3))


@pytest.mark.parametrize("L, r", [(6, 2), (8, 3), (10, 4)])
def test_rgp_participation_sums_to_r(L, r):
    pi = participation_probabilities(SelectionStrategy("RGP", r), path(L))
    assert pi.sum() == pytest.approx(r)


def test_weighted_rp_and_rnp():
    net = path(3)
    w = (0.5, 0.25, 0.25)
    np.testing.assert_allclose(participation_probabilities(SelectionStrategy("RP", weights=w),
                                                           net), w)
    np.testing.assert_allclose(participation_probabilities(SelectionStrategy("RNP", weights=w),
                                                           net), [0.75, 1.0, 0.5])


def test_weighted_groups_sum_to_r():
    net = path(5)
    w = np.arange(1, comb(5, 2) + 1, dtype=float)
    s = SelectionStrategy("RGP", 2, tuple(w / w.sum()))
    assert participation_probabilities(s, net).sum() == pytest.approx(2)


def test_sample_group_is_sorted_tuple(rng):
    G = sample_group(SelectionStrategy("RGNP", 2), path(8), rng)
    assert isinstance(G, tuple) and list(G) == sorted(G)


def test_message_lengths():
    assert message_length("DiFIGHT", 10, 200) == 220
    assert message_length("MoDiFIGHT", 10, 200) == 20
    assert message_length("ConsensusIHT", 10, 200) == 20
    assert message_length("NonCooperativeIHT", 10, 200) == 0


def test_expected_comms_deterministic():
    net = path(3)
    prof = expected_comms(None, net, "DiFIGHT", 10, 200)
    np.testing.assert_array_equal(prof.receive, [220, 440, 220])
    np.testing.assert_array_equal(prof.transmit, [220, 440, 220])


def test_expected_comms_randomized_examples():
    net = Network.from_edges(4, [(0, i) for i in range(1, 4)])
    rp = expected_comms(SelectionStrategy("RP"), net, "DiFIGHT", 10, 200)
    # hub: degree 3 so R = 220 * 3 / 4; each leaf hears the hub a quarter of the time
    assert rp.receive[0] == pytest.approx(165)
    assert rp.transmit[1] == pytest.approx(55)
    mo = expected_comms(SelectionStrategy("RGP", 2), net, "MoDiFIGHT", 10, 200)
    assert mo.receive[0] == pytest.approx(0.5 * 3 * 20)
    rnp = expected_comms(SelectionStrategy("RNP"), net, "DiFIGHT", 10, 200)
    assert rnp.transmit_alternative is not None


@settings(max_examples=30, deadline=None)
@given(L=st.integers(3, 9), r=st.integers(1, 3), seed=st.integers(0, 10_000),
       kind=st.sampled_from(["RGP", "RGNP"]))
def test_uniform_formula_matches_enumeration(L, r, seed, kind):
    net = generate_connected_network(L, seed=seed)
    uniform = SelectionStrategy(kind, r)
    n = comb(L, r)
    explicit = SelectionStrategy(kind, r, tuple([1.0 / n] * n))
    np.testing.assert_allclose(participation_probabilities(uniform, net),
                               participation_probabilities(explicit, net), atol=1e-12)
