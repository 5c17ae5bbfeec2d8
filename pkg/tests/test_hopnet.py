"""Cycle hopping: routing graph, macro payments, dispute walkback."""

import pytest
from hypothesis import given, settings, strategies as st

from lockstep.hopnet import (
    CHEAT_DENY,
    CHEAT_FORGE,
    CHEAT_KEEP,
    CheatPlan,
    CycleSet,
    HopNetwork,
    TRACE_PAID,
    gen_binary_search_pair,
    gen_random_cycles,
    graph_diameter,
    hop_experiment,
    load_cycles,
    save_cycles,
    shortest_hop_path,
)
from lockstep.simnet import ConfigFault


def test_random_cycles_are_permutations():
    cycleset = gen_random_cycles(10, 2, seed=3)
    assert len(cycleset.cycles) == 4  # K families, forward and reverse each
    for cycle in cycleset.cycles:
        assert sorted(cycle) == list(range(10))


def test_cycle_file_round_trip(tmp_path):
    cycleset = gen_random_cycles(8, 2, seed=1)
    path = tmp_path / "cycles.txt"
    save_cycles(str(path), cycleset)
    assert load_cycles(str(path)).cycles == cycleset.cycles


def test_degenerate_cycle_is_refused():
    with pytest.raises(ConfigFault):
        CycleSet(4, ((0, 1, 2, 2),))


def test_route_cost_accounting():
    net = HopNetwork(gen_random_cycles(16, 2, seed=2))
    graph = net.graph()
    path = shortest_hop_path(graph, 0, 9)
    assert path.vertices[0][1] == 0 and path.vertices[-1][1] == 9
    assert path.length == len(path.vertices) - 1
    assert path.messages == 2 * path.length + path.hops
    assert sum(steps for _, _, _, steps in path.legs) + path.hops == path.length


@settings(max_examples=20, deadline=None)
@given(st.integers(min_value=0, max_value=999))
def test_directed_route_within_twice_undirected(seed):
    samples = hop_experiment(24, 2, seed, pairs=6)
    for s in samples:
        assert s.distance <= 2 * s.undirected + s.hops


def test_binary_search_pair_reaches_every_leg_count():
    net = HopNetwork(gen_binary_search_pair(32))
    graph = net.graph()
    specimens = {1: (0, 16), 2: (0, 3), 3: (0, 1), 4: (0, 17), 5: (8, 26)}
    for legs, (a, b) in specimens.items():
        assert len(shortest_hop_path(graph, a, b).legs) == legs


def test_binary_search_pair_diameters():
    assert graph_diameter(HopNetwork(gen_binary_search_pair(16)).graph()) == 9
    assert graph_diameter(HopNetwork(gen_binary_search_pair(64)).graph()) == 21


def test_honest_macro_payment_pays_and_conserves():
    net = HopNetwork(gen_random_cycles(12, 2, seed=7))
    before = [sum(net.value(k, n) for k in range(len(net.cycles)))
              for n in range(12)]
    outcome = net.macro_payment(0, 8)
    assert outcome.paid and outcome.payee_claims_paid
    assert outcome.delivered_legs == len(outcome.path.legs)
    after = [sum(net.value(k, n) for k in range(len(net.cycles)))
             for n in range(12)]
    payer, payee = 0, 8
    for n in range(12):
        expected = before[n] + (n == payee) - (n == payer)
        assert after[n] == expected


def test_promises_cover_every_intermediary():
    net = HopNetwork(gen_random_cycles(12, 2, seed=7))
    outcome = net.macro_payment(1, 6)
    promised = {p.signer for p in outcome.promises}
    assert promised == set(outcome.path.intermediaries)


def _cheat_route(seed=5):
    net = HopNetwork(gen_random_cycles(8, 2, seed=seed))
    graph = net.graph()
    best = max(((a, b) for a in range(8) for b in range(8) if a != b),
               key=lambda ab: len(shortest_hop_path(graph, *ab).legs))
    path = shortest_hop_path(graph, *best)
    return net, best, path


def test_walkback_accuses_the_keeper():
    net, (a, b), path = _cheat_route()
    assert len(path.legs) >= 2
    outcome = net.macro_payment(a, b, path=path,
                                cheat=CheatPlan(1, CHEAT_KEEP))
    assert not outcome.paid
    accused, trace = net.dispute_walkback(outcome)
    assert accused == path.intermediaries[0]


def test_walkback_accuses_the_forger():
    net, (a, b), path = _cheat_route()
    outcome = net.macro_payment(a, b, path=path,
                                cheat=CheatPlan(1, CHEAT_FORGE))
    assert not outcome.paid
    accused, trace = net.dispute_walkback(outcome)
    assert accused == path.intermediaries[0]


def test_walkback_exposes_a_lying_payee():
    net, (a, b), path = _cheat_route()
    payee_position = len(path.legs)
    outcome = net.macro_payment(a, b, path=path,
                                cheat=CheatPlan(payee_position, CHEAT_DENY))
    assert outcome.paid and not outcome.payee_claims_paid
    accused, trace = net.dispute_walkback(outcome)
    assert accused == b
    assert trace[0][3] == TRACE_PAID
