"""Broadcast and the agreement reductions built on top of it."""

import pytest
from hypothesis import given, settings, strategies as st

from lockstep.consensus import (
    audit_extractions,
    bb_from_ba_steps,
    ds_all_honest_messages,
    ds_message_bound,
    ds_signature_floor,
    majority_ba_steps,
    run_bb_from_ba,
    run_dolev_strong,
    run_majority_ba,
    run_turpin_coan,
    turpin_coan_steps,
)
from lockstep.simnet import ConfigFault


def test_all_honest_broadcast_decides_leader_value():
    for N in (4, 7, 10):
        for f in (1, 2):
            for value in (0, 1):
                run = run_dolev_strong(N, f, value)
                assert set(run.decisions.values()) == {value}
                assert not any(run.sender_fault.values())
                assert audit_extractions(run)


def test_all_honest_message_count_is_exact():
    for N in range(4, 13):
        for f in range(1, 4):
            if f + 2 > N:
                continue
            run = run_dolev_strong(N, f, 1)
            msgs = run.net.metrics.messages()
            assert msgs == ds_all_honest_messages(N, f)
            assert msgs <= ds_message_bound(N, f)
            assert run.net.metrics.signatures() >= ds_signature_floor(N, f)


def test_broadcast_finishes_by_the_deadline():
    run = run_dolev_strong(6, 2, 0)
    # loop phase ends at step f + 2; nothing may be sent at it or later
    assert run.net.now <= 2 + 3
    assert all(e.step < 2 + 2 for e in run.net.transcript.events)


def test_silent_corrupted_leader_yields_sender_fault():
    run = run_dolev_strong(5, 1, None, corrupted=frozenset({0}))
    assert set(run.decisions.values()) == {0}
    assert all(run.sender_fault[n] for n in run.decisions)


def test_leader_value_required_for_honest_leader():
    with pytest.raises(ConfigFault):
        run_dolev_strong(4, 1, None)


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=4, max_value=8), st.integers(min_value=0, max_value=1))
def test_broadcast_validity_property(N, value):
    run = run_dolev_strong(N, 1, value)
    assert set(run.decisions.values()) == {value}


def test_majority_agreement_is_consistent():
    for bits in ({n: 1 for n in range(5)},
                 {n: 0 for n in range(5)},
                 {0: 1, 1: 1, 2: 1, 3: 0, 4: 0}):
        run = run_majority_ba(5, 1, bits)
        decided = set(run.decisions.values())
        assert len(decided) == 1
        if len(set(bits.values())) == 1:
            assert decided == set(bits.values())


def test_value_agreement_preserves_unanimity():
    for value in (0, 3, 7):
        run = run_turpin_coan(7, 2, {n: value for n in range(7)})
        assert set(run.decisions.values()) == {value}


def test_value_agreement_survives_total_perplexity():
    # a three way split can leave every process claiming confusion; the
    # alert path must still decide without a fallback poll
    run = run_turpin_coan(4, 1, {0: 0, 1: 1, 2: 2, 3: 0})
    assert len(set(run.decisions.values())) == 1


def test_value_agreement_overhead_over_binary_agreement():
    for N, f in ((4, 1), (7, 2), (10, 3)):
        ba = run_majority_ba(N, f, {n: 1 for n in range(N)})
        base = ba.net.metrics.messages()
        assert turpin_coan_steps(f) == majority_ba_steps(f) + 2
        for values in ({n: 0 for n in range(N)}, {n: n % 3 for n in range(N)}):
            tc = run_turpin_coan(N, f, values)
            assert tc.net.metrics.messages() - base <= 2 * N * N


def test_broadcast_from_agreement_overhead():
    for N, f in ((4, 1), (7, 2), (10, 3)):
        tc = run_turpin_coan(N, f, {n: 1 for n in range(N)})
        bb = run_bb_from_ba(N, f, 1)
        assert set(bb.decisions.values()) == {1}
        assert bb_from_ba_steps(f) == turpin_coan_steps(f) + 1
        assert bb.net.metrics.messages() - tc.net.metrics.messages() <= N
