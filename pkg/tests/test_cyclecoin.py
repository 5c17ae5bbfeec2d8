"""Chain marker: locality of payment cost, chain codec, payment claims."""

import pytest
from hypothesis import given, strategies as st

from lockstep.cyclecoin import (
    CycleCoinSystem,
    PoRSystem,
    Record,
    TAG_BASE,
    TAG_PATH,
    TAG_X,
    TAG_Y,
    append_record,
    chain_signatures_ok,
    cycle_distance,
    cycle_path,
    cycle_payment_messages,
    decode_records,
    encode_records,
    measure_cycle_z,
    verify_payment_claim,
)
from lockstep.simnet import CodecError, SignatureOracle

record_lists = st.lists(
    st.builds(Record,
              st.sampled_from((TAG_BASE, TAG_PATH, TAG_X, TAG_Y)),
              st.integers(min_value=0, max_value=31)),
    max_size=6).map(tuple)


@given(record_lists)
def test_chain_codec_round_trip(records):
    assert decode_records(encode_records(records)) == records


def test_chain_codec_rejects_junk():
    with pytest.raises(CodecError):
        decode_records(b"\xff" * 7)


def test_signed_chains_verify_prefix_by_prefix():
    oracle = SignatureOracle()
    chain = ()
    for signer, tag in ((0, TAG_BASE), (0, TAG_X), (1, TAG_PATH), (2, TAG_Y)):
        chain = append_record(oracle, signer, chain, tag)
    assert chain_signatures_ok(chain, oracle)
    # moving a record out of its prefix context breaks it
    assert not chain_signatures_ok(chain[:2] + chain[3:], oracle)


def test_cycle_path_skips_deleted_positions():
    assert cycle_path(1, 4, 6) == [1, 2, 3]
    assert cycle_path(1, 4, 6, frozenset({2})) == [1, 3]
    assert cycle_path(4, 1, 6) == [4, 5, 0]


def test_payment_cost_depends_only_on_distance():
    for N in (4, 7, 10):
        costs = measure_cycle_z(N)
        expected = [cycle_payment_messages(cycle_distance(0, t, N))
                    for t in range(N)]
        assert costs == expected
        assert costs[0] == 0  # self payment
        assert costs[1 % N] <= 1  # a neighbour hears one message


def test_payment_message_formula():
    assert cycle_payment_messages(0) == 0
    assert cycle_payment_messages(1) == 1
    for d in range(2, 9):
        assert cycle_payment_messages(d) == 2 * (d - 1) + 1


def test_sequential_payments_never_touch_the_last_process():
    N = 8
    system = CycleCoinSystem(N)
    for payer in range(N - 2):
        markings = system.run_round({payer: payer + 1})
        assert [(m.target, m.predecessor) for m in markings] == \
            [(payer + 1, payer)]
    quiet = N - 1
    heard = [e for e in system.net.transcript.events if e.recipient == quiet]
    assert heard == []


def test_self_payment_is_free_and_keeps_the_marker():
    system = CycleCoinSystem(6)
    system.run_round({0: 0})
    assert system.net.metrics.messages() == 0
    assert system.procs[0].marked


def test_marker_lands_across_the_wrap():
    system = CycleCoinSystem(6)
    system.run_round({0: 4})
    markings = system.run_round({4: 2})
    assert [(m.target, m.predecessor) for m in markings] == [(2, 4)]


def test_payment_claim_verdicts():
    system = CycleCoinSystem(6)
    system.run_round({0: 3})
    target = system.procs[3]
    verdict, conflict = verify_payment_claim(target, target.chain, 0)
    assert verdict == "paid"
    assert conflict is None
    verdict, _ = verify_payment_claim(target, (), 0)
    assert verdict == "invalid"


def test_response_enforcement_is_free_when_honest():
    plain = CycleCoinSystem(7)
    plain.run_round({0: 4})
    backed = PoRSystem(7, 2)
    backed.run_round({0: 4})
    assert backed.net.metrics.messages() == plain.net.metrics.messages()
    assert [p.deleted for p in backed.procs] == [frozenset()] * 7
