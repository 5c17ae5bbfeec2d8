"""Multi-unit payment books built from stacked marker instances."""

import pytest

from lockstep.payments import Bank
from lockstep.simnet import ConfigFault, seeded_rng


def _spread(N, V):
    initial = [0] * N
    for v in range(V):
        initial[v % N] += 1
    return initial


def _drive(bank, rounds, seed):
    rng = seeded_rng(seed, 11)
    for _ in range(rounds):
        plan = {}
        for payer, balance in bank.balances().items():
            if balance > 0:
                plan[payer] = int(rng.integers(bank.N))
        bank.run_round(plan)


@pytest.mark.parametrize("family", ["quorum", "cycle"])
def test_honest_runs_pass_every_audit(family):
    N, f, V = 6, 1, 3
    bank = Bank(N, f, _spread(N, V), family=family)
    _drive(bank, 5, seed=3)
    assert bank.audit() == []


@pytest.mark.parametrize("family", ["quorum", "cycle"])
def test_supply_is_exact_without_corruption(family):
    bank = Bank(5, 1, _spread(5, 3), family=family)
    _drive(bank, 4, seed=9)
    for row in bank.history:
        assert sum(row.balances_after.values()) == bank.supply


def test_funded_processes_spend_every_round():
    bank = Bank(6, 1, _spread(6, 2), family="quorum")
    bank.run_round({})  # nobody asked to pay: funded holders self transfer
    row = bank.history[0]
    for n, before in row.balances_before.items():
        if before > 0:
            assert row.inputs.get(n) == n
    assert bank.audit() == []


def test_payment_credits_the_target_next_round_state():
    bank = Bank(6, 1, _spread(6, 1), family="quorum")
    assert bank.balances()[0] == 1
    bank.run_round({0: 4})
    assert bank.balances()[4] == 1
    assert bank.balances()[0] == 0
    assert bank.audit() == []


def test_units_move_independently():
    bank = Bank(6, 1, _spread(6, 2), family="quorum")
    # unit 0 sits at process 0, unit 1 at process 1; opposite directions
    bank.run_round({0: 5, 1: 2})
    assert bank.balances() == {0: 0, 1: 0, 2: 1, 3: 0, 4: 0, 5: 1}
    assert bank.audit() == []


def test_book_export_header():
    bank = Bank(4, 1, _spread(4, 1), family="quorum")
    bank.run_round({})
    header = bank.to_csv().splitlines()[0]
    assert header == ("round,process,balance_before,paid_to,"
                      "credits,balance_after")


def test_bad_initial_allocation_is_refused():
    with pytest.raises(ConfigFault):
        Bank(4, 1, [1, -1, 0, 1], family="quorum")
    with pytest.raises(ConfigFault):
        Bank(4, 1, [1, 1], family="quorum")
    with pytest.raises(ConfigFault):
        Bank(4, 1, [1, 0, 0, 0], family="marble")


def test_silent_corrupted_holder_cannot_break_conservation():
    # process 2 holds a unit and never spends; books must stay consistent
    bank = Bank(6, 1, _spread(6, 3), corrupted=frozenset({2}),
                family="quorum")
    _drive(bank, 4, seed=5)
    assert bank.audit() == []
    for row in bank.history:
        assert sum(row.balances_after.values()) <= bank.supply
