"""Payment rounds built from replicated marking instances.

One unit of currency is one marking instance: whoever holds the mark in
instance k owns that unit.  A process spends by handing over the mark in
one instance it holds, and the recipient's balance grows because one more
of its instances is now marked.  Every process hosts all instances side
by side behind a mux, so a single lockstep network carries the whole
economy and a signature from one instance is meaningless in another.

The :class:`Bank` driver runs the rounds and keeps the book: who held how
much entering each round, which instance each payer spent, and which
credits each recipient collected.  A funded process spends every round;
when the caller names no target the bank books a transfer to the process
itself, which nets out because the spent unit comes straight back as a
self credit.

Audits over the book check four account level guarantees, quantified
over honest processes only:

* conservation: honest holdings never exceed the issued supply and no
  balance goes negative;
* consent: a credit naming an honest sender always traces back to that
  sender actually spending toward the credited recipient;
* recurrence: new balance = old balance + credits, minus one if the
  process spent.  This ties the book to the instance states, so a
  handoff that silently stalls or double lands shows up here;
* delivery: a payment between honest processes lands as a credit in the
  same round.

On top of those the per instance marking rules are replayed for every
instance and round, with the bank supplying which honest payer, if any,
fed that instance.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

from .cyclecoin import (CCProcess, TAG_BASE, cycle_round_steps,
                        record_content)
from .marker import (Marking, QMProcess, QUORUM_STEPS_PER_ROUND,
                     check_marker_round)
from .muxer import MuxHost, nonce_for
from .simnet import (ConfigFault, Network, ScopedOracle, SignatureOracle)

FAMILIES = ("quorum", "cycle")


@dataclass(frozen=True)
class BankRound:
    """Book entry for one round.

    ``inputs`` holds every honest payer that spent this round, self
    transfers included.  ``spent_instance`` names the instance each of
    them used.  ``credits`` lists, per honest recipient, the senders of
    the units it collected this round, duplicates kept.  Balance maps
    cover honest processes only.
    """

    round: int
    inputs: dict[int, int]
    spent_instance: dict[int, int]
    balances_before: dict[int, int]
    balances_after: dict[int, int]
    credits: dict[int, tuple[int, ...]]
    instance_markings: dict[int, tuple[Marking, ...]]


class Bank:
    """Economy of ``sum(initial)`` marking instances over one network.

    ``initial`` gives the opening balance of each process; unit v starts
    with the v-th holder in ascending process order.  ``family`` picks
    the marking machinery, quorum countersigning or signature chains.
    """

    def __init__(self, N: int, f: int, initial: list[int] | tuple[int, ...],
                 corrupted: frozenset[int] = frozenset(), adversary=None,
                 family: str = "quorum",
                 oracle: SignatureOracle | None = None):
        if family not in FAMILIES:
            raise ConfigFault(f"unknown marking family {family!r}")
        if len(initial) != N or any(v < 0 for v in initial):
            raise ConfigFault(f"initial balances must be {N} non-negative values")
        if family == "quorum" and 3 * f + 1 > N:
            raise ConfigFault(f"quorum family needs 3f+1 <= N, got N={N} f={f}")
        if family == "cycle" and f > N - 2:
            raise ConfigFault(f"cycle family needs f <= N-2, got N={N} f={f}")
        self.N = N
        self.f = f
        self.family = family
        self.corrupted = frozenset(corrupted)
        self.honest = frozenset(range(N)) - self.corrupted
        self.initial = tuple(initial)
        self.supply = sum(initial)
        self.holders0 = tuple(n for n in range(N) for _ in range(initial[n]))
        self.nonces = tuple(nonce_for(v) for v in range(self.supply))
        if oracle is None:
            oracle = SignatureOracle(self.corrupted)
        self.oracle = oracle
        if family == "quorum":
            self.steps_per_round = QUORUM_STEPS_PER_ROUND
        else:
            self.steps_per_round = cycle_round_steps(N)
            for v, holder in enumerate(self.holders0):
                if holder not in self.corrupted:
                    ScopedOracle(oracle, self.nonces[v]).sign(
                        holder, record_content((), TAG_BASE))
        self.hosts = [
            MuxHost(n, {self.nonces[v]: self._instance(n, self.holders0[v],
                                                       self.nonces[v])
                        for v in range(self.supply)})
            for n in range(N)
        ]
        self.net = Network(self.hosts, self.corrupted, adversary, oracle)
        self.round_index = 0
        self.history: list[BankRound] = []

    def _instance(self, n: int, holder: int, nonce: bytes):
        scoped = ScopedOracle(self.oracle, nonce)
        if self.family == "quorum":
            return QMProcess(n, self.N, self.f, scoped, genesis_holder=holder)
        return CCProcess(n, self.N, scoped, genesis_holder=holder)

    # -- book keeping --------------------------------------------------------

    def _marked(self, n: int, v: int) -> bool:
        return bool(self.hosts[n].instances[self.nonces[v]].marked)

    def balances(self) -> dict[int, int]:
        """Current balance of every honest process, counted off the
        instance states."""
        return {n: sum(1 for v in range(self.supply) if self._marked(n, v))
                for n in sorted(self.honest)}

    # -- round driver --------------------------------------------------------

    def run_round(self, inputs: dict[int, int] | None = None) -> BankRound:
        """Advance one round.  ``inputs`` maps payers to targets; honest
        payers with a balance and no entry transfer to themselves."""
        given = dict(inputs or {})
        r = self.round_index
        base = r * self.steps_per_round
        self.net.round = r
        before = self.balances()
        for payer, target in given.items():
            if not 0 <= payer < self.N or not 0 <= target < self.N:
                raise ConfigFault(
                    f"round {r}: payment {payer}->{target} out of range")
            if payer in self.honest and before[payer] == 0 and target != payer:
                raise ConfigFault(
                    f"round {r}: process {payer} has no balance to spend")
        effective: dict[int, int] = {}
        spent: dict[int, int] = {}
        for payer in sorted(self.honest):
            if before[payer] == 0:
                continue
            target = given.get(payer, payer)
            v = min(u for u in range(self.supply) if self._marked(payer, u))
            sub = self.hosts[payer].instances[self.nonces[v]]
            sub.pending[r] = target
            self.hosts[payer].wake_instance(self.nonces[v], base)
            effective[payer] = target
            spent[payer] = v
        self.net.run_until(base + self.steps_per_round - 1)
        after = self.balances()
        instance_markings = {
            v: tuple(m for n in sorted(self.honest)
                     for m in self.hosts[n].instances[self.nonces[v]].markings
                     if m.round == r)
            for v in range(self.supply)
        }
        credits = {
            n: tuple(sorted(m.predecessor
                            for ms in instance_markings.values()
                            for m in ms if m.target == n))
            for n in sorted(self.honest)
        }
        row = BankRound(r, effective, spent, before, after, credits,
                        instance_markings)
        self.history.append(row)
        self.round_index += 1
        return row

    # -- audits --------------------------------------------------------------

    def audit_conservation(self) -> list[str]:
        """Honest holdings stay within the issued supply, balances stay
        non-negative, and with nothing corrupted the supply is exact."""
        violations = []
        for row in self.history:
            total = sum(row.balances_after.values())
            if total > self.supply:
                violations.append(
                    f"round {row.round}: honest holdings {total} exceed "
                    f"supply {self.supply}")
            if not self.corrupted and total != self.supply:
                violations.append(
                    f"round {row.round}: supply drifted to {total}, "
                    f"expected {self.supply}")
            for n, v in row.balances_after.items():
                if v < 0:
                    violations.append(
                        f"round {row.round}: negative balance {v} at {n}")
        return violations

    def audit_consent(self) -> list[str]:
        violations = []
        for row in self.history:
            for n, senders in row.credits.items():
                for s in senders:
                    if s in self.honest and row.inputs.get(s) != n:
                        violations.append(
                            f"round {row.round}: {n} credited in the name of "
                            f"honest {s} without a matching spend")
        return violations

    def audit_recurrence(self) -> list[str]:
        violations = []
        for row in self.history:
            for n in sorted(self.honest):
                delta = 1 if row.balances_before[n] > 0 else 0
                expected = (row.balances_before[n]
                            + len(row.credits[n]) - delta)
                if row.balances_after[n] != expected:
                    violations.append(
                        f"round {row.round}: balance of {n} moved "
                        f"{row.balances_before[n]}->{row.balances_after[n]} "
                        f"but {len(row.credits[n])} credits and delta "
                        f"{delta} predict {expected}")
        return violations

    def audit_delivery(self) -> list[str]:
        violations = []
        for row in self.history:
            for payer, target in row.inputs.items():
                if target in self.honest and payer not in row.credits[target]:
                    violations.append(
                        f"round {row.round}: payment {payer}->{target} "
                        f"never credited")
        return violations

    def audit_instances(self) -> list[str]:
        """Replay the per instance marking rules for every round."""
        violations = []
        for row in self.history:
            fed = {v: payer for payer, v in row.spent_instance.items()}
            for v in range(self.supply):
                payer = fed.get(v)
                target = row.inputs[payer] if payer is not None else None
                for text in check_marker_round(
                        row.round, self.honest,
                        list(row.instance_markings[v]),
                        payer, payer is not None, target):
                    violations.append(f"instance {v}: {text}")
        return violations

    def audit(self) -> list[str]:
        return (self.audit_conservation() + self.audit_consent()
                + self.audit_recurrence() + self.audit_delivery()
                + self.audit_instances())

    # -- export --------------------------------------------------------------

    def to_csv(self) -> str:
        """The book as CSV, one row per honest process and round."""
        out = io.StringIO()
        writer = csv.writer(out)
        writer.writerow(["round", "process", "balance_before", "paid_to",
                         "credits", "balance_after"])
        for row in self.history:
            for n in sorted(self.honest):
                writer.writerow([
                    row.round, n, row.balances_before[n],
                    row.inputs.get(n, ""),
                    ";".join(str(s) for s in row.credits[n]),
                    row.balances_after[n],
                ])
        return out.getvalue()
