"""The attack gallery.

Every protocol in this package claims safety against f corrupted
processes, and every claim here gets a concrete enemy.  The gallery has
two kinds of entries.  Attack-must-fail entries drive a real protocol
with a hostile coalition and expect the round checkers to stay silent.
Attack-must-succeed entries drive a deliberately weakened protocol with
the same machinery and expect the planted violation to surface, which is
what keeps the checkers themselves honest.

The flagship entry is the split double spend.  The coalition runs two
copies of the honest protocol side by side, one imagining a payment to
each target, and sorts incoming honest traffic between the copies by
which reference execution the sender belongs to.  Whether that attack
can work is decided entirely by how the honest contact sets of the two
payments overlap, so the gallery first measures those sets on honest
reference runs and then replays them against the coalition.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations, product
from typing import Callable, Iterator

import numpy as np

from lockstep.cyclecoin import (
    KIND_CHAIN,
    KIND_QUERY,
    Record,
    TAG_BASE,
    TAG_PATH,
    TAG_X,
    TAG_Y,
    CCProcess,
    CycleCoinSystem,
    PoRSystem,
    append_record,
    cycle_round_steps,
    record_content,
    verify_payment_claim,
    wire,
)
from lockstep.consensus import run_dolev_strong
from lockstep.hopnet import (
    CheatPlan,
    HopNetwork,
    CHEAT_DENY,
    CHEAT_FORGE,
    CHEAT_KEEP,
    gen_binary_search_pair,
    gen_random_cycles,
    shortest_hop_path,
)
from lockstep.marker import (
    Marking,
    QMProcess,
    QuorumMarkerSystem,
    check_marker_round,
    default_broadcasters,
    encode_proof,
    intent_content,
    receipt_content,
)
from lockstep.muxer import nonce_for
from lockstep.payments import Bank
from lockstep.simnet import (
    Adversary,
    ConfigFault,
    Delivery,
    Network,
    Process,
    ScopedOracle,
    Send,
    SignatureOracle,
    SignedMessage,
    enc_int,
    enc_str,
    seeded_rng,
    tag_payload,
)

FAMILIES = ("quorum", "cycle", "strawman")


@dataclass(frozen=True)
class AttackResult:
    """One gallery entry after execution."""

    name: str
    protocol: str
    N: int
    f: int
    violations: tuple[str, ...]
    expect_violation: bool = False
    details: str = ""

    @property
    def ok(self) -> bool:
        return bool(self.violations) == self.expect_violation


def gallery_to_csv(results: list[AttackResult]) -> str:
    lines = ["attack,protocol,N,f,violations,expected,ok"]
    for r in results:
        lines.append(f"{r.name},{r.protocol},{r.N},{r.f},{len(r.violations)},"
                     f"{int(r.expect_violation)},{int(r.ok)}")
    return "\n".join(lines) + "\n"


class CoalitionOracle:
    """Oracle view that forces every signature through the adversary path.

    Honest protocol code simulated on behalf of corrupted ids calls
    ``sign`` like it always does; routing that call through
    ``adversary_sign`` keeps the forgery rule mechanical even inside a
    simulation, because signing for an honest id still raises.
    """

    def __init__(self, base: SignatureOracle):
        self._base = base

    @property
    def corrupted(self) -> frozenset[int]:
        return self._base.corrupted

    def sign(self, signer: int, content: bytes) -> None:
        self._base.adversary_sign(signer, content)

    def adversary_sign(self, signer: int, content: bytes) -> None:
        self._base.adversary_sign(signer, content)

    def verify(self, signer: int, content: bytes) -> bool:
        return self._base.verify(signer, content)


# ---------------------------------------------------------------------------
# broadcast attacks


def _ds_audit(run, leader_value: int | None, corrupted: frozenset[int],
              leader: int) -> list[str]:
    """Consistency, validity and termination of one broadcast run."""
    violations = []
    outcomes = {n: (run.decisions[n], run.sender_fault[n])
                for n in run.decisions}
    if len(set(outcomes.values())) > 1:
        violations.append(f"inconsistent decisions {outcomes}")
    if leader not in corrupted:
        for n, (value, fault) in outcomes.items():
            if fault or value != leader_value:
                violations.append(
                    f"process {n} decided {value} fault={fault} "
                    f"against honest leader value {leader_value}")
    for n, (value, fault) in outcomes.items():
        if value is None:
            violations.append(f"process {n} failed to decide")
    return violations


class ScriptedDSAdversary(Adversary):
    """Plays a fixed table of per step, per recipient actions.

    Action 0 sends nothing.  Action k sends the coalition's best chain
    for value k-1: anchored at the coalition leader's own signature when
    the leader is corrupted, otherwise grown from an observed leader
    chain, and extended by coalition signers toward the length that will
    be proper on delivery.  Chains that cannot reach proper length are
    sent anyway; rejecting them is part of what the run exercises.
    """

    def __init__(self, corrupted: frozenset[int], leader: int,
                 script: dict[tuple[int, int], int],
                 values: tuple[bytes, ...] = (enc_int(0), enc_int(1))):
        self.corrupted = frozenset(corrupted)
        self.leader = leader
        self.script = script
        self.values = values

    def _chain(self, value: bytes, want_len: int, net: Network) -> SignedMessage | None:
        if self.leader in self.corrupted:
            sm = SignedMessage(value).signed_by(net.oracle, self.leader,
                                                adversarial=True)
        else:
            sm = None
            for obs in net.observed:
                try:
                    cand = SignedMessage.from_bytes(obs.payload)
                except Exception:
                    continue
                if cand.payload != value or not cand.signers:
                    continue
                if cand.signers[0] != self.leader:
                    continue
                if len(set(cand.signers)) != len(cand.signers):
                    continue
                if not cand.verify_stack(net.oracle):
                    continue
                if sm is None or len(cand.stack) > len(sm.stack):
                    sm = cand
        if sm is None:
            return None
        for z in sorted(self.corrupted):
            if len(sm.stack) >= want_len:
                break
            if z not in sm.signers:
                sm = sm.signed_by(net.oracle, z, adversarial=True)
        return sm

    def act(self, t: int, net: Network) -> list[tuple[int, Send]]:
        out = []
        for (step, recipient), action in sorted(self.script.items()):
            if step != t or action == 0:
                continue
            sm = self._chain(self.values[action - 1], t + 1, net)
            if sm is None:
                continue
            sender = sm.signers[-1] if sm.signers[-1] in self.corrupted \
                else min(self.corrupted)
            out.append((sender, Send(recipient, sm.to_bytes(), len(sm.stack))))
        return out


@dataclass
class DSCase:
    """One cell of the exhaustive broadcast attack enumeration."""

    N: int
    f: int
    corrupted: frozenset[int]
    leader_value: int | None
    script: dict[tuple[int, int], int]


def enumerate_ds_cases(N: int, f: int, *, leader: int = 0) -> Iterator[DSCase]:
    """Every scripted coalition at this size.

    Single corrupted sets are enumerated for f=1 and pairs for f=2.  The
    action table covers each useful (send step, honest recipient) slot
    with one of send-nothing, send value 0, send value 1.  A corrupted
    leader can act from step 0; anyone else has nothing forgeable before
    it hears the leader, so its slots start at step 1.
    """
    for members in combinations(range(N), f):
        corrupted = frozenset(members)
        first = 0 if leader in corrupted else 1
        slots = [(t, r) for t in range(first, f + 2)
                 for r in sorted(set(range(N)) - corrupted)]
        inputs = (None,) if leader in corrupted else (0, 1)
        for leader_value in inputs:
            for actions in product(range(3), repeat=len(slots)):
                script = {slot: a for slot, a in zip(slots, actions) if a}
                yield DSCase(N, f, corrupted, leader_value, script)


def run_ds_case(case: DSCase, *, leader: int = 0) -> AttackResult:
    adversary = ScriptedDSAdversary(case.corrupted, leader, case.script)
    run = run_dolev_strong(case.N, case.f, case.leader_value, leader=leader,
                           corrupted=case.corrupted, adversary=adversary)
    violations = _ds_audit(run, case.leader_value, case.corrupted, leader)
    return AttackResult("broadcast-scripted", "broadcast", case.N, case.f,
                        tuple(violations),
                        details=f"corrupted={sorted(case.corrupted)}")


class RandomDSAdversary(Adversary):
    """Seeded mixture of silence, equivocation, junk and replays.

    Per step and honest recipient: 40% nothing, 20% best chain for value
    0, 20% for value 1, 10% both, 5% unparseable junk, 5% a verbatim
    replay of something observed (stale length on arrival, so honest
    processes must reject it).
    """

    def __init__(self, corrupted: frozenset[int], leader: int, seed: int):
        self.corrupted = frozenset(corrupted)
        self.leader = leader
        self.rng = seeded_rng(seed, 11)
        self._scripted = ScriptedDSAdversary(corrupted, leader, {})

    def act(self, t: int, net: Network) -> list[tuple[int, Send]]:
        out = []
        sender_pool = sorted(self.corrupted)
        for recipient in range(net.N):
            if recipient in self.corrupted:
                continue
            u = self.rng.random()
            sender = sender_pool[int(self.rng.integers(len(sender_pool)))]
            if u < 0.40:
                continue
            if u < 0.90:
                picks = ([0] if u < 0.60 else [1] if u < 0.80 else [0, 1])
                for k in picks:
                    sm = self._scripted._chain(enc_int(k), t + 1, net)
                    if sm is not None:
                        out.append((sender,
                                    Send(recipient, sm.to_bytes(), len(sm.stack))))
            elif u < 0.95:
                junk = bytes(self.rng.integers(0, 256, size=9, dtype=np.uint8))
                out.append((sender, Send(recipient, junk)))
            elif net.observed:
                pick = net.observed[int(self.rng.integers(len(net.observed)))]
                out.append((sender, Send(recipient, pick.payload)))
        return out


def random_ds_case(seed: int, *, N: int = 6, f: int = 2,
                   leader: int = 0) -> AttackResult:
    """One seeded random broadcast attack; corrupted set and leader input
    are drawn from the seed as well."""
    rng = seeded_rng(seed, 7)
    members = rng.choice(N, size=f, replace=False)
    corrupted = frozenset(int(m) for m in members)
    leader_value = None if leader in corrupted else int(rng.integers(2))
    adversary = RandomDSAdversary(corrupted, leader, seed)
    run = run_dolev_strong(N, f, leader_value, leader=leader,
                           corrupted=corrupted, adversary=adversary)
    violations = _ds_audit(run, leader_value, corrupted, leader)
    return AttackResult("broadcast-random", "broadcast", N, f,
                        tuple(violations), details=f"seed={seed}")


# ---------------------------------------------------------------------------
# coalition simulations


class _WorldNet:
    """Wake registry standing in for the network inside a simulation."""

    def __init__(self, world: "SimWorld"):
        self._world = world

    def wake(self, pid: int, step: int) -> None:
        self._world.wakes.setdefault(pid, set()).add(step)


class SimWorld:
    """One imagined execution the coalition runs internally.

    ``sims`` are honest protocol instances for the corrupted ids,
    ``feed`` is the set of honest senders whose real messages belong to
    this execution.  Messages between coalition members stay inside the
    world; only traffic toward honest processes reaches the real wire.
    """

    def __init__(self, name: str, sims: dict[int, Process],
                 feed: frozenset[int]):
        self.name = name
        self.sims = sims
        self.feed = frozenset(feed)
        self.wakes: dict[int, set[int]] = {n: set() for n in sims}
        self.queues: dict[int, dict[int, list[Delivery]]] = {n: {} for n in sims}
        shim = _WorldNet(self)
        for proc in sims.values():
            proc.net = shim

    def prime_payment(self, payer: int, round_index: int, target: int,
                      base_step: int) -> None:
        self.sims[payer].pending[round_index] = target
        self.wakes[payer].add(base_step)


class SplitAdversary(Adversary):
    """Runs any number of simulation worlds behind the corrupted ids.

    Each real delivery to a corrupted id is routed to the worlds whose
    feed contains the sender; a sender in no feed goes to every world,
    which is the best effort left once the disjointness hypothesis has
    failed.  With a single world whose feed is everything this is simply
    a coalition that behaves honestly, which several gallery entries use
    as a building block.
    """

    def __init__(self, corrupted: frozenset[int], worlds: list[SimWorld]):
        self.corrupted = frozenset(corrupted)
        self.worlds = worlds
        self.sent: list[tuple[int, int, Send]] = []
        self._cursor = 0

    def extra_sends(self, t: int, net: Network) -> list[tuple[int, Send]]:
        """Hook for subclasses that add scripted traffic on top."""
        return []

    def act(self, t: int, net: Network) -> list[tuple[int, Send]]:
        observed = net.observed
        while self._cursor < len(observed):
            obs = observed[self._cursor]
            self._cursor += 1
            if obs.sender in self.corrupted:
                continue
            hit = [w for w in self.worlds if obs.sender in w.feed]
            for world in hit or self.worlds:
                world.queues[obs.recipient].setdefault(obs.step, []).append(
                    Delivery(obs.sender, obs.payload))
        out = []
        for world in self.worlds:
            for n in sorted(world.sims):
                inbox = world.queues[n].pop(t, [])
                if not inbox and t not in world.wakes.get(n, ()):
                    continue
                for send in world.sims[n].step(t, inbox):
                    if send.recipient in world.sims:
                        world.queues[send.recipient].setdefault(t + 1, []).append(
                            Delivery(n, send.payload))
                    else:
                        out.append((n, send))
                        self.sent.append((t, n, send))
        out.extend(self.extra_sends(t, net))
        return out


# ---------------------------------------------------------------------------
# the strawman


STRAWMAN_STEPS = 2


class StrawmanProcess(Process):
    """Direct handoff marker with none of the protections.

    The payer mails one signed note straight to the target and the
    target believes any verifying note.  Nobody else hears about the
    payment, so the contact sets of two payments from the same payer are
    disjoint apart from the payer itself.  That is exactly the geometry
    the split double spend needs, and the gallery keeps this protocol
    around to show the attack and the round checker both working.
    """

    def __init__(self, n: int, N: int, oracle, genesis_holder: int = 0):
        super().__init__(n)
        self.N = N
        self.oracle = oracle
        self.marked = n == genesis_holder
        self.pending: dict[int, int] = {}
        self.markings: list[Marking] = []

    def step(self, t: int, inbox: list[Delivery]) -> list[Send]:
        r, phase = divmod(t, STRAWMAN_STEPS)
        for d in inbox:
            try:
                sm = SignedMessage.from_bytes(d.payload)
            except Exception:
                continue
            body = sm.payload
            want = enc_str("pay") + enc_int(r) + enc_int(d.sender) + enc_int(self.n)
            if body != want or sm.signers != (d.sender,):
                continue
            if not sm.verify_stack(self.oracle):
                continue
            self.marked = True
            self.markings.append(Marking(r, self.n, d.sender))
        if phase == 0 and self.marked and r in self.pending:
            target = self.pending.pop(r)
            note = enc_str("pay") + enc_int(r) + enc_int(self.n) + enc_int(target)
            sm = SignedMessage(note).signed_by(self.oracle, self.n)
            self.marked = False
            return [Send(target, sm.to_bytes(), 1)]
        return []


class StrawmanSystem:
    """Driver for the strawman, API matched to the real marker systems."""

    def __init__(self, N: int, corrupted: frozenset[int] = frozenset(),
                 adversary=None, genesis_holder: int = 0,
                 oracle: SignatureOracle | None = None):
        self.N = N
        self.corrupted = frozenset(corrupted)
        if oracle is None:
            oracle = SignatureOracle(self.corrupted)
        self.procs = [StrawmanProcess(n, N, oracle, genesis_holder)
                      for n in range(N)]
        self.net = Network(self.procs, self.corrupted, adversary, oracle)
        self.round_index = 0

    def run_round(self, inputs: dict[int, int] | None = None) -> list[Marking]:
        r = self.round_index
        base = r * STRAWMAN_STEPS
        self.net.round = r
        for payer, target in (inputs or {}).items():
            if payer in self.corrupted:
                continue
            if not self.procs[payer].marked:
                raise ConfigFault(f"process {payer} is not marked in round {r}")
            self.procs[payer].pending[r] = target
            self.net.wake(payer, base)
        self.net.run_until(base + STRAWMAN_STEPS - 1)
        self.round_index += 1
        return [m for n in range(self.N) if n not in self.corrupted
                for m in self.procs[n].markings if m.round == r]


# ---------------------------------------------------------------------------
# contact sets and the split double spend


def _family_process(family: str, n: int, N: int, f: int, oracle,
                    genesis: int) -> Process:
    if family == "quorum":
        return QMProcess(n, N, f, oracle, genesis)
    if family == "cycle":
        return CCProcess(n, N, oracle, genesis_holder=genesis)
    if family == "strawman":
        return StrawmanProcess(n, N, oracle, genesis)
    raise ConfigFault(f"unknown protocol family {family!r}")


def _family_system(family: str, N: int, f: int,
                   corrupted: frozenset[int] = frozenset(), adversary=None,
                   genesis: int = 0, oracle: SignatureOracle | None = None):
    if family == "quorum":
        return QuorumMarkerSystem(N, f, corrupted, adversary, genesis, oracle)
    if family == "cycle":
        return CycleCoinSystem(N, corrupted, adversary, genesis, oracle)
    if family == "strawman":
        return StrawmanSystem(N, corrupted, adversary, genesis, oracle)
    raise ConfigFault(f"unknown protocol family {family!r}")


def x_set(family: str, N: int, f: int, payer: int, target: int,
          *, genesis: int | None = None) -> frozenset[int]:
    """Processes touching any message when ``payer`` pays ``target``.

    Measured on a fresh all honest system, senders and recipients both
    count.  A payment to yourself touches nobody.
    """
    system = _family_system(family, N, f, genesis=payer if genesis is None
                            else genesis)
    system.run_round({payer: target})
    events = system.net.transcript.events
    return frozenset(e.sender for e in events) | \
        frozenset(e.recipient for e in events)


def message_floor_report(family: str, N: int, f: int) -> list[str]:
    """Check that each payment sends at least half its contact set size.

    Every contacted process sent or received something, and one message
    explains at most two contacts, so measured cost below half the set
    size would mean the bookkeeping is broken."""
    problems = []
    for target in range(N):
        if target == 0:
            continue
        contacts = x_set(family, N, f, 0, target)
        system = _family_system(family, N, f, genesis=0)
        system.run_round({0: target})
        z = system.net.metrics.messages()
        if z < len(contacts) / 2:
            problems.append(
                f"target {target}: {z} messages for {len(contacts)} contacts")
    return problems


@dataclass(frozen=True)
class SplitReport:
    """Outcome of one split double spend attempt."""

    family: str
    N: int
    f: int
    payer: int
    targets: tuple[int, int]
    x_sets: tuple[frozenset[int], frozenset[int]]
    coalition: frozenset[int]
    skipped: bool
    accepted: tuple[bool, bool]
    violations: tuple[str, ...]

    @property
    def double_spend(self) -> bool:
        return self.accepted[0] and self.accepted[1]


def split_double_spend(family: str, N: int, f: int, payer: int,
                       n1: int, n2: int,
                       *, coalition: frozenset[int] | None = None) -> SplitReport:
    """Run the two world payment split against a marker protocol.

    The coalition defaults to the intersection of the two contact sets
    plus the payer, the set the attack construction corrupts.  When that
    exceeds f the attack is structurally out of budget and the report
    says skipped; callers may instead pass a smaller coalition and watch
    the attack run out of reach.  Targets must be distinct, honest, and
    different from the payer.
    """
    if len({payer, n1, n2}) != 3:
        raise ConfigFault("need a payer and two distinct targets")
    x1 = x_set(family, N, f, payer, n1)
    x2 = x_set(family, N, f, payer, n2)
    chosen = frozenset((x1 & x2) | {payer}) if coalition is None \
        else frozenset(coalition)
    if len(chosen) > f or (coalition is None and not chosen.isdisjoint((n1, n2))):
        # over budget, or the contact sets only meet through a target:
        # either way the two world construction does not apply
        return SplitReport(family, N, f, payer, (n1, n2), (x1, x2), chosen,
                           True, (False, False), ())
    if payer not in chosen or n1 in chosen or n2 in chosen:
        raise ConfigFault("the coalition must contain the payer, never a target")
    oracle = SignatureOracle(chosen)
    shadow = CoalitionOracle(oracle)
    if family == "cycle":
        shadow.sign(payer, record_content((), TAG_BASE))
    worlds = []
    for name, target, feed in (("first", n1, x1 - chosen),
                               ("second", n2, x2 - chosen)):
        sims = {z: _family_process(family, z, N, f, shadow, payer)
                for z in sorted(chosen)}
        world = SimWorld(name, sims, feed)
        world.prime_payment(payer, 0, target, 0)
        worlds.append(world)
    adversary = SplitAdversary(chosen, worlds)
    system = _family_system(family, N, f, corrupted=chosen,
                            adversary=adversary, genesis=payer, oracle=oracle)
    markings = system.run_round({})
    honest = frozenset(range(N)) - chosen
    violations = check_marker_round(0, honest, markings, None, False, None)
    accepted = (any(m.target == n1 for m in markings),
                any(m.target == n2 for m in markings))
    return SplitReport(family, N, f, payer, (n1, n2), (x1, x2), chosen,
                       False, accepted, tuple(violations))


# ---------------------------------------------------------------------------
# quorum marker gallery


class QuorumScriptAdversary(Adversary):
    """Sends prepared intents and receipts at scripted steps."""

    def __init__(self, corrupted: frozenset[int], sends: dict[int, list]):
        self.corrupted = frozenset(corrupted)
        self.sends = sends

    def act(self, t: int, net: Network) -> list[tuple[int, Send]]:
        out = []
        for sender, recipient, content in self.sends.get(t, []):
            sm = SignedMessage(content).signed_by(net.oracle, sender,
                                                  adversarial=True)
            out.append((sender, Send(recipient, sm.to_bytes(), 1)))
        return out


def _audited_rounds(system, plans: list[dict[int, int] | None]) -> list[str]:
    """Run scripted rounds and collect checker output for each."""
    violations = []
    honest = frozenset(range(system.N)) - system.corrupted
    for plan in plans:
        plan = plan or {}
        payer = next(iter(plan), None)
        marked = payer is not None and system.procs[payer].marked
        r = system.round_index
        markings = system.run_round(plan)
        violations.extend(check_marker_round(
            r, honest, markings, payer, marked, plan.get(payer)))
    return violations


def quorum_gallery(N: int = 7, f: int = 2) -> list[AttackResult]:
    """Named attack-must-fail entries against the quorum marker."""
    results = []
    casters = sorted(default_broadcasters(N, f))
    half = len(casters) // 2

    # conflicting intents to two halves of the broadcaster set
    proof = encode_proof(())
    sends = {0: [(0, b, intent_content(0, 0, 1, proof)) for b in casters[:half]]
             + [(0, b, intent_content(0, 0, 2, proof)) for b in casters[half:]]}
    system = QuorumMarkerSystem(N, f, frozenset({0}),
                                QuorumScriptAdversary(frozenset({0}), sends))
    violations = _audited_rounds(system, [{}])
    results.append(AttackResult("quorum-split-intents", "quorum", N, f,
                                tuple(violations)))

    # pay honestly, then replay the spent proof with a new round number
    sends = {0: [(0, b, intent_content(0, 0, 1, proof)) for b in casters],
             3: [(0, b, intent_content(1, 0, 2, proof)) for b in casters]}
    system = QuorumMarkerSystem(N, f, frozenset({0}),
                                QuorumScriptAdversary(frozenset({0}), sends))
    violations = _audited_rounds(system, [{}, {1: 3}])
    marked = [n for n in (2, 3) if system.procs[n].marked]
    if marked != [3]:
        violations.append(f"stale proof replay minted a marker: {marked}")
    results.append(AttackResult("quorum-stale-proof-replay", "quorum", N, f,
                                tuple(violations)))

    # corrupted broadcasters countersign a handoff that never happened
    crooked = frozenset(casters[-f:])
    fake = [(b, 1, receipt_content(0, 0, 1)) for b in sorted(crooked)]
    system = QuorumMarkerSystem(N, f, crooked,
                                QuorumScriptAdversary(crooked, {1: fake}))
    violations = _audited_rounds(system, [{0: 2}])
    results.append(AttackResult("quorum-fake-receipts", "quorum", N, f,
                                tuple(violations)))

    # corrupted holder that never spends: nothing may move
    system = QuorumMarkerSystem(N, f, frozenset({0}))
    violations = _audited_rounds(system, [{}, {}])
    results.append(AttackResult("quorum-silent-holder", "quorum", N, f,
                                tuple(violations)))
    return results


# ---------------------------------------------------------------------------
# cycle coin gallery


class ReplayAdversary(SplitAdversary):
    """Honest coalition behavior plus verbatim replays one round later.

    Everything the coalition sent in its first round is re-sent at the
    start of the next round, both to the original recipient and rotated
    one position on, so stale chains arrive where they are expected and
    where they are not.
    """

    def __init__(self, corrupted, worlds, round_steps: int):
        super().__init__(corrupted, worlds)
        self.round_steps = round_steps

    def extra_sends(self, t: int, net: Network) -> list[tuple[int, Send]]:
        if t != self.round_steps:
            return []
        out = []
        for _, sender, send in list(self.sent):
            out.append((sender, send))
            out.append((sender, Send((send.recipient + 1) % net.N,
                                     send.payload, send.signatures)))
        return out


class ForgedChainAdversary(Adversary):
    """Delivers one prepared chain payload at one scripted step."""

    def __init__(self, corrupted: frozenset[int], step: int, recipient: int,
                 payload_factory: Callable[[Network], bytes]):
        self.corrupted = frozenset(corrupted)
        self.step = step
        self.recipient = recipient
        self.payload_factory = payload_factory

    def act(self, t: int, net: Network) -> list[tuple[int, Send]]:
        if t != self.step:
            return []
        payload = self.payload_factory(net)
        return [(min(self.corrupted), Send(self.recipient, payload))]


def _honest_world(family: str, N: int, f: int, coalition: frozenset[int],
                  oracle, genesis: int) -> SimWorld:
    sims = {z: _family_process(family, z, N, f, oracle, genesis)
            for z in sorted(coalition)}
    return SimWorld("single", sims, frozenset(range(N)) - coalition)


def cycle_stale_replay(N: int, first_target: int, *,
                       follow_up: int | None = None) -> AttackResult:
    """Corrupted holder pays, then replays the spent chain everywhere.

    The follow up round also carries an honest background handoff, which
    must land untouched by the stale traffic.  The follow up target is
    kept on the payer's forward arc so its route avoids the corrupted
    position; past the end of the arc it degrades to a self transfer.
    """
    coalition = frozenset({0})
    oracle = SignatureOracle(coalition)
    shadow = CoalitionOracle(oracle)
    shadow.sign(0, record_content((), TAG_BASE))
    world = _honest_world("cycle", N, 0, coalition, shadow, 0)
    world.prime_payment(0, 0, first_target, 0)
    steps = cycle_round_steps(N)
    adversary = ReplayAdversary(coalition, [world], steps)
    system = CycleCoinSystem(N, coalition, adversary, 0, oracle)
    if follow_up is None:
        follow_up = first_target + 1 if first_target + 1 < N else first_target
    violations = _audited_rounds(system, [{}, {first_target: follow_up}])
    stray = [m for m in system.procs[first_target].markings
             if m.round == 1 and m.predecessor != first_target]
    if stray:
        violations.append(f"stale chain re-marked {first_target}: {stray}")
    return AttackResult("cycle-stale-replay", "cycle", N, 1, tuple(violations),
                        details=f"target={first_target}")


def cycle_equal_weight(N: int) -> AttackResult:
    """Two corrupted neighbours forge a rival chain of the spent weight.

    Round 0 pays process 2 through process 1 honestly.  Round 1 delivers
    a one hop, one hop rival of the same total weight, shaped like a
    legitimate round 1 chain ending at the same position.  The target
    must keep the chain it accepted, and a third party auditing the
    rival must get it refuted with the original as the exhibit.
    """
    if N < 4:
        raise ConfigFault("the equal weight forgery needs at least four processes")
    coalition = frozenset({0, 1})
    oracle = SignatureOracle(coalition)
    shadow = CoalitionOracle(oracle)
    shadow.sign(0, record_content((), TAG_BASE))
    world = _honest_world("cycle", N, 0, coalition, shadow, 0)
    world.prime_payment(0, 0, 2, 0)
    steps = cycle_round_steps(N)
    forged: list[tuple[Record, ...]] = []

    def rival(net: Network) -> bytes:
        records = (Record(TAG_BASE, 0),)
        records = append_record(net.oracle, 0, records, TAG_PATH,
                                adversarial=True)
        records = append_record(net.oracle, 0, records, TAG_X,
                                adversarial=True)
        records = append_record(net.oracle, 1, records, TAG_PATH,
                                adversarial=True)
        records = append_record(net.oracle, 1, records, TAG_Y,
                                adversarial=True)
        forged.append(records)
        return wire(KIND_CHAIN, records)

    forger = ForgedChainAdversary(coalition, steps, 2, rival)

    class Both(SplitAdversary):
        def extra_sends(self, t: int, net: Network):
            return forger.act(t, net)

    adversary = Both(coalition, [world])
    system = CycleCoinSystem(N, coalition, adversary, 0, oracle)
    violations = _audited_rounds(system, [{}, {2: 3}])
    target = system.procs[2]
    if [m for m in target.markings if m.round == 1]:
        violations.append("rival chain re-marked the spent position")
    verdict, exhibit = verify_payment_claim(target, forged[0], 1)
    if verdict != "refuted":
        violations.append(f"rival claim audited as {verdict}, not refuted")
    return AttackResult("cycle-equal-weight", "cycle", N, 2, tuple(violations))


def cycle_silent_responder(N: int, f: int, target: int,
                           silent: int = 1) -> AttackResult:
    """A path process refuses to answer under response enforcement.

    The payment must complete anyway and every honest process must agree
    the silent process is gone from the cycle.
    """
    system = PoRSystem(N, f, frozenset({silent}))
    violations = _audited_rounds(system, [{0: target}])
    honest = [n for n in range(N) if n != silent]
    for n in honest:
        if silent not in system.procs[n].deleted:
            violations.append(f"process {n} kept the silent process")
    return AttackResult("cycle-silent-responder", "cycle", N, f,
                        tuple(violations), details=f"silent={silent}")


def cycle_junk(N: int, seed: int) -> AttackResult:
    """A corrupted bystander floods garbage while honest handoffs run."""
    coalition = frozenset({N - 1})

    class Junk(Adversary):
        corrupted = coalition

        def __init__(self):
            self.rng = seeded_rng(seed, 13)

        def act(self, t: int, net: Network):
            out = []
            for recipient in range(N - 1):
                blob = bytes(self.rng.integers(0, 256, size=12, dtype=np.uint8))
                out.append((N - 1, Send(recipient, blob)))
                out.append((N - 1, Send(recipient, wire(KIND_QUERY, ()))))
            return out

    system = CycleCoinSystem(N, coalition, Junk())
    violations = _audited_rounds(system, [{0: 1}, {1: 2}])
    return AttackResult("cycle-junk", "cycle", N, 1, tuple(violations),
                        details=f"seed={seed}")


def cycle_gallery(N: int = 8) -> list[AttackResult]:
    """Named attack-must-fail entries against the chain marker."""
    results = []
    report = split_double_spend("cycle", N, 1, 0, 2, 4,
                                coalition=frozenset({0}))
    extra = () if not report.double_spend else ("double spend landed",)
    results.append(AttackResult("cycle-split-chains", "cycle", N, 1,
                                report.violations + extra,
                                details=f"accepted={report.accepted}"))
    results.append(cycle_stale_replay(N, 2))
    results.append(cycle_equal_weight(N))
    results.append(cycle_silent_responder(N, 2, 3))
    results.append(cycle_junk(N, 1))
    return results


def exhaustive_cycle_cases(N: int = 4) -> list[AttackResult]:
    """Every small split and replay layout on the smallest useful cycle."""
    results = []
    f = N - 2
    honest_pairs = [(a, b) for a in range(1, N) for b in range(1, N) if a != b]
    for extra in range(N):
        coalition = frozenset({0}) if extra == 0 else frozenset({0, extra})
        if len(coalition) > f:
            continue
        for n1, n2 in honest_pairs:
            if n1 in coalition or n2 in coalition:
                continue
            report = split_double_spend("cycle", N, f, 0, n1, n2,
                                        coalition=coalition)
            extra_v = () if not report.double_spend else ("double spend landed",)
            results.append(AttackResult(
                "cycle-split-exhaustive", "cycle", N, f,
                report.violations + extra_v,
                details=f"Z={sorted(coalition)} targets=({n1},{n2})"))
    for target in range(1, N):
        results.append(cycle_stale_replay(N, target))
    return results


def random_cycle_attack(seed: int, N: int = 8) -> AttackResult:
    """One seeded draw from the cycle attack mixture."""
    rng = seeded_rng(seed, 3)
    u = rng.random()
    if u < 0.35:
        pool = [n for n in range(1, N)]
        pick = rng.choice(len(pool), size=2, replace=False)
        n1, n2 = pool[int(pick[0])], pool[int(pick[1])]
        coalition = frozenset({0})
        if N > 4 and rng.random() < 0.5:
            others = [n for n in range(1, N) if n not in (n1, n2)]
            coalition = frozenset({0, others[int(rng.integers(len(others)))]})
        report = split_double_spend("cycle", N, len(coalition), 0, n1, n2,
                                    coalition=coalition)
        extra = () if not report.double_spend else ("double spend landed",)
        return AttackResult("cycle-split-random", "cycle", N, len(coalition),
                            report.violations + extra, details=f"seed={seed}")
    if u < 0.55:
        target = 1 + int(rng.integers(N - 1))
        return cycle_stale_replay(N, target)
    if u < 0.70:
        return cycle_equal_weight(N)
    if u < 0.85:
        silent = 1 + int(rng.integers(N - 2))
        target = silent + 1 + int(rng.integers(N - silent - 1))
        return cycle_silent_responder(N, 2, target, silent)
    return cycle_junk(N, seed)


# ---------------------------------------------------------------------------
# payment system gallery


class BankJunkAdversary(Adversary):
    """Floods honest banks with garbage at every step."""

    def __init__(self, corrupted: frozenset[int], N: int, seed: int):
        self.corrupted = frozenset(corrupted)
        self.N = N
        self.rng = seeded_rng(seed, 17)

    def act(self, t: int, net: Network) -> list[tuple[int, Send]]:
        sender = min(self.corrupted)
        out = []
        for recipient in range(self.N):
            if recipient in self.corrupted:
                continue
            blob = bytes(self.rng.integers(0, 256, size=10, dtype=np.uint8))
            out.append((sender, Send(recipient, blob)))
        return out


class BankReplayAdversary(Adversary):
    """Echoes everything delivered to the coalition back into the bank."""

    def __init__(self, corrupted: frozenset[int], N: int):
        self.corrupted = frozenset(corrupted)
        self.N = N
        self._cursor = 0

    def act(self, t: int, net: Network) -> list[tuple[int, Send]]:
        out = []
        sender = min(self.corrupted)
        observed = net.observed
        while self._cursor < len(observed):
            obs = observed[self._cursor]
            self._cursor += 1
            if obs.sender in self.corrupted:
                continue
            out.append((sender, Send(obs.sender, obs.payload)))
            out.append((sender, Send((obs.sender + 1) % self.N, obs.payload)))
        return out


class BankIntentSplitAdversary(Adversary):
    """Conflicting first round intents inside one quorum instance.

    The corrupted payer owns the genesis of its instance, so an empty
    proof is valid; it mails intents for two different targets to the
    two halves of the broadcaster set under the instance nonce.
    """

    def __init__(self, corrupted: frozenset[int], payer: int, nonce: bytes,
                 N: int, f: int, targets: tuple[int, int]):
        self.corrupted = frozenset(corrupted)
        self.payer = payer
        self.nonce = nonce
        self.N = N
        self.f = f
        self.targets = targets

    def act(self, t: int, net: Network) -> list[tuple[int, Send]]:
        if t != 0:
            return []
        scoped = ScopedOracle(net.oracle, self.nonce)
        casters = sorted(default_broadcasters(self.N, self.f))
        half = len(casters) // 2
        out = []
        for target, chunk in ((self.targets[0], casters[:half]),
                              (self.targets[1], casters[half:])):
            content = intent_content(0, self.payer, target, encode_proof(()))
            sm = SignedMessage(content).signed_by(scoped, self.payer,
                                                  adversarial=True)
            payload = tag_payload(sm.to_bytes(), self.nonce)
            out.extend((self.payer, Send(b, payload, 1)) for b in chunk)
        return out


def bank_gallery(family: str, N: int, f: int, V: int, K: int,
                 seed: int) -> list[AttackResult]:
    """Attack-must-fail entries against the V unit payment system.

    Every case runs K rounds of seeded honest background payments over
    the same initial distribution and then the full audit stack.  In the
    chain family a background target never routes through a corrupted
    position: the plain chain instances promise nothing about liveness
    across a silent link, that is the job of the response enforcement
    layer, so sending a payment into one would only report the known
    gap, not a safety failure.
    """
    initial = [0] * N
    for v in range(V):
        initial[v % N] += 1

    def targets_for(payer: int, corrupted: frozenset[int]) -> list[int]:
        if family == "quorum":
            return [n for n in range(N) if n not in corrupted]
        arc = [payer]
        for n in range(payer + 1, N):
            if n in corrupted:
                break
            arc.append(n)
        return arc

    def background(bank: Bank, rounds: int, salt: int) -> list[str]:
        rng = seeded_rng(seed, 23, salt)
        problems = []
        for _ in range(rounds):
            funded = [n for n, units in bank.balances().items() if units > 0]
            plan = {}
            for payer in funded:
                if rng.random() < 0.6:
                    choices = targets_for(payer, bank.corrupted)
                    plan[payer] = choices[int(rng.integers(len(choices)))]
            bank.run_round(plan)
            problems.extend(bank.audit())
        return problems

    results = []
    bank = Bank(N, f, initial, family=family)
    problems = background(bank, K, 1)
    supply = sum(initial)
    if sum(bank.balances().values()) != supply:
        problems.append("supply drifted in the all honest run")
    results.append(AttackResult("bank-honest-baseline", family, N, f,
                                tuple(problems)))

    corrupted = frozenset({0})
    bank = Bank(N, f, initial, corrupted=corrupted, family=family)
    results.append(AttackResult(
        "bank-silent-holder", family, N, f,
        tuple(background(bank, K, 2))))

    bank = Bank(N, f, initial, corrupted=corrupted,
                adversary=BankJunkAdversary(corrupted, N, seed), family=family)
    results.append(AttackResult(
        "bank-junk", family, N, f, tuple(background(bank, K, 3))))

    bank = Bank(N, f, initial, corrupted=corrupted,
                adversary=BankReplayAdversary(corrupted, N), family=family)
    results.append(AttackResult(
        "bank-replay", family, N, f, tuple(background(bank, K, 4))))

    if family == "quorum" and initial[0] > 0 and N >= 3:
        adversary = BankIntentSplitAdversary(corrupted, 0, nonce_for(0),
                                             N, f, (1, 2))
        bank = Bank(N, f, initial, corrupted=corrupted, adversary=adversary,
                    family=family)
        problems = background(bank, K, 5)
        minted = [n for n in (1, 2) if bank._marked(n, 0)]
        if len(minted) > 1:
            problems.append("intent split minted two markers")
        results.append(AttackResult("bank-intent-split", family, N, f,
                                    tuple(problems)))
    return results


# ---------------------------------------------------------------------------
# trusted intermediary gallery


def _longest_route(cycleset) -> tuple[int, int]:
    """The endpoint pair whose shortest route uses the most hops."""
    graph = HopNetwork(cycleset).graph()
    best, best_len = None, -1
    for a in range(cycleset.N):
        for b in range(cycleset.N):
            if a == b:
                continue
            path = shortest_hop_path(graph, a, b)
            if path is not None and len(path.legs) > best_len:
                best, best_len = (a, b), len(path.legs)
    if best is None:
        raise ConfigFault("the hop graph is disconnected")
    return best


def _cheat_sweep(cycleset, payer: int, payee: int, K: int,
                 label: str) -> list[AttackResult]:
    """Honest run, every keep and forge position, and a denying payee.

    Positions count route participants, 1..Z the intermediaries and Z+1
    the payee.  The walk back must accuse the planted cheater whenever
    the payee goes unpaid, and the honest run must pay without any
    dispute at all.
    """
    N = cycleset.N
    results = []
    outcome = HopNetwork(cycleset).macro_payment(payer, payee)
    problems = [] if outcome.paid else ["honest macro payment failed"]
    results.append(AttackResult(f"hop-honest-{label}", "hopnet", N, K,
                                tuple(problems)))
    legs = len(outcome.path.legs)
    chain = [payer] + list(outcome.path.intermediaries) + [payee]
    for position in range(1, legs):
        for mode in (CHEAT_KEEP, CHEAT_FORGE):
            network = HopNetwork(cycleset)
            cheated = network.macro_payment(payer, payee,
                                            cheat=CheatPlan(position, mode))
            problems = []
            if cheated.payee_claims_paid:
                problems.append("payee reports paid through a cheat")
            else:
                accused, _ = network.dispute_walkback(cheated)
                if accused != chain[position]:
                    problems.append(
                        f"accused {accused}, cheater was {chain[position]}")
            results.append(AttackResult(
                f"hop-{mode}-at-{position}-{label}", "hopnet", N, K,
                tuple(problems)))
    network = HopNetwork(cycleset)
    denied = network.macro_payment(payer, payee,
                                   cheat=CheatPlan(legs, CHEAT_DENY))
    problems = []
    accused, _ = network.dispute_walkback(denied)
    if accused != payee:
        problems.append(f"denying payee not accused, got {accused}")
    results.append(AttackResult(f"hop-deny-at-payee-{label}", "hopnet", N, K,
                                tuple(problems)))
    return results


def cheating_intermediary_cases(N: int = 8, K: int = 2,
                                seed: int = 5) -> list[AttackResult]:
    """Run every cheat mode along the longest route of a random layout."""
    cycleset = gen_random_cycles(N, K, seed)
    payer, payee = _longest_route(cycleset)
    return _cheat_sweep(cycleset, payer, payee, K, f"seed{seed}")


def dispute_coverage(N: int = 32, max_legs: int = 5) -> list[AttackResult]:
    """Cheat sweeps over one specimen route of every length up to the cap.

    The two cycle binary search layout offers shortest routes of every
    leg count at this size; for each count the first endpoint pair in
    scan order is the specimen.
    """
    cycleset = gen_binary_search_pair(N)
    graph = HopNetwork(cycleset).graph()
    wanted = set(range(1, max_legs + 1))
    specimens: dict[int, tuple[int, int]] = {}
    for a in range(N):
        if not wanted:
            break
        for b in range(N):
            if a == b or not wanted:
                continue
            path = shortest_hop_path(graph, a, b)
            if path is not None and len(path.legs) in wanted:
                specimens[len(path.legs)] = (a, b)
                wanted.discard(len(path.legs))
    results = []
    for count in sorted(specimens):
        payer, payee = specimens[count]
        results.extend(_cheat_sweep(cycleset, payer, payee, 2,
                                    f"legs{count}"))
    return results
