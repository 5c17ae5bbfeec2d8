"""Round based ownership of a single transferable marker.

Exactly one process starts marked.  In every round the marked process may
hand the marker to a target of its choice, and the guarantees are: at most
one honest process becomes marked per round, an honest handoff between
honest processes always lands, and nobody can be marked in the name of an
honest process that did not pay.

Two interchangeable solutions live here.  The broadcast solution replays
every handoff through the authenticated broadcast of
:mod:`lockstep.consensus`, so everybody tracks the marker and each round
costs a full broadcast.  The quorum solution designates 3f+1 broadcaster
processes; a handoff is one signed intent to the broadcasters plus their
countersigned receipts to the target, and the receipt set doubles as the
proof of ownership for the next handoff.  Receipt freshness is enforced by
each broadcaster against its own countersign history, and any two receipt
quorums share an honest broadcaster, which is what makes stale or split
proofs unusable.
"""

from __future__ import annotations

from dataclasses import dataclass

from lockstep.consensus import DSProcess, default_relays, ds_all_honest_messages
from lockstep.muxer import nonce_for
from lockstep.simnet import (
    ByteReader,
    CodecError,
    ConfigFault,
    Delivery,
    Network,
    Process,
    ScopedOracle,
    Send,
    SignatureOracle,
    SignedMessage,
    enc_bytes,
    enc_int,
    enc_str,
)

GENESIS_ROUND = -1

QUORUM_STEPS_PER_ROUND = 3


@dataclass(frozen=True)
class Marking:
    """One acceptance event: ``target`` became marked in ``round`` and
    decided the marker came from ``predecessor``."""

    round: int
    target: int
    predecessor: int


# ---------------------------------------------------------------------------
# rule checker


def check_marker_round(round_index: int, honest: frozenset[int],
                       markings: list[Marking],
                       payer: int | None, payer_marked: bool,
                       target: int | None) -> list[str]:
    """Audit one round of one marker instance against the three rules.

    ``markings`` are the acceptance events of honest processes this round.
    ``payer``/``target`` describe the honest input, if any; ``payer_marked``
    says whether that payer actually held the marker entering the round.
    Returns human readable violation strings, empty when clean.
    """
    violations = []
    marked_honest = [m for m in markings if m.target in honest]
    if len(marked_honest) > 1:
        violations.append(
            f"round {round_index}: {len(marked_honest)} honest processes marked")
    if (payer is not None and payer in honest and payer_marked
            and target is not None and target in honest):
        hits = [m for m in marked_honest
                if m.target == target and m.predecessor == payer]
        if not hits:
            violations.append(
                f"round {round_index}: handoff {payer}->{target} did not land")
    for m in marked_honest:
        if m.predecessor in honest and not (m.predecessor == payer
                                            and m.target == target
                                            and payer_marked):
            violations.append(
                f"round {round_index}: {m.target} marked in the name of honest "
                f"{m.predecessor} without a matching handoff")
    return violations


# ---------------------------------------------------------------------------
# quorum solution


INTENT = "intent"
RECEIPT = "receipt"


def default_broadcasters(N: int, f: int) -> frozenset[int]:
    """The 3f+1 lowest process ids."""
    return frozenset(range(3 * f + 1))


def encode_proof(receipts: tuple[bytes, ...]) -> bytes:
    parts = [enc_int(len(receipts))]
    parts.extend(enc_bytes(r) for r in receipts)
    return b"".join(parts)


def decode_proof(data: bytes) -> tuple[bytes, ...]:
    reader = ByteReader(data)
    count = reader.read_int()
    if count < 0:
        raise CodecError("negative receipt count")
    receipts = tuple(reader.read_bytes() for _ in range(count))
    if not reader.at_end():
        raise CodecError("trailing bytes after proof")
    return receipts


def intent_content(round_index: int, payer: int, target: int, proof: bytes) -> bytes:
    return (enc_str(INTENT) + enc_int(round_index) + enc_int(payer)
            + enc_int(target) + enc_bytes(proof))


def receipt_content(round_index: int, payer: int, target: int) -> bytes:
    return enc_str(RECEIPT) + enc_int(round_index) + enc_int(payer) + enc_int(target)


def parse_typed(payload: bytes, expected: str, fields: int) -> tuple[int, ...] | None:
    """Read a tag checked record of ``fields`` integers, plus one trailing
    byte chunk when parsing an intent."""
    try:
        reader = ByteReader(payload)
        if reader.read_str() != expected:
            return None
        values = tuple(reader.read_int() for _ in range(fields))
        if expected == INTENT:
            values = values + (reader.read_bytes(),)
        if not reader.at_end():
            return None
        return values
    except CodecError:
        return None


class QMProcess(Process):
    """One participant of the quorum marker, possibly also a broadcaster.

    Rounds occupy three steps: intent, countersign, accept.  A broadcaster
    keeps every (round, payer, target) triple it ever countersigned and
    treats a proof claiming a marking at round j as fresh only when its
    whole history sits strictly before j, apart from the claimed marking
    itself.  That single local rule, combined with quorum intersection,
    rules out stale proofs, replayed proofs and split handoffs.
    """

    def __init__(self, n: int, N: int, f: int, oracle, genesis_holder: int = 0):
        super().__init__(n)
        self.N = N
        self.f = f
        self.oracle = oracle
        self.genesis_holder = genesis_holder
        self.broadcasters = default_broadcasters(N, f)
        self.marked = n == genesis_holder
        self.marked_round = GENESIS_ROUND
        self.predecessor: int | None = None
        self.proof: tuple[bytes, ...] = ()
        self.pending: dict[int, int] = {}
        self.history: list[tuple[int, int, int]] = []
        self.markings: list[Marking] = []

    # -- payer side ---------------------------------------------------------

    def _intent_sends(self, r: int) -> list[Send]:
        target = self.pending.pop(r)
        content = intent_content(r, self.n, target, encode_proof(self.proof))
        sm = SignedMessage(content).signed_by(self.oracle, self.n)
        wire = sm.to_bytes()
        self.marked = False
        return [Send(b, wire, 1) for b in sorted(self.broadcasters)]

    # -- broadcaster side ---------------------------------------------------

    def _proof_round(self, payer: int, proof: bytes) -> int | None:
        """Round at which the proof says the payer was marked, or None."""
        try:
            receipts = decode_proof(proof)
        except CodecError:
            return None
        if not receipts:
            return GENESIS_ROUND if payer == self.genesis_holder else None
        seen: dict[int, int] = {}
        rounds: set[int] = set()
        for wire in receipts:
            try:
                sm = SignedMessage.from_bytes(wire)
            except CodecError:
                return None
            fields = parse_typed(sm.payload, RECEIPT, 3)
            if fields is None:
                return None
            j, _, receipt_target = fields
            if receipt_target != payer:
                return None
            if len(sm.stack) != 1 or not sm.verify_stack(self.oracle):
                return None
            signer = sm.signers[0]
            if signer not in self.broadcasters:
                return None
            rounds.add(j)
            seen[signer] = j
        if len(rounds) != 1:
            return None
        if len(seen) < 2 * self.f + 1:
            return None
        return rounds.pop()

    def _countersigns(self, r: int, inbox: list[Delivery]) -> list[Send]:
        sends = []
        for d in inbox:
            try:
                sm = SignedMessage.from_bytes(d.payload)
            except CodecError:
                continue
            fields = parse_typed(sm.payload, INTENT, 3)
            if fields is None:
                continue
            intent_round, payer, target, proof = fields
            if intent_round != r or not 0 <= target < self.N:
                continue
            if sm.signers != (payer,) or not sm.verify_stack(self.oracle):
                continue
            claimed = self._proof_round(payer, proof)
            if claimed is None or claimed >= r:
                continue
            fresh = all(j < claimed or (j == claimed and tgt == payer)
                        for j, _, tgt in self.history)
            if not fresh:
                continue
            receipt = SignedMessage(receipt_content(r, payer, target))
            receipt = receipt.signed_by(self.oracle, self.n)
            self.history.append((r, payer, target))
            sends.append(Send(target, receipt.to_bytes(), 1))
        return sends

    # -- target side --------------------------------------------------------

    def _accept(self, r: int, inbox: list[Delivery]) -> None:
        by_payer: dict[int, dict[int, bytes]] = {}
        for d in inbox:
            try:
                sm = SignedMessage.from_bytes(d.payload)
            except CodecError:
                continue
            fields = parse_typed(sm.payload, RECEIPT, 3)
            if fields is None:
                continue
            j, payer, target = fields
            if j != r or target != self.n:
                continue
            if len(sm.stack) != 1 or not sm.verify_stack(self.oracle):
                continue
            signer = sm.signers[0]
            if signer not in self.broadcasters:
                continue
            by_payer.setdefault(payer, {})[signer] = d.payload
        for payer in sorted(by_payer):
            receipts = by_payer[payer]
            if len(receipts) >= 2 * self.f + 1:
                self.marked = True
                self.marked_round = r
                self.predecessor = payer
                self.proof = tuple(receipts[s] for s in sorted(receipts))
                self.markings.append(Marking(r, self.n, payer))
                break

    def step(self, t: int, inbox: list[Delivery]) -> list[Send]:
        r, phase = divmod(t, QUORUM_STEPS_PER_ROUND)
        if phase == 0:
            if self.marked and r in self.pending:
                return self._intent_sends(r)
            return []
        if phase == 1 and self.n in self.broadcasters:
            return self._countersigns(r, inbox)
        if phase == 2:
            self._accept(r, inbox)
        return []


class QuorumMarkerSystem:
    """Driver for a persistent quorum marker instance."""

    def __init__(self, N: int, f: int, corrupted: frozenset[int] = frozenset(),
                 adversary=None, genesis_holder: int = 0,
                 oracle: SignatureOracle | None = None):
        if 3 * f + 1 > N:
            raise ConfigFault(f"quorum marker needs 3f+1 <= N, got N={N} f={f}")
        self.N = N
        self.f = f
        self.corrupted = frozenset(corrupted)
        if oracle is None:
            oracle = SignatureOracle(self.corrupted)
        self.procs = [QMProcess(n, N, f, oracle, genesis_holder) for n in range(N)]
        self.net = Network(self.procs, self.corrupted, adversary, oracle)
        self.round_index = 0

    def run_round(self, inputs: dict[int, int] | None = None) -> list[Marking]:
        """Advance one round.  ``inputs`` maps honest payers to targets."""
        r = self.round_index
        base = r * QUORUM_STEPS_PER_ROUND
        self.net.round = r
        for payer, target in (inputs or {}).items():
            if payer in self.corrupted:
                continue
            if not self.procs[payer].marked:
                raise ConfigFault(f"process {payer} is not marked in round {r}")
            self.procs[payer].pending[r] = target
            self.net.wake(payer, base)
        self.net.run_until(base + QUORUM_STEPS_PER_ROUND - 1)
        self.round_index += 1
        return [m for n in range(self.N) if n not in self.corrupted
                for m in self.procs[n].markings if m.round == r]

    def quorum_messages_per_handoff(self) -> int:
        return 2 * (3 * self.f + 1)


def measure_quorum_z(N: int, f: int) -> list[int]:
    """Honest message cost of one handoff from the genesis holder to each
    possible target, measured on fresh systems."""
    costs = []
    for target in range(N):
        system = QuorumMarkerSystem(N, f)
        system.run_round({0: target})
        costs.append(system.net.metrics.messages())
    return costs


# ---------------------------------------------------------------------------
# broadcast solution


class BBMProcess(Process):
    """Marker tracking by one authenticated broadcast per round.

    The current holder is the broadcast leader; the broadcast value is the
    target id plus one, zero meaning the round carried no handoff.  All
    honest processes apply the decided value at the end of the round, so
    the holder is replicated state.  Broadcast signatures are scoped to the
    round, which keeps chains from one round meaningless in another.
    """

    def __init__(self, n: int, N: int, f: int, oracle, genesis_holder: int = 0):
        super().__init__(n)
        self.N = N
        self.f = f
        self.oracle = oracle
        self.holder = genesis_holder
        self.pending: dict[int, int] = {}
        self.markings: list[Marking] = []
        self.ds: DSProcess | None = None
        self.ds_round = -1

    def _rotate(self, r: int) -> None:
        if self.ds_round == r:
            return
        value = None
        if self.n == self.holder and r in self.pending:
            value = enc_int(self.pending.pop(r) + 1)
        scoped = ScopedOracle(self.oracle, nonce_for(r))
        self.ds = DSProcess(self.n, self.N, self.f, self.holder, value, scoped,
                            default_relays(self.N, self.f, self.holder))
        self.ds_round = r

    def step(self, t: int, inbox: list[Delivery]) -> list[Send]:
        r, phase = divmod(t, self.f + 3)
        self._rotate(r)
        nonce = nonce_for(r)
        return [Send(s.recipient, s.payload, s.signatures, nonce)
                for s in self.ds.step(phase, inbox)]

    def finalize_round(self, r: int) -> None:
        """Apply the round's broadcast decision to the replicated holder.

        This is the local end of round state transition; it consumes no
        messages and every honest process computes the same result.
        """
        self._rotate(r)
        value, fault = self.ds.decide()
        if fault or not 1 <= value <= self.N:
            return
        target = value - 1
        predecessor = self.holder
        self.holder = target
        if self.n == target:
            self.markings.append(Marking(r, self.n, predecessor))


class BBMarkerSystem:
    """Driver for the broadcast based marker."""

    def __init__(self, N: int, f: int, corrupted: frozenset[int] = frozenset(),
                 adversary=None, genesis_holder: int = 0,
                 oracle: SignatureOracle | None = None):
        if f > N - 2:
            raise ConfigFault(f"broadcast marker needs f <= N-2, got N={N} f={f}")
        self.N = N
        self.f = f
        self.corrupted = frozenset(corrupted)
        if oracle is None:
            oracle = SignatureOracle(self.corrupted)
        self.procs = [BBMProcess(n, N, f, oracle, genesis_holder) for n in range(N)]
        self.net = Network(self.procs, self.corrupted, adversary, oracle)
        self.round_index = 0

    def run_round(self, inputs: dict[int, int] | None = None) -> list[Marking]:
        r = self.round_index
        base = r * (self.f + 3)
        self.net.round = r
        for payer, target in (inputs or {}).items():
            if payer in self.corrupted:
                continue
            if self.procs[payer].holder != payer:
                raise ConfigFault(f"process {payer} is not marked in round {r}")
            self.procs[payer].pending[r] = target
            self.net.wake(payer, base)
        self.net.run_until(base + self.f + 2)
        for n in range(self.N):
            if n not in self.corrupted:
                self.procs[n].finalize_round(r)
        self.round_index += 1
        return [m for n in range(self.N) if n not in self.corrupted
                for m in self.procs[n].markings if m.round == r]


def measure_bb_z(N: int, f: int) -> list[int]:
    costs = []
    for target in range(N):
        system = BBMarkerSystem(N, f)
        system.run_round({0: target})
        costs.append(system.net.metrics.messages())
    assert all(c == ds_all_honest_messages(N, f) for c in costs)
    return costs
