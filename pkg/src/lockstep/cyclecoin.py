"""Marker transfer by countersigned chains on a directed cycle.

Here the marker is a chain of signatures anchored at a genesis record.  A
payment from the holder to a target d positions ahead walks the cycle: the
holder queries each intermediate process in order, the process countersigns
the partial chain, the holder interleaves its own signatures, and the
finished extension lands at the target.  The weight of a chain is the total
number of cycle positions its extensions crossed, and it pins the endpoint:
weight w always ends at position genesis plus w modulo N.  Two chains of
equal weight therefore end at the same process, and the refusal rules give
that process the means to keep at most one of them alive.  That is the
whole safety story.  Nobody else hears about the payment, which is why a
payment over distance d costs exactly 2(d-1)+1 messages and a payment to
yourself costs none.

The classes at the bottom wrap the same logic in a response enforcement
schedule.  Every query slot is followed by room for a complaint broadcast
and a response broadcast, so a process that goes silent on the payment path
is either exposed and deleted from the cycle by all honest processes, or
shown to have refused for a provable reason.  All of that machinery costs
zero messages when every queried process answers.
"""

from __future__ import annotations

from dataclasses import dataclass

from lockstep.consensus import DSProcess, default_relays
from lockstep.marker import GENESIS_ROUND, Marking
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
    enc_bytes,
    enc_int,
    enc_str,
    split_payload,
    tag_payload,
)

TAG_BASE = "base"
TAG_PATH = "p"
TAG_X = "x"
TAG_Y = "y"

_TAGS = frozenset({TAG_BASE, TAG_PATH, TAG_X, TAG_Y})


@dataclass(frozen=True)
class Record:
    """One signature in a chain.

    ``signer`` signed the serialization of every record before this one
    plus the role tag, so a record is only meaningful in the exact prefix
    context it was issued for.
    """

    tag: str
    signer: int


def encode_records(records: tuple[Record, ...]) -> bytes:
    parts = [enc_int(len(records))]
    for rec in records:
        parts.append(enc_str(rec.tag))
        parts.append(enc_int(rec.signer))
    return b"".join(parts)


def decode_records(data: bytes) -> tuple[Record, ...]:
    reader = ByteReader(data)
    count = reader.read_int()
    if count < 0:
        raise CodecError("negative record count")
    records = []
    for _ in range(count):
        tag = reader.read_str()
        signer = reader.read_int()
        if tag not in _TAGS:
            raise CodecError(f"unknown record tag {tag!r}")
        records.append(Record(tag, signer))
    if not reader.at_end():
        raise CodecError("trailing bytes after records")
    return tuple(records)


def record_content(prefix: tuple[Record, ...], tag: str) -> bytes:
    """The byte string actually signed when a ``tag`` record follows
    ``prefix``."""
    return enc_bytes(encode_records(prefix)) + enc_str(tag)


def append_record(oracle, signer: int, records: tuple[Record, ...], tag: str,
                  *, adversarial: bool = False) -> tuple[Record, ...]:
    """Sign and append one record."""
    content = record_content(records, tag)
    if adversarial:
        oracle.adversary_sign(signer, content)
    else:
        oracle.sign(signer, content)
    return records + (Record(tag, signer),)


def chain_signatures_ok(records: tuple[Record, ...], oracle) -> bool:
    return all(oracle.verify(rec.signer, record_content(records[:k], rec.tag))
               for k, rec in enumerate(records))


def cycle_distance(a: int, b: int, N: int) -> int:
    """Directed distance from a to b along the cycle."""
    return (b - a) % N


def cycle_path(a: int, b: int, N: int,
               deleted: frozenset[int] = frozenset()) -> list[int]:
    """Positions from a inclusive to b exclusive, skipping deleted ones.

    The path from a process to itself is empty by convention.
    """
    if a == b:
        return []
    path = [a]
    pos = (a + 1) % N
    while pos != b:
        if pos not in deleted:
            path.append(pos)
        pos = (pos + 1) % N
    return path


# ---------------------------------------------------------------------------
# chain structure


@dataclass(frozen=True)
class Group:
    """One extension: ``extender`` moved the chain end from ``start`` to
    ``end``, crossing ``hop`` cycle positions."""

    extender: int
    path: tuple[int, ...]
    terminal: str
    start: int
    end: int
    hop: int


@dataclass(frozen=True)
class ChainShape:
    """Parsed view of a record sequence.

    ``end`` is where the chain ends; for a sequence whose last group closed
    with x it is the position whose countersignature would come next.
    ``weight`` treats that open group as if it were terminated on the spot,
    which is exactly the weight a countersigner vouches for.
    """

    records: tuple[Record, ...]
    groups: tuple[Group, ...]
    end: int
    weight: int


def assemble(records: tuple[Record, ...], N: int, *, genesis: int = 0,
             deleted: frozenset[int] = frozenset()) -> ChainShape | None:
    """Parse records into extension groups, or None if malformed.

    Groups alternate path countersignatures with the extender's own x marks
    and close on its y mark; a lone x or y is a self hop.  Deleted
    positions never sign but old records by them remain acceptable, and
    either way they count toward hop lengths, so weights keep their
    geometric meaning.  The parse is unambiguous: a run of pairs belongs to
    one group exactly as long as the extender signature matches, because
    the next group would have to be closed by the new chain end instead.
    """
    if not records or records[0] != Record(TAG_BASE, genesis):
        return None
    i = 1
    end = genesis
    groups: list[Group] = []
    total = 0
    n_records = len(records)
    while i < n_records:
        rec = records[i]
        if rec.tag == TAG_BASE:
            return None
        if rec.tag in (TAG_X, TAG_Y):
            if rec.signer != end or end in deleted:
                return None
            groups.append(Group(end, (), rec.tag, end, end, 0))
            if rec.tag == TAG_Y and i + 1 != n_records:
                return None
            i += 1
            continue
        extender = end
        if extender in deleted:
            return None
        path: list[int] = []
        cursor = extender
        terminal = None
        while i < n_records and records[i].tag == TAG_PATH:
            if i + 1 >= n_records or records[i + 1].tag not in (TAG_X, TAG_Y):
                return None
            p, closer = records[i], records[i + 1]
            if closer.signer != extender or len(path) >= N:
                break
            pos = cursor
            hops = 0
            while pos != p.signer and pos in deleted and hops < N:
                pos = (pos + 1) % N
                hops += 1
            if pos != p.signer:
                break
            path.append(pos)
            cursor = (pos + 1) % N
            terminal = closer.tag
            i += 2
            if closer.tag == TAG_Y:
                break
        if not path:
            return None
        if terminal == TAG_Y and i != n_records:
            return None
        if path[0] != extender:
            return None
        new_end = cursor
        guard = 0
        while new_end in deleted and guard < N:
            new_end = (new_end + 1) % N
            guard += 1
        if new_end in deleted:
            return None
        hop = cycle_distance(extender, new_end, N)
        if hop == 0:
            return None
        groups.append(Group(extender, tuple(path), terminal, extender,
                            new_end, hop))
        total += hop
        end = new_end
    return ChainShape(tuple(records), tuple(groups), end, total)


def inspect_chain(records: tuple[Record, ...], N: int, oracle, *,
                  genesis: int = 0,
                  deleted: frozenset[int] = frozenset()) -> ChainShape | None:
    """Shape of a complete chain with verified signatures, or None.

    Complete means every group closed with x except a final y; the bare
    genesis record is the complete chain of length zero.
    """
    shape = assemble(records, N, genesis=genesis, deleted=deleted)
    if shape is None:
        return None
    if shape.groups and shape.groups[-1].terminal != TAG_Y:
        return None
    if not chain_signatures_ok(records, oracle):
        return None
    return shape


def inspect_request(records: tuple[Record, ...], N: int, oracle, *,
                    genesis: int = 0,
                    deleted: frozenset[int] = frozenset()) -> ChainShape | None:
    """Shape of a partial chain in flight, or None.

    The final group must be open (closed with x, nonempty path); its end is
    the position whose countersignature the extender wants next.
    """
    shape = assemble(records, N, genesis=genesis, deleted=deleted)
    if shape is None or not shape.groups:
        return None
    last = shape.groups[-1]
    if last.terminal != TAG_X or not last.path:
        return None
    if not chain_signatures_ok(records, oracle):
        return None
    return shape


# ---------------------------------------------------------------------------
# wire helpers


KIND_QUERY = "ask"
KIND_RESPONSE = "countersign"
KIND_CHAIN = "chain"
KIND_REFUSE = "refuse"

_KINDS = (KIND_CHAIN, KIND_QUERY, KIND_RESPONSE, KIND_REFUSE)


def wire(kind: str, records: tuple[Record, ...]) -> bytes:
    return enc_str(kind) + enc_bytes(encode_records(records))


def parse_wire(payload: bytes) -> tuple[str, tuple[Record, ...]] | None:
    try:
        reader = ByteReader(payload)
        kind = reader.read_str()
        body = reader.read_bytes()
        if kind not in _KINDS or not reader.at_end():
            return None
        return kind, decode_records(body)
    except CodecError:
        return None


def cycle_round_steps(N: int) -> int:
    """Steps one round occupies: room for the full query and countersign
    ping pong along the longest route, never less than two."""
    return max(2, 2 * N - 2)


# ---------------------------------------------------------------------------
# protocol logic


class CCProcess(Process):
    """One participant of the chain marker.

    ``signed_log`` maps each weight this process ever vouched for to the
    partial it countersigned, and ``received_log`` does the same for chains
    delivered to it.  A countersignature is granted only when the request
    outweighs everything in both logs, the current holder grants none at
    all, and a delivered chain is accepted only when its weight appears in
    neither log.  Refusals answer with the conflicting artifact, which is
    what makes every refusal provable to a third party.
    """

    def __init__(self, n: int, N: int, oracle, *, genesis_holder: int = 0,
                 round_steps: int | None = None):
        super().__init__(n)
        self.N = N
        self.oracle = oracle
        self.genesis_holder = genesis_holder
        self.round_steps = round_steps if round_steps is not None else cycle_round_steps(N)
        self.deleted: set[int] = set()
        self.marked = n == genesis_holder
        self.marked_round: int | None = GENESIS_ROUND if self.marked else None
        self.chain: tuple[Record, ...] = ((Record(TAG_BASE, genesis_holder),)
                                          if self.marked else ())
        self.chain_groups = 0
        self.weight = 0 if self.marked else None
        self.predecessor: int | None = None
        self.pending: dict[int, int] = {}
        self.signed_log: dict[int, tuple[Record, ...]] = {}
        self.received_log: dict[int, tuple[Record, ...]] = {}
        self.markings: list[Marking] = []
        self.refusals: list[tuple[int, int, str]] = []
        self.evidence: list[tuple[Record, ...]] = []
        self.proofs: dict[int, tuple[Record, ...]] = {}
        self.outstanding: tuple[int, tuple[Record, ...]] | None = None
        self.route: list[int] = []
        self.target: int | None = None
        self.paced = False
        self.ready: list[Send] | None = None

    # -- payer side ---------------------------------------------------------

    def _finish(self, records: tuple[Record, ...], r: int) -> Send:
        """Close the extension.  The terminal is issued in both flavors so
        the next holder can reopen it without another exchange."""
        self.oracle.sign(self.n, record_content(records, TAG_X))
        chain = append_record(self.oracle, self.n, records, TAG_Y)
        self.proofs[r] = chain
        self.marked = False
        self.outstanding = None
        self.route = []
        target, self.target = self.target, None
        return Send(target, wire(KIND_CHAIN, chain), len(chain))

    def _begin_payment(self, r: int) -> list[Send]:
        target = self.pending.pop(r)
        if target == self.n:
            # keeping the marker moves no records and costs nothing
            self.markings.append(Marking(r, self.n, self.n))
            self.marked_round = r
            return []
        records = self.chain
        if records and records[-1].tag == TAG_Y:
            records = records[:-1] + (Record(TAG_X, records[-1].signer),)
        while self.chain_groups + (len(records) - len(self.chain)) < r:
            # one idle self hop per round spent holding without paying
            records = append_record(self.oracle, self.n, records, TAG_X)
        records = append_record(self.oracle, self.n, records, TAG_PATH)
        self.target = target
        self.route = cycle_path(self.n, target, self.N,
                                frozenset(self.deleted))[1:]
        if not self.route:
            return [self._finish(records, r)]
        records = append_record(self.oracle, self.n, records, TAG_X)
        self.outstanding = (self.route[0], records)
        return [Send(self.route[0], wire(KIND_QUERY, records), len(records))]

    def _absorb_countersign(self, responder: int, r: int) -> list[Send]:
        """Fold a granted countersignature into the partial and move on."""
        _, records = self.outstanding
        records = records + (Record(TAG_PATH, responder),)
        self.route.pop(0)
        if not self.route:
            send = self._finish(records, r)
        else:
            records = append_record(self.oracle, self.n, records, TAG_X)
            self.outstanding = (self.route[0], records)
            send = Send(self.route[0], wire(KIND_QUERY, records), len(records))
        if self.paced:
            self.ready = [send]
            return []
        return [send]

    def _on_response(self, sender: int, records: tuple[Record, ...],
                     r: int) -> list[Send]:
        if self.outstanding is None or sender != self.outstanding[0]:
            return []
        if records != self.outstanding[1]:
            return []
        if not self.oracle.verify(sender, record_content(records, TAG_PATH)):
            return []
        return self._absorb_countersign(sender, r)

    def _on_refuse(self, sender: int, records: tuple[Record, ...]) -> None:
        if self.outstanding is None or sender != self.outstanding[0]:
            return
        self.evidence.append(records)
        self.outstanding = None
        self.route = []
        self.target = None

    # -- responder side -----------------------------------------------------

    def _refuse(self, requester: int, r: int, w: int, reason: str,
                artifact: tuple[Record, ...]) -> list[Send]:
        self.refusals.append((r, w, reason))
        return [Send(requester, wire(KIND_REFUSE, artifact), len(artifact))]

    def _on_query(self, sender: int, records: tuple[Record, ...],
                  r: int) -> list[Send]:
        shape = inspect_request(records, self.N, self.oracle,
                                genesis=self.genesis_holder,
                                deleted=frozenset(self.deleted))
        if shape is None:
            return []
        open_group = shape.groups[-1]
        if open_group.extender != sender or open_group.end != self.n:
            return []
        if len(shape.groups) - 1 != r:
            return []
        w = shape.weight
        if self.marked:
            # the holder vouches for nothing: a signature above its own
            # weight is exactly what a rival chain would need to outgrow it
            return self._refuse(sender, r, w, "marked", self.chain)
        over = [v for v in self.signed_log if v >= w]
        if over:
            return self._refuse(sender, r, w, "signed", self.signed_log[max(over)])
        over = [v for v in self.received_log if v >= w]
        if over:
            return self._refuse(sender, r, w, "received", self.received_log[max(over)])
        self.signed_log[w] = records
        self.oracle.sign(self.n, record_content(records, TAG_PATH))
        return [Send(sender, wire(KIND_RESPONSE, records), 1)]

    # -- target side --------------------------------------------------------

    def _accept(self, shape: ChainShape, r: int) -> None:
        self.marked = True
        self.marked_round = r
        self.chain = shape.records
        self.chain_groups = len(shape.groups)
        self.weight = shape.weight
        self.predecessor = shape.groups[-1].extender
        self.markings.append(Marking(r, self.n, self.predecessor))

    def _on_chain(self, sender: int, records: tuple[Record, ...],
                  r: int) -> None:
        shape = inspect_chain(records, self.N, self.oracle,
                              genesis=self.genesis_holder,
                              deleted=frozenset(self.deleted))
        if shape is None or not shape.groups or shape.end != self.n:
            return
        w = shape.weight
        fresh = w not in self.signed_log and w not in self.received_log
        if (fresh and len(shape.groups) == r + 1
                and self.marked_round != r):
            self._accept(shape, r)
        self.received_log.setdefault(w, records)

    # -- dispatch -----------------------------------------------------------

    def _handle(self, t: int, inbox: list[Delivery]) -> list[Send]:
        r = t // self.round_steps
        buckets: dict[str, list[tuple[int, tuple[Record, ...]]]] = {
            kind: [] for kind in _KINDS}
        for d in inbox:
            parsed = parse_wire(d.payload)
            if parsed is not None:
                buckets[parsed[0]].append((d.sender, parsed[1]))
        sends: list[Send] = []
        for kind in _KINDS:
            for sender, records in sorted(
                    buckets[kind], key=lambda e: (e[0], encode_records(e[1]))):
                if kind == KIND_CHAIN:
                    self._on_chain(sender, records, r)
                elif kind == KIND_QUERY:
                    sends.extend(self._on_query(sender, records, r))
                elif kind == KIND_RESPONSE:
                    sends.extend(self._on_response(sender, records, r))
                else:
                    self._on_refuse(sender, records)
        if t % self.round_steps == 0 and self.marked and r in self.pending:
            sends.extend(self._begin_payment(r))
        return sends

    def step(self, t: int, inbox: list[Delivery]) -> list[Send]:
        return self._handle(t, inbox)


class CycleCoinSystem:
    """Driver for the chain marker; the round API matches the other marker
    systems."""

    def __init__(self, N: int, corrupted: frozenset[int] = frozenset(),
                 adversary=None, genesis_holder: int = 0,
                 oracle: SignatureOracle | None = None):
        if N < 2:
            raise ConfigFault("the cycle needs at least two processes")
        self.N = N
        self.corrupted = frozenset(corrupted)
        if oracle is None:
            oracle = SignatureOracle(self.corrupted)
        self.oracle = oracle
        self.genesis_holder = genesis_holder
        self.procs = self._build_processes()
        if genesis_holder not in self.corrupted:
            oracle.sign(genesis_holder, record_content((), TAG_BASE))
        self.net = Network(self.procs, self.corrupted, adversary, oracle)
        self.round_steps = self.procs[0].round_steps
        self.round_index = 0

    def _build_processes(self) -> list[CCProcess]:
        return [CCProcess(n, self.N, self.oracle,
                          genesis_holder=self.genesis_holder)
                for n in range(self.N)]

    def _round_wakes(self, base: int) -> None:
        pass

    def run_round(self, inputs: dict[int, int] | None = None) -> list[Marking]:
        r = self.round_index
        base = r * self.round_steps
        self.net.round = r
        for payer, target in (inputs or {}).items():
            if payer in self.corrupted:
                continue
            proc = self.procs[payer]
            if not proc.marked:
                raise ConfigFault(f"process {payer} is not marked in round {r}")
            if target in proc.deleted:
                raise ConfigFault(f"target {target} was deleted from the cycle")
            proc.pending[r] = target
            self.net.wake(payer, base)
        self._round_wakes(base)
        self.net.run_until(base + self.round_steps - 1)
        self.round_index += 1
        return [m for n in range(self.N) if n not in self.corrupted
                for m in self.procs[n].markings if m.round == r]


def cycle_payment_messages(distance: int) -> int:
    """Honest message cost of a payment over the given cycle distance."""
    return 2 * max(distance - 1, 0) + (1 if distance >= 1 else 0)


def measure_cycle_z(N: int) -> list[int]:
    """Message cost of one payment from the genesis holder to each target,
    measured on fresh systems."""
    costs = []
    for target in range(N):
        system = CycleCoinSystem(N)
        system.run_round({0: target})
        costs.append(system.net.metrics.messages())
    return costs


# ---------------------------------------------------------------------------
# third party payment proofs


def verify_payment_claim(target: CCProcess, records: tuple[Record, ...],
                         round_index: int):
    """Audit the claim that ``records`` paid ``target`` in ``round_index``.

    Returns ("paid", None), ("refuted", artifact) or ("invalid", None).
    The audit works like the real thing: the chain is offered to the
    target, which either has accepted it, accepts it now, or produces the
    equal weight artifact that shows why it never will.  An honest payer's
    chain is never refuted, because no equal weight rival can exist without
    the payer's own signature.
    """
    shape = inspect_chain(records, target.N, target.oracle,
                          genesis=target.genesis_holder,
                          deleted=frozenset(target.deleted))
    if (shape is None or not shape.groups or shape.end != target.n
            or len(shape.groups) != round_index + 1):
        return "invalid", None
    w = shape.weight
    accepted = any(m.round == round_index and m.target == target.n
                   for m in target.markings)
    if accepted:
        if target.received_log.get(w) == records:
            return "paid", None
        conflict = _equal_weight_conflict(target, w, records)
        return ("refuted", conflict) if conflict is not None else ("invalid", None)
    conflict = _equal_weight_conflict(target, w, records)
    if conflict is not None:
        return "refuted", conflict
    if target.marked_round is None or target.marked_round < round_index:
        # late delivery: the target can still take the marker on the spot
        target._accept(shape, round_index)
    target.received_log.setdefault(w, records)
    return "paid", None


def _equal_weight_conflict(target: CCProcess, w: int,
                           records: tuple[Record, ...]):
    for log in (target.signed_log, target.received_log):
        artifact = log.get(w)
        if artifact is not None and artifact != records:
            return artifact
    return None


# ---------------------------------------------------------------------------
# response enforcement


MAIN_NONCE = b"m"
COMPLAINT_PREFIX = b"c"
RESPONSE_PREFIX = b"r"

COMPLY = enc_int(1)


def por_period_steps(f: int) -> int:
    """Steps per query period: query, answer, complaint broadcast, response
    broadcast."""
    return 2 * f + 8


def refusal_wire(evidence: tuple[Record, ...]) -> bytes:
    return enc_int(2) + enc_bytes(encode_records(evidence))


def parse_refusal(value: bytes) -> tuple[Record, ...] | None:
    try:
        reader = ByteReader(value)
        if reader.read_int() != 2:
            return None
        body = reader.read_bytes()
        if not reader.at_end():
            return None
        return decode_records(body)
    except CodecError:
        return None


class PoRProcess(CCProcess):
    """Chain marker participant under the response enforcement schedule.

    A round is split into ``periods`` periods of 2f+8 steps.  The payer
    gets one exchange per period: query at the first step, answer at the
    second.  On silence the payer broadcasts the unanswered request (steps
    2..f+4), the accused process broadcasts its countersignature or its
    justification (steps f+5..2f+7), and every honest process draws the
    same conclusion: the answer exists and the payment goes on, or the
    refusal was justified and the payment stops, or the process is deleted
    from the cycle and the payment routes around it.  Deletion changes no
    weights: the same partial simply points one position further.
    """

    def __init__(self, n: int, N: int, f: int, oracle, *,
                 genesis_holder: int = 0, periods: int | None = None):
        self.f = f
        self.period_steps = por_period_steps(f)
        self.periods = periods if periods is not None else N
        super().__init__(n, N, oracle, genesis_holder=genesis_holder,
                         round_steps=self.periods * self.period_steps)
        self.paced = True
        self.subs: dict[bytes, tuple[DSProcess, int]] = {}
        self.accused: dict[tuple[int, int], tuple[int, tuple[Record, ...]]] = {}
        self.pending_response: dict[tuple[int, int], bytes] = {}
        self.query_mark = None
        self.deletions: list[tuple[int, int, int]] = []

    # -- broadcast plumbing -------------------------------------------------

    def _sub(self, nonce: bytes, leader: int, base: int,
             value: bytes | None = None) -> DSProcess:
        if nonce not in self.subs:
            scoped = ScopedOracle(self.oracle, nonce)
            proc = DSProcess(self.n, self.N, self.f, leader, value, scoped,
                             default_relays(self.N, self.f, leader), nonce)
            self.subs[nonce] = (proc, base)
        return self.subs[nonce][0]

    def _route_sub(self, nonce: bytes, t: int,
                   inbox: list[Delivery]) -> list[Send]:
        prefix, rest = nonce[:1], nonce[1:]
        if prefix == COMPLAINT_PREFIX and len(rest) == 12:
            r = int.from_bytes(rest[0:4], "big")
            k = int.from_bytes(rest[4:8], "big")
            a = int.from_bytes(rest[8:12], "big")
            if not 0 <= a < self.N or not 0 <= k < self.periods:
                return []
            base = r * self.round_steps + k * self.period_steps + 2
        elif prefix == RESPONSE_PREFIX and len(rest) == 8:
            r = int.from_bytes(rest[0:4], "big")
            k = int.from_bytes(rest[4:8], "big")
            info = self.accused.get((r, k))
            if info is None:
                return []
            a = info[0]
            base = r * self.round_steps + k * self.period_steps + self.f + 5
        else:
            return []
        local = t - base
        if not 1 <= local <= self.f + 2:
            return []
        sub = self._sub(nonce, a, base)
        return sub.step(local, inbox)

    # -- schedule hooks -----------------------------------------------------

    def _complain(self, t: int, r: int, k: int) -> list[Send]:
        nonce = COMPLAINT_PREFIX + nonce_for(r, k, self.n)
        sub = self._sub(nonce, self.n, t,
                        encode_records(self.outstanding[1]))
        return sub.step(0, [])

    def _read_complaints(self, r: int, k: int) -> None:
        """End of the complaint broadcast: everyone settles on at most one
        valid complaint for the period, lowest complainer first."""
        for a in range(self.N):
            nonce = COMPLAINT_PREFIX + nonce_for(r, k, a)
            entry = self.subs.get(nonce)
            if entry is None:
                continue
            value, fault = entry[0].decide_bytes()
            if fault:
                continue
            try:
                request = decode_records(value)
            except CodecError:
                continue
            shape = inspect_request(request, self.N, self.oracle,
                                    genesis=self.genesis_holder,
                                    deleted=frozenset(self.deleted))
            if shape is None or len(shape.groups) - 1 != r:
                continue
            if shape.groups[-1].extender != a:
                continue
            self.accused[(r, k)] = (shape.groups[-1].end, request)
            break
        info = self.accused.get((r, k))
        if info is None or info[0] != self.n:
            return
        accused, request = info
        shape = inspect_request(request, self.N, self.oracle,
                                genesis=self.genesis_holder,
                                deleted=frozenset(self.deleted))
        w = shape.weight
        if self.marked:
            self.refusals.append((r, w, "marked"))
            value = refusal_wire(self.chain)
        elif any(v >= w for v in self.signed_log):
            best = max(v for v in self.signed_log if v >= w)
            self.refusals.append((r, w, "signed"))
            value = refusal_wire(self.signed_log[best])
        elif any(v >= w for v in self.received_log):
            best = max(v for v in self.received_log if v >= w)
            self.refusals.append((r, w, "received"))
            value = refusal_wire(self.received_log[best])
        else:
            self.signed_log[w] = request
            self.oracle.sign(self.n, record_content(request, TAG_PATH))
            value = COMPLY
        self.pending_response[(r, k)] = value

    def _answer_complaint(self, t: int, r: int, k: int) -> list[Send]:
        value = self.pending_response.pop((r, k), None)
        if value is None:
            return []
        nonce = RESPONSE_PREFIX + nonce_for(r, k)
        sub = self._sub(nonce, self.n, t, value)
        return sub.step(0, [])

    def _refusal_justified(self, accused: int, evidence: tuple[Record, ...],
                           w: int) -> bool:
        """A refusal stands if the evidence is an artifact the rules accept:
        a partial the accused countersigned at no lesser weight, or a chain
        ending at the accused, which covers both the received chain rule and
        a holder showing its marking."""
        chain = inspect_chain(evidence, self.N, self.oracle,
                              genesis=self.genesis_holder,
                              deleted=frozenset(self.deleted))
        if chain is not None and chain.end == accused:
            return True
        partial = inspect_request(evidence, self.N, self.oracle,
                                  genesis=self.genesis_holder,
                                  deleted=frozenset(self.deleted))
        if (partial is not None and partial.end == accused
                and partial.weight >= w
                and self.oracle.verify(accused,
                                       record_content(evidence, TAG_PATH))):
            return True
        return False

    def _reroute(self, r: int) -> None:
        """Point the in flight partial past a deletion.  The records do not
        change; with the shorter cycle they simply end one or more
        positions further on, and the weight moves with the endpoint."""
        responder, records = self.outstanding
        shape = assemble(records, self.N, genesis=self.genesis_holder,
                         deleted=frozenset(self.deleted))
        if shape is None:
            self.outstanding = None
            self.route = []
            return
        nxt = shape.groups[-1].end
        if nxt == self.target:
            final = records[:-1] + (Record(TAG_Y, self.n),)
            self.oracle.sign(self.n, record_content(records[:-1], TAG_Y))
            self.proofs[r] = final
            self.marked = False
            self.outstanding = None
            self.route = []
            target, self.target = self.target, None
            self.ready = [Send(target, wire(KIND_CHAIN, final), len(final))]
            return
        self.route = cycle_path(nxt, self.target, self.N,
                                frozenset(self.deleted))
        self.outstanding = (nxt, records)
        self.ready = [Send(nxt, wire(KIND_QUERY, records), len(records))]

    def _settle_period(self, r: int, k: int) -> None:
        info = self.accused.get((r, k))
        if info is None:
            return
        accused, request = info
        entry = self.subs.get(RESPONSE_PREFIX + nonce_for(r, k))
        value, fault = entry[0].decide_bytes() if entry else (b"", True)
        payer = (self.outstanding is not None
                 and self.outstanding[0] == accused
                 and self.outstanding[1] == request)
        if not fault and value == COMPLY and self.oracle.verify(
                accused, record_content(request, TAG_PATH)):
            if payer:
                self._absorb_countersign(accused, r)
            return
        evidence = parse_refusal(value) if not fault else None
        shape = inspect_request(request, self.N, self.oracle,
                                genesis=self.genesis_holder,
                                deleted=frozenset(self.deleted))
        w = shape.weight if shape is not None else 0
        if evidence is not None and self._refusal_justified(accused, evidence, w):
            if payer:
                self.evidence.append(evidence)
                self.outstanding = None
                self.route = []
                self.target = None
            return
        self.deleted.add(accused)
        self.deletions.append((r, k, accused))
        if payer:
            self._reroute(r)

    # -- dispatch -----------------------------------------------------------

    def step(self, t: int, inbox: list[Delivery]) -> list[Send]:
        r = t // self.round_steps
        k, off = divmod(t % self.round_steps, self.period_steps)
        main: list[Delivery] = []
        by_sub: dict[bytes, list[Delivery]] = {}
        for d in inbox:
            try:
                body, nonce = split_payload(d.payload)
            except CodecError:
                continue
            if nonce == MAIN_NONCE:
                main.append(Delivery(d.sender, body))
            elif nonce:
                by_sub.setdefault(nonce, []).append(Delivery(d.sender, body))
        plain = self._handle(t, main)
        sub_sends: list[Send] = []
        for nonce in sorted(by_sub):
            sub_sends.extend(self._route_sub(nonce, t, by_sub[nonce]))
        if off == 0 and self.ready is not None:
            plain.extend(self.ready)
            self.ready = None
        if off == 0:
            # remember what went out; a complaint is only in order if the
            # very same query is still unanswered two steps later
            self.query_mark = ((r, k), self.outstanding) if self.outstanding else None
        elif off == 2 and self.outstanding is not None \
                and self.query_mark == ((r, k), self.outstanding):
            sub_sends.extend(self._complain(t, r, k))
        elif off == self.f + 4:
            self._read_complaints(r, k)
        elif off == self.f + 5:
            sub_sends.extend(self._answer_complaint(t, r, k))
        elif off == 2 * self.f + 7:
            self._settle_period(r, k)
        wrapped = [Send(s.recipient, tag_payload(s.payload, MAIN_NONCE),
                        s.signatures, MAIN_NONCE) for s in plain]
        wrapped.extend(Send(s.recipient, tag_payload(s.payload, s.nonce),
                            s.signatures, s.nonce) for s in sub_sends)
        return wrapped


class PoRSystem(CycleCoinSystem):
    """Chain marker driver with the response enforcement schedule."""

    def __init__(self, N: int, f: int, corrupted: frozenset[int] = frozenset(),
                 adversary=None, genesis_holder: int = 0,
                 oracle: SignatureOracle | None = None,
                 periods: int | None = None):
        if not 0 <= f <= N - 2:
            raise ConfigFault(f"the broadcasts need f <= N-2, got N={N} f={f}")
        self.f = f
        self.periods = periods if periods is not None else N
        super().__init__(N, corrupted, adversary, genesis_holder, oracle)

    def _build_processes(self) -> list[PoRProcess]:
        return [PoRProcess(n, self.N, self.f, self.oracle,
                           genesis_holder=self.genesis_holder,
                           periods=self.periods)
                for n in range(self.N)]

    def _round_wakes(self, base: int) -> None:
        period = por_period_steps(self.f)
        offsets = (0, 2, self.f + 4, self.f + 5, 2 * self.f + 7)
        for n in range(self.N):
            if n in self.corrupted:
                continue
            for k in range(self.periods):
                for off in offsets:
                    self.net.wake(n, base + k * period + off)
