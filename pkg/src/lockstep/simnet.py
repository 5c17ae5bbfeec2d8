"""Deterministic lockstep network with an idealized signature registry.

Everything in this package runs on the model implemented here.  Time advances
in integer steps.  A message sent at step t is delivered at the beginning of
step t+1.  Honest processes are deterministic functions of what they have
received so far, and the adversary speaks for a fixed set of corrupted
processes chosen before the run starts.  The adversary is not rushing: when
it emits messages at step t it has seen only traffic delivered up to step t,
never the honest messages currently in flight.

Signatures are modelled as an oracle that remembers every (signer, content)
pair it has issued.  Verification succeeds exactly on remembered pairs, so a
signature of an honest process can never be fabricated; attempting to do so
raises :class:`ForgeryViolation`.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field

import numpy as np


class ProtocolFault(Exception):
    """Base class for rule violations detected by the framework."""


class ForgeryViolation(ProtocolFault):
    """The adversary tried to sign on behalf of an honest process."""


class CodecError(ProtocolFault):
    """Bytes on the wire did not parse as the expected structure."""


class ConfigFault(ProtocolFault):
    """A run was configured in a way the protocol rules forbid."""


# ---------------------------------------------------------------------------
# canonical byte encoding
#
# All wire payloads and all signed contents are built from these helpers.
# Every piece is length prefixed, which makes each encoding prefix free and
# the concatenation of encodings unambiguous to parse.

def enc_bytes(data: bytes) -> bytes:
    """Length prefixed byte string: 4 byte big endian length, then the bytes."""
    return len(data).to_bytes(4, "big") + data


def enc_int(value: int) -> bytes:
    """Signed 8 byte big endian integer, length prefixed like any chunk."""
    return enc_bytes(int(value).to_bytes(8, "big", signed=True))


def enc_str(text: str) -> bytes:
    return enc_bytes(text.encode("utf-8"))


class ByteReader:
    """Sequential reader for concatenated length prefixed chunks."""

    def __init__(self, data: bytes):
        self._data = data
        self._pos = 0

    def read_bytes(self) -> bytes:
        if self._pos + 4 > len(self._data):
            raise CodecError("truncated length prefix")
        length = int.from_bytes(self._data[self._pos:self._pos + 4], "big")
        start = self._pos + 4
        end = start + length
        if end > len(self._data):
            raise CodecError("truncated chunk")
        self._pos = end
        return self._data[start:end]

    def read_int(self) -> int:
        chunk = self.read_bytes()
        if len(chunk) != 8:
            raise CodecError("bad integer width")
        return int.from_bytes(chunk, "big", signed=True)

    def read_str(self) -> str:
        try:
            return self.read_bytes().decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CodecError("bad utf-8 chunk") from exc

    def at_end(self) -> bool:
        return self._pos == len(self._data)


SEPARATOR = b"\x00"


def tag_payload(content: bytes, nonce: bytes) -> bytes:
    """Suffix ``content`` with an instance nonce.

    The content is length prefixed and followed by a reserved separator byte,
    so the (content, nonce) split is unambiguous for any nonce bytes.
    """
    return enc_bytes(content) + SEPARATOR + nonce


def split_payload(data: bytes) -> tuple[bytes, bytes]:
    """Inverse of :func:`tag_payload`.  Raises CodecError on malformed input."""
    reader = ByteReader(data)
    content = reader.read_bytes()
    rest = data[len(enc_bytes(content)):]
    if not rest.startswith(SEPARATOR):
        raise CodecError("missing nonce separator")
    return content, rest[len(SEPARATOR):]


# ---------------------------------------------------------------------------
# signatures


class SignatureOracle:
    """Registry of issued signatures.

    A signature is the fact that (signer, content) was registered.  Honest
    code registers through :meth:`sign`; adversarial code must go through
    :meth:`adversary_sign`, which refuses to sign for honest processes.
    """

    def __init__(self, corrupted: frozenset[int] = frozenset()):
        self.corrupted = frozenset(corrupted)
        self._issued: set[tuple[int, bytes]] = set()

    def sign(self, signer: int, content: bytes) -> None:
        self._issued.add((signer, content))

    def adversary_sign(self, signer: int, content: bytes) -> None:
        if signer not in self.corrupted:
            raise ForgeryViolation(
                f"adversary attempted to sign for honest process {signer}")
        self._issued.add((signer, content))

    def verify(self, signer: int, content: bytes) -> bool:
        return (signer, content) in self._issued


class ScopedOracle:
    """View of an oracle whose contents are all suffixed with a fixed nonce.

    Protocol code written against a plain oracle can run inside a muxed
    instance unchanged: its signatures bind the instance nonce, so they can
    never be replayed into a sibling instance.
    """

    def __init__(self, base: SignatureOracle, nonce: bytes):
        self._base = base
        self._nonce = nonce

    @property
    def corrupted(self) -> frozenset[int]:
        return self._base.corrupted

    def sign(self, signer: int, content: bytes) -> None:
        self._base.sign(signer, tag_payload(content, self._nonce))

    def adversary_sign(self, signer: int, content: bytes) -> None:
        self._base.adversary_sign(signer, tag_payload(content, self._nonce))

    def verify(self, signer: int, content: bytes) -> bool:
        return self._base.verify(signer, tag_payload(content, self._nonce))


@dataclass(frozen=True)
class SignedMessage:
    """A payload plus a stack of countersignatures, outermost last.

    Each stack entry stores the exact bytes that were signed, verbatim.  For
    a well formed message entry k signed the serialization of the message
    truncated to its first k entries, but adversarial senders may put
    anything there; :meth:`verify_stack` recomputes the expected bytes and
    rejects mismatches.
    """

    payload: bytes
    stack: tuple[tuple[int, bytes], ...] = ()

    def to_bytes(self) -> bytes:
        parts = [enc_bytes(self.payload)]
        for signer, content in self.stack:
            parts.append(enc_int(signer))
            parts.append(enc_bytes(content))
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, data: bytes) -> "SignedMessage":
        reader = ByteReader(data)
        payload = reader.read_bytes()
        stack = []
        while not reader.at_end():
            signer = reader.read_int()
            content = reader.read_bytes()
            stack.append((signer, content))
        return cls(payload, tuple(stack))

    @property
    def signers(self) -> tuple[int, ...]:
        return tuple(signer for signer, _ in self.stack)

    def signed_by(self, oracle, signer: int, *, adversarial: bool = False) -> "SignedMessage":
        content = self.to_bytes()
        if adversarial:
            oracle.adversary_sign(signer, content)
        else:
            oracle.sign(signer, content)
        return SignedMessage(self.payload, self.stack + ((signer, content),))

    def verify_stack(self, oracle) -> bool:
        expected = enc_bytes(self.payload)
        for signer, content in self.stack:
            if content != expected or not oracle.verify(signer, content):
                return False
            expected = expected + enc_int(signer) + enc_bytes(content)
        return True


# ---------------------------------------------------------------------------
# network fabric


@dataclass(frozen=True)
class Send:
    """One outgoing message.  ``signatures`` is the signature stack depth of
    the payload and feeds the per round signature metric."""

    recipient: int
    payload: bytes
    signatures: int = 0
    nonce: bytes = b""


@dataclass(frozen=True)
class Delivery:
    sender: int
    payload: bytes


class Process:
    """Base class for honest protocol logic.

    Subclasses implement :meth:`step` and return their sends.  A process is
    stepped whenever it has pending deliveries or when it has registered a
    wake for that step through the network.
    """

    def __init__(self, n: int):
        self.n = n
        self.net: Network | None = None

    def register_wakes(self) -> None:
        """Called once the process is attached to a network.  Subclasses
        schedule their spontaneous steps here via ``self.net.wake``."""

    def step(self, t: int, inbox: list[Delivery]) -> list[Send]:
        return []


class Adversary:
    """Controller for all corrupted processes.

    ``act`` runs once per executed step and returns (sender, Send) pairs on
    behalf of corrupted processes.  It may inspect ``net.observed``, the
    archive of everything delivered to corrupted processes so far.
    """

    corrupted: frozenset[int] = frozenset()

    def act(self, t: int, net: "Network") -> list[tuple[int, Send]]:
        return []


@dataclass(frozen=True)
class TranscriptEvent:
    step: int
    round: int
    sender: int
    recipient: int
    payload: bytes
    signatures: int


class Transcript:
    """Ordered record of every send event, honest and adversarial."""

    def __init__(self):
        self.events: list[TranscriptEvent] = []

    def append(self, event: TranscriptEvent) -> None:
        self.events.append(event)

    def to_jsonl(self) -> str:
        lines = []
        for e in self.events:
            lines.append(json.dumps({
                "step": e.step,
                "round": e.round,
                "sender": e.sender,
                "recipient": e.recipient,
                "payload_hex": e.payload.hex(),
                "n_signatures": e.signatures,
            }, separators=(",", ":")))
        return "\n".join(lines) + ("\n" if lines else "")


class MetricsLedger:
    """Message and signature counters for honest sends, keyed by round and
    instance nonce.  Adversarial traffic is never counted here."""

    def __init__(self):
        self._rows: dict[tuple[int, bytes], list[int]] = {}

    def add(self, round_index: int, nonce: bytes, signatures: int) -> None:
        row = self._rows.setdefault((round_index, nonce), [0, 0])
        row[0] += 1
        row[1] += signatures

    def messages(self, nonce: bytes | None = None) -> int:
        return sum(row[0] for key, row in self._rows.items()
                   if nonce is None or key[1] == nonce)

    def signatures(self, nonce: bytes | None = None) -> int:
        return sum(row[1] for key, row in self._rows.items()
                   if nonce is None or key[1] == nonce)

    def round_messages(self, round_index: int, nonce: bytes | None = None) -> int:
        return sum(row[0] for key, row in self._rows.items()
                   if key[0] == round_index and (nonce is None or key[1] == nonce))

    def per_nonce(self) -> dict[bytes, tuple[int, int]]:
        out: dict[bytes, list[int]] = {}
        for (_, nonce), row in self._rows.items():
            agg = out.setdefault(nonce, [0, 0])
            agg[0] += row[0]
            agg[1] += row[1]
        return {k: (v[0], v[1]) for k, v in out.items()}

    def to_csv(self) -> str:
        per_round: dict[int, list[int]] = {}
        for (round_index, _), row in self._rows.items():
            agg = per_round.setdefault(round_index, [0, 0])
            agg[0] += row[0]
            agg[1] += row[1]
        lines = ["round,messages,signatures"]
        for round_index in sorted(per_round):
            msgs, sigs = per_round[round_index]
            lines.append(f"{round_index},{msgs},{sigs}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Observation:
    """One message as seen by the adversary (delivered to a corrupted id)."""

    step: int
    recipient: int
    sender: int
    payload: bytes


class Network:
    """Lockstep scheduler.

    All-honest runs are stepped sparsely: only steps that have pending
    deliveries or registered wakes execute, and only the touched processes
    are stepped, so cost scales with traffic rather than with N times steps.
    With an adversary attached every step in the window runs, because the
    adversary may act spontaneously.
    """

    def __init__(self, processes: list[Process],
                 corrupted: frozenset[int] = frozenset(),
                 adversary: Adversary | None = None,
                 oracle: SignatureOracle | None = None):
        self.processes = processes
        self.N = len(processes)
        self.corrupted = frozenset(corrupted)
        self.adversary = adversary
        self.oracle = oracle if oracle is not None else SignatureOracle(self.corrupted)
        self.round = 0
        self.now = 0
        self.transcript = Transcript()
        self.metrics = MetricsLedger()
        self.observed: list[Observation] = []
        self._pending: dict[int, dict[int, list[Delivery]]] = {}
        self._wakes: dict[int, set[int]] = {}
        self._agenda: list[int] = []
        for p in processes:
            p.net = self
        for p in processes:
            if p.n not in self.corrupted:
                p.register_wakes()
        if adversary is not None and not adversary.corrupted <= self.corrupted:
            raise ConfigFault("adversary controls ids outside the corrupted set")

    # -- scheduling ---------------------------------------------------------

    def wake(self, pid: int, step: int) -> None:
        if step < self.now:
            raise ConfigFault(f"wake in the past: step {step}, now {self.now}")
        self._wakes.setdefault(step, set()).add(pid)
        heapq.heappush(self._agenda, step)

    def _queue(self, step: int, recipient: int, delivery: Delivery) -> None:
        if not 0 <= recipient < self.N:
            raise ConfigFault(f"recipient {recipient} out of range")
        self._pending.setdefault(step, {}).setdefault(recipient, []).append(delivery)
        heapq.heappush(self._agenda, step)

    def _record(self, t: int, sender: int, send: Send, honest: bool) -> None:
        self.transcript.append(TranscriptEvent(
            t, self.round, sender, send.recipient, send.payload, send.signatures))
        if honest:
            self.metrics.add(self.round, send.nonce, send.signatures)
        self._queue(t + 1, send.recipient, Delivery(sender, send.payload))

    def _execute(self, t: int) -> None:
        inboxes = self._pending.pop(t, {})
        for recipient in sorted(inboxes):
            if recipient in self.corrupted:
                for d in inboxes[recipient]:
                    self.observed.append(Observation(t, recipient, d.sender, d.payload))
        wakers = self._wakes.pop(t, set())
        active = sorted((set(inboxes) | wakers) - self.corrupted)
        for n in active:
            sends = self.processes[n].step(t, inboxes.get(n, []))
            for send in sends:
                self._record(t, n, send, honest=True)
        if self.adversary is not None:
            for sender, send in self.adversary.act(t, self):
                if sender not in self.corrupted:
                    raise ConfigFault(f"adversary sent as honest process {sender}")
                self._record(t, sender, send, honest=False)

    def run_until(self, last_step: int) -> None:
        """Execute steps from ``now`` through ``last_step`` inclusive."""
        if self.adversary is not None:
            for t in range(self.now, last_step + 1):
                self._execute(t)
            self.now = last_step + 1
            return
        while self._agenda and self._agenda[0] <= last_step:
            t = heapq.heappop(self._agenda)
            while self._agenda and self._agenda[0] == t:
                heapq.heappop(self._agenda)
            if t < self.now:
                continue
            self._execute(t)
            self.now = t + 1
        self.now = max(self.now, last_step + 1)


def seeded_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent deterministic stream for (seed, key path)."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))
