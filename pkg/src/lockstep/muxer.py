"""Running many protocol instances side by side on one network.

Each instance gets a nonce.  Outgoing payloads are suffixed with the nonce,
incoming payloads are demultiplexed by it, and signatures issued inside an
instance bind the nonce through :class:`~lockstep.simnet.ScopedOracle`, so
nothing signed in one instance verifies in another.  Messages whose nonce is
unknown, or which do not parse as tagged payloads at all, are dropped.

Instances are serviced in ascending nonce order within a step, which keeps
transcripts reproducible, and the metrics ledger sees each send under its
instance nonce, so per instance counts are exactly additive.
"""

from __future__ import annotations

from lockstep.simnet import CodecError, Delivery, Process, Send, split_payload, tag_payload


def nonce_for(*ids: int) -> bytes:
    """Dense instance nonce: each id packed as 4 big endian bytes."""
    return b"".join(int(i).to_bytes(4, "big") for i in ids)


class MuxHost(Process):
    """Hosts one sub process per nonce and routes traffic between them.

    ``wakes`` maps a nonce to the steps at which its sub process must run
    even without deliveries (for example a broadcaster sending its first
    message).  The host registers the union with the network and consults
    the map when deciding which instances to service.
    """

    def __init__(self, n: int, instances: dict[bytes, Process],
                 wakes: dict[bytes, frozenset[int]] | None = None):
        super().__init__(n)
        self.instances = dict(instances)
        self.wakes = {nonce: frozenset(steps) for nonce, steps in (wakes or {}).items()}
        self._later: dict[int, set[bytes]] = {}

    def register_wakes(self) -> None:
        for steps in self.wakes.values():
            for s in steps:
                self.net.wake(self.n, s)

    def wake_instance(self, nonce: bytes, step: int) -> None:
        """Schedule one extra servicing of ``nonce`` at ``step``.

        Unlike the static wake map this works mid run, so a driver can
        decide round by round which instance needs a spontaneous step.
        """
        self._later.setdefault(step, set()).add(nonce)
        self.net.wake(self.n, step)

    def step(self, t: int, inbox: list[Delivery]) -> list[Send]:
        groups: dict[bytes, list[Delivery]] = {}
        for d in inbox:
            try:
                content, nonce = split_payload(d.payload)
            except CodecError:
                continue
            if nonce in self.instances:
                groups.setdefault(nonce, []).append(Delivery(d.sender, content))
        due = self._later.pop(t, set())
        out: list[Send] = []
        for nonce in sorted(self.instances):
            if (nonce not in groups and nonce not in due
                    and t not in self.wakes.get(nonce, frozenset())):
                continue
            sub_sends = self.instances[nonce].step(t, groups.get(nonce, []))
            for send in sub_sends:
                out.append(Send(send.recipient, tag_payload(send.payload, nonce),
                                send.signatures, nonce))
        return out
