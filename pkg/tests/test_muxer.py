"""Instance multiplexing: nonce packing and cross-instance isolation."""

from hypothesis import given, strategies as st

from lockstep.muxer import MuxHost, nonce_for
from lockstep.simnet import Network, Process, Send, enc_int, tag_payload


@given(st.lists(st.integers(min_value=0, max_value=2 ** 32 - 1),
                min_size=1, max_size=4))
def test_nonce_packing_is_dense_and_invertible(ids):
    nonce = nonce_for(*ids)
    assert len(nonce) == 4 * len(ids)
    unpacked = [int.from_bytes(nonce[k:k + 4], "big")
                for k in range(0, len(nonce), 4)]
    assert unpacked == ids


def test_distinct_id_tuples_get_distinct_nonces():
    seen = {nonce_for(a, b) for a in range(5) for b in range(5)}
    assert len(seen) == 25
    assert nonce_for(1, 2) != nonce_for(2, 1)


class _Echo(Process):
    """Replies to every delivery with the same payload; remembers senders."""

    def __init__(self, n, peer):
        super().__init__(n)
        self.peer = peer
        self.heard = []

    def step(self, t, inbox):
        for d in inbox:
            self.heard.append((t, d.sender, d.payload))
        if t == 0:
            return [Send(self.peer, enc_int(self.n))]
        return []


def test_instances_stay_separated():
    a, b = nonce_for(1), nonce_for(2)
    hosts = [
        MuxHost(0, {a: _Echo(0, 1), b: _Echo(0, 1)},
                {a: frozenset({0}), b: frozenset({0})}),
        MuxHost(1, {a: _Echo(1, 0)}),
    ]
    net = Network(hosts, frozenset())
    net.run_until(2)
    heard = hosts[1].instances[a].heard
    # only the matching instance hears host 0, with the nonce stripped
    assert heard == [(1, 0, enc_int(0))]


def test_unknown_nonce_is_dropped():
    known, stray = nonce_for(1), nonce_for(9)

    class _Blaster(Process):
        def register_wakes(self):
            self.net.wake(self.n, 0)

        def step(self, t, inbox):
            if t == 0:
                return [Send(1, tag_payload(enc_int(5), stray)),
                        Send(1, b"not even a tagged payload")]
            return []

    listener = MuxHost(1, {known: _Echo(1, 0)})
    net = Network([_Blaster(0), listener], frozenset())
    net.run_until(2)
    assert listener.instances[known].heard == []


def test_mid_run_instance_wake():
    nonce = nonce_for(3)

    class _Counter(Process):
        def __init__(self, n):
            super().__init__(n)
            self.steps = []

        def step(self, t, inbox):
            self.steps.append(t)
            return []

    host = MuxHost(0, {nonce: _Counter(0)})
    net = Network([host], frozenset())
    host.wake_instance(nonce, 2)
    net.run_until(4)
    assert host.instances[nonce].steps == [2]
