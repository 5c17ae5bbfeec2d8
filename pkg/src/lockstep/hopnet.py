"""Cycle hop payment network with trusted intermediaries.

Several cycle economies run side by side, one per directed cycle, each a
bank of chain marking instances over the cycle's own ordering.  A process
holding value on one cycle can pay along that cycle cheaply when the
target is nearby.  When the target is far, the payment hops: an
intermediary holding value on another cycle promises to carry the payment
forward there, and the route becomes a few short in-cycle runs stitched
together by promises.

The route graph has one vertex per (cycle, process) pair.  Step edges
follow each cycle's orientation; hop edges connect two vertices of the
same process when that process is a willing intermediary with value on
the destination cycle.  A route of D edges with Z hops costs exactly
2D + Z messages end to end: two per promise, one signed intent to the
payee, 2d - 1 for an in-cycle leg of d steps, and two per collected
payment proof.

Payments execute as macro rounds of micro rounds: micro round j runs one
round of every bank, carrying the j-th in-cycle leg, while every other
bank books self transfers, which cost nothing.  The payee decides it was
paid from the payer's signed intent, the promise set and the final
in-cycle credit.

When the payee claims it was not paid, the payer walks the route
backwards.  At each edge the upstream party either exhibits the chain it
paid with, which the downstream instance state confirms or refutes, or
admits it never paid because it was never paid itself, moving the walk
one edge up.  A single dishonest participant is always the one accused,
and an honest participant never is.
"""

from __future__ import annotations

import csv
import io
from collections import deque
from dataclasses import dataclass

from .cyclecoin import verify_payment_claim
from .payments import Bank
from .simnet import (ConfigFault, SignatureOracle, enc_int, enc_str,
                     seeded_rng)

TRACE_ADMIT = "admitted non-payment"
TRACE_PAID = "exhibit confirmed in round"
TRACE_LATE = "exhibit valid but withheld past the round"
TRACE_BAD = "exhibit rejected"


# ---------------------------------------------------------------------------
# topologies


@dataclass(frozen=True)
class CycleSet:
    """Directed cycles over a common process set, each a permutation."""

    N: int
    cycles: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        for cycle in self.cycles:
            if sorted(cycle) != list(range(self.N)):
                raise ConfigFault("each cycle must order all N processes")


def gen_random_cycles(N: int, K: int, seed: int) -> CycleSet:
    """K random cyclic orders, both orientations of each: 2K cycles."""
    rng = seeded_rng(seed, N, K)
    cycles = []
    for _ in range(K):
        order = tuple(int(x) for x in rng.permutation(N))
        cycles.append(order)
        cycles.append(tuple(reversed(order)))
    return CycleSet(N, tuple(cycles))


def gen_binary_search_cycle(N: int) -> tuple[int, ...]:
    """One cycle whose edges mimic a binary search over positions.

    Paths grow by repeatedly stepping to the floor median of the open
    interval ahead, seeding a new path just below each median; finished
    paths are joined in discovery order.  Long range edges early, short
    range edges late, so walks can home in on any position quickly.
    """
    if N < 3:
        raise ConfigFault("binary search cycle needs N >= 3")
    paths: list[list[int]] = []
    queue: deque[tuple[int, int, int]] = deque([(0, 0, N)])
    while queue:
        start, lo, hi = queue.popleft()
        path = [start]
        cur = start
        while True:
            m = (lo + hi) // 2
            if m == lo:
                break
            path.append(m)
            if m - 1 > lo:
                queue.append((m - 1, lo, m - 1))
            cur = m
            lo = m
        paths.append(path)
    cycle = [n for path in paths for n in path]
    return tuple(cycle)


def gen_binary_search_pair(N: int) -> CycleSet:
    """The descending base cycle plus the binary search cycle."""
    descending = tuple(range(N - 1, -1, -1))
    return CycleSet(N, (descending, gen_binary_search_cycle(N)))


def save_cycles(path: str, cycleset: CycleSet) -> None:
    with open(path, "w", encoding="ascii") as fh:
        for cycle in cycleset.cycles:
            fh.write(" ".join(str(n) for n in cycle) + "\n")


def load_cycles(path: str) -> CycleSet:
    cycles = []
    with open(path, encoding="ascii") as fh:
        for line in fh:
            line = line.strip()
            if line:
                cycles.append(tuple(int(tok) for tok in line.split()))
    if not cycles:
        raise ConfigFault(f"no cycles in {path}")
    return CycleSet(len(cycles[0]), tuple(cycles))


# ---------------------------------------------------------------------------
# route graph


@dataclass
class HopGraph:
    """Vertices are (cycle, process) pairs flattened as k*N + n."""

    N: int
    cycles: tuple[tuple[int, ...], ...]
    trusted: frozenset[int]
    balances: tuple[tuple[int, ...], ...]
    adjacency: tuple[tuple[int, ...], ...]

    @property
    def K(self) -> int:
        return len(self.cycles)

    def vertex(self, k: int, n: int) -> int:
        return k * self.N + n

    def split(self, v: int) -> tuple[int, int]:
        return divmod(v, self.N)


def build_hop_graph(cycles: tuple[tuple[int, ...], ...],
                    balances: tuple[tuple[int, ...], ...],
                    trusted: frozenset[int]) -> HopGraph:
    """Step edges along each cycle, hop edges at funded intermediaries."""
    if not cycles:
        raise ConfigFault("need at least one cycle")
    N = len(cycles[0])
    K = len(cycles)
    adj: list[list[int]] = [[] for _ in range(K * N)]
    for k, cycle in enumerate(cycles):
        for j, a in enumerate(cycle):
            b = cycle[(j + 1) % N]
            adj[k * N + a].append(k * N + b)
    for n in sorted(trusted):
        funded = [k for k in range(K) if balances[k][n] > 0]
        for k in range(K):
            for k2 in funded:
                if k2 != k:
                    adj[k * N + n].append(k2 * N + n)
    return HopGraph(N, tuple(cycles), frozenset(trusted),
                    tuple(tuple(row) for row in balances),
                    tuple(tuple(sorted(row)) for row in adj))


@dataclass(frozen=True)
class HopPath:
    """A concrete route: vertices, its leg decomposition and cost."""

    vertices: tuple[tuple[int, int], ...]
    legs: tuple[tuple[int, int, int, int], ...]  # (cycle, payer, payee, steps)
    hops: int

    @property
    def length(self) -> int:
        return len(self.vertices) - 1

    @property
    def intermediaries(self) -> tuple[int, ...]:
        return tuple(leg[1] for leg in self.legs[1:])

    @property
    def messages(self) -> int:
        return 2 * self.length + self.hops


def _decompose(vertices: tuple[tuple[int, int], ...]) -> tuple[tuple, int]:
    legs = []
    hops = 0
    run_start = vertices[0]
    steps = 0
    for (k1, a), (k2, b) in zip(vertices, vertices[1:]):
        if a == b:
            hops += 1
            if steps:
                legs.append((k1, run_start[1], a, steps))
            run_start = (k2, b)
            steps = 0
        else:
            steps += 1
    if steps:
        k, x = run_start
        legs.append((k, x, vertices[-1][1], steps))
    return tuple(legs), hops


def shortest_hop_path(graph: HopGraph, a: int, b: int,
                      start_cycles: frozenset[int] | None = None
                      ) -> HopPath | None:
    """Breadth first route from a's funded cycles to b on any cycle.

    Sources and neighbours are visited in ascending (cycle, process)
    order, so the returned route is canonical.  Returns None when b is
    unreachable.
    """
    if start_cycles is None:
        start_cycles = frozenset(k for k in range(graph.K)
                                 if graph.balances[k][a] > 0)
    if not start_cycles:
        raise ConfigFault(f"process {a} holds no value on any cycle")
    N = graph.N
    adjacency = graph.adjacency
    parent = [-1] * (graph.K * N)
    dist = [-1] * (graph.K * N)
    queue: deque[int] = deque()
    for k in sorted(start_cycles):
        v = k * N + a
        dist[v] = 0
        parent[v] = v
        queue.append(v)
    targets = [k * N + b for k in range(graph.K)]
    best = None
    while queue:
        u = queue.popleft()
        if best is not None and dist[u] >= best:
            break
        du = dist[u] + 1
        for v in adjacency[u]:
            if dist[v] < 0:
                dist[v] = du
                parent[v] = u
                queue.append(v)
                if v % N == b and best is None:
                    best = du
    hits = [v for v in targets if dist[v] >= 0]
    if not hits:
        return None
    final = min(hits, key=lambda v: (dist[v], v))
    chain = [final]
    while parent[chain[-1]] != chain[-1]:
        chain.append(parent[chain[-1]])
    chain.reverse()
    vertices = tuple(graph.split(v) for v in chain)
    legs, hops = _decompose(vertices)
    return HopPath(vertices, legs, hops)


def undirected_distance(cycles: tuple[tuple[int, ...], ...],
                        a: int, b: int) -> int:
    """Shortest path between processes over the undirected cycle union."""
    N = len(cycles[0])
    adj: list[set[int]] = [set() for _ in range(N)]
    for cycle in cycles:
        for j, x in enumerate(cycle):
            y = cycle[(j + 1) % N]
            adj[x].add(y)
            adj[y].add(x)
    dist = [-1] * N
    dist[a] = 0
    queue = deque([a])
    while queue:
        u = queue.popleft()
        if u == b:
            return dist[u]
        for v in adj[u]:
            if dist[v] < 0:
                dist[v] = dist[u] + 1
                queue.append(v)
    return -1


def graph_diameter(graph: HopGraph) -> int:
    """Largest finite eccentricity over all vertices, by repeated BFS."""
    best = 0
    V = graph.K * graph.N
    for s in range(V):
        dist = [-1] * V
        dist[s] = 0
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for v in graph.adjacency[u]:
                if dist[v] < 0:
                    dist[v] = dist[u] + 1
                    queue.append(v)
        best = max(best, max(d for d in dist if d >= 0))
    return best


# ---------------------------------------------------------------------------
# promises and execution


@dataclass(frozen=True)
class Promise:
    """Signed offer to carry one leg of a route."""

    promiser: int
    predecessor: int
    successor: int
    macro_round: int
    micro_round: int

    def content(self) -> bytes:
        return (enc_str("promise") + enc_int(self.promiser)
                + enc_int(self.predecessor) + enc_int(self.successor)
                + enc_int(self.macro_round) + enc_int(self.micro_round))


def intent_bytes(payer: int, payee: int, macro_round: int) -> bytes:
    return (enc_str("intent") + enc_int(payer) + enc_int(payee)
            + enc_int(macro_round))


CHEAT_KEEP = "keep"
CHEAT_FORGE = "forge"
CHEAT_DENY = "deny"


@dataclass(frozen=True)
class CheatPlan:
    """One planted misbehaviour: ``position`` indexes the route's
    participants with 1..Z the intermediaries and Z+1 the payee."""

    position: int
    mode: str


@dataclass
class MacroOutcome:
    macro_round: int
    payer: int
    payee: int
    path: HopPath
    promises: tuple[Promise, ...]
    delivered_legs: int
    messages: int
    paid: bool
    payee_claims_paid: bool
    cheat: CheatPlan | None
    base_round: int


class HopNetwork:
    """Stacked per-cycle economies plus the hop and dispute machinery."""

    def __init__(self, cycleset: CycleSet,
                 trusted: frozenset[int] | None = None,
                 corrupted: frozenset[int] = frozenset(),
                 balance: int = 1,
                 balances: tuple[tuple[int, ...], ...] | None = None,
                 micro_rounds: int | None = None):
        self.N = cycleset.N
        self.cycles = cycleset.cycles
        self.trusted = (frozenset(trusted) if trusted is not None
                        else frozenset(range(self.N)))
        self.corrupted = frozenset(corrupted)
        self.positions = tuple({n: j for j, n in enumerate(cycle)}
                               for cycle in self.cycles)
        if balances is None:
            balances = tuple((balance,) * self.N for _ in self.cycles)
        self.banks = []
        for k, cycle in enumerate(self.cycles):
            pos_corrupted = frozenset(self.positions[k][n]
                                      for n in self.corrupted)
            initial = [balances[k][n] for n in cycle]
            self.banks.append(Bank(self.N, len(self.corrupted), initial,
                                   corrupted=pos_corrupted, family="cycle"))
        self.oracle = SignatureOracle(frozenset())
        self.macro_index = 0
        if micro_rounds is None:
            micro_rounds = 2 * max(1, graph_diameter(self.graph()))
        self.micro_rounds = micro_rounds
        self.outcomes: list[MacroOutcome] = []

    # -- views ---------------------------------------------------------------

    def value(self, k: int, n: int) -> int:
        if n in self.corrupted:
            return 0
        return self.banks[k].balances()[self.positions[k][n]]

    def graph(self) -> HopGraph:
        balances = tuple(tuple(self.value(k, n) for n in range(self.N))
                         for k in range(len(self.cycles)))
        return build_hop_graph(self.cycles, balances, self.trusted)

    # -- execution -----------------------------------------------------------

    def macro_payment(self, a: int, b: int, path: HopPath | None = None,
                      cheat: CheatPlan | None = None) -> MacroOutcome:
        """Run one macro round carrying a payment from a to b.

        Every bank advances by exactly ``micro_rounds`` rounds; the route
        legs ride the first len(legs) of them.  A cheat plan suppresses
        the planted leg, or only poisons the later dispute.
        """
        if a == b or a in self.corrupted:
            raise ConfigFault(f"cannot run payment {a}->{b}")
        if path is None:
            path = shortest_hop_path(self.graph(), a, b)
        if path is None:
            raise ConfigFault(f"no route from {a} to {b}")
        legs = path.legs
        if len(legs) > self.micro_rounds:
            raise ConfigFault("route needs more micro rounds than budgeted")
        chain = [a] + list(path.intermediaries) + [b]
        promises = []
        for j in range(1, len(legs)):
            promise = Promise(chain[j], chain[j - 1], chain[j + 1],
                              self.macro_index, j)
            self.oracle.sign(promise.promiser, promise.content())
            promises.append(promise)
        self.oracle.sign(a, intent_bytes(a, b, self.macro_index))
        base = self.macro_index * self.micro_rounds
        delivered = 0
        blocked = (cheat.position if cheat is not None
                   and cheat.mode in (CHEAT_KEEP, CHEAT_FORGE)
                   else len(legs))
        for m in range(self.micro_rounds):
            inputs: dict[int, dict[int, int]] = {}
            if m < len(legs) and m < blocked and delivered == m:
                k, payer, payee, _ = legs[m]
                inputs[k] = {self.positions[k][payer]:
                             self.positions[k][payee]}
            for k, bank in enumerate(self.banks):
                row = bank.run_round(inputs.get(k))
                if k in inputs:
                    (pos_payer, pos_payee), = inputs[k].items()
                    if pos_payer in row.credits.get(pos_payee, ()):
                        delivered += 1
        paid = delivered == len(legs)
        messages = (4 * len(promises) + 1
                    + sum(2 * d - 1 for _, _, _, d in legs[:delivered]))
        claims_paid = paid and not (cheat is not None
                                    and cheat.mode == CHEAT_DENY)
        outcome = MacroOutcome(self.macro_index, a, b, path, tuple(promises),
                               delivered, messages, paid, claims_paid,
                               cheat, base)
        self.outcomes.append(outcome)
        self.macro_index += 1
        return outcome

    def bank_messages(self, outcome: MacroOutcome) -> int:
        """Messages the banks actually sent during the macro round."""
        total = 0
        for bank in self.banks:
            for m in range(outcome.base_round,
                           outcome.base_round + self.micro_rounds):
                total += bank.net.metrics.round_messages(m)
        return total

    # -- dispute -------------------------------------------------------------

    def _leg_proof(self, leg_index: int, outcome: MacroOutcome):
        """The chain the leg's payer archived, if it really paid the
        leg's payee that round; a self transfer does not count."""
        k, payer, payee, _ = outcome.path.legs[leg_index]
        bank = self.banks[k]
        m = outcome.base_round + leg_index
        row = bank.history[m]
        pos = self.positions[k][payer]
        if row.inputs.get(pos) != self.positions[k][payee]:
            return None
        v = row.spent_instance.get(pos)
        if v is None:
            return None
        proc = bank.hosts[pos].instances[bank.nonces[v]]
        records = proc.proofs.get(m)
        if records is None:
            return None
        return k, v, m, records

    def _stale_exhibit(self, leg_index: int, outcome: MacroOutcome):
        """What a forger can actually show: the chain it was paid with."""
        if leg_index == 0:
            return None
        prior = self._leg_proof(leg_index - 1, outcome)
        if prior is None:
            return None
        k_prev, v, _, records = prior
        k, _, _, _ = outcome.path.legs[leg_index]
        m = outcome.base_round + leg_index
        return k, v, m, records

    def _verify_exhibit(self, leg_index: int, exhibit,
                        outcome: MacroOutcome) -> str:
        """Check an exhibited chain against the payee's instance state.

        Distinguishes a chain the payee accepted during the leg's round
        from one that only lands now: the latter means the payer withheld
        it past the round it promised.
        """
        if exhibit is None:
            return TRACE_BAD
        k_claim, v, m, records = exhibit
        k, _, payee, _ = outcome.path.legs[leg_index]
        if k_claim != k or m != outcome.base_round + leg_index:
            return TRACE_BAD
        bank = self.banks[k]
        if not 0 <= v < bank.supply:
            return TRACE_BAD
        pos = self.positions[k][payee]
        proc = bank.hosts[pos].instances[bank.nonces[v]]
        accepted = any(mk.round == m and mk.target == pos
                       for mk in proc.markings)
        verdict, _ = verify_payment_claim(proc, tuple(records), m)
        if verdict != "paid":
            return TRACE_BAD
        return TRACE_PAID if accepted else TRACE_LATE

    def dispute_walkback(self, outcome: MacroOutcome
                         ) -> tuple[int, list[tuple[int, int, int, str]]]:
        """Walk the route backwards until someone is caught.

        Returns the accused process and the trace of (edge, upstream,
        downstream, finding) tuples.  The downstream party of each edge
        claims non-payment; the upstream party answers with an exhibit or
        an admission.
        """
        path = outcome.path
        chain = [outcome.payer] + list(path.intermediaries) + [outcome.payee]
        cheat = outcome.cheat
        trace = []
        for j in range(len(chain) - 1, 0, -1):
            upstream, downstream = chain[j - 1], chain[j]
            leg_index = j - 1
            k, _, _, _ = path.legs[leg_index]
            m = outcome.base_round + leg_index
            pos_down = self.positions[k][downstream]
            pos_up = self.positions[k][upstream]
            credited = pos_up in self.banks[k].history[m].credits.get(
                pos_down, ())
            down_cheats = cheat is not None and cheat.position == j
            if credited and not down_cheats:
                break  # downstream side is satisfied, nothing to dispute
            up_cheats = cheat is not None and cheat.position == j - 1
            if up_cheats and cheat.mode == CHEAT_FORGE:
                exhibit = self._stale_exhibit(leg_index, outcome)
            elif up_cheats and cheat.mode == CHEAT_KEEP:
                exhibit = None  # pretends it was never paid itself
            else:
                exhibit = self._leg_proof(leg_index, outcome)
            if exhibit is None:
                trace.append((j, upstream, downstream, TRACE_ADMIT))
                continue
            finding = self._verify_exhibit(leg_index, exhibit, outcome)
            trace.append((j, upstream, downstream, finding))
            if finding == TRACE_PAID:
                return downstream, trace
            return upstream, trace
        raise ConfigFault("walkback found no edge in dispute")


# ---------------------------------------------------------------------------
# scaling experiments


@dataclass(frozen=True)
class HopSample:
    N: int
    K: int
    seed: int
    payer: int
    payee: int
    distance: int
    hops: int
    messages: int
    undirected: int


def hop_experiment(N: int, K: int, seed: int, pairs: int = 500,
                   trusted: frozenset[int] | None = None) -> list[HopSample]:
    """Route statistics for random payer and payee pairs on a balanced
    random 2K-cycle system, no banks involved."""
    cycleset = gen_random_cycles(N, K, seed)
    balances = tuple((1,) * N for _ in cycleset.cycles)
    graph = build_hop_graph(
        cycleset.cycles, balances,
        frozenset(range(N)) if trusted is None else trusted)
    rng = seeded_rng(seed, N, K, pairs)
    samples = []
    for _ in range(pairs):
        a = int(rng.integers(N))
        b = int(rng.integers(N - 1))
        if b >= a:
            b += 1
        path = shortest_hop_path(graph, a, b)
        u = undirected_distance(cycleset.cycles, a, b)
        samples.append(HopSample(N, K, seed, a, b, path.length, path.hops,
                                 path.messages, u))
    return samples


def samples_to_csv(samples: list[HopSample]) -> str:
    out = io.StringIO()
    writer = csv.writer(out)
    writer.writerow(["N", "K", "seed", "pair", "D", "messages"])
    for s in samples:
        writer.writerow([s.N, s.K, s.seed, f"{s.payer}->{s.payee}",
                         s.distance, s.messages])
    return out.getvalue()
