"""Round-based simulation of a multi-hop wireless network.

Messages sent during round ``r`` are delivered in round ``r + 1``. Within a
round the kernel delivers due messages (ordered by sender id, then enqueue
order), fires due timers (registration order) and finally gives every node
that was touched a chance to process what it buffered.
"""

from __future__ import annotations

import hashlib
import math
import random
from collections import defaultdict, deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Optional

import numpy as np
from scipy.spatial import cKDTree

from .wire import MsgType

BROADCAST = None

# stream keys for per-node generators
STREAM_PROTOCOL = 1
STREAM_RADIO = 2
STREAM_ENERGY = 3
STREAM_SECRET = 4
STREAM_PLACEMENT = 5


def derive_seed(seed: int, *key: int) -> int:
    """Derive an independent 64-bit seed from a root seed and an integer key."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    hi, lo = ss.generate_state(2, dtype=np.uint32)
    return (int(hi) << 32) | int(lo)


def node_rng(seed: int, node: int, stream: int) -> random.Random:
    return random.Random(derive_seed(seed, stream, node))


class TopologyError(ValueError):
    pass


@dataclass(frozen=True)
class Topology:
    positions: dict
    comm_range: float
    adjacency: dict = field(repr=False)

    @classmethod
    def from_positions(cls, positions: dict, comm_range: float) -> "Topology":
        if comm_range <= 0:
            raise TopologyError(f"comm_range must be positive, got {comm_range}")
        ids = sorted(positions)
        adj = {i: set() for i in ids}
        if len(ids) > 1:
            pts = np.array([positions[i] for i in ids], dtype=float)
            for a, b in cKDTree(pts).query_pairs(comm_range):
                u, v = ids[a], ids[b]
                adj[u].add(v)
                adj[v].add(u)
        return cls(
            positions={i: (float(positions[i][0]), float(positions[i][1])) for i in ids},
            comm_range=float(comm_range),
            adjacency={i: frozenset(s) for i, s in adj.items()},
        )

    @property
    def ids(self) -> list:
        return sorted(self.positions)

    def __len__(self):
        return len(self.positions)

    def neighbors(self, node: int) -> frozenset:
        return self.adjacency[node]

    def distance(self, u: int, v: int) -> float:
        (x1, y1), (x2, y2) = self.positions[u], self.positions[v]
        return math.hypot(x1 - x2, y1 - y2)

    def edge_count(self) -> int:
        return sum(len(s) for s in self.adjacency.values()) // 2

    def mean_degree(self) -> float:
        if not self.positions:
            return 0.0
        return 2.0 * self.edge_count() / len(self.positions)

    def giant_component_fraction(self) -> float:
        seen: set = set()
        best = 0
        for start in self.positions:
            if start in seen:
                continue
            seen.add(start)
            size, queue = 0, deque([start])
            while queue:
                u = queue.popleft()
                size += 1
                for v in self.adjacency[u]:
                    if v not in seen:
                        seen.add(v)
                        queue.append(v)
            best = max(best, size)
        return best / len(self.positions) if self.positions else 0.0

    def relabel(self, mapping: dict) -> "Topology":
        """Same geometry, node ``u`` renamed to ``mapping[u]``."""
        return Topology.from_positions(
            {mapping[u]: p for u, p in self.positions.items()}, self.comm_range
        )


@dataclass(frozen=True)
class TopologySpec:
    kind: str = "fixed-density"  # fixed-density | fixed-diameter | file
    node_count: int = 100
    target_density: float = 8.0
    world_side: float = 200.0
    comm_range: float = 20.0
    seed: int = 0
    path: Optional[str] = None

    def side(self) -> float:
        if self.kind == "fixed-density":
            if self.target_density <= 0:
                raise TopologyError("target_density must be positive")
            return math.sqrt(math.pi * self.comm_range**2 * self.node_count / self.target_density)
        return self.world_side


def build_topology(spec: TopologySpec) -> Topology:
    if spec.kind == "file":
        if spec.path is None:
            raise TopologyError("file topology needs a path")
        return load_topology(spec.path)
    if spec.kind not in ("fixed-density", "fixed-diameter"):
        raise TopologyError(f"unknown topology kind {spec.kind!r}")
    if spec.node_count < 1:
        raise TopologyError("node_count must be >= 1")
    if spec.comm_range <= 0:
        raise TopologyError("comm_range must be positive")
    if spec.kind == "fixed-density" and spec.target_density >= spec.node_count:
        raise TopologyError("target_density must be below node_count")
    side = spec.side()
    if not side > 0:
        raise TopologyError(f"implied world side {side} is not positive")
    rng = np.random.default_rng(derive_seed(spec.seed, STREAM_PLACEMENT))
    pts = rng.uniform(0.0, side, size=(spec.node_count, 2))
    return Topology.from_positions({i: tuple(p) for i, p in enumerate(pts)}, spec.comm_range)


def load_topology(path) -> Topology:
    comm_range = None
    positions = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if len(parts) == 2 and parts[0] == "range":
                comm_range = float(parts[1])
            continue
        parts = line.split()
        if len(parts) != 3:
            raise TopologyError(f"{path}:{lineno}: expected '<id> <x> <y>'")
        node = int(parts[0])
        if node in positions:
            raise TopologyError(f"{path}:{lineno}: duplicate node id {node}")
        if not 0 <= node < 2**32 - 1:
            raise TopologyError(f"{path}:{lineno}: node id {node} out of range")
        positions[node] = (float(parts[1]), float(parts[2]))
    if comm_range is None:
        raise TopologyError(f"{path}: missing '# range <r>' header")
    if not positions:
        raise TopologyError(f"{path}: no nodes")
    return Topology.from_positions(positions, comm_range)


def save_topology(topology: Topology, path) -> None:
    lines = [f"# range {topology.comm_range!r}"]
    for node in topology.ids:
        x, y = topology.positions[node]
        lines.append(f"{node} {x!r} {y!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def k_hop_neighbors(topology: Topology, node: int, k: int) -> set:
    """Nodes at graph distance 1..k from ``node``."""
    if k < 0:
        raise ValueError("k must be >= 0")
    dist = {node: 0}
    frontier = [node]
    for depth in range(1, k + 1):
        nxt = []
        for u in frontier:
            for v in topology.adjacency[u]:
                if v not in dist:
                    dist[v] = depth
                    nxt.append(v)
        frontier = nxt
    del dist[node]
    return set(dist)


def hop_distances(topology: Topology, source: int, limit: Optional[int] = None) -> dict:
    dist = {source: 0}
    queue = deque([source])
    while queue:
        u = queue.popleft()
        if limit is not None and dist[u] >= limit:
            continue
        for v in topology.adjacency[u]:
            if v not in dist:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


@dataclass(frozen=True)
class RadioModel:
    loss_probability: float = 0.0
    broadcast_only_to_neighbors: bool = True

    def __post_init__(self):
        if not 0.0 <= self.loss_probability <= 1.0:
            raise ValueError("loss_probability must lie in [0, 1]")


@dataclass(frozen=True)
class RoundReport:
    round_index: int
    messages_delivered: int
    messages_dropped: int
    timers_fired: int
    quiescent: bool


@dataclass
class _Copy:
    sender: int
    seq: int
    receiver: int
    data: bytes
    dropped: bool
    broadcast: bool


class World:
    """Single-run simulation state. Not thread safe; one run owns one world."""

    def __init__(self, topology: Topology, radio: RadioModel = RadioModel(), seed: int = 0,
                 trace: Optional[Callable[[str], None]] = None):
        self.topology = topology
        self.radio = radio
        self.seed = seed
        self.round = 0
        self.handlers: dict = {}
        self._pending: list = []
        self._seq = 0
        self._timers: dict = defaultdict(list)
        self._timer_count = 0
        self._radio_rngs: dict = {}
        self._trace = trace
        self._hash = hashlib.sha256()
        self.sent_by_type: dict = defaultdict(int)
        self.enqueued = 0
        self.delivered = 0
        self.dropped = 0

    # -- wiring -------------------------------------------------------
    def attach(self, node: int, handler) -> None:
        if node not in self.topology.positions:
            raise KeyError(f"node {node} not in topology")
        self.handlers[node] = handler

    def rng(self, node: int, stream: int = STREAM_PROTOCOL) -> random.Random:
        return node_rng(self.seed, node, stream)

    def log(self, line: str) -> None:
        self._hash.update(line.encode())
        self._hash.update(b"\n")
        if self._trace is not None:
            self._trace(line)

    @property
    def trace_hash(self) -> str:
        return self._hash.hexdigest()

    # -- radio --------------------------------------------------------
    def _radio_rng(self, node):
        rng = self._radio_rngs.get(node)
        if rng is None:
            rng = self._radio_rngs[node] = node_rng(self.seed, node, STREAM_RADIO)
        return rng

    def send(self, sender: int, dest: Optional[int], data: bytes) -> None:
        """Queue ``data`` for delivery next round; ``dest=None`` broadcasts."""
        if sender not in self.topology.positions:
            raise KeyError(f"unknown sender {sender}")
        self.sent_by_type[data[0] if data else 0] += 1
        nbrs = self.topology.adjacency[sender]
        if dest is BROADCAST:
            receivers = sorted(nbrs)
        elif dest in nbrs:
            receivers = [dest]
        else:
            receivers = []
        loss = self.radio.loss_probability
        rng = self._radio_rng(sender) if loss > 0 else None
        for r in receivers:
            dropped = loss > 0 and rng.random() < loss
            self._pending.append(_Copy(sender, self._seq, r, data, dropped, dest is BROADCAST))
            self._seq += 1
            self.enqueued += 1

    def set_timer(self, node: int, delay: int, token) -> None:
        if delay < 1:
            raise ValueError("timer delay must be >= 1")
        self._timers[self.round + delay].append((node, token))
        self._timer_count += 1

    @property
    def quiescent(self) -> bool:
        return not self._pending and self._timer_count == 0

    # -- scheduling ---------------------------------------------------
    def step_round(self) -> RoundReport:
        self.round += 1
        due = self._pending
        self._pending = []
        due.sort(key=lambda c: (c.sender, c.seq))
        touched = {}
        delivered = dropped = 0
        for c in due:
            self.log(
                f"round={self.round} type={_type_name(c.data)} from={c.sender} "
                f"to={'*' if c.broadcast else c.receiver} dropped={int(c.dropped)}"
            )
            if c.dropped:
                dropped += 1
                continue
            delivered += 1
            handler = self.handlers.get(c.receiver)
            if handler is None:
                continue
            handler.on_receive(c.data, -self.topology.distance(c.sender, c.receiver))
            touched[c.receiver] = handler
        fired = 0
        timers = self._timers.pop(self.round, ())
        for node, token in timers:
            fired += 1
            self._timer_count -= 1
            handler = self.handlers.get(node)
            if handler is None:
                continue
            handler.on_timer(token)
            touched[node] = handler
        for node in sorted(touched):
            touched[node].on_round_end()
        self.delivered += delivered
        self.dropped += dropped
        return RoundReport(self.round, delivered, dropped, fired, self.quiescent)

    def run(self, max_rounds: int, until_quiescent: bool = True) -> list:
        reports = []
        for _ in range(max_rounds):
            if until_quiescent and self.quiescent:
                break
            reports.append(self.step_round())
        return reports


def _type_name(data: bytes) -> str:
    if not data:
        return "EMPTY"
    try:
        return MsgType(data[0]).name
    except ValueError:
        return f"0x{data[0]:02x}"


def iter_edges(topology: Topology) -> Iterable:
    for u in topology.ids:
        for v in sorted(topology.adjacency[u]):
            if u < v:
                yield u, v
