"""Iterator (IT) modules: membership tables and neighbourhood bookkeeping."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .wire import NO_CLUSTER, MsgType, pack_cluster_list, unpack_cluster_list


@dataclass(frozen=True)
class MembershipTable:
    cluster_neighbors: tuple
    non_cluster_neighbors: tuple
    unexamined_neighbors: tuple
    parent: int
    children: tuple


class NormIt:
    """Single-cluster tables.

    Neighbours are kept as ``neighbor -> last observed cluster id`` and the
    three classes (same cluster, other cluster, unexamined) are derived from
    it against the node's current cluster, so re-joining never leaves stale
    entries behind.
    """

    name = "norm"

    def __init__(self, cc):
        self.cc = cc
        self.params = None
        self._callbacks: list = []
        self.reset()

    def set_parameters(self, params) -> None:
        self.params = params

    def reset(self) -> None:
        self.seen: dict = {}
        self.seen_hops: dict = {}
        self._from_hello: set = set()
        self.joinable: set = set()
        self.children: set = set()
        self.members: dict = {}
        self.up: dict = {}  # head -> (neighbor the head's traffic first came from, hops)
        self._yielded: set = set()
        self.convergecast_received = 0

    def register_callback(self, callback) -> None:
        self._callbacks.append(callback)

    # -- membership ---------------------------------------------------------
    def became_head(self) -> None:
        self.members = {}

    def joined(self, head: int, parent: int, hops: int) -> None:
        self.up.setdefault(head, (parent, hops))

    def record_up(self, head: int, via: int, hops: int) -> bool:
        if head in self.up:
            return False
        self.up[head] = (via, hops)
        return True

    def add_child(self, child: int) -> None:
        self.children.add(child)

    def remove_child(self, child: int) -> None:
        self.children.discard(child)

    def add_member(self, joiner: int, hops: int) -> bool:
        if joiner in self.members or joiner == self.cc.id:
            return False
        self.members[joiner] = hops
        return True

    def update(self, event) -> None:
        for callback in self._callbacks:
            callback(event)

    def route_toward(self, head: int) -> Optional[int]:
        """Next hop toward ``head`` or ``None`` when no path is known."""
        if head == self.cc.id:
            return self.cc.id
        state = self.cc.state
        if head == state.cluster_id and state.clustered:
            return state.parent
        entry = self.up.get(head)
        return entry[0] if entry else None

    def hops_toward(self, head: int) -> Optional[int]:
        if head == self.cc.id:
            return 0
        state = self.cc.state
        if head == state.cluster_id and state.clustered:
            return state.hops_to_head
        entry = self.up.get(head)
        return entry[1] if entry else None

    # -- neighbourhood ------------------------------------------------------
    def observe(self, neighbor: int, cluster: int, hops: int, joinable: bool = False,
                hello: bool = False) -> bool:
        """Record what ``neighbor`` told us; True if it newly shows a foreign cluster."""
        if not hello and neighbor in self._from_hello:
            return False
        if hello:
            self._from_hello.add(neighbor)
            if joinable:
                self.joinable.add(neighbor)
            else:
                self.joinable.discard(neighbor)
        previous = self.seen.get(neighbor)
        self.seen[neighbor] = cluster
        self.seen_hops[neighbor] = hops
        return self._foreign(cluster) and previous != cluster

    def _foreign(self, cluster: int) -> bool:
        return cluster != NO_CLUSTER and cluster != self.cc.state.cluster_id

    def has_foreign_neighbor(self) -> bool:
        return any(self._foreign(c) for c in self.seen.values())

    def foreign_links(self) -> list:
        """Sorted ``(neighbor, foreign cluster)`` pairs."""
        return sorted((n, c) for n, c in self.seen.items() if self._foreign(c))

    def foreign_clusters(self) -> set:
        return {c for c in self.seen.values() if self._foreign(c)}

    def membership_table(self) -> MembershipTable:
        mine = self.cc.state.cluster_id
        adjacency = set(self.cc.neighbors)
        same, other = [], []
        for n, c in self.seen.items():
            if c == NO_CLUSTER and n in adjacency:
                continue
            if c == mine and n in adjacency:
                same.append(n)
            else:
                other.append(n)
        known = {n for n, c in self.seen.items() if c != NO_CLUSTER}
        unexamined = sorted(adjacency - known)
        return MembershipTable(tuple(sorted(same)), tuple(sorted(other)), tuple(unexamined),
                               self.cc.state.parent, tuple(sorted(self.children)))

    def _candidates(self, closer_than: Optional[int]):
        parent = self.cc.state.parent
        mine = self.cc.state.cluster_id
        for n in self.cc.neighbors:  # already ascending
            if n in self._yielded or n == parent or n == self.cc.id:
                continue
            c = self.seen.get(n, NO_CLUSTER)
            if c == NO_CLUSTER or n in self.joinable:
                yield n
            elif (closer_than is not None and c == mine
                  and self.seen_hops.get(n, 0) > closer_than):
                yield n

    def next_neighbor(self, closer_than: Optional[int] = None) -> Optional[int]:
        """Next unexamined neighbour in ascending id order; ``None`` once exhausted.

        With ``closer_than`` set, same-cluster neighbours known to sit deeper
        than that hop count are offered as well (they may re-attach closer).
        """
        n = next(self._candidates(closer_than), None)
        if n is not None:
            self._yielded.add(n)
        return n

    def peek_neighbor(self, closer_than: Optional[int] = None) -> Optional[int]:
        return next(self._candidates(closer_than), None)

    # -- hooks used by specialised iterators ----------------------------------
    def busy(self) -> bool:
        return False

    def on_convergecast(self, msg) -> None:
        self.convergecast_received += 1

    def on_timer(self, name: str, *args) -> None:
        pass


class MocaIt(NormIt):
    """Overlapping clusters: members keep every head they joined, heads keep
    the clusters adjacent to (or overlapping with) their own."""

    name = "moca"

    def reset(self) -> None:
        super().reset()
        self.my_heads: dict = {}  # head -> hops
        self.adjacent_clusters: set = set()

    def became_head(self) -> None:
        super().became_head()
        self.my_heads = {}

    def add_head(self, head: int, hops: int) -> None:
        self.my_heads[head] = hops

    def note_adjacent(self, clusters) -> None:
        if self.cc.state.cluster_id == self.cc.id:
            self.adjacent_clusters.update(c for c in clusters if c != self.cc.id)

    def cluster_list(self) -> tuple:
        if self.cc.is_cluster_head():
            return (self.cc.id,)
        return tuple(sorted(self.my_heads))


class MaxMindIt(NormIt):
    """Gateway tables plus the convergecast that reports them to the head.

    After the HELLO round every node knows which foreign clusters it touches.
    A node ``j`` hops from head ``h`` reports to ``up[h]`` in slot
    ``start + d - j`` so that children report before their parents; relays
    merge what they receive and send once.
    """

    name = "maxmind"

    def reset(self) -> None:
        super().reset()
        self.head_table: set = set()
        self.pending: dict = {}
        self.sent: set = set()
        self.armed: set = set()
        self.window_start: Optional[int] = None
        self.window_end: Optional[int] = None

    def schedule_convergecast(self, delay: int) -> None:
        d = self.params.d
        now = self.cc.now
        self.window_start = now + delay
        self.window_end = self.window_start + d
        if self.cc.is_cluster_head():
            return
        self.pending.setdefault(self.cc.state.cluster_id, set())
        self._arm(self.cc.state.cluster_id)

    def _slot(self, head: int) -> int:
        hops = self.hops_toward(head) or 0
        return self.window_start + max(0, self.params.d - hops)

    def _arm(self, head: int) -> None:
        if head in self.armed:
            return
        self.armed.add(head)
        delay = self._slot(head) - self.cc.now
        if delay >= 1:
            self.cc.set_timer(delay, "it", "report", head)
        else:
            self._report(head)

    def on_timer(self, name: str, *args) -> None:
        if name == "report":
            self._report(args[0])

    def _report(self, head: int) -> None:
        ids = set(self.pending.pop(head, ()))
        if head == self.cc.state.cluster_id:
            ids |= self.foreign_clusters()
        self.sent.add(head)
        ids.discard(head)
        if not ids:
            return
        nxt = self.route_toward(head)
        if nxt is None or nxt == self.cc.id:
            return
        for chunk in pack_cluster_list(sorted(ids)):
            self.cc.send(nxt, MsgType.CONVERGECAST, head, self.hops_toward(head) or 0, chunk)

    def on_convergecast(self, msg) -> None:
        super().on_convergecast(msg)
        ids = unpack_cluster_list(msg.payload)
        head = msg.cluster_id
        if head == self.cc.id:
            self.head_table.update(i for i in ids if i != self.cc.id)
            return
        self.pending.setdefault(head, set()).update(ids)
        if head in self.sent or self.window_start is None:
            # arrived after this node already reported: pass it on at once
            self.armed.discard(head)
            self.sent.discard(head)
            self._report(head)
        else:
            self._arm(head)

    def gateway_table(self) -> set:
        """For a head: every cluster adjacent to its own."""
        table = set(self.head_table)
        if self.cc.is_cluster_head():
            table |= self.foreign_clusters()
        return table

    def busy(self) -> bool:
        return self.window_end is not None and self.cc.now < self.window_end
