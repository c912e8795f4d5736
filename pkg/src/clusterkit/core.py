"""Core component: per-node orchestration of head decision, joining and
membership bookkeeping.

A :class:`CoreComponent` is attached to one simulated node. It decodes
incoming frames, keeps the node's :class:`ClusterState`, forwards work to the
three pluggable modules (CHD, JD, IT) and publishes :class:`ClusterEvent`
notifications to registered callbacks.

Epoch schedule for one formation (``R0`` = enable round)::

    R0                CHD starts (may exchange messages for chd.rounds rounds)
    R0 + chd.rounds   heads known; JD starts on heads
    + 2k + 2          settle: leftover nodes self-promote, every node says HELLO
    head quiet 2k+2   FORMATION_COMPLETE at the head
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Optional

from .wire import (
    HELLO_JOINABLE,
    NO_CLUSTER,
    AcceptPayload,
    DenyPayload,
    HelloPayload,
    JoinRequestPayload,
    MalformedMessage,
    MsgType,
    ResumePayload,
    WireMessage,
    decode_message,
    encode_message,
)


class Role(Enum):
    UNCLUSTERED = "unclustered"
    HEAD = "head"
    MEMBER = "member"
    GATEWAY = "gateway"


@dataclass(frozen=True)
class ClusterState:
    role: Role
    cluster_id: int
    parent: int
    hops_to_head: int

    @classmethod
    def unclustered(cls, node: int) -> "ClusterState":
        return cls(Role.UNCLUSTERED, NO_CLUSTER, node, 0)

    @property
    def clustered(self) -> bool:
        return self.role is not Role.UNCLUSTERED


class EventKind(Enum):
    CLUSTER_FORMED = "cluster_formed"
    NODE_JOINED = "node_joined"
    JOINED_CLUSTER = "joined_cluster"
    NEIGHBOR_OTHER_CLUSTER = "neighbor_other_cluster"
    CLUSTER_HEAD_CHANGED = "cluster_head_changed"
    FORMATION_COMPLETE = "formation_complete"


@dataclass(frozen=True)
class ClusterEvent:
    kind: EventKind
    subject: int
    cluster: int
    round: int = 0
    data: bytes = b""


@dataclass(frozen=True)
class Params:
    """Parameters shared by every module of a composition.

    ``p``: head probability (prob, tcca); ``t``: re-clustering period in rounds
    (0 = one shot); ``k``: hop radius for attr/bfs/dfs; ``d``: MaxMinD radius;
    ``P_desired``: LEACH head fraction; ``e_max``: energy normaliser.
    """

    p: float = 0.15
    t: int = 0
    k: int = 1
    d: int = 2
    P_desired: float = 0.2
    e_max: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p={self.p} outside [0, 1]")
        if not 0.0 < self.P_desired <= 1.0:
            raise ValueError(f"P_desired={self.P_desired} outside (0, 1]")
        if self.k < 1 or self.d < 1:
            raise ValueError("k and d must be >= 1")
        if self.t < 0:
            raise ValueError("t must be >= 0")
        if self.e_max <= 0:
            raise ValueError("e_max must be positive")


@dataclass(frozen=True)
class AlgorithmComposition:
    chd: str
    jd: str
    it: str
    params: Params = field(default_factory=Params)
    name: str = "custom"

    @property
    def reclustering_period(self) -> int:
        return self.params.t

    def with_params(self, **changes) -> "AlgorithmComposition":
        return replace(self, params=replace(self.params, **changes))


# message types whose payload carries the epoch byte, with the parser to read it
_EPOCH_TAGGED = {
    MsgType.JOIN_REQUEST: JoinRequestPayload.unpack,
    MsgType.JOIN_ACCEPT: AcceptPayload.unpack,
    MsgType.JOIN_DENY: DenyPayload.unpack,
    MsgType.RESUME: ResumePayload.unpack,
    MsgType.NEIGHBOR_HELLO: HelloPayload.unpack,
}


class CoreComponent:
    """The per-node clustering kernel (CC)."""

    def __init__(self, node: int, world, composition: AlgorithmComposition,
                 energy: float = 1.0, attribute: Optional[int] = None):
        from .compose import instantiate

        self.id = node
        self.world = world
        self.composition = composition
        self.neighbors = tuple(sorted(world.topology.adjacency[node]))
        self.energy = energy
        self.attribute = node if attribute is None else attribute
        self.rng = world.rng(node)
        self.chd, self.jd, self.it = instantiate(composition, self)
        self.params = composition.params
        self.set_parameters(composition.params)

        self.enabled = False
        self.epoch = 0
        self.epoch_start = 0
        self.state = ClusterState.unclustered(node)
        self.elected = False
        self.orphan = False
        self.settled = False
        self.complete = False
        self.decided_at: Optional[int] = None
        self.history: list = []  # (epoch, elected) per formation
        self._announced = None
        self.last_change = 0
        self.accept_extra: Callable[[], bytes] = lambda: b""
        self._callbacks: list = []
        self._reg_ids = itertools.count(1)
        self.decode_errors = 0
        self.unknown_type = 0
        self.stale = 0

    # -- configuration ---------------------------------------------------
    def set_parameters(self, params: Params) -> None:
        self.params = params
        for module in (self.chd, self.jd, self.it):
            module.set_parameters(params)

    @property
    def radius(self) -> int:
        return self.jd.radius

    @property
    def quiet_timeout(self) -> int:
        return 2 * self.radius + 2

    def register_changed_callback(self, callback: Callable[[ClusterEvent], None]) -> int:
        reg = next(self._reg_ids)
        self._callbacks.append((reg, callback))
        return reg

    def unregister_changed_callback(self, reg: int) -> None:
        self._callbacks = [(r, cb) for r, cb in self._callbacks if r != reg]

    # -- accessors ---------------------------------------------------------
    @property
    def now(self) -> int:
        return self.world.round

    def cluster_id(self) -> int:
        return self.state.cluster_id

    def parent(self) -> int:
        return self.state.parent

    def is_cluster_head(self) -> bool:
        return self.state.role is Role.HEAD

    @property
    def clustered(self) -> bool:
        return self.state.clustered

    @property
    def lossy(self) -> bool:
        return self.world.radio.loss_probability > 0

    @property
    def joinable(self) -> bool:
        """Unclustered, or a self-promoted singleton that may still be recruited."""
        return not self.state.clustered or self.orphan

    def formation_complete(self) -> bool:
        return self.complete

    # -- life-cycle --------------------------------------------------------
    def enable(self) -> None:
        if self.enabled:
            return
        self.enabled = True
        self._start_epoch()

    def disable(self) -> None:
        self.enabled = False

    def find_head(self) -> None:
        self.chd.start()

    def _start_epoch(self) -> None:
        self.epoch_start = self.now
        self.state = ClusterState.unclustered(self.id)
        self.elected = self.orphan = self.settled = self.complete = False
        self.decided_at = None
        self._announced = None
        self.chd.reset()
        self.jd.reset()
        self.it.reset()
        if self.params.t > 0:
            self.set_timer(self.params.t, "cc", "recluster")
        self.find_head()

    def head_decided(self, is_head: bool, **info) -> None:
        """Called by the CHD once its decision for this epoch is final."""
        self.decided_at = self.now
        self.history.append((self.epoch, is_head))
        if is_head:
            self.elected = True
            self._become_head()
        self.jd.start(is_head, **info)
        delay = self.jd.settle_delay()
        if delay is not None:
            self.set_timer(delay, "cc", "settle")

    def _become_head(self, orphan: bool = False) -> None:
        self.orphan = orphan
        self.state = ClusterState(Role.HEAD, self.id, self.id, 0)
        self.it.became_head()
        self.last_change = self.now
        self.emit(EventKind.CLUSTER_FORMED, self.id, self.id)
        self.set_timer(self.quiet_timeout, "cc", "complete")

    def join(self, head: int, parent: int, hops: int) -> None:
        """Adopt ``head`` as primary cluster (or re-parent within it)."""
        previous = self.state.cluster_id
        was_orphan = self.orphan
        self.orphan = False
        self.state = ClusterState(Role.MEMBER, head, parent, hops)
        self.it.joined(head, parent, hops)
        self._refresh_role()
        if previous != head:
            if was_orphan or previous != NO_CLUSTER:
                self.emit(EventKind.CLUSTER_HEAD_CHANGED, self.id, head)
            self.emit(EventKind.JOINED_CLUSTER, self.id, head)
        if self.settled or self.jd.announce_joins:
            self.say_hello()

    def member_joined(self, joiner: int, data: bytes = b"") -> None:
        self.last_change = self.now
        self.emit(EventKind.NODE_JOINED, joiner, self.id, data)

    def member_left(self, joiner: int) -> None:
        self.last_change = self.now

    def settle(self) -> None:
        """End of the join window: orphans self-promote, then announce."""
        if not self.state.clustered:
            self._become_head(orphan=True)
        self.settled = True
        self.say_hello()

    def say_hello(self) -> None:
        """Announce cluster and depth to the neighbours, unless nothing changed
        since the last announcement."""
        flags = HELLO_JOINABLE if self.orphan else 0
        announced = (self.state.cluster_id, self.state.hops_to_head, flags)
        if announced == self._announced:
            return
        self._announced = announced
        self.send(None, MsgType.NEIGHBOR_HELLO, self.state.cluster_id, self.state.hops_to_head,
                  HelloPayload(self.epoch, self.state.hops_to_head, flags).pack())

    def _refresh_role(self) -> None:
        if self.state.role in (Role.MEMBER, Role.GATEWAY):
            role = Role.GATEWAY if self.it.has_foreign_neighbor() else Role.MEMBER
            if role is not self.state.role:
                self.state = replace(self.state, role=role)

    # -- events ------------------------------------------------------------
    def emit(self, kind: EventKind, subject: int, cluster: int, data: bytes = b"") -> None:
        event = ClusterEvent(kind, subject, cluster, self.now, data)
        self.world.log(f"event={kind.name} node={self.id} cluster={cluster} round={self.now}")
        self.it.update(event)
        for _, callback in list(self._callbacks):
            callback(event)

    # -- radio/timer helpers ------------------------------------------------
    def send(self, dest: Optional[int], msg_type: MsgType, cluster_id: int, hops: int,
             payload: bytes = b"") -> None:
        msg = WireMessage(msg_type, self.id, cluster_id, min(hops, 0xFF), payload)
        self.world.send(self.id, dest, encode_message(msg))

    def forward(self, dest: int, msg: WireMessage) -> None:
        self.world.send(self.id, dest, encode_message(replace(msg, sender=self.id)))

    def set_timer(self, delay: int, owner: str, name: str, *args) -> None:
        self.world.set_timer(self.id, delay, (owner, self.epoch, name) + args)

    # -- kernel callbacks ----------------------------------------------------
    def on_receive(self, data: bytes, rssi: float) -> None:
        if not self.enabled:
            return
        try:
            msg = decode_message(data)
        except MalformedMessage as exc:
            if "unknown message type" in str(exc):
                self.unknown_type += 1
            else:
                self.decode_errors += 1
            return
        try:
            self._dispatch(msg, rssi)
        except MalformedMessage:
            self.decode_errors += 1

    def _dispatch(self, msg: WireMessage, rssi: float) -> None:
        parse = _EPOCH_TAGGED.get(msg.msg_type)
        payload = parse(msg.payload) if parse else None
        if payload is not None and payload.epoch != (self.epoch & 0xFF):
            self.stale += 1
            return
        t = msg.msg_type
        if t is MsgType.ATTRIBUTE:
            self.chd.on_message(msg)
        elif t is MsgType.JOIN_REQUEST:
            self.observe(msg.sender, msg.cluster_id, msg.hops - 1)
            self.jd.on_join_request(msg, payload, rssi)
        elif t is MsgType.JOIN_ACCEPT:
            if payload.joiner == msg.sender:
                self.observe(msg.sender, msg.cluster_id, payload.hops)
            self.jd.on_join_accept(msg, payload)
        elif t is MsgType.JOIN_DENY:
            if msg.cluster_id != NO_CLUSTER:
                self.observe(msg.sender, msg.cluster_id, payload.hops)
            self.jd.on_join_deny(msg, payload)
        elif t is MsgType.RESUME:
            self.jd.on_resume(msg, payload)
        elif t is MsgType.NEIGHBOR_HELLO:
            self.observe(msg.sender, msg.cluster_id, payload.hops,
                         joinable=bool(payload.flags & HELLO_JOINABLE), hello=True)
        elif t is MsgType.CONVERGECAST:
            self.it.on_convergecast(msg)
        else:
            self.unknown_type += 1

    def observe(self, neighbor: int, cluster: int, hops: int, joinable: bool = False,
                hello: bool = False) -> None:
        newly_foreign = self.it.observe(neighbor, cluster, hops, joinable, hello)
        if newly_foreign and self.state.clustered:
            self.emit(EventKind.NEIGHBOR_OTHER_CLUSTER, neighbor, cluster)
        self._refresh_role()

    def on_timer(self, token) -> None:
        owner, epoch, name, *args = token
        if owner == "cc" and name == "recluster":
            if self.enabled and epoch == self.epoch:
                self.epoch += 1
                self._start_epoch()
            return
        if epoch != self.epoch or not self.enabled:
            return
        if owner == "cc":
            if name == "settle":
                self.settle()
            elif name == "complete":
                self._check_complete()
        elif owner == "chd":
            self.chd.on_timer(name, *args)
        elif owner == "jd":
            self.jd.on_timer(name, *args)
        elif owner == "it":
            self.it.on_timer(name, *args)

    def _check_complete(self) -> None:
        if self.complete or self.state.role is not Role.HEAD:
            return
        remaining = self.last_change + self.quiet_timeout - self.now
        if remaining > 0:
            self.set_timer(remaining, "cc", "complete")
        elif self.jd.busy() or self.it.busy():
            self.set_timer(self.quiet_timeout, "cc", "complete")
        else:
            self.complete = True
            self.emit(EventKind.FORMATION_COMPLETE, self.id, self.id)

    def on_round_end(self) -> None:
        if not self.enabled:
            return
        self.chd.on_round_end()
        self.jd.on_round_end()
