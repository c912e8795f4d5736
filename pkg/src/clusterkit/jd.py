"""Join-decision (JD) modules.

Breadth-first family (bfs, lca, leach, tcca): heads broadcast a JOIN_REQUEST;
an undecided node collects requests for two rounds after the first one, picks
a head by the module's rule, answers with a JOIN_ACCEPT to the neighbour the
chosen request came from, relays the request if it is still within k hops,
and denies each losing head once. Accepts climb hop by hop to the head.

moca relays every head's request and joins all of them; dfs invites nodes one
at a time by unicast and passes a token; maxmind joins straight from the
election outcome without any message.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .wire import (
    ACCEPT_DONE,
    ACCEPT_REPARENT,
    DENY_LEAVE,
    RESUME_PROBE,
    AcceptPayload,
    DenyPayload,
    JoinRequestPayload,
    MsgType,
    ResumePayload,
    from_fixed,
    to_fixed,
)

DECISION_DELAY = 2


@dataclass
class Candidate:
    hops: int
    arrival: int
    sender: int
    metric: int = 0
    rssi: float = float("-inf")

    def improve(self, other: "Candidate") -> None:
        if (other.hops, other.arrival, other.sender) < (self.hops, self.arrival, self.sender):
            self.hops, self.arrival, self.sender = other.hops, other.arrival, other.sender
        self.rssi = max(self.rssi, other.rssi)


def lca_rank(head: int, c: Candidate) -> tuple:
    return (c.hops, head)


def leach_rank(head: int, c: Candidate) -> tuple:
    return (-c.rssi, head)


def tcca_score(energy: float, hops: int) -> float:
    return energy / max(hops, 1)


def tcca_rank(head: int, c: Candidate) -> tuple:
    return (-tcca_score(from_fixed(c.metric), c.hops), head)


def bfs_rank(head: int, c: Candidate) -> tuple:
    return (c.arrival, c.hops, head)


class JdModule:
    name = "jd"
    # announce every join with a HELLO straight away instead of at settle time
    announce_joins = False

    def __init__(self, cc):
        self.cc = cc
        self.params = None
        self.reset()

    @property
    def it(self):
        return self.cc.it

    @property
    def radius(self) -> int:
        return self.params.k

    def set_parameters(self, params) -> None:
        self.params = params

    def reset(self) -> None:
        pass

    def start(self, is_head: bool, **info) -> None:
        raise NotImplementedError

    def settle_delay(self) -> Optional[int]:
        """Rounds after the head decision at which leftover nodes give up."""
        return 3 * self.radius + 2

    def busy(self) -> bool:
        return False

    # -- message helpers ------------------------------------------------------
    def request_payload(self, head: int, hops: int, metric: int = 0) -> bytes:
        return JoinRequestPayload(head, max(0, self.radius - hops), metric, self.cc.epoch).pack()

    def send_accept(self, dest: int, head: int, hops: int, flags: int = 0, heads=()) -> None:
        payload = AcceptPayload(self.cc.id, self.cc.epoch, hops, flags, tuple(heads),
                                self.cc.accept_extra())
        self.cc.send(dest, MsgType.JOIN_ACCEPT, head, hops, payload.pack())

    def send_deny(self, dest: int, flags: int = 0) -> None:
        state = self.cc.state
        payload = DenyPayload(self.cc.id, self.cc.epoch, state.hops_to_head, flags)
        self.cc.send(dest, MsgType.JOIN_DENY, state.cluster_id, state.hops_to_head, payload.pack())

    def pass_up(self, msg, payload: AcceptPayload) -> None:
        """Deliver an accept to its head: consume it there, otherwise forward."""
        head = msg.cluster_id
        if head == self.cc.id and self.cc.is_cluster_head():
            if self.it.add_member(payload.joiner, payload.hops):
                self.cc.member_joined(payload.joiner, payload.extra)
            return
        nxt = self.it.route_toward(head)
        if nxt is not None and nxt != self.cc.id:
            self.cc.forward(nxt, msg)

    # -- inbound ----------------------------------------------------------------
    def on_join_request(self, msg, payload, rssi: float) -> None:
        pass

    def on_join_accept(self, msg, payload) -> None:
        if payload.joiner == msg.sender:
            self.it.add_child(payload.joiner)
        self.pass_up(msg, payload)

    def on_join_deny(self, msg, payload) -> None:
        if payload.flags & DENY_LEAVE:
            self.it.remove_child(msg.sender)

    def on_resume(self, msg, payload) -> None:
        pass

    def on_timer(self, name: str, *args) -> None:
        pass

    def on_round_end(self) -> None:
        pass


class BfsJd(JdModule):
    name = "bfs"
    rank = staticmethod(bfs_rank)

    def reset(self) -> None:
        self.candidates: dict = {}
        self.inbox: list = []
        self.deadline: Optional[int] = None
        self.decided = False
        self.denied: set = set()

    def head_metric(self) -> int:
        return 0

    def start(self, is_head: bool, **info) -> None:
        if is_head:
            me = self.cc.id
            self.cc.send(None, MsgType.JOIN_REQUEST, me, 1, self.request_payload(me, 1, self.head_metric()))

    def on_join_request(self, msg, payload, rssi: float) -> None:
        if self.cc.is_cluster_head():
            return
        head = payload.origin_head
        if self.decided:
            if head != self.cc.state.cluster_id and head not in self.denied:
                self.denied.add(head)
                self.send_deny(msg.sender)
            return
        self.inbox.append((head, Candidate(msg.hops, self.cc.now, msg.sender, payload.metric, rssi)))

    def on_round_end(self) -> None:
        if self.inbox:
            for head, cand in self.inbox:
                known = self.candidates.get(head)
                if known is None:
                    self.candidates[head] = cand
                else:
                    known.improve(cand)
            self.inbox = []
            if self.deadline is None:
                self.deadline = self.cc.now + DECISION_DELAY
                self.cc.set_timer(DECISION_DELAY, "jd", "deadline")
        if not self.decided and self.deadline is not None and self.cc.now >= self.deadline:
            self.decide()

    def choose(self) -> int:
        return min(self.candidates, key=lambda h: self.rank(h, self.candidates[h]))

    def decide(self) -> None:
        self.decided = True
        if self.cc.clustered:
            return
        head = self.choose()
        best = self.candidates[head]
        self.cc.join(head, best.sender, best.hops)
        self.it.record_up(head, best.sender, best.hops)
        self.send_accept(best.sender, head, best.hops)
        if best.hops < self.radius:
            self.cc.send(None, MsgType.JOIN_REQUEST, head, best.hops + 1,
                         self.request_payload(head, best.hops + 1, best.metric))
        for other in sorted(self.candidates):
            if other != head:
                self.denied.add(other)
                self.send_deny(self.candidates[other].sender)


class LcaJd(BfsJd):
    """Join the closest head (fewest hops, then lower id)."""

    name = "lca"
    rank = staticmethod(lca_rank)


class LeachJd(BfsJd):
    """One-hop advertisement; join the head heard with the strongest signal."""

    name = "leach"
    rank = staticmethod(leach_rank)

    @property
    def radius(self) -> int:
        return 1


class TccaJd(BfsJd):
    """Heads advertise their residual energy; members maximise energy / hops."""

    name = "tcca"
    rank = staticmethod(tcca_rank)

    def head_metric(self) -> int:
        return to_fixed(self.cc.energy)


class MocaJd(BfsJd):
    """Overlapping k-hop clusters: every node joins every head within k hops."""

    name = "moca"

    def start(self, is_head: bool, **info) -> None:
        super().start(is_head)
        self.deadline = self.cc.now + self.radius
        if not is_head:
            self.cc.set_timer(self.radius, "jd", "deadline")

    def settle_delay(self) -> Optional[int]:
        return self.radius + 2

    def on_join_request(self, msg, payload, rssi: float) -> None:
        head = payload.origin_head
        if head == self.cc.id:
            return
        if self.it.record_up(head, msg.sender, msg.hops) and msg.hops < self.radius:
            self.cc.send(None, MsgType.JOIN_REQUEST, head, msg.hops + 1,
                         self.request_payload(head, msg.hops + 1, payload.metric))
        if self.cc.is_cluster_head():
            if self.cc.elected:
                self.it.note_adjacent([head])
            return
        if not self.decided and head not in self.candidates:
            self.candidates[head] = Candidate(msg.hops, self.cc.now, msg.sender)

    def on_round_end(self) -> None:
        if not self.decided and self.deadline is not None and self.cc.now >= self.deadline:
            self.decided = True
            if self.candidates and not self.cc.clustered:
                self._join_all()

    def _join_all(self) -> None:
        heads = sorted(self.candidates)
        primary = heads[0]
        first = self.candidates[primary]
        self.cc.join(primary, first.sender, first.hops)
        for h in heads:
            self.it.add_head(h, self.candidates[h].hops)
        for h in heads:
            c = self.candidates[h]
            others = [x for x in heads if x != h]
            chunks = [others[i:i + AcceptPayload.MAX_HEADS]
                      for i in range(0, len(others), AcceptPayload.MAX_HEADS)] or [[]]
            for chunk in chunks:
                self.send_accept(c.sender, h, c.hops, heads=chunk)

    def on_join_accept(self, msg, payload) -> None:
        super().on_join_accept(msg, payload)
        if msg.cluster_id == self.cc.id and self.cc.is_cluster_head():
            self.it.note_adjacent(payload.heads)


class DfsJd(JdModule):
    """Depth-first formation by token passing.

    The token holder invites one unexamined neighbour at a time. An invitee
    that joins either answers ``ACCEPT_DONE`` (nothing left for it to invite)
    or takes the token, runs its own sub-traversal and hands control back
    with RESUME. A node reached later by a shorter route re-parents and walks
    its neighbourhood again so nodes within k hops are not cut off by a deep
    first path.
    """

    name = "dfs"
    announce_joins = True
    RETRY = 3
    MAX_TRIES = 3

    def reset(self) -> None:
        self.active = False
        self.inviter: Optional[int] = None
        self.target: Optional[int] = None
        self.tries = 0
        self.seq = 0
        self.waiting: Optional[int] = None
        self.probe_seq = 0
        self.relax: Optional[list] = None
        self.finished = False

    def start(self, is_head: bool, **info) -> None:
        if is_head:
            self.active = True
            self._proceed()

    def busy(self) -> bool:
        return self.active or self.waiting is not None or self.target is not None

    @property
    def probe_period(self) -> int:
        return max(8, 2 * self.radius + 2)

    # -- token holder -------------------------------------------------------
    def _next_target(self) -> Optional[int]:
        while self.relax:
            n = self.relax.pop(0)
            state = self.cc.state
            if (self.it.seen.get(n) == state.cluster_id and n != state.parent
                    and self.it.seen_hops.get(n, 0) > state.hops_to_head + 1):
                return n
        return self.it.next_neighbor(closer_than=self.cc.state.hops_to_head + 1)

    def _has_work(self) -> bool:
        if self.cc.state.hops_to_head >= self.radius:
            return False
        return bool(self.relax) or self.it.peek_neighbor(self.cc.state.hops_to_head + 1) is not None

    def _proceed(self) -> None:
        if self.cc.state.hops_to_head >= self.radius:
            self._finish()
            return
        n = self._next_target()
        if n is None:
            self._finish()
            return
        self.target = n
        self.tries = 0
        self._invite()

    def _invite(self) -> None:
        self.tries += 1
        self.seq += 1
        cluster = self.cc.state.cluster_id
        hops = self.cc.state.hops_to_head + 1
        self.cc.send(self.target, MsgType.JOIN_REQUEST, cluster, hops, self.request_payload(cluster, hops))
        self.cc.set_timer(self.RETRY, "jd", "retry", self.seq)

    def _finish(self) -> None:
        self.active = False
        self.target = None
        self.relax = None
        self.finished = True
        if not self.cc.is_cluster_head() and self.inviter is not None:
            self.cc.send(self.inviter, MsgType.RESUME, self.cc.state.cluster_id,
                         self.cc.state.hops_to_head, ResumePayload(self.cc.epoch).pack())

    def _await(self, child: int) -> None:
        self.waiting = child
        if self.cc.lossy:
            self.probe_seq += 1
            self.cc.set_timer(self.probe_period, "jd", "probe", child, self.probe_seq)

    def on_timer(self, name: str, *args) -> None:
        if name == "retry":
            if args[0] != self.seq or self.target is None:
                return
            if self.tries < self.MAX_TRIES:
                self._invite()
            else:
                self.target = None
                self._proceed()
        elif name == "probe":
            child, seq = args
            if self.waiting == child and seq == self.probe_seq:
                self.cc.send(child, MsgType.RESUME, self.cc.state.cluster_id, self.cc.state.hops_to_head,
                             ResumePayload(self.cc.epoch, RESUME_PROBE).pack())
                self.cc.set_timer(self.probe_period, "jd", "probe", child, seq)

    # -- invitee ----------------------------------------------------------------
    def on_join_request(self, msg, payload, rssi: float) -> None:
        cc = self.cc
        sender, cluster, hops = msg.sender, msg.cluster_id, msg.hops
        state = cc.state
        if cc.joinable and not cc.elected:
            cc.join(cluster, sender, hops)
            self.inviter = sender
            self._accept(sender, cluster, hops, 0)
            return
        if state.cluster_id == cluster and not cc.is_cluster_head():
            if sender == state.parent and hops == state.hops_to_head:
                # our accept was lost and the parent asks again
                flags = 0 if self.active else ACCEPT_DONE
                self.send_accept(sender, cluster, hops, flags)
                return
            if hops < state.hops_to_head and not self.active and self.waiting is None:
                old = state.parent
                cc.join(cluster, sender, hops)
                if old != sender:
                    self.send_deny(old, DENY_LEAVE)
                self.inviter = sender
                self.relax = [n for n in cc.neighbors
                              if n != sender and self.it.seen.get(n) == cluster
                              and self.it.seen_hops.get(n, 0) > hops + 1]
                self._accept(sender, cluster, hops, ACCEPT_REPARENT)
                return
        self.send_deny(sender)

    def _accept(self, inviter: int, cluster: int, hops: int, flags: int) -> None:
        if self._has_work():
            self.active = True
            self.finished = False
            self.send_accept(inviter, cluster, hops, flags)
            self._proceed()
        else:
            self.relax = None
            self.finished = True
            self.send_accept(inviter, cluster, hops, flags | ACCEPT_DONE)

    # -- replies to our invitations ---------------------------------------------
    def on_join_accept(self, msg, payload) -> None:
        joiner = payload.joiner
        direct = joiner == msg.sender
        if direct:
            self.it.add_child(joiner)
        if not payload.flags & ACCEPT_REPARENT or not direct:
            self.pass_up(msg, payload)
        if direct and joiner == self.target:
            self.target = None
            if payload.flags & ACCEPT_DONE:
                self._proceed()
            else:
                self._await(joiner)

    def on_join_deny(self, msg, payload) -> None:
        super().on_join_deny(msg, payload)
        if payload.flags & DENY_LEAVE:
            return
        if msg.sender == self.target:
            self.target = None
            self._proceed()

    def on_resume(self, msg, payload) -> None:
        if payload.flags & RESUME_PROBE:
            if self.finished and not self.active and msg.sender == self.cc.state.parent:
                self.cc.send(msg.sender, MsgType.RESUME, self.cc.state.cluster_id,
                             self.cc.state.hops_to_head, ResumePayload(self.cc.epoch).pack())
            return
        if msg.sender == self.waiting:
            self.waiting = None
            self._proceed()


class MaxMindJd(JdModule):
    """Join the head elected by the MaxMinD heuristic; no messages needed."""

    name = "maxmind"

    @property
    def radius(self) -> int:
        return self.params.d

    def settle_delay(self) -> Optional[int]:
        return None

    def start(self, is_head: bool, head: Optional[int] = None, parent: Optional[int] = None,
              hops: Optional[int] = None, **info) -> None:
        log = getattr(self.cc.chd, "log", None)
        if log is not None:
            for node, (rnd, sender) in sorted(log.first_heard.items()):
                self.it.record_up(node, sender, rnd)
        if not is_head:
            if head is None:
                raise RuntimeError("maxmind join needs the head chosen by the maxmind election")
            self.cc.join(head, parent, hops)
        self.cc.settle()
        schedule = getattr(self.it, "schedule_convergecast", None)
        if schedule is not None:
            schedule(1)
