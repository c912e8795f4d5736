"""Cluster-head decision (CHD) modules.

Each module decides, once per formation epoch, whether its node is a
cluster-head and reports the outcome through ``cc.head_decided``. The pure
decision rules are exposed as plain functions so they can be tested without a
simulator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .sim import STREAM_PROTOCOL
from .wire import AttributePayload, MsgType, pack_flood_id, unpack_flood_id


def prob_calculate_head(p: float, rng) -> bool:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p={p} outside [0, 1]")
    return rng.random() < p


def attr_calculate_head(own: tuple, heard) -> bool:
    """``own`` and every element of ``heard`` are ``(value, node_id)`` pairs;
    lexicographic order breaks value ties by the lower id."""
    return all(own < other for other in heard if other != own)


def leach_threshold(P: float, formation_round: int, was_head_this_epoch: bool) -> float:
    if not 0.0 < P <= 1.0:
        raise ValueError(f"P={P} outside (0, 1]")
    if was_head_this_epoch:
        return 0.0
    period = math.ceil(1.0 / P)
    denom = 1.0 - P * (formation_round % period)
    if denom <= 0.0:
        return 1.0
    return min(1.0, max(0.0, P / denom))


def tcca_calculate_head(p: float, energy: float, e_max: float, rng) -> bool:
    if e_max <= 0:
        raise ValueError("e_max must be positive")
    if not 0.0 <= energy <= e_max:
        raise ValueError(f"energy {energy} outside [0, {e_max}]")
    return rng.random() < p * (energy / e_max)


class ChdModule:
    """Base class. ``rounds`` is the number of message rounds the decision takes."""

    name = "chd"
    rounds = 0

    def __init__(self, cc):
        self.cc = cc
        self.params = None
        # a private stream so head draws do not shift when other modules draw
        self.rng = cc.world.rng(cc.id, STREAM_PROTOCOL)

    def set_parameters(self, params) -> None:
        self.params = params

    def reset(self) -> None:
        pass

    def start(self) -> None:
        raise NotImplementedError

    def on_message(self, msg) -> None:
        pass

    def on_timer(self, name: str, *args) -> None:
        pass

    def on_round_end(self) -> None:
        pass


class ProbChd(ChdModule):
    name = "prob"

    def start(self) -> None:
        self.cc.head_decided(prob_calculate_head(self.params.p, self.rng))


class TccaChd(ChdModule):
    name = "tcca"

    def start(self) -> None:
        energy = min(self.cc.energy, self.params.e_max)
        self.cc.head_decided(tcca_calculate_head(self.params.p, energy, self.params.e_max, self.rng))


class LeachChd(ChdModule):
    """Rotating election: every node is head once per ``ceil(1/P)`` formations."""

    name = "leach"

    def __init__(self, cc):
        super().__init__(cc)
        self.formation = 0
        self.head_in_rotation = False
        self.threshold = 0.0

    def start(self) -> None:
        period = math.ceil(1.0 / self.params.P_desired)
        if self.formation % period == 0:
            self.head_in_rotation = False
        self.threshold = leach_threshold(self.params.P_desired, self.formation, self.head_in_rotation)
        is_head = self.rng.random() < self.threshold
        self.head_in_rotation = self.head_in_rotation or is_head
        self.formation += 1
        self.cc.head_decided(is_head)


class AttrChd(ChdModule):
    """Minimum-attribute election over the k-hop neighbourhood.

    Every node floods the smallest ``(value, id)`` pair it knows for k rounds,
    one broadcast per round, and is head iff its own pair survives.
    """

    name = "attr"

    def set_parameters(self, params) -> None:
        super().set_parameters(params)
        self.rounds = params.k

    def reset(self) -> None:
        self.best = (self.cc.attribute, self.cc.id)
        self.tick = 0

    def start(self) -> None:
        self.reset()
        self._broadcast()
        self.cc.set_timer(1, "chd", "tick")

    def _broadcast(self) -> None:
        value, owner = self.best
        payload = AttributePayload(value, self.rounds - self.tick).pack()
        self.cc.send(None, MsgType.ATTRIBUTE, owner, 0, payload)

    def on_message(self, msg) -> None:
        attr = AttributePayload.unpack(msg.payload)
        pair = (attr.value, msg.cluster_id)
        if pair < self.best:
            self.best = pair

    def on_timer(self, name: str, *args) -> None:
        if name != "tick":
            return
        self.tick += 1
        if self.tick < self.rounds:
            self._broadcast()
            self.cc.set_timer(1, "chd", "tick")
        else:
            self.cc.head_decided(self.best == (self.cc.attribute, self.cc.id))


@dataclass
class MaxMinDLog:
    floodmax: list = field(default_factory=list)
    floodmin: list = field(default_factory=list)
    first_heard: dict = field(default_factory=dict)  # id -> (round, lowest sender)


def maxmind_rules(node: int, log: MaxMinDLog) -> int:
    """Apply the three MaxMinD election rules to a node's winner logs."""
    if node in log.floodmin:
        return node
    common = set(log.floodmax) & set(log.floodmin)
    if common:
        return min(common)
    return log.floodmax[-1] if log.floodmax else node


class MaxMinDChd(ChdModule):
    """d rounds of floodmax followed by d rounds of floodmin."""

    name = "maxmind"

    def set_parameters(self, params) -> None:
        super().set_parameters(params)
        self.d = params.d
        self.rounds = 2 * params.d

    def reset(self) -> None:
        self.winner = self.cc.id
        self.step = 0
        self.inbox: list = []
        self.log = MaxMinDLog()

    def start(self) -> None:
        self.reset()
        self._flood()
        self.cc.set_timer(1, "chd", "tick")

    def _flood(self) -> None:
        self.cc.send(None, MsgType.ATTRIBUTE, self.winner, 0, pack_flood_id(self.winner))

    def on_message(self, msg) -> None:
        value = unpack_flood_id(msg.payload)
        self.inbox.append(value)
        first = self.log.first_heard
        if value not in first:
            first[value] = (self.step + 1, msg.sender)
        elif first[value][0] == self.step + 1 and msg.sender < first[value][1]:
            first[value] = (self.step + 1, msg.sender)

    def on_timer(self, name: str, *args) -> None:
        if name != "tick":
            return
        self.step += 1
        received, self.inbox = self.inbox, []
        if self.step <= self.d:
            self.winner = max([self.winner] + received)
            self.log.floodmax.append(self.winner)
        else:
            self.winner = min([self.winner] + received)
            self.log.floodmin.append(self.winner)
        if self.step < self.rounds:
            self._flood()
            self.cc.set_timer(1, "chd", "tick")
            return
        head = maxmind_rules(self.cc.id, self.log)
        if head == self.cc.id:
            self.cc.head_decided(True)
        else:
            hops, parent = self.log.first_heard[head]
            self.cc.head_decided(False, head=head, parent=parent, hops=hops)

    def arrival(self, head: int) -> Optional[tuple]:
        """``(round, sender)`` of the first copy of ``head`` heard, if any."""
        return self.log.first_heard.get(head)
