"""Group key establishment riding on a depth-first cluster formation.

Two callbacks are registered on every node's core component. The first folds
a secret into the head's running state whenever the head forms its cluster
or learns of a new member; the second finalises the key once formation is
complete. A joiner's secret travels to its head inside the ``extra`` field of
its JOIN_ACCEPT.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Protocol

from ..core import EventKind, Role
from ..sim import STREAM_SECRET, node_rng

SECRET_BYTES = 8


@dataclass(frozen=True)
class GroupKey:
    value: int
    contributors: int


class KeyCombiner(Protocol):
    def initial(self): ...

    def contribute(self, state, secret: int): ...

    def finalize(self, state, contributors: int) -> GroupKey: ...


class AdditiveCombiner:
    """Sum of 64-bit secrets modulo 2**64 (order independent)."""

    modulus = 1 << 64

    def initial(self) -> int:
        return 0

    def contribute(self, state: int, secret: int) -> int:
        return (state + secret) % self.modulus

    def finalize(self, state: int, contributors: int) -> GroupKey:
        return GroupKey(state, contributors)


def default_secret(seed: int, node: int) -> int:
    return node_rng(seed, node, STREAM_SECRET).getrandbits(8 * SECRET_BYTES)


class GroupKeyEstablishment:
    def __init__(self, network, combiner: Optional[KeyCombiner] = None,
                 secrets: Optional[dict] = None):
        self.net = network
        self.combiner = combiner or AdditiveCombiner()
        self.secrets = dict(secrets) if secrets is not None else {
            n: default_secret(network.seed, n) for n in network.nodes}
        self.partial: dict = {}  # head -> (state, contributors)
        self.keys: dict = {}  # head -> GroupKey at FORMATION_COMPLETE
        self.join_order: dict = {}  # head -> joiners in NODE_JOINED order
        for n, cc in network.nodes.items():
            secret = self.secrets[n].to_bytes(SECRET_BYTES, "big")
            cc.accept_extra = lambda secret=secret: secret
            cc.register_changed_callback(self._on_change(n))
            cc.register_changed_callback(self._on_complete(n))

    def _fold(self, head: int, secret: int) -> None:
        state, count = self.partial[head]
        self.partial[head] = (self.combiner.contribute(state, secret), count + 1)

    def _on_change(self, node: int):
        def callback(event) -> None:
            if event.kind is EventKind.CLUSTER_FORMED and event.subject == node:
                self.partial[node] = (self.combiner.initial(), 0)
                self.join_order[node] = []
                self._fold(node, self.secrets[node])
            elif event.kind is EventKind.JOINED_CLUSTER and event.subject == node:
                # a self-promoted orphan recruited later hands its cluster over
                self.partial.pop(node, None)
                self.join_order.pop(node, None)
                self.keys.pop(node, None)
            elif event.kind is EventKind.NODE_JOINED and node in self.partial:
                self.join_order[node].append(event.subject)
                self._fold(node, int.from_bytes(event.data[:SECRET_BYTES], "big"))
        return callback

    def _on_complete(self, node: int):
        def callback(event) -> None:
            if (event.kind is EventKind.FORMATION_COMPLETE and node in self.partial
                    and self.net[node].state.role is Role.HEAD):
                state, count = self.partial[node]
                self.keys[node] = self.combiner.finalize(state, count)
        return callback

    def distribute(self) -> dict:
        """Hand every node its cluster's key, as the head would push it down
        the tree; nodes whose head has not finished get no entry."""
        out = {}
        for n, cc in self.net.nodes.items():
            head = cc.state.cluster_id
            if cc.state.clustered and head in self.keys and self.net[head].state.role is Role.HEAD:
                out[n] = self.keys[head]
        return out
