"""A whole simulated network running one clustering composition."""

from __future__ import annotations

from collections import defaultdict
from typing import Callable, Optional

from .compose import validate
from .core import AlgorithmComposition, CoreComponent, Role
from .sim import STREAM_ENERGY, RadioModel, Topology, World, node_rng

ENERGY_RANGE = (0.2, 1.0)


def default_energy(seed: int, node: int) -> float:
    lo, hi = ENERGY_RANGE
    return node_rng(seed, node, STREAM_ENERGY).uniform(lo, hi)


class ClusterNetwork:
    def __init__(self, topology: Topology, composition: AlgorithmComposition,
                 radio: RadioModel = RadioModel(), seed: int = 0,
                 trace: Optional[Callable[[str], None]] = None,
                 energies: Optional[dict] = None, attributes: Optional[dict] = None):
        validate(composition)
        self.topology = topology
        self.composition = composition
        self.seed = seed
        self.world = World(topology, radio, seed, trace)
        self.nodes: dict = {}
        for n in topology.ids:
            energy = energies[n] if energies is not None else default_energy(seed, n)
            attribute = attributes[n] if attributes is not None else None
            cc = CoreComponent(n, self.world, composition, energy, attribute)
            self.nodes[n] = cc
            self.world.attach(n, cc)
        self.aborted = False
        self.reports: list = []

    def __getitem__(self, node: int) -> CoreComponent:
        return self.nodes[node]

    @property
    def params(self):
        return self.composition.params

    def round_cap(self) -> int:
        p = self.params
        k = 1 if self.composition.jd == "leach" else p.k
        cap = 10 * (2 * k + 2) + 2 * p.d
        if self.composition.jd == "dfs":
            # a depth-first traversal visits nodes one at a time
            cap += 12 * len(self.topology)
        return cap

    def enable_all(self) -> None:
        for cc in self.nodes.values():
            cc.enable()

    def run(self, max_rounds: Optional[int] = None) -> list:
        """Enable every node and step to quiescence (one-shot) or for a fixed
        number of rounds (periodic re-clustering never goes quiet)."""
        self.enable_all()
        if self.params.t > 0:
            rounds = max_rounds if max_rounds is not None else self.params.t - 1
            self.reports = self.world.run(rounds, until_quiescent=False)
            return self.reports
        cap = max_rounds if max_rounds is not None else self.round_cap()
        self.reports = self.world.run(cap)
        self.aborted = not self.world.quiescent
        return self.reports

    def step(self, rounds: int = 1) -> list:
        return self.world.run(rounds, until_quiescent=False)

    # -- views ---------------------------------------------------------------
    def states(self) -> dict:
        return {n: cc.state for n, cc in self.nodes.items()}

    def heads(self) -> list:
        return [n for n, cc in self.nodes.items() if cc.state.role is Role.HEAD]

    def orphans(self) -> list:
        return [n for n, cc in self.nodes.items() if cc.state.role is Role.HEAD and cc.orphan]

    def clusters(self) -> dict:
        """Primary cluster id -> sorted member list (head included)."""
        groups = defaultdict(list)
        for n, cc in self.nodes.items():
            if cc.state.clustered:
                groups[cc.state.cluster_id].append(n)
        return {c: sorted(v) for c, v in sorted(groups.items())}

    def cluster_lists(self) -> dict:
        """Every cluster a node belongs to (several under overlapping clustering)."""
        out = {}
        for n, cc in self.nodes.items():
            lister = getattr(cc.it, "cluster_list", None)
            if lister is not None and lister():
                out[n] = lister()
            else:
                out[n] = (cc.state.cluster_id,) if cc.state.clustered else ()
        return out

    def messages_by_type(self) -> dict:
        return dict(self.world.sent_by_type)

    def chd_rounds(self) -> Optional[int]:
        decided = [cc.decided_at - cc.epoch_start for cc in self.nodes.values() if cc.decided_at is not None]
        return max(decided) if decided else None
