"""Small hand-checkable topologies and network builders shared by the tests."""

import dataclasses
import math

from clusterkit import AlgorithmComposition, ClusterNetwork, Params, Role, Topology


def line(ids, spacing=10.0, comm_range=12.0) -> Topology:
    """Nodes placed left to right in the given order; only consecutive ones hear each other."""
    return Topology.from_positions({n: (i * spacing, 0.0) for i, n in enumerate(ids)}, comm_range)


def star(center, leaves, comm_range=12.0) -> Topology:
    """Leaves on a circle of radius 10 around the centre, far enough apart to be mutually deaf."""
    pos = {center: (0.0, 0.0)}
    for i, leaf in enumerate(leaves):
        a = 2 * math.pi * i / len(leaves)
        pos[leaf] = (10 * math.cos(a), 10 * math.sin(a))
    return Topology.from_positions(pos, comm_range)


def complete(n, comm_range=5.0) -> Topology:
    return Topology.from_positions({i: (math.cos(i), math.sin(i)) for i in range(n)}, comm_range)


def forced(topology, jd, heads, k=1, it="norm", seed=0, **kw) -> ClusterNetwork:
    """A prob-CHD network where exactly ``heads`` elect themselves."""
    comp = AlgorithmComposition("prob", jd, it, Params(p=0.0, k=k))
    net = ClusterNetwork(topology, comp, seed=seed, **kw)
    for h in heads:
        net[h].set_parameters(dataclasses.replace(comp.params, p=1.0))
    return net


def parent_chain_ok(net) -> bool:
    """Every member reaches its head by following parent pointers in exactly hops_to_head steps."""
    for n, cc in net.nodes.items():
        s = cc.state
        if s.role is Role.HEAD:
            if (s.cluster_id, s.parent, s.hops_to_head) != (n, n, 0):
                return False
            continue
        cur, steps = n, 0
        while cur != s.cluster_id:
            nxt = net[cur].it.route_toward(s.cluster_id)
            if nxt is None or nxt not in net.topology.adjacency[cur] or steps > s.hops_to_head:
                return False
            cur, steps = nxt, steps + 1
        if steps != s.hops_to_head:
            return False
    return True

