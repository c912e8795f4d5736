"""Intra- and inter-cluster routing over whatever clustering is installed.

Only the clustering contracts are used: a node's cluster id, the iterator's
``route_toward`` next hop and its foreign-neighbour observations. Any of the
five compositions can sit underneath.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import Enum


class RouteMode(Enum):
    INTRA = "intra"
    INTER = "inter"


@dataclass(frozen=True)
class RouteResult:
    path: tuple
    hop_count: int
    mode: RouteMode
    clusters: tuple = ()


class NotInCluster(LookupError):
    pass


class Unreachable(LookupError):
    pass


class ClusterRadio:
    """Route queries are answered between simulation rounds."""

    def __init__(self, network):
        self.net = network

    def cluster_of(self, node: int) -> int:
        state = self.net[node].state
        if not state.clustered:
            raise NotInCluster(f"node {node} is not clustered")
        return state.cluster_id

    def _ascend(self, node: int, head: int) -> list:
        path = [node]
        seen = {node}
        while path[-1] != head:
            nxt = self.net[path[-1]].it.route_toward(head)
            if nxt is None or nxt in seen:
                raise Unreachable(f"no tree path from {node} to head {head}")
            path.append(nxt)
            seen.add(nxt)
        return path

    def intra_route(self, src: int, dst: int) -> RouteResult:
        if src == dst:
            return RouteResult((src,), 0, RouteMode.INTRA, (self.cluster_of(src),))
        cluster = self.cluster_of(src)
        if self.cluster_of(dst) != cluster:
            raise NotInCluster(f"node {dst} is not in cluster {cluster}")
        up = self._ascend(src, cluster)
        down = self._ascend(dst, cluster)
        where = {n: i for i, n in enumerate(down)}
        for i, n in enumerate(up):
            if n in where:
                path = up[:i + 1] + down[:where[n]][::-1]
                return RouteResult(tuple(path), len(path) - 1, RouteMode.INTRA, (cluster,))
        raise Unreachable(f"paths from {src} and {dst} never meet")  # pragma: no cover

    def gateway_links(self) -> dict:
        """``(c, c') -> (u, v)``: the smallest node pair bridging two clusters."""
        links: dict = {}
        for u, cc in self.net.nodes.items():
            if not cc.state.clustered:
                continue
            c = cc.state.cluster_id
            for v, other in cc.it.foreign_links():
                for key, link in (((c, other), (u, v)), ((other, c), (v, u))):
                    if key not in links or link < links[key]:
                        links[key] = link
        return links

    def cluster_graph(self) -> dict:
        graph: dict = {}
        for a, b in self.gateway_links():
            graph.setdefault(a, set()).add(b)
            graph.setdefault(b, set()).add(a)
        return graph

    def cluster_path(self, src_cluster: int, dst_cluster: int) -> list:
        graph = self.cluster_graph()
        previous = {src_cluster: None}
        queue = deque([src_cluster])
        while queue:
            c = queue.popleft()
            if c == dst_cluster:
                break
            for nxt in sorted(graph.get(c, ())):
                if nxt not in previous:
                    previous[nxt] = c
                    queue.append(nxt)
        if dst_cluster not in previous:
            raise Unreachable(f"cluster {dst_cluster} unreachable from cluster {src_cluster}")
        path = [dst_cluster]
        while previous[path[-1]] is not None:
            path.append(previous[path[-1]])
        return path[::-1]

    def inter_route(self, src: int, dst: int) -> RouteResult:
        src_cluster, dst_cluster = self.cluster_of(src), self.cluster_of(dst)
        if src_cluster == dst_cluster:
            return self.intra_route(src, dst)
        clusters = self.cluster_path(src_cluster, dst_cluster)
        links = self.gateway_links()
        path = list(self.intra_route(src, src_cluster).path)
        for a, b in zip(clusters, clusters[1:]):
            u, v = links[(a, b)]
            path += self.intra_route(path[-1], u).path[1:]
            path.append(v)
        path += self.intra_route(path[-1], dst).path[1:]
        return RouteResult(tuple(path), len(path) - 1, RouteMode.INTER, tuple(clusters))
