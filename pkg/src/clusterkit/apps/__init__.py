"""Applications built on top of a formed clustering."""

from .gke import AdditiveCombiner, GroupKey, GroupKeyEstablishment, KeyCombiner
from .routing import ClusterRadio, NotInCluster, RouteMode, RouteResult, Unreachable

__all__ = [
    "AdditiveCombiner", "ClusterRadio", "GroupKey", "GroupKeyEstablishment", "KeyCombiner",
    "NotInCluster", "RouteMode", "RouteResult", "Unreachable",
]
