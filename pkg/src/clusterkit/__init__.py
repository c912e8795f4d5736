"""Component-based clustering for simulated wireless sensor networks."""

from .compose import PRESETS, preset
from .core import AlgorithmComposition, ClusterEvent, ClusterState, CoreComponent, EventKind, Params, Role
from .network import ClusterNetwork
from .sim import RadioModel, Topology, TopologySpec, World, build_topology, k_hop_neighbors, load_topology
from .wire import MsgType, WireMessage, decode_message, encode_message

__all__ = [
    "AlgorithmComposition", "ClusterEvent", "ClusterNetwork", "ClusterState", "CoreComponent",
    "EventKind", "MsgType", "PRESETS", "Params", "RadioModel", "Role", "Topology", "TopologySpec",
    "WireMessage", "World", "build_topology", "decode_message", "encode_message", "k_hop_neighbors",
    "load_topology", "preset",
]
