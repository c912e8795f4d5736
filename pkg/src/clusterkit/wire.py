"""Byte-exact message envelope and payload layouts.

Envelope (big-endian)::

    byte 0      msg_type
    bytes 1-4   sender
    bytes 5-8   cluster_id
    byte 9      hops
    byte 10     payload length L (<= 64)
    bytes 11..  payload
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import IntEnum

MAX_PAYLOAD = 64
NO_CLUSTER = 0xFFFFFFFF
NO_HOPS = 0xFF

_HEADER = struct.Struct(">BIIBB")
HEADER_SIZE = _HEADER.size


class MsgType(IntEnum):
    NEIGHBOR_HELLO = 0x01
    JOIN_REQUEST = 0x02
    JOIN_ACCEPT = 0x03
    JOIN_DENY = 0x04
    ATTRIBUTE = 0x05
    RESUME = 0x06
    CONVERGECAST = 0x07
    ROUTE = 0x08


class MalformedMessage(ValueError):
    """Raised by :func:`decode_message` for bytes that are not a valid envelope."""


@dataclass(frozen=True)
class WireMessage:
    msg_type: MsgType
    sender: int
    cluster_id: int
    hops: int = 0
    payload: bytes = b""

    def __post_init__(self):
        if len(self.payload) > MAX_PAYLOAD:
            raise ValueError(f"payload of {len(self.payload)} bytes exceeds {MAX_PAYLOAD}")
        if not 0 <= self.hops <= 0xFF:
            raise ValueError(f"hops {self.hops} does not fit in one byte")


def encode_message(m: WireMessage) -> bytes:
    if len(m.payload) > MAX_PAYLOAD:
        raise ValueError(f"payload of {len(m.payload)} bytes exceeds {MAX_PAYLOAD}")
    return _HEADER.pack(int(m.msg_type), m.sender, m.cluster_id, m.hops, len(m.payload)) + bytes(m.payload)


def decode_message(data: bytes) -> WireMessage:
    if len(data) < HEADER_SIZE:
        raise MalformedMessage(f"truncated header: {len(data)} bytes")
    tag, sender, cluster, hops, length = _HEADER.unpack_from(data)
    try:
        msg_type = MsgType(tag)
    except ValueError:
        raise MalformedMessage(f"unknown message type 0x{tag:02x}") from None
    if length > MAX_PAYLOAD:
        raise MalformedMessage(f"payload length {length} exceeds {MAX_PAYLOAD}")
    if len(data) != HEADER_SIZE + length:
        raise MalformedMessage(f"length mismatch: header says {length}, got {len(data) - HEADER_SIZE}")
    return WireMessage(msg_type, sender, cluster, hops, bytes(data[HEADER_SIZE:]))


# -- payloads -------------------------------------------------------------

FIXED_POINT = 1 << 16


def to_fixed(x: float) -> int:
    v = int(round(x * FIXED_POINT))
    return max(-(2**31), min(2**31 - 1, v))


def from_fixed(v: int) -> float:
    return v / FIXED_POINT


_JOIN_REQUEST = struct.Struct(">IBiB")


@dataclass(frozen=True)
class JoinRequestPayload:
    origin_head: int
    ttl: int
    metric: int = 0  # 16.16 fixed point, meaning is algorithm specific
    epoch: int = 0

    def pack(self) -> bytes:
        return _JOIN_REQUEST.pack(self.origin_head, self.ttl, self.metric, self.epoch & 0xFF)

    @classmethod
    def unpack(cls, raw: bytes) -> "JoinRequestPayload":
        if len(raw) != _JOIN_REQUEST.size:
            raise MalformedMessage("bad JOIN_REQUEST payload")
        return cls(*_JOIN_REQUEST.unpack(raw))


_ACCEPT = struct.Struct(">IBBBB")

ACCEPT_DONE = 0x01  # joiner has nobody to invite (dfs)
ACCEPT_REPARENT = 0x02


@dataclass(frozen=True)
class AcceptPayload:
    """``heads`` lists the joiner's other cluster-heads (overlapping clusters);
    ``extra`` is left for applications riding on the accept."""

    joiner: int
    epoch: int = 0
    hops: int = 0
    flags: int = 0
    heads: tuple = ()
    extra: bytes = b""

    MAX_HEADS = 14

    def pack(self) -> bytes:
        out = _ACCEPT.pack(self.joiner, self.epoch & 0xFF, self.hops, self.flags, len(self.heads))
        out += b"".join(struct.pack(">I", h) for h in self.heads)
        return out + self.extra

    @classmethod
    def unpack(cls, raw: bytes) -> "AcceptPayload":
        if len(raw) < _ACCEPT.size:
            raise MalformedMessage("bad JOIN_ACCEPT payload")
        joiner, epoch, hops, flags, n = _ACCEPT.unpack_from(raw)
        end = _ACCEPT.size + 4 * n
        if len(raw) < end:
            raise MalformedMessage("truncated head list in JOIN_ACCEPT")
        heads = struct.unpack_from(f">{n}I", raw, _ACCEPT.size)
        return cls(joiner, epoch, hops, flags, tuple(heads), bytes(raw[end:]))


_DENY = struct.Struct(">IBBB")

DENY_LEAVE = 0x01


@dataclass(frozen=True)
class DenyPayload:
    joiner: int
    epoch: int = 0
    hops: int = NO_HOPS
    flags: int = 0

    def pack(self) -> bytes:
        return _DENY.pack(self.joiner, self.epoch & 0xFF, min(self.hops, NO_HOPS), self.flags)

    @classmethod
    def unpack(cls, raw: bytes) -> "DenyPayload":
        if len(raw) != _DENY.size:
            raise MalformedMessage("bad JOIN_DENY payload")
        return cls(*_DENY.unpack(raw))


_RESUME = struct.Struct(">BB")
RESUME_PROBE = 0x01


@dataclass(frozen=True)
class ResumePayload:
    epoch: int = 0
    flags: int = 0

    def pack(self) -> bytes:
        return _RESUME.pack(self.epoch & 0xFF, self.flags)

    @classmethod
    def unpack(cls, raw: bytes) -> "ResumePayload":
        if len(raw) != _RESUME.size:
            raise MalformedMessage("bad RESUME payload")
        return cls(*_RESUME.unpack(raw))


_HELLO = struct.Struct(">BBB")
HELLO_JOINABLE = 0x01  # sender is a self-promoted singleton and may still join


@dataclass(frozen=True)
class HelloPayload:
    epoch: int = 0
    hops: int = 0
    flags: int = 0

    def pack(self) -> bytes:
        return _HELLO.pack(self.epoch & 0xFF, min(self.hops, NO_HOPS), self.flags)

    @classmethod
    def unpack(cls, raw: bytes) -> "HelloPayload":
        if len(raw) != _HELLO.size:
            raise MalformedMessage("bad NEIGHBOR_HELLO payload")
        return cls(*_HELLO.unpack(raw))


_ATTRIBUTE = struct.Struct(">IB")


@dataclass(frozen=True)
class AttributePayload:
    value: int
    ttl: int

    def pack(self) -> bytes:
        return _ATTRIBUTE.pack(self.value, self.ttl)

    @classmethod
    def unpack(cls, raw: bytes) -> "AttributePayload":
        if len(raw) != _ATTRIBUTE.size:
            raise MalformedMessage("bad ATTRIBUTE payload")
        return cls(*_ATTRIBUTE.unpack(raw))


def pack_flood_id(node: int) -> bytes:
    return struct.pack(">I", node)


def unpack_flood_id(raw: bytes) -> int:
    if len(raw) != 4:
        raise MalformedMessage("bad flood payload")
    return struct.unpack(">I", raw)[0]


CONVERGECAST_MAX_IDS = 14


def pack_cluster_list(ids) -> list:
    """Split ``ids`` into CONVERGECAST payloads of at most 14 entries each."""
    ids = list(ids)
    chunks = [ids[i:i + CONVERGECAST_MAX_IDS] for i in range(0, len(ids), CONVERGECAST_MAX_IDS)] or [[]]
    return [struct.pack(f">B{len(c)}I", len(c), *c) for c in chunks]


def unpack_cluster_list(raw: bytes) -> tuple:
    if not raw:
        raise MalformedMessage("empty CONVERGECAST payload")
    n = raw[0]
    if len(raw) != 1 + 4 * n:
        raise MalformedMessage("CONVERGECAST count does not match payload length")
    return struct.unpack_from(f">{n}I", raw, 1)


_ROUTE = struct.Struct(">IH")


@dataclass(frozen=True)
class RoutePayload:
    target_cluster: int
    seq: int

    def pack(self) -> bytes:
        return _ROUTE.pack(self.target_cluster, self.seq & 0xFFFF)

    @classmethod
    def unpack(cls, raw: bytes) -> "RoutePayload":
        if len(raw) != _ROUTE.size:
            raise MalformedMessage("bad ROUTE payload")
        return cls(*_ROUTE.unpack(raw))
