"""Store-and-forward gateway packet log: binary format, emitter and replay.

Collars buffer readings in flash while the uplink is down and upload the
backlog later, so a log can contain segments out of order and repeated
retransmissions. Replay merges everything back into one ordered stream.

File layout (all integers little-endian)::

    header   magic b"CAPK" | version u16 (=1) | flags u16 (=0)
    record   payload_len u32 | payload | crc32(payload) u32
    payload  id_len u8 | device_id utf-8 | base_ts i64 (epoch ms) | count u16
             then `count` entries of
             delta_ms u32 | acc_x f64 | acc_y f64 | acc_z f64 | label u8

``label`` is 0 for unlabeled samples, else 1 + index into ``ALL_CODES``.
"""
from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from itertools import groupby
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ..table import atomic_write
from .labels import ALL_CODES
from .samples import Sample, sort_samples

MAGIC = b"CAPK"
VERSION = 1
_FILE_HEADER = struct.Struct("<4sHH")
_U32 = struct.Struct("<I")
_PACKET_HEAD = struct.Struct("<qH")
_ENTRY = struct.Struct("<IdddB")
MAX_SAMPLES_PER_PACKET = 0xFFFF


class PacketError(ValueError):
    def __init__(self, message: str, offset: int):
        self.offset = offset
        super().__init__(f"{message} at byte offset {offset}")


@dataclass(frozen=True)
class Packet:
    device_id: str
    base_timestamp: int
    samples: tuple[Sample, ...]


def _label_code(label: str | None) -> int:
    if label is None:
        return 0
    try:
        return ALL_CODES.index(label) + 1
    except ValueError:
        raise ValueError(f"label {label!r} has no packet encoding") from None


def encode_packet(packet: Packet) -> bytes:
    dev = packet.device_id.encode("utf-8")
    if len(dev) > 255:
        raise ValueError("device_id longer than 255 bytes")
    if len(packet.samples) > MAX_SAMPLES_PER_PACKET:
        raise ValueError("too many samples for one packet")
    parts = [bytes([len(dev)]), dev, _PACKET_HEAD.pack(packet.base_timestamp, len(packet.samples))]
    for s in packet.samples:
        delta = s.timestamp - packet.base_timestamp
        if s.device_id != packet.device_id or not 0 <= delta <= 0xFFFFFFFF:
            raise ValueError(f"sample {s.key} does not fit packet of {packet.device_id}")
        parts.append(_ENTRY.pack(delta, s.acc_x, s.acc_y, s.acc_z, _label_code(s.label)))
    payload = b"".join(parts)
    return _U32.pack(len(payload)) + payload + _U32.pack(zlib.crc32(payload))


def write_packet_log(path, packets: Iterable[Packet]) -> None:
    with atomic_write(path, "wb") as fh:
        fh.write(_FILE_HEADER.pack(MAGIC, VERSION, 0))
        for p in packets:
            fh.write(encode_packet(p))


def _decode_payload(payload: bytes, offset: int) -> Packet:
    try:
        n = payload[0]
        dev = payload[1:1 + n].decode("utf-8")
        pos = 1 + n
        base, count = _PACKET_HEAD.unpack_from(payload, pos)
        pos += _PACKET_HEAD.size
        if pos + count * _ENTRY.size != len(payload):
            raise PacketError("sample count disagrees with payload length", offset)
        samples = []
        for _ in range(count):
            delta, x, y, z, code = _ENTRY.unpack_from(payload, pos)
            pos += _ENTRY.size
            if code > len(ALL_CODES):
                raise PacketError(f"unknown label code {code}", offset)
            label = ALL_CODES[code - 1] if code else None
            samples.append(Sample(dev, base + delta, x, y, z, label))
    except (IndexError, struct.error, UnicodeDecodeError) as exc:
        raise PacketError(f"malformed packet payload ({exc})", offset) from None
    return Packet(dev, base, tuple(samples))


def read_packet_log(path) -> list[Packet]:
    """Decode every packet; truncation or checksum failure raises PacketError."""
    data = Path(path).read_bytes()
    if len(data) < _FILE_HEADER.size:
        raise PacketError("truncated file header", 0)
    magic, version, _flags = _FILE_HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise PacketError(f"bad magic {magic!r}", 0)
    if version != VERSION:
        raise PacketError(f"unsupported version {version}", 4)
    packets = []
    pos = _FILE_HEADER.size
    while pos < len(data):
        start = pos
        if pos + 4 > len(data):
            raise PacketError("truncated packet length", start)
        (length,) = _U32.unpack_from(data, pos)
        pos += 4
        if pos + length + 4 > len(data):
            raise PacketError(f"truncated packet (declared {length} payload bytes)", start)
        payload = data[pos:pos + length]
        pos += length
        (crc,) = _U32.unpack_from(data, pos)
        pos += 4
        if zlib.crc32(payload) != crc:
            raise PacketError("checksum mismatch", start)
        packets.append(_decode_payload(payload, start))
    return packets


def merge_packets(packets: Iterable[Packet]) -> tuple[list[Sample], int]:
    """Merge in log order, later copies of a (device_id, timestamp) winning.

    Returns the sorted stream and how many samples were superseded.
    """
    merged: dict[tuple[str, int], Sample] = {}
    duplicates = 0
    for p in packets:
        for s in p.samples:
            if s.key in merged:
                duplicates += 1
            merged[s.key] = s
    return sort_samples(merged.values()), duplicates


def replay_gateway(packet_log) -> list[Sample]:
    samples, _ = merge_packets(read_packet_log(packet_log))
    return samples


def packetize(samples: Sequence[Sample], max_samples: int = 64) -> list[Packet]:
    """Chunk a sorted stream into per-device packets of consecutive samples."""
    packets = []
    for dev, group in groupby(sort_samples(samples), key=lambda s: s.device_id):
        group = list(group)
        for i in range(0, len(group), max_samples):
            chunk = tuple(group[i:i + max_samples])
            packets.append(Packet(dev, chunk[0].timestamp, chunk))
    return packets


def simulate_store_and_forward(packets: Sequence[Packet], seed: int,
                               outage_prob: float = 0.1, max_delay: int = 20,
                               retransmit_prob: float = 0.05) -> list[Packet]:
    """Upload order of `packets` under intermittent connectivity.

    Each packet is buffered with probability `outage_prob` and uploaded up
    to `max_delay` slots late; with probability `retransmit_prob` it is
    also sent a second time later on.
    """
    rng = np.random.default_rng(seed)
    slots = []
    for i, p in enumerate(packets):
        delay = int(rng.integers(1, max_delay + 1)) if rng.random() < outage_prob else 0
        slots.append((i + delay, i, 0, p))
        if rng.random() < retransmit_prob:
            slots.append((i + delay + int(rng.integers(1, max_delay + 1)), i, 1, p))
    slots.sort(key=lambda s: s[:3])
    return [s[3] for s in slots]
