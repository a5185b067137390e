"""Byte-level encoding of protocol messages.

Every table-shaped message is M consecutive little-endian pairs of signed
32-bit integers: (speed in km/h rounded to the nearest integer, fixed-point
value).  A full table therefore costs exactly 8*M bytes; the base station's
broadcast is a single pair, 8 bytes.
"""

from __future__ import annotations

import struct
from typing import Sequence

from .emissions import SpeedGrid
from .errors import EncodingError
from .protocol import AggregatedTable, Recommendation, ShareMessage

PAIR_BYTES = 8
_PAIR = struct.Struct("<ii")


def encode_pairs(speeds: Sequence[float], values: Sequence[int]) -> bytes:
    """Pack parallel (speed, value) sequences into the wire layout."""
    if len(speeds) != len(values):
        raise EncodingError(f"{len(speeds)} speeds but {len(values)} values")
    out = bytearray()
    for speed, value in zip(speeds, values):
        try:
            out += _PAIR.pack(round(speed), value)
        except struct.error as exc:
            raise EncodingError(f"pair ({speed}, {value}) does not fit int32: {exc}") from exc
    return bytes(out)


def decode_pairs(data: bytes) -> list[tuple[int, int]]:
    """Unpack a wire payload back into (speed, value) pairs."""
    if len(data) % PAIR_BYTES != 0:
        raise EncodingError(f"payload length {len(data)} is not a multiple of {PAIR_BYTES}")
    return [_PAIR.unpack_from(data, off) for off in range(0, len(data), PAIR_BYTES)]


def encode_share_message(msg: ShareMessage) -> bytes:
    return encode_pairs(msg.grid.speeds, msg.values)


def encode_aggregated_table(table: AggregatedTable) -> bytes:
    return encode_pairs(table.grid.speeds, table.values)


def encode_recommendation(rec: Recommendation, grid: SpeedGrid) -> bytes:
    """The broadcast: one (speed, aggregate) pair."""
    return encode_pairs([rec.speed], [rec.curve[rec.best_index]])


def table_bytes(m: int) -> int:
    """Wire size of an M-point table."""
    return PAIR_BYTES * m
