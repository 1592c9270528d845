"""Byte framing of the register protocol.

Request:  1 byte op (0 read, 1 write), 3 reserved bytes, 4-byte
little-endian address, 4-byte little-endian word count, then count*4
payload bytes for writes.  Responses mirror the header (op echoed) and
carry count*4 payload bytes for reads; a write acknowledges with count 0.
Errors come back as op 0xFF with the offending address and count 0.
Malformed input (unknown op, oversized count, short read) closes the
connection.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

HEADER = struct.Struct("<B3xII")
OP_READ = 0
OP_WRITE = 1
OP_ERROR = 0xFF
MAX_COUNT = 1 << 14


class MalformedFrame(ValueError):
    pass


@dataclass(frozen=True)
class Command:
    op: int
    address: int
    count: int
    payload: tuple[int, ...] = ()


def parse_header(raw: bytes) -> tuple[int, int, int]:
    if len(raw) != HEADER.size:
        raise MalformedFrame("short header")
    op, address, count = HEADER.unpack(raw)
    if op not in (OP_READ, OP_WRITE):
        raise MalformedFrame(f"unknown op {op}")
    if count > MAX_COUNT:
        raise MalformedFrame(f"count {count} exceeds {MAX_COUNT}")
    if op == OP_READ and count == 0:
        raise MalformedFrame("zero-length read")
    return op, address, count


def payload_bytes(op: int, count: int) -> int:
    return 4 * count if op == OP_WRITE else 0


def decode_payload(raw: bytes, count: int) -> tuple[int, ...]:
    if len(raw) != 4 * count:
        raise MalformedFrame("short payload")
    return struct.unpack(f"<{count}I", raw) if count else ()


def encode_request(op: int, address: int, words=()) -> bytes:
    count = len(words) if op == OP_WRITE else words
    if op == OP_WRITE:
        return HEADER.pack(op, address, len(words)) + \
            struct.pack(f"<{len(words)}I", *words)
    return HEADER.pack(op, address, int(count))


def encode_response(op: int, address: int, words=()) -> bytes:
    if op == OP_ERROR:
        return HEADER.pack(OP_ERROR, address, 0)
    if op == OP_READ:
        return HEADER.pack(op, address, len(words)) + \
            struct.pack(f"<{len(words)}I", *words)
    return HEADER.pack(op, address, 0)


def parse_response(raw: bytes) -> tuple[int, int, tuple[int, ...]]:
    op, address, count = HEADER.unpack(raw[:HEADER.size])
    words = struct.unpack(f"<{count}I", raw[HEADER.size:HEADER.size + 4 * count]) \
        if count else ()
    return op, address, words
