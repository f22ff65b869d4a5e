"""Elias-delta index code and the RDPC stream container.

Codewords are handled as strings of '0' and '1'.  The container is

    magic "RDPC" | version u8 | seed u64 | block size u16 | count u32 | payload

with every header field big-endian and the payload zero-padded to a byte.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Iterable, Sequence

MAGIC = b"RDPC"
VERSION = 1
_HEADER = struct.Struct(">4sBQHI")
HEADER_BYTES = _HEADER.size
MAX_ZERO_RUN = 64


class BitcodeError(ValueError):
    pass


class ZeroIndex(BitcodeError):
    pass


class Truncated(BitcodeError):
    pass


class Malformed(BitcodeError):
    pass


class BadMagic(BitcodeError):
    pass


class UnsupportedVersion(BitcodeError):
    pass


def elias_delta_length(k: int) -> int:
    if k < 1:
        raise ZeroIndex("Elias delta codes positive integers only")
    n = k.bit_length() - 1
    return n + 2 * (n + 1).bit_length() - 1


def elias_delta_encode(k: int) -> str:
    if k < 1:
        raise ZeroIndex("Elias delta codes positive integers only")
    body = bin(k)[3:]  # k without its leading 1
    length = bin(len(body) + 1)[2:]
    return "0" * (len(length) - 1) + length + body


def elias_delta_decode(bits: str, pos: int = 0) -> tuple[int, int]:
    """Decode one codeword starting at ``pos``; returns (k, bits consumed)."""
    i = pos
    end = len(bits)
    while i < end and bits[i] == "0":
        i += 1
        if i - pos > MAX_ZERO_RUN:
            raise Malformed("leading zero run longer than 64 bits")
    zeros = i - pos
    if i + zeros + 1 > end:
        raise Truncated("codeword length prefix runs past the end")
    n = int(bits[i:i + zeros + 1], 2) - 1
    i += zeros + 1
    if i + n > end:
        raise Truncated("codeword body runs past the end")
    k = int("1" + bits[i:i + n], 2)
    return k, i + n - pos


@dataclass(frozen=True)
class Bitstream:
    seed: int
    block_size: int
    count: int
    payload: bytes
    payload_bits: int

    def to_bytes(self) -> bytes:
        return _HEADER.pack(MAGIC, VERSION, self.seed, self.block_size, self.count) + self.payload

    @property
    def padding_bits(self) -> int:
        return 8 * len(self.payload) - self.payload_bits


def write_stream(indices: Iterable[int], seed: int, block_size: int = 1) -> Bitstream:
    indices = list(indices)
    if len(indices) > 0xFFFFFFFF:
        raise ValueError("at most 2^32 - 1 indices per stream")
    if not 0 <= seed < 2 ** 64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    if not 0 < block_size <= 0xFFFF:
        raise ValueError("block size must fit in 16 bits and be positive")
    bits = "".join(elias_delta_encode(int(k)) for k in indices)
    nbits = len(bits)
    pad = -nbits % 8
    payload = int(bits + "0" * pad, 2).to_bytes((nbits + pad) // 8, "big") if nbits else b""
    return Bitstream(seed, block_size, len(indices), payload, nbits)


def read_stream(data: bytes | Bitstream) -> tuple[list[int], int, int]:
    """Indices, seed and block size of a serialised stream."""
    if isinstance(data, Bitstream):
        data = data.to_bytes()
    if len(data) < 4:
        raise Truncated("stream shorter than its magic")
    if data[:4] != MAGIC:
        raise BadMagic(f"bad magic {data[:4]!r}")
    if len(data) < HEADER_BYTES:
        raise Truncated("stream shorter than its header")
    _, version, seed, block_size, count = _HEADER.unpack_from(data)
    if version != VERSION:
        raise UnsupportedVersion(f"stream version {version}, reader supports {VERSION}")
    payload = data[HEADER_BYTES:]
    bits = bin(int.from_bytes(payload, "big"))[2:].zfill(8 * len(payload)) if payload else ""
    out, pos = [], 0
    for _ in range(count):
        k, used = elias_delta_decode(bits, pos)
        out.append(k)
        pos += used
    if len(bits) - pos >= 8 or "1" in bits[pos:]:
        raise Malformed("stream has trailing data after its last index")
    return out, seed, block_size


def payload_bits(indices: Sequence[int]) -> int:
    return sum(elias_delta_length(int(k)) for k in indices)
