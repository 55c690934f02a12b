"""HCME envelope: the on-disk container for encrypted images and volumes.

Layout (little-endian)::

    magic "HCME" | version u16 | kdf-id u8 | flags u8
    original rows u32 | original cols u32 | padded dim u32 | bits allocated u8
    slice count u32 | salt 16B | captcha length u8
    roi count u32, then per entry: z0 z1 y0 y1 x0 x1 (u32 each) | block length u32 | block
    metadata length u64 | metadata
    captcha block length u64 | captcha block
    payload length u64 | payload
    crc32 u32 of everything above
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field

MAGIC = b"HCME"
VERSION = 1
FLAG_CAPTCHA = 0x01
FLAG_PARTIAL = 0x02

_HEAD = struct.Struct("<4sHBBIIIBI16sBI")
_ROI = struct.Struct("<6II")


class EnvelopeError(ValueError):
    pass


class BadMagic(EnvelopeError):
    pass


class UnsupportedVersion(EnvelopeError):
    pass


class LengthMismatch(EnvelopeError):
    pass


class BadChecksum(EnvelopeError):
    pass


@dataclass
class RoiEntry:
    z0: int
    z1: int
    y0: int
    y1: int
    x0: int
    x1: int
    block: bytes = b""

    @property
    def coords(self) -> tuple[int, int, int, int, int, int]:
        return (self.z0, self.z1, self.y0, self.y1, self.x0, self.x1)


@dataclass
class Envelope:
    kdf_id: int
    flags: int
    rows: int
    cols: int
    padded: int
    bits_allocated: int
    slices: int
    salt: bytes
    captcha_length: int = 0
    rois: list[RoiEntry] = field(default_factory=list)
    metadata: bytes = b""
    captcha_block: bytes = b""
    payload: bytes = b""
    version: int = VERSION

    @property
    def has_captcha(self) -> bool:
        return bool(self.flags & FLAG_CAPTCHA)

    @property
    def partial(self) -> bool:
        return bool(self.flags & FLAG_PARTIAL)


def write_envelope(env: Envelope) -> bytes:
    if len(env.salt) != 16:
        raise LengthMismatch("salt must be 16 bytes")
    parts = [
        _HEAD.pack(
            MAGIC, env.version, env.kdf_id, env.flags, env.rows, env.cols, env.padded,
            env.bits_allocated, env.slices, env.salt, env.captcha_length, len(env.rois),
        )
    ]
    for roi in env.rois:
        parts.append(_ROI.pack(*roi.coords, len(roi.block)))
        parts.append(roi.block)
    for blob in (env.metadata, env.captcha_block, env.payload):
        parts.append(struct.pack("<Q", len(blob)))
        parts.append(blob)
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


class _Cursor:
    def __init__(self, data: bytes, end: int):
        self.data, self.pos, self.end = data, 0, end

    def take(self, n: int, what: str) -> bytes:
        if n < 0 or self.pos + n > self.end:
            raise LengthMismatch(f"{what}: declared {n} bytes, only {self.end - self.pos} remain")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, st: struct.Struct, what: str):
        return st.unpack(self.take(st.size, what))


def read_envelope(data: bytes) -> Envelope:
    data = bytes(data)
    if data[:4] != MAGIC:
        raise BadMagic("not an HCME envelope")
    if len(data) < _HEAD.size + 4:
        raise LengthMismatch("file shorter than the fixed header")
    cur = _Cursor(data, len(data) - 4)
    (_, version, kdf_id, flags, rows, cols, padded, bits, slices, salt, cap_len, n_roi) = cur.unpack(
        _HEAD, "header"
    )
    if version != VERSION:
        raise UnsupportedVersion(f"envelope version {version} (supported: {VERSION})")
    rois = []
    for _ in range(n_roi):
        *coords, blen = cur.unpack(_ROI, "roi entry")
        rois.append(RoiEntry(*coords, block=cur.take(blen, "roi block")))
    blobs = []
    for what in ("metadata", "captcha block", "payload"):
        (n,) = struct.unpack("<Q", cur.take(8, what + " length"))
        blobs.append(cur.take(n, what))
    if cur.pos != cur.end:
        raise LengthMismatch(f"{cur.end - cur.pos} trailing bytes before checksum")
    (crc,) = struct.unpack("<I", data[-4:])
    if zlib.crc32(data[:-4]) != crc:
        raise BadChecksum("CRC-32 mismatch: envelope corrupted or tampered")
    return Envelope(
        kdf_id, flags, rows, cols, padded, bits, slices, salt, cap_len, rois, *blobs, version=version
    )
