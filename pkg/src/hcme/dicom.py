"""Minimal DICOM reader/writer (uncompressed little-endian syntaxes) and PGM I/O.

Elements are kept as opaque raw values in file order so that an unmodified
object serializes back to the identical byte string. Only the handful of
tags the pipeline needs are interpreted.
"""

from __future__ import annotations

import re
import struct
from dataclasses import dataclass, field

import numpy as np

IMPLICIT_LE = "1.2.840.10008.1.2"
EXPLICIT_LE = "1.2.840.10008.1.2.1"
SUPPORTED_SYNTAXES = (IMPLICIT_LE, EXPLICIT_LE)

TRANSFER_SYNTAX = (0x0002, 0x0010)
ROWS = (0x0028, 0x0010)
COLUMNS = (0x0028, 0x0011)
BITS_ALLOCATED = (0x0028, 0x0100)
NUMBER_OF_FRAMES = (0x0028, 0x0008)
PIXEL_SPACING = (0x0028, 0x0030)
SLICE_THICKNESS = (0x0018, 0x0050)
INSTANCE_NUMBER = (0x0020, 0x0013)
SLICE_LOCATION = (0x0020, 0x1041)
PIXEL_DATA = (0x7FE0, 0x0010)

ITEM = (0xFFFE, 0xE000)
ITEM_DELIM = (0xFFFE, 0xE00D)
SEQ_DELIM = (0xFFFE, 0xE0DD)
UNDEFINED = 0xFFFFFFFF

# explicit-VR encodings with 2 reserved bytes and a 32-bit length
LONG_VRS = frozenset({"OB", "OD", "OF", "OL", "OV", "OW", "SQ", "SV", "UC", "UN", "UR", "UT", "UV"})


class DicomError(ValueError):
    pass


class UnsupportedTransferSyntax(DicomError):
    pass


class MalformedElement(DicomError):
    pass


class MissingPixelData(DicomError):
    pass


class InconsistentPixelLength(DicomError):
    pass


class MalformedHeader(ValueError):
    pass


class UnsupportedMaxval(ValueError):
    pass


@dataclass
class DataElement:
    group: int
    element: int
    vr: str | None  # None under implicit VR
    value: bytes
    undefined_length: bool = False

    @property
    def tag(self) -> tuple[int, int]:
        return (self.group, self.element)


@dataclass
class DicomObject:
    elements: list[DataElement]
    transfer_syntax: str = EXPLICIT_LE
    preamble: bytes | None = field(default=b"\x00" * 128)

    def find(self, tag: tuple[int, int]) -> DataElement | None:
        for el in self.elements:
            if el.tag == tag:
                return el
        return None

    def get_us(self, tag: tuple[int, int]) -> int | None:
        el = self.find(tag)
        if el is None or len(el.value) < 2:
            return None
        return struct.unpack("<H", el.value[:2])[0]

    def get_str(self, tag: tuple[int, int]) -> str | None:
        el = self.find(tag)
        if el is None:
            return None
        return el.value.decode("ascii", errors="replace").strip("\x00 ")

    def get_numbers(self, tag: tuple[int, int]) -> list[float] | None:
        s = self.get_str(tag)
        if not s:
            return None
        try:
            return [float(p) for p in s.split("\\")]
        except ValueError:
            return None

    @property
    def rows(self) -> int:
        return self.get_us(ROWS) or 0

    @property
    def cols(self) -> int:
        return self.get_us(COLUMNS) or 0

    @property
    def bits_allocated(self) -> int:
        return self.get_us(BITS_ALLOCATED) or 0

    @property
    def frames(self) -> int:
        n = self.get_numbers(NUMBER_OF_FRAMES)
        return int(n[0]) if n else 1

    @property
    def pixel_length(self) -> int:
        return self.rows * self.cols * (self.bits_allocated // 8) * self.frames

    @property
    def pixel_data(self) -> bytes:
        el = self.find(PIXEL_DATA)
        if el is None:
            raise MissingPixelData("no (7FE0,0010) element")
        return el.value[: self.pixel_length]

    @pixel_data.setter
    def pixel_data(self, data: bytes) -> None:
        el = self.find(PIXEL_DATA)
        if el is None:
            raise MissingPixelData("no (7FE0,0010) element")
        data = bytes(data)
        el.value = data + (b"\x00" if len(data) % 2 else b"")

    def pixel_array(self) -> np.ndarray:
        """Pixels as (frames, rows, cols) uint8 or little-endian uint16."""
        dtype = np.uint8 if self.bits_allocated == 8 else np.dtype("<u2")
        return np.frombuffer(self.pixel_data, dtype=dtype).reshape(self.frames, self.rows, self.cols)


# ---------------------------------------------------------------- reading


class _Reader:
    def __init__(self, data: bytes):
        self.data = data

    def need(self, pos: int, n: int) -> None:
        if pos + n > len(self.data):
            raise MalformedElement(f"truncated element at offset {pos}")

    def header(self, pos: int, explicit: bool) -> tuple[int, int, str | None, int, int]:
        """Return (group, element, vr, length, value_offset)."""
        self.need(pos, 8)
        group, elem = struct.unpack_from("<HH", self.data, pos)
        if group == 0xFFFE:  # item / delimiters never carry a VR
            (length,) = struct.unpack_from("<I", self.data, pos + 4)
            return group, elem, None, length, pos + 8
        if not explicit:
            (length,) = struct.unpack_from("<I", self.data, pos + 4)
            return group, elem, None, length, pos + 8
        vr = self.data[pos + 4 : pos + 6].decode("ascii", errors="replace")
        if not re.fullmatch("[A-Z]{2}", vr):
            raise MalformedElement(f"bad VR {vr!r} at offset {pos}")
        if vr in LONG_VRS:
            self.need(pos, 12)
            (length,) = struct.unpack_from("<I", self.data, pos + 8)
            return group, elem, vr, length, pos + 12
        (length,) = struct.unpack_from("<H", self.data, pos + 6)
        return group, elem, vr, length, pos + 8

    def skip_sequence(self, pos: int, explicit: bool) -> int:
        """Walk an undefined-length sequence body; return offset of its SEQ_DELIM."""
        while True:
            group, elem, _, length, vpos = self.header(pos, explicit)
            if (group, elem) == SEQ_DELIM:
                return pos
            if (group, elem) != ITEM:
                raise MalformedElement(f"expected item tag at offset {pos}")
            if length == UNDEFINED:
                pos = self.skip_item(vpos, explicit)
            else:
                self.need(vpos, length)
                pos = vpos + length

    def skip_item(self, pos: int, explicit: bool) -> int:
        while True:
            group, elem, vr, length, vpos = self.header(pos, explicit)
            if (group, elem) == ITEM_DELIM:
                return vpos
            if length == UNDEFINED:
                inner = explicit and vr != "UN"
                pos = self.skip_sequence(vpos, inner) + 8
            else:
                self.need(vpos, length)
                pos = vpos + length

    def elements(self, pos: int, explicit: bool, stop_group: int | None = None):
        out = []
        while pos < len(self.data):
            if stop_group is not None:
                self.need(pos, 2)
                if struct.unpack_from("<H", self.data, pos)[0] != stop_group:
                    break
            group, elem, vr, length, vpos = self.header(pos, explicit)
            if length == UNDEFINED:
                if (group, elem) == PIXEL_DATA:
                    raise UnsupportedTransferSyntax("encapsulated (compressed) pixel data")
                end = self.skip_sequence(vpos, explicit and vr != "UN")
                out.append(DataElement(group, elem, vr, self.data[vpos:end], True))
                pos = end + 8
                continue
            self.need(vpos, length)
            out.append(DataElement(group, elem, vr, self.data[vpos : vpos + length]))
            pos = vpos + length
        return out, pos


def _looks_like_implicit(data: bytes) -> bool:
    if len(data) < 8:
        return False
    group, _ = struct.unpack_from("<HH", data, 0)
    (length,) = struct.unpack_from("<I", data, 4)
    return group % 2 == 0 and group <= 0x0028 and length < len(data)


def parse_dicom(data: bytes) -> DicomObject:
    data = bytes(data)
    rd = _Reader(data)
    if len(data) >= 132 and data[128:132] == b"DICM":
        preamble = data[:128]
        meta, pos = rd.elements(132, explicit=True, stop_group=0x0002)
        ts_el = next((e for e in meta if e.tag == TRANSFER_SYNTAX), None)
        syntax = ts_el.value.decode("ascii").strip("\x00 ") if ts_el else IMPLICIT_LE
    elif _looks_like_implicit(data):
        preamble, meta, pos, syntax = None, [], 0, IMPLICIT_LE
    else:
        raise MalformedElement("no DICM marker and not a recognisable implicit-VR stream")
    if syntax not in SUPPORTED_SYNTAXES:
        raise UnsupportedTransferSyntax(f"transfer syntax {syntax} is not supported")
    body, _ = rd.elements(pos, explicit=(syntax == EXPLICIT_LE))
    obj = DicomObject(meta + body, syntax, preamble)
    pix = obj.find(PIXEL_DATA)
    if pix is None:
        raise MissingPixelData("no (7FE0,0010) element")
    if obj.bits_allocated not in (8, 16):
        raise UnsupportedTransferSyntax(f"bits allocated {obj.bits_allocated} not supported")
    expected = obj.pixel_length
    if len(pix.value) not in (expected, expected + (expected % 2)):
        raise InconsistentPixelLength(
            f"pixel data has {len(pix.value)} bytes, expected {expected}"
        )
    return obj


# ---------------------------------------------------------------- writing


def _encode_element(el: DataElement, explicit: bool) -> tuple[bytes, int]:
    """Encoded element and the offset of its value within the encoding."""
    length = UNDEFINED if el.undefined_length else len(el.value)
    tail = struct.pack("<HHI", *SEQ_DELIM, 0) if el.undefined_length else b""
    if explicit and el.group != 0xFFFE:
        vr = el.vr or "UN"
        if vr in LONG_VRS:
            head = struct.pack("<HH2sHI", el.group, el.element, vr.encode(), 0, length)
        else:
            if length > 0xFFFF:
                raise MalformedElement(f"value too long for VR {vr} in {el.tag}")
            head = struct.pack("<HH2sH", el.group, el.element, vr.encode(), length)
    else:
        head = struct.pack("<HHI", el.group, el.element, length)
    return head + el.value + tail, len(head)


def serialize(obj: DicomObject) -> tuple[bytes, int]:
    """Serialize; also return the byte offset of the pixel value."""
    pix = obj.find(PIXEL_DATA)
    if pix is None:
        raise MissingPixelData("no (7FE0,0010) element")
    expected = obj.pixel_length
    if len(pix.value) not in (expected, expected + (expected % 2)):
        raise InconsistentPixelLength(f"pixel data has {len(pix.value)} bytes, expected {expected}")
    parts = []
    if obj.preamble is not None:
        parts.append(obj.preamble + b"DICM")
    offset = sum(map(len, parts))
    pixel_offset = -1
    explicit_body = obj.transfer_syntax == EXPLICIT_LE
    for el in obj.elements:
        enc, voff = _encode_element(el, explicit=el.group == 0x0002 or explicit_body)
        if el.tag == PIXEL_DATA:
            pixel_offset = offset + voff
        parts.append(enc)
        offset += len(enc)
    return b"".join(parts), pixel_offset


def write_dicom(obj: DicomObject) -> bytes:
    return serialize(obj)[0]


def split_pixels(obj: DicomObject) -> tuple[bytes, bytes]:
    """Serialized bytes before and after the pixel bytes (padding stays in the tail)."""
    raw, off = serialize(obj)
    return raw[:off], raw[off + obj.pixel_length :]


# ---------------------------------------------------------------- PGM

_PGM_TOKEN = re.compile(rb"(?:\s+|#[^\n]*\n?)*(\S+)")


def read_pgm(data: bytes) -> np.ndarray:
    """Binary (P5) 8-bit PGM to a 2D uint8 array."""
    if not data.startswith(b"P5"):
        raise MalformedHeader("only binary P5 PGM is supported")
    pos = 2
    vals = []
    for _ in range(3):
        m = _PGM_TOKEN.match(data, pos)
        if not m or not m.group(1).isdigit():
            raise MalformedHeader("bad PGM header")
        vals.append(int(m.group(1)))
        pos = m.end()
    width, height, maxval = vals
    if maxval != 255:
        raise UnsupportedMaxval(f"maxval {maxval} not supported (need 255)")
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise MalformedHeader("missing whitespace after maxval")
    pos += 1
    body = data[pos : pos + width * height]
    if len(body) != width * height or width < 1 or height < 1:
        raise MalformedHeader("pixel data shorter than header declares")
    return np.frombuffer(body, dtype=np.uint8).reshape(height, width).copy()


def write_pgm(image: np.ndarray) -> bytes:
    img = np.asarray(image)
    if img.ndim != 2 or img.dtype != np.uint8:
        raise ValueError("write_pgm needs a 2D uint8 array")
    h, w = img.shape
    return b"P5\n%d %d\n255\n" % (w, h) + img.tobytes()


def write_ppm(rgb: np.ndarray) -> bytes:
    img = np.asarray(rgb, dtype=np.uint8)
    h, w, _ = img.shape
    return b"P6\n%d %d\n255\n" % (w, h) + img.tobytes()
