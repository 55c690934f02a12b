"""Slice stacks: loading, whole/partial encryption into an envelope, and decryption.

A single 2D image is handled as a one-slice volume, so every encrypted file
goes through the same envelope path.
"""

from __future__ import annotations

import os
import struct
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import dicom
from .captcha import LENGTH as CAPTCHA_LENGTH
from .captcha import MAX_ATTEMPTS, CaptchaChallenge, Verdict, verify_captcha
from .chaos import CANONICAL, MapParams
from .envelope import FLAG_CAPTCHA, FLAG_PARTIAL, Envelope, RoiEntry
from .keys import KDF_SHA256, SALT_SIZE, check_key, check_salt, derive_keyset, label_digest, seed_from_digest, xor_stream
from .pipeline import (
    ByteImage,
    DimensionMismatch,
    captcha_overlay,
    decrypt_image,
    encrypt_image,
    from_byte_matrix,
    next_pow2,
    superimpose,
    to_byte_matrix,
)


class InconsistentSeries(ValueError):
    pass


class DuplicateOrderKey(ValueError):
    pass


class RoiOutOfBounds(ValueError):
    pass


class CaptchaRejected(PermissionError):
    pass


class CaptchaMismatch(ValueError):
    """The stored captcha block does not match the regenerated challenge."""


@dataclass
class SliceSource:
    """A DICOM file contributing ``frames`` consecutive slices."""

    name: str
    obj: dicom.DicomObject
    frames: int = 1
    raw: bytes | None = None  # exact file bytes when known

    def to_bytes(self) -> bytes:
        return self.raw if self.raw is not None else dicom.write_dicom(self.obj)


@dataclass
class Volume:
    slices: list[np.ndarray]  # each (rows, cols), uint8 or uint16
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    order_keys: list[float] | None = None
    sources: list[SliceSource] = field(default_factory=list)

    def __post_init__(self):
        if not self.slices:
            return
        shape, dtype = self.slices[0].shape, self.slices[0].dtype
        for s in self.slices:
            if s.ndim != 2 or s.shape != shape or s.dtype != dtype:
                raise InconsistentSeries("all slices must share shape and bit depth")

    @property
    def bits(self) -> int:
        return 8 * self.slices[0].dtype.itemsize

    @property
    def shape(self) -> tuple[int, int, int]:
        return (len(self.slices), *self.slices[0].shape)

    def to_array(self) -> np.ndarray:
        return np.stack(self.slices)


@dataclass(frozen=True)
class RoiBox:
    z0: int
    z1: int
    y0: int
    y1: int
    x0: int
    x1: int

    @classmethod
    def parse(cls, text: str) -> "RoiBox":
        parts = [int(p) for p in text.split(",")]
        if len(parts) != 6:
            raise ValueError("ROI needs six integers z0,z1,y0,y1,x0,x1")
        return cls(*parts)

    def check(self, shape: tuple[int, int, int]) -> None:
        for lo, hi, ext, axis in zip((self.z0, self.y0, self.x0), (self.z1, self.y1, self.x1), shape, "zyx"):
            if not 0 <= lo < hi <= ext:
                raise RoiOutOfBounds(f"{axis} bounds [{lo},{hi}) outside extent {ext}")


# ---------------------------------------------------------------- loading


def volume_from_dicom(obj: dicom.DicomObject, name: str = "image.dcm", raw: bytes | None = None) -> Volume:
    frames = obj.pixel_array()
    return Volume(
        [np.array(f) for f in frames],
        _spacing(obj, warn=False),
        sources=[SliceSource(name, obj, obj.frames, raw)],
    )


def load_image(path: str | os.PathLike) -> Volume:
    """One PGM or DICOM file as a volume (one slice per frame)."""
    data = Path(path).read_bytes()
    if data.startswith(b"P5"):
        return volume_from_pgm(dicom.read_pgm(data))
    return volume_from_dicom(dicom.parse_dicom(data), Path(path).name, data)


def volume_from_pgm(image: np.ndarray) -> Volume:
    return Volume([np.asarray(image, dtype=np.uint8)])


def _spacing(obj: dicom.DicomObject, warn: bool) -> tuple[float, float, float]:
    ps = obj.get_numbers(dicom.PIXEL_SPACING)
    th = obj.get_numbers(dicom.SLICE_THICKNESS)
    if ps and len(ps) >= 2 and th:
        return (ps[0], ps[1], th[0])
    if warn:
        warnings.warn("pixel spacing / slice thickness missing; using (1, 1, 1)", stacklevel=3)
    return (1.0, 1.0, 1.0)


def load_series(files: Iterable[str | os.PathLike]) -> Volume:
    """Parse and stack a DICOM series ordered by Instance Number, else Slice Location."""
    parsed = []
    for f in files:
        p = Path(f)
        raw = p.read_bytes()
        parsed.append((p.name, dicom.parse_dicom(raw), raw))
    if not parsed:
        raise InconsistentSeries("empty series")
    ref = parsed[0][1]
    for name, obj, _ in parsed:
        if (obj.rows, obj.cols, obj.bits_allocated) != (ref.rows, ref.cols, ref.bits_allocated):
            raise InconsistentSeries(f"{name}: dims/bit depth differ from {parsed[0][0]}")

    keys = None
    for tag in (dicom.INSTANCE_NUMBER, dicom.SLICE_LOCATION):
        vals = [obj.get_numbers(tag) for _, obj, _ in parsed]
        if all(vals):
            keys = [v[0] for v in vals]
            break
    if keys is not None:
        if len(set(keys)) != len(keys):
            raise DuplicateOrderKey("two files share the same order key")
        order = sorted(range(len(parsed)), key=keys.__getitem__)
        keys = [keys[i] for i in order]
        parsed = [parsed[i] for i in order]

    slices, sources = [], []
    for name, obj, raw in parsed:
        frames = obj.pixel_array()
        slices.extend(np.array(f) for f in frames)
        sources.append(SliceSource(name, obj, obj.frames, raw))
    return Volume(slices, _spacing(ref, warn=True), keys, sources)


# ---------------------------------------------------------------- metadata blob


def pack_metadata(sources: Sequence[SliceSource]) -> bytes:
    if not sources:
        return b""
    parts = [struct.pack("<I", len(sources))]
    for src in sources:
        head, tail = _split(src)
        name = src.name.encode("utf-8")
        parts += [struct.pack("<H", len(name)), name, struct.pack("<IQ", src.frames, len(head)), head]
        parts += [struct.pack("<Q", len(tail)), tail]
    return b"".join(parts)


def _split(src: SliceSource) -> tuple[bytes, bytes]:
    """File bytes before and after the pixel values."""
    if src.raw is None:
        return dicom.split_pixels(src.obj)
    ser, off = dicom.serialize(src.obj)
    if ser != src.raw:
        # re-serialization differs (e.g. odd group lengths); locate the top-level pixel element
        tag = struct.pack("<HH", *dicom.PIXEL_DATA)
        at = src.raw.rfind(tag)
        explicit = src.obj.transfer_syntax == dicom.EXPLICIT_LE
        off = at + (12 if explicit else 8)
    n = src.obj.pixel_length
    return src.raw[:off], src.raw[off + n :]


def unpack_metadata(blob: bytes) -> list[tuple[str, int, bytes, bytes]]:
    if not blob:
        return []
    out = []
    pos = 4
    (count,) = struct.unpack_from("<I", blob, 0)
    for _ in range(count):
        (nlen,) = struct.unpack_from("<H", blob, pos)
        name = blob[pos + 2 : pos + 2 + nlen].decode("utf-8")
        pos += 2 + nlen
        frames, hlen = struct.unpack_from("<IQ", blob, pos)
        pos += 12
        head = blob[pos : pos + hlen]
        pos += hlen
        (tlen,) = struct.unpack_from("<Q", blob, pos)
        pos += 8
        tail = blob[pos : pos + tlen]
        pos += tlen
        out.append((name, frames, head, tail))
    if pos != len(blob):
        raise dicom.MalformedElement("metadata blob has trailing bytes (wrong key?)")
    return out


def _meta_seed(key: bytes, salt: bytes):
    return derive_keyset(key, salt).meta_seed


def _captcha_block(key: bytes, salt: bytes, answer: str) -> bytes:
    seed = seed_from_digest(label_digest(key, salt, "captcha-block"))
    return xor_stream(answer.encode("ascii"), seed)


# ---------------------------------------------------------------- encryption


def _map(fn, items, jobs: int | None):
    items = list(items)
    if jobs is not None and jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs or os.cpu_count()) as pool:
        return list(pool.map(fn, items))


def _slice_keys(key: bytes, salt: bytes, z: int):
    return derive_keyset(key, salt, f"slice-{z}")


def encrypt_volume_whole(
    vol: Volume,
    key: bytes,
    salt: bytes | None = None,
    captcha: bool = True,
    params: MapParams = CANONICAL,
    jobs: int | None = None,
) -> Envelope:
    """Encrypt every slice with its own key set; captcha superimposed on slice 0."""
    if not vol.slices:
        raise InconsistentSeries("empty volume")
    key = check_key(key)
    salt = check_salt(salt if salt is not None else os.urandom(SALT_SIZE))
    planes = [to_byte_matrix(s) for s in vol.slices]

    def enc(z: int) -> np.ndarray:
        return encrypt_image(planes[z], _slice_keys(key, salt, z), params).data

    cipher = _map(enc, range(len(planes)), jobs)
    n = cipher[0].shape[0]
    captcha_block = b""
    if captcha:
        challenge, overlay = captcha_overlay(key, salt, n, params)
        cipher[0] = superimpose(cipher[0], overlay)
        captcha_block = _captcha_block(key, salt, challenge.answer)
    rows, cols = vol.slices[0].shape
    return Envelope(
        kdf_id=KDF_SHA256,
        flags=FLAG_CAPTCHA if captcha else 0,
        rows=rows,
        cols=cols,
        padded=n,
        bits_allocated=vol.bits,
        slices=len(planes),
        salt=salt,
        captcha_length=CAPTCHA_LENGTH if captcha else 0,
        metadata=xor_stream(pack_metadata(vol.sources), _meta_seed(key, salt), params),
        captcha_block=captcha_block,
        payload=b"".join(c.tobytes() for c in cipher),
    )


def encrypt_volume_partial(
    vol: Volume,
    roi: RoiBox,
    key: bytes,
    salt: bytes | None = None,
    captcha: bool = True,
    params: MapParams = CANONICAL,
    jobs: int | None = None,
) -> Envelope:
    """Encrypt only the ROI box; the carrier keeps every other voxel.

    Each ROI slice is padded to its own power-of-two square and stored whole in
    the envelope's ROI table. The carrier's ROI rectangle is overwritten with the
    top-left crop of that ciphertext, which is cosmetic only.
    """
    if not vol.slices:
        raise InconsistentSeries("empty volume")
    roi.check(vol.shape)
    key = check_key(key)
    salt = check_salt(salt if salt is not None else os.urandom(SALT_SIZE))
    bpp = vol.bits // 8
    bx0, bx1 = roi.x0 * bpp, roi.x1 * bpp
    carrier = [to_byte_matrix(s).copy() for s in vol.slices]

    def enc(z: int) -> np.ndarray:
        sub = carrier[z][roi.y0 : roi.y1, bx0:bx1]
        return encrypt_image(sub, _slice_keys(key, salt, z), params).data

    blocks = _map(enc, range(roi.z0, roi.z1), jobs)
    m = blocks[0].shape[0]
    captcha_block = b""
    if captcha:
        challenge, overlay = captcha_overlay(key, salt, m, params)
        blocks[0] = superimpose(blocks[0], overlay)
        captcha_block = _captcha_block(key, salt, challenge.answer)
    h, w = roi.y1 - roi.y0, bx1 - bx0
    for z, blk in zip(range(roi.z0, roi.z1), blocks):
        carrier[z][roi.y0 : roi.y1, bx0:bx1] = blk[:h, :w]
    rows, cols = vol.slices[0].shape
    entry = RoiEntry(roi.z0, roi.z1, roi.y0, roi.y1, roi.x0, roi.x1, b"".join(b.tobytes() for b in blocks))
    return Envelope(
        kdf_id=KDF_SHA256,
        flags=FLAG_PARTIAL | (FLAG_CAPTCHA if captcha else 0),
        rows=rows,
        cols=cols,
        padded=m,
        bits_allocated=vol.bits,
        slices=len(carrier),
        salt=salt,
        captcha_length=CAPTCHA_LENGTH if captcha else 0,
        rois=[entry],
        metadata=xor_stream(pack_metadata(vol.sources), _meta_seed(key, salt), params),
        captcha_block=captcha_block,
        payload=b"".join(c.tobytes() for c in carrier),
    )


def carrier_volume(env: Envelope) -> Volume:
    """The (visually occluded) slices stored in a partial-mode envelope, no key needed."""
    if not env.partial:
        raise ValueError("whole-mode envelopes carry no plaintext carrier")
    bpp = env.bits_allocated // 8
    planes = np.frombuffer(env.payload, dtype=np.uint8).reshape(env.slices, env.rows, env.cols * bpp)
    return Volume([from_byte_matrix(p, env.bits_allocated) for p in planes])


def cipher_planes(env: Envelope) -> list[np.ndarray]:
    """Encrypted planes as stored (whole mode: one per slice; partial: one per ROI slice)."""
    if env.partial:
        m = env.padded
        blk = env.rois[0].block
        return list(np.frombuffer(blk, dtype=np.uint8).reshape(-1, m, m))
    n = env.padded
    return list(np.frombuffer(env.payload, dtype=np.uint8).reshape(env.slices, n, n))


# ---------------------------------------------------------------- decryption

Answers = str | Sequence[str] | Callable[[CaptchaChallenge, int], str]


def _answers(typed: Answers, challenge: CaptchaChallenge):
    if callable(typed):
        attempt = 1
        while True:
            yield typed(challenge, attempt)
            attempt += 1
    elif isinstance(typed, str):
        yield typed
    else:
        yield from typed


def authenticate(
    env: Envelope, key: bytes, typed: Answers, params: MapParams = CANONICAL, max_attempts: int = MAX_ATTEMPTS
) -> np.ndarray | None:
    """Run the captcha gate; return the overlay to XOR off (None when no captcha)."""
    if not env.has_captcha:
        return None
    n = env.padded
    challenge, overlay = captcha_overlay(key, env.salt, n, params)
    stored = xor_stream(env.captcha_block, seed_from_digest(label_digest(key, env.salt, "captcha-block")))
    if stored != challenge.answer.encode("ascii"):
        raise CaptchaMismatch("stored captcha does not match the regenerated one (wrong key?)")
    attempts = _answers(typed, challenge)
    for attempt in range(1, max_attempts + 1):
        answer = next(attempts, None)
        if answer is None:
            break
        verdict = verify_captcha(challenge.answer, answer, attempt, max_attempts)
        if verdict is Verdict.ACCEPT:
            return overlay
        if verdict is Verdict.REJECT:
            break
    raise CaptchaRejected("captcha verification failed")


def _restore_sources(blob: bytes, slices: list[np.ndarray]) -> list[SliceSource]:
    out, z = [], 0
    for name, frames, head, tail in unpack_metadata(blob):
        pixels = b"".join(s.astype(s.dtype.newbyteorder("<"), copy=False).tobytes() for s in slices[z : z + frames])
        z += frames
        raw = head + pixels + tail
        out.append(SliceSource(name, dicom.parse_dicom(raw), frames, raw))
    return out


def decrypt_volume(
    env: Envelope,
    key: bytes,
    typed_captcha: Answers = "",
    params: MapParams = CANONICAL,
    jobs: int | None = None,
    max_attempts: int = MAX_ATTEMPTS,
) -> Volume:
    key = check_key(key)
    overlay = authenticate(env, key, typed_captcha, params, max_attempts)
    planes = [p.copy() for p in cipher_planes(env)]
    if overlay is not None:
        planes[0] = superimpose(planes[0], overlay)
    bpp = env.bits_allocated // 8
    if env.partial:
        roi = env.rois[0]
        h, w = roi.y1 - roi.y0, (roi.x1 - roi.x0) * bpp
        carrier = [to_byte_matrix(s).copy() for s in carrier_volume(env).slices]

        def dec(i: int) -> np.ndarray:
            z = roi.z0 + i
            return decrypt_image(ByteImage(planes[i], h, w), _slice_keys(key, env.salt, z), params).data

        for i, sub in enumerate(_map(dec, range(len(planes)), jobs)):
            carrier[roi.z0 + i][roi.y0 : roi.y1, roi.x0 * bpp : roi.x1 * bpp] = sub
        byte_planes = carrier
    else:
        if next_pow2(max(env.rows, env.cols * bpp)) != env.padded:
            raise DimensionMismatch("envelope dims inconsistent with padded size")

        def dec(z: int) -> np.ndarray:
            return decrypt_image(ByteImage(planes[z], env.rows, env.cols * bpp), _slice_keys(key, env.salt, z), params).data

        byte_planes = _map(dec, range(len(planes)), jobs)
    slices = [from_byte_matrix(p, env.bits_allocated) for p in byte_planes]
    meta = xor_stream(env.metadata, _meta_seed(key, env.salt), params)
    sources = _restore_sources(meta, slices)
    spacing = _spacing(sources[0].obj, warn=False) if sources else (1.0, 1.0, 1.0)
    return Volume(slices, spacing, sources=sources)


def dicom_shell(env: Envelope, index: int = 0) -> bytes:
    """Wrap one stored cipher plane in a minimal 8-bit DICOM file for viewers.

    Carries no patient metadata; the envelope stays the authoritative output.
    """
    plane = cipher_planes(env)[index]
    n = plane.shape[0]

    def el(g, e, vr, value: bytes) -> dicom.DataElement:
        if len(value) % 2:
            value += b" " if vr in ("CS", "LO", "SH", "UI") and not value.endswith(b"\0") else b"\0"
        return dicom.DataElement(g, e, vr, value)

    elements = [
        el(0x0002, 0x0010, "UI", dicom.EXPLICIT_LE.encode() + b"\0"),
        el(0x0008, 0x0060, "CS", b"OT"),
        el(0x0028, 0x0002, "US", struct.pack("<H", 1)),
        el(0x0028, 0x0004, "CS", b"MONOCHROME2"),
        el(0x0028, 0x0010, "US", struct.pack("<H", n)),
        el(0x0028, 0x0011, "US", struct.pack("<H", n)),
        el(0x0028, 0x0100, "US", struct.pack("<H", 8)),
        el(0x0028, 0x0101, "US", struct.pack("<H", 8)),
        el(0x0028, 0x0102, "US", struct.pack("<H", 7)),
        el(0x0028, 0x0103, "US", struct.pack("<H", 0)),
        el(0x7FE0, 0x0010, "OB", plane.tobytes()),
    ]
    return dicom.write_dicom(dicom.DicomObject(elements, dicom.EXPLICIT_LE))


def write_series(vol: Volume, directory: str | os.PathLike) -> list[Path]:
    """Write decrypted slices back out: original DICOM files, else one PGM per slice."""
    out_dir = Path(directory)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if vol.sources:
        for src in vol.sources:
            written.append(_atomic_write(out_dir / src.name, src.to_bytes()))
    else:
        for z, s in enumerate(vol.slices):
            written.append(_atomic_write(out_dir / f"slice_{z:04d}.pgm", dicom.write_pgm(s)))
    return written


def _atomic_write(path: Path, data: bytes) -> Path:
    tmp = path.with_name(f".{path.name}.tmp-{os.getpid()}")
    tmp.write_bytes(data)
    os.replace(tmp, path)
    return path
