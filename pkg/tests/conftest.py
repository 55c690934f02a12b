import os
import struct

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.register_profile("ci", deadline=None, max_examples=200, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

EXPLICIT = "1.2.840.10008.1.2.1"
IMPLICIT = "1.2.840.10008.1.2"
JPEG_BASELINE = "1.2.840.10008.1.2.4.50"
LONG = {"OB", "OW", "SQ", "UN", "UT"}


def _pad(v: bytes, fill: bytes = b" ") -> bytes:
    return v + fill if len(v) % 2 else v


def element(group, elem, vr, value, explicit=True):
    if explicit:
        if vr in LONG:
            return struct.pack("<HH2sHI", group, elem, vr.encode(), 0, len(value)) + value
        return struct.pack("<HH2sH", group, elem, vr.encode(), len(value)) + value
    return struct.pack("<HHI", group, elem, len(value)) + value


def make_dicom(
    pixels: np.ndarray,
    syntax: str = EXPLICIT,
    instance: int | None = None,
    location: float | None = None,
    spacing: tuple[float, float, float] | None = None,
    patient: str = "DOE^JANE",
    frames: int | None = None,
) -> bytes:
    """Hand-rolled DICOM writer kept independent of hcme.dicom (test oracle)."""
    pixels = np.asarray(pixels)
    if pixels.ndim == 2:
        pixels = pixels[None]
    nf, rows, cols = pixels.shape
    bits = 8 * pixels.dtype.itemsize
    explicit = syntax != IMPLICIT
    meta = element(0x0002, 0x0010, "UI", _pad(syntax.encode(), b"\0"))
    meta = element(0x0002, 0x0000, "UL", struct.pack("<I", len(meta))) + meta
    body = b""
    body += element(0x0008, 0x0060, "CS", b"MR", explicit)
    body += element(0x0010, 0x0010, "PN", _pad(patient.encode()), explicit)
    if spacing is not None:
        body += element(0x0018, 0x0050, "DS", _pad(repr(spacing[2]).encode()), explicit)
    if instance is not None:
        body += element(0x0020, 0x0013, "IS", _pad(str(instance).encode()), explicit)
    if location is not None:
        body += element(0x0020, 0x1041, "DS", _pad(repr(location).encode()), explicit)
    body += element(0x0028, 0x0002, "US", struct.pack("<H", 1), explicit)
    if frames is not None or nf > 1:
        body += element(0x0028, 0x0008, "IS", _pad(str(nf).encode()), explicit)
    body += element(0x0028, 0x0010, "US", struct.pack("<H", rows), explicit)
    body += element(0x0028, 0x0011, "US", struct.pack("<H", cols), explicit)
    if spacing is not None:
        body += element(0x0028, 0x0030, "DS", _pad(f"{spacing[0]!r}\\{spacing[1]!r}".encode()), explicit)
    body += element(0x0028, 0x0100, "US", struct.pack("<H", bits), explicit)
    body += element(0x0028, 0x0101, "US", struct.pack("<H", bits), explicit)
    raw = pixels.astype(pixels.dtype.newbyteorder("<")).tobytes()
    body += element(0x7FE0, 0x0010, "OB" if bits == 8 else "OW", _pad(raw, b"\0"), explicit)
    return b"\0" * 128 + b"DICM" + meta + body


@pytest.fixture
def key():
    return bytes(range(32))


@pytest.fixture
def salt():
    return bytes.fromhex("00112233445566778899aabbccddeeff")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# acceptance criteria record their verdicts here; printed at the end of the run
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"CRITERION {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
