"""Deterministic CAPTCHA rendering and answer verification."""

from __future__ import annotations

import enum
import math
import random
import string
from dataclasses import dataclass, field

import numpy as np

CHARSET = string.ascii_uppercase + string.ascii_lowercase + string.digits + "@#$%&*"
LENGTH = 6
MIN_DIM = 64
MAX_ATTEMPTS = 3

# 8x8 bitmap glyphs, one byte per row (MSB = leftmost pixel), in CHARSET order.
_FONT_HEX = (
    "003844447c444444" "0078444478444478" "0038444040404438" "0078444444444478"
    "007c40407840407c" "007c404078404040" "003844405c44443c" "004444447c444444"
    "0038101010101038" "001c080808084830" "0044485060504844" "004040404040407c"
    "00446c5454444444" "004464544c444444" "0038444444444438" "0078444478404040"
    "0038444444544834" "0078444478504844" "003c404038040478" "007c101010101010"
    "0044444444444438" "0044444444442810" "0044444454545428" "0044442810284444"
    "0044442810101010" "007c04081020407c" "00000038043c443c" "0040405864444478"
    "0000003840404438" "000404344c44443c" "00000038447c4038" "0018242070202020"
    "00003c44443c0438" "0040405864444444" "0010003010101038" "0008001808084830"
    "0040404850605048" "0030101010101038" "0000006854544444" "0000005864444444"
    "0000003844444438" "0000007844784040" "000000344c3c0404" "0000005864404040"
    "0000003840380478" "0020207020202418" "0000004444444c34" "0000004444442810"
    "0000004444545428" "0000004428102844" "00000044443c0438" "0000007c0810207c"
    "0038444c54644438" "0010301010101038" "003844040810207c" "0078040438040478"
    "00081828487c0808" "007c407804044438" "0018204078444438" "007c040810202020"
    "0038444438444438" "003844443c040830" "0038445c545c403c" "0028287c287c2828"
    "00103c5038147810" "0064640810204c4c" "0030485020544834" "0000105438541000"
)
_FONT = np.unpackbits(
    np.frombuffer(bytes.fromhex(_FONT_HEX), dtype=np.uint8).reshape(len(CHARSET), 8), axis=1
).reshape(len(CHARSET), 8, 8).astype(bool)


class DimensionTooSmall(ValueError):
    pass


class Verdict(enum.Enum):
    ACCEPT = "accept"
    RETRY = "retry"
    REJECT = "reject"


def glyph(ch: str) -> np.ndarray:
    return _FONT[CHARSET.index(ch)]


def scaled_glyph(ch: str, s: int) -> np.ndarray:
    """Glyph resampled to s x s; each target cell ORs its source block so thin strokes survive."""
    g = glyph(ch)
    lo = (np.arange(s) * 8) // s
    hi = np.maximum(lo + 1, ((np.arange(s) + 1) * 8) // s)
    rows = np.array([g[a:b].any(axis=0) for a, b in zip(lo, hi)])
    return np.array([rows[:, a:b].any(axis=1) for a, b in zip(lo, hi)]).T


@dataclass
class CaptchaChallenge:
    answer: str
    plane: np.ndarray
    seed: int
    boxes: list[tuple[int, int, int, int]] = field(default_factory=list)  # (y0, y1, x0, x1) per glyph


def _rotated_mask(mask: np.ndarray, degrees: float) -> np.ndarray:
    """Nearest-neighbour rotation about the center into a canvas that holds any angle."""
    s = mask.shape[0]
    size = int(math.ceil(s * math.sqrt(2))) + 2
    t = math.radians(degrees)
    ct, st = math.cos(t), math.sin(t)
    yy, xx = np.indices((size, size), dtype=float)
    cy = cx = (size - 1) / 2
    src_y = ct * (yy - cy) + st * (xx - cx) + (s - 1) / 2
    src_x = -st * (yy - cy) + ct * (xx - cx) + (s - 1) / 2
    iy, ix = np.rint(src_y).astype(int), np.rint(src_x).astype(int)
    inside = (iy >= 0) & (iy < s) & (ix >= 0) & (ix < s)
    out = np.zeros((size, size), dtype=bool)
    out[inside] = mask[iy[inside], ix[inside]]
    return out


def _line(plane: np.ndarray, y0: int, x0: int, y1: int, x1: int, value: int) -> None:
    steps = max(abs(y1 - y0), abs(x1 - x0)) + 1
    ys = np.rint(np.linspace(y0, y1, steps)).astype(int)
    xs = np.rint(np.linspace(x0, x1, steps)).astype(int)
    plane[ys, xs] = value


def generate_captcha(seed: int, n: int) -> CaptchaChallenge:
    """Render the 6-character challenge for ``seed`` on an ``n`` x ``n`` grayscale plane."""
    if n < MIN_DIM:
        raise DimensionTooSmall(f"captcha needs n >= {MIN_DIM}, got {n}")
    rng = random.Random(seed)
    answer = "".join(rng.choice(CHARSET) for _ in range(LENGTH))

    ramp = np.rint(40 + 80 * np.arange(n) / (n - 1)).astype(np.uint8)
    plane = np.repeat(ramp[None, :], n, axis=0)

    s = max(n // 10, 1)
    pitch = s + s // 3
    canvas = int(math.ceil(s * math.sqrt(2))) + 2
    left = (n - LENGTH * pitch) // 2
    jitter = n // 20
    boxes = []
    for k, ch in enumerate(answer):
        mask = scaled_glyph(ch, s)
        mask = _rotated_mask(mask, rng.uniform(-15.0, 15.0))
        cy = n // 2 + rng.randint(-jitter, jitter)
        cx = left + k * pitch + pitch // 2
        y0, x0 = cy - canvas // 2, cx - canvas // 2
        # clamp keeps every glyph inside the plane for the smallest n
        y0 = min(max(y0, 0), n - canvas)
        x0 = min(max(x0, 0), n - canvas)
        region = plane[y0 : y0 + canvas, x0 : x0 + canvas]
        region[mask] = rng.randint(200, 255)
        ys, xs = np.nonzero(mask)
        boxes.append((y0 + int(ys.min()), y0 + int(ys.max()) + 1, x0 + int(xs.min()), x0 + int(xs.max()) + 1))

    for _ in range((n * n) // 200):
        plane[rng.randrange(n), rng.randrange(n)] = rng.randrange(256)
    for _ in range(4):
        _line(plane, rng.randrange(n), rng.randrange(n), rng.randrange(n), rng.randrange(n), rng.randrange(256))
    return CaptchaChallenge(answer, plane, seed, boxes)


def preview_rgb(challenge: CaptchaChallenge) -> np.ndarray:
    """Coloured rendering for display only; plays no part in encryption."""
    g = challenge.plane.astype(np.float64) / 255.0
    n = g.shape[1]
    hue = np.linspace(0.0, 1.0, n)[None, :]
    r = g * (0.6 + 0.4 * hue)
    gr = g * (0.9 - 0.3 * hue)
    b = g * (0.5 + 0.5 * (1 - hue))
    return np.rint(np.stack([r, gr, b], axis=-1) * 255).astype(np.uint8)


def ascii_art(challenge: CaptchaChallenge, width: int = 72) -> str:
    """Coarse terminal rendering of the glyph band, for interactive prompts."""
    plane = challenge.plane
    y0 = min(b[0] for b in challenge.boxes)
    y1 = max(b[1] for b in challenge.boxes)
    x0 = min(b[2] for b in challenge.boxes)
    x1 = max(b[3] for b in challenge.boxes)
    band = plane[y0:y1, x0:x1] >= 200
    step = max(1, math.ceil(band.shape[1] / width))
    rows = []
    for r in range(0, band.shape[0], max(1, step * 2)):
        rows.append("".join("#" if band[r, c] else " " for c in range(0, band.shape[1], step)))
    return "\n".join(rows)


def verify_captcha(expected: str, typed: str, attempt: int, max_attempts: int = MAX_ATTEMPTS) -> Verdict:
    if attempt < 1:
        raise ValueError("attempt numbers start at 1")
    if typed == expected:
        return Verdict.ACCEPT
    return Verdict.RETRY if attempt < max_attempts else Verdict.REJECT
