"""Single-plane encryption: pad, permute, diffuse, and the exact inverse."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import diffusion as df
from .captcha import MIN_DIM, CaptchaChallenge, generate_captcha
from .chaos import CANONICAL, MapParams
from .keys import KeySet, derive_keyset, inverse_permutation, keystream_bytes, permutation_from_sequence


class DimensionMismatch(ValueError):
    pass


class NotAPermutation(ValueError):
    pass


@dataclass
class ByteImage:
    data: np.ndarray  # 2D uint8
    original_rows: int
    original_cols: int

    @classmethod
    def wrap(cls, image: "np.ndarray | ByteImage") -> "ByteImage":
        if isinstance(image, ByteImage):
            return image
        a = np.ascontiguousarray(image, dtype=np.uint8)
        if a.ndim != 2:
            raise DimensionMismatch(f"expected a 2D plane, got shape {a.shape}")
        return cls(a, *a.shape)

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]


def next_pow2(n: int) -> int:
    return 1 << max(0, (n - 1).bit_length())


def pad(image: np.ndarray | ByteImage) -> ByteImage:
    """Zero-pad to the smallest power-of-two square holding the image (top-left anchored)."""
    img = ByteImage.wrap(image)
    r, c = img.data.shape
    if r < 1 or c < 1:
        raise DimensionMismatch("image must be at least 1x1")
    n = next_pow2(max(r, c))
    out = np.zeros((n, n), dtype=np.uint8)
    out[:r, :c] = img.data
    return ByteImage(out, img.original_rows, img.original_cols)


def unpad(image: ByteImage) -> ByteImage:
    r, c = image.original_rows, image.original_cols
    if r > image.rows or c > image.cols or r < 1 or c < 1:
        raise DimensionMismatch(f"original {r}x{c} does not fit padded {image.rows}x{image.cols}")
    crop = np.ascontiguousarray(image.data[:r, :c])
    return ByteImage(crop, r, c)


def _check_perm(p: np.ndarray, n: int) -> np.ndarray:
    p = np.asarray(p)
    if p.shape != (n,) or not np.array_equal(np.sort(p), np.arange(n)):
        raise NotAPermutation(f"not a permutation of 0..{n - 1}")
    return p


def permute_image(image: np.ndarray, perm_rows, perm_cols, direction: str = df.FORWARD) -> np.ndarray:
    a = np.asarray(image)
    pr = _check_perm(perm_rows, a.shape[0])
    pc = _check_perm(perm_cols, a.shape[1])
    if direction == df.FORWARD:
        return a[pr, :][:, pc]
    if direction == df.INVERSE:
        return a[:, inverse_permutation(pc)][inverse_permutation(pr), :]
    raise ValueError(f"bad direction {direction!r}")


def superimpose(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a, b = np.asarray(a, dtype=np.uint8), np.asarray(b, dtype=np.uint8)
    if a.shape != b.shape:
        raise DimensionMismatch(f"cannot superimpose {a.shape} and {b.shape}")
    return a ^ b


# keystream windows, in units of n*n bytes
_SEGMENT_WINDOWS = {2: 0, 4: 2, 8: 4}
_RADIAL_WINDOW = 6
_CHAIN_WINDOW = 7
STREAM_LENGTH = 11


@dataclass
class _Schedule:
    perm_rows: np.ndarray
    perm_cols: np.ndarray
    stream: np.ndarray

    def window(self, start: int, length: int, n: int) -> np.ndarray:
        nn = n * n
        return self.stream[start * nn : (start + length) * nn]


def _schedule(keys: KeySet, n: int, params: MapParams) -> _Schedule:
    return _Schedule(
        permutation_from_sequence(keys.seed_x, n, params, keys.transient),
        permutation_from_sequence(keys.seed_y, n, params, keys.transient),
        keystream_bytes(keys.seed_z, STREAM_LENGTH * n * n, params, keys.transient),
    )


def encrypt_image(plain: np.ndarray | ByteImage, keys: KeySet, params: MapParams = CANONICAL) -> ByteImage:
    """pad -> permute -> 2/4/8-bit segment diffusion -> chained sweeps -> adjacent -> radial."""
    img = pad(plain)
    n = img.rows
    sch = _schedule(keys, n, params)
    a = permute_image(img.data, sch.perm_rows, sch.perm_cols)
    for k in (2, 4, 8):
        a = df.segment_diffuse(a, sch.window(_SEGMENT_WINDOWS[k], 2, n), k)
    a = df.chained_diffuse(a, sch.window(_CHAIN_WINDOW, 4, n))
    a = df.adjacent_diffuse(a)
    a = df.radial_diffuse(a, sch.window(_RADIAL_WINDOW, 1, n))
    return ByteImage(a, img.original_rows, img.original_cols)


def decrypt_image(cipher: ByteImage, keys: KeySet, params: MapParams = CANONICAL) -> ByteImage:
    a = np.asarray(cipher.data, dtype=np.uint8)
    n = a.shape[0]
    if a.ndim != 2 or a.shape[1] != n or n != next_pow2(n):
        raise DimensionMismatch(f"ciphertext must be a power-of-two square, got {a.shape}")
    if next_pow2(max(cipher.original_rows, cipher.original_cols)) != n:
        raise DimensionMismatch(
            f"original {cipher.original_rows}x{cipher.original_cols} does not pad to {n}"
        )
    sch = _schedule(keys, n, params)
    a = df.radial_diffuse(a, sch.window(_RADIAL_WINDOW, 1, n), df.INVERSE)
    a = df.adjacent_diffuse(a, df.INVERSE)
    a = df.chained_diffuse(a, sch.window(_CHAIN_WINDOW, 4, n), df.INVERSE)
    for k in (8, 4, 2):
        a = df.segment_diffuse(a, sch.window(_SEGMENT_WINDOWS[k], 2, n), k, df.INVERSE)
    a = permute_image(a, sch.perm_rows, sch.perm_cols, df.INVERSE)
    return unpad(ByteImage(a, cipher.original_rows, cipher.original_cols))


# ---------------------------------------------------------------- captcha overlay


def captcha_overlay(
    key: bytes, salt: bytes, n: int, params: MapParams = CANONICAL
) -> tuple[CaptchaChallenge, np.ndarray]:
    """Challenge and the encrypted captcha plane to XOR onto an n x n ciphertext.

    Planes smaller than 64 use the top-left crop of the encrypted 64 x 64 captcha.
    """
    seed = derive_keyset(key, salt).captcha_seed
    m = max(n, MIN_DIM)
    challenge = generate_captcha(seed, m)
    enc = encrypt_image(challenge.plane, derive_keyset(key, salt, "captcha"), params).data
    return challenge, np.ascontiguousarray(enc[:n, :n])


# ---------------------------------------------------------------- 16-bit planes


def to_byte_matrix(pixels: np.ndarray) -> np.ndarray:
    """8-bit planes pass through; 16-bit planes become (rows, 2*cols) little-endian bytes."""
    p = np.asarray(pixels)
    if p.dtype == np.uint8:
        return np.ascontiguousarray(p)
    if p.dtype.itemsize == 2:
        le = np.ascontiguousarray(p.astype("<u2"))
        return le.view(np.uint8).reshape(p.shape[0], 2 * p.shape[1])
    raise ValueError(f"unsupported pixel dtype {p.dtype}")


def from_byte_matrix(data: np.ndarray, bits: int) -> np.ndarray:
    d = np.ascontiguousarray(data, dtype=np.uint8)
    if bits == 8:
        return d
    if bits == 16:
        if d.shape[1] % 2:
            raise DimensionMismatch("16-bit byte matrix must have even width")
        return d.view("<u2").reshape(d.shape[0], d.shape[1] // 2).astype(np.uint16)
    raise ValueError(f"unsupported bit depth {bits}")
