"""Key schedule: everything chaotic is derived from (master key, salt, label)."""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass

import numba
import numpy as np

from .chaos import CANONICAL, DEFAULT_TRANSIENT, ChaosState, MapParams, orbit

KEY_SIZE = 32
SALT_SIZE = 16
KDF_SHA256 = 1  # envelope kdf-id; changing the hash is a format break
LABELS = ("perm-x", "perm-y", "stream-z", "captcha", "meta")


class InvalidKeyLength(ValueError):
    pass


class InvalidSaltLength(ValueError):
    pass


def check_key(key: bytes) -> bytes:
    if not isinstance(key, (bytes, bytearray)) or len(key) != KEY_SIZE:
        raise InvalidKeyLength(f"master key must be {KEY_SIZE} bytes")
    return bytes(key)


def check_salt(salt: bytes) -> bytes:
    if not isinstance(salt, (bytes, bytearray)) or len(salt) != SALT_SIZE:
        raise InvalidSaltLength(f"salt must be {SALT_SIZE} bytes")
    return bytes(salt)


def parse_hex_key(text: str) -> bytes:
    try:
        raw = bytes.fromhex(text.strip())
    except ValueError as exc:
        raise InvalidKeyLength("master key must be 64 hex characters") from exc
    return check_key(raw)


def label_digest(key: bytes, salt: bytes, label: str) -> bytes:
    return hashlib.sha256(check_key(key) + check_salt(salt) + label.encode("utf-8")).digest()


def _unit(window: bytes) -> float:
    u = struct.unpack(">Q", window)[0]
    # top 53 bits keep the fraction exactly representable and strictly below 1
    return 0.1 + 0.8 * ((u >> 11) / 2.0**53)


def seed_from_digest(digest: bytes) -> ChaosState:
    return ChaosState(_unit(digest[0:8]), _unit(digest[8:16]), _unit(digest[16:24]))


@dataclass(frozen=True)
class KeySet:
    seed_x: ChaosState
    seed_y: ChaosState
    seed_z: ChaosState
    captcha_seed: int
    meta_seed: ChaosState
    transient: int = DEFAULT_TRANSIENT


def scoped(scope: str, label: str) -> str:
    return f"{scope}/{label}" if scope else label


def derive_keyset(key: bytes, salt: bytes, scope: str = "") -> KeySet:
    """Derive the seeds for one image.

    ``scope`` prefixes every label (``slice-3/perm-x``), giving independent
    streams per slice or for the captcha plane.
    """
    d = {lab: label_digest(key, salt, scoped(scope, lab)) for lab in LABELS}
    return KeySet(
        seed_x=seed_from_digest(d["perm-x"]),
        seed_y=seed_from_digest(d["perm-y"]),
        seed_z=seed_from_digest(d["stream-z"]),
        captcha_seed=struct.unpack(">Q", d["captcha"][:8])[0],
        meta_seed=seed_from_digest(d["meta"]),
    )


@numba.njit(cache=True, nogil=True)
def _quantise(xs):
    out = np.empty(xs.size, dtype=np.uint8)
    for i in range(xs.size):
        v = abs(xs[i]) * 1e6
        out[i] = np.uint8(math.floor((v - math.floor(v)) * 256.0))
    return out


def keystream_bytes(
    seed: ChaosState,
    n: int,
    params: MapParams = CANONICAL,
    transient: int = DEFAULT_TRANSIENT,
) -> np.ndarray:
    """``n`` key bytes, byte_i = floor(frac(|x_i| * 1e6) * 256)."""
    if n <= 0:
        raise ValueError("n must be positive")
    return _quantise(np.ascontiguousarray(orbit(seed, params, n, transient)[:, 0]))


def permutation_from_sequence(
    seed: ChaosState,
    n: int,
    params: MapParams = CANONICAL,
    transient: int = DEFAULT_TRANSIENT,
) -> np.ndarray:
    """Stable argsort of ``n`` chaotic x-values: a bijection on 0..n-1."""
    if n < 1:
        raise ValueError("n must be >= 1")
    xs = orbit(seed, params, n, transient)[:, 0]
    return np.argsort(xs, kind="stable")


def inverse_permutation(perm: np.ndarray) -> np.ndarray:
    inv = np.empty_like(perm)
    inv[perm] = np.arange(perm.size, dtype=perm.dtype)
    return inv


def xor_stream(data: bytes, seed: ChaosState, params: MapParams = CANONICAL) -> bytes:
    """XOR ``data`` with a keystream; self-inverse. Empty input stays empty."""
    if not data:
        return b""
    ks = keystream_bytes(seed, len(data), params)
    return (np.frombuffer(data, dtype=np.uint8) ^ ks).tobytes()
