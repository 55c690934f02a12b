"""Diffusion primitives and their exact inverses.

All functions take and return 2D ``uint8`` arrays and never modify their input.
``direction`` is ``"forward"`` or ``"inverse"``.
"""

from __future__ import annotations

from functools import lru_cache

import numba
import numpy as np

FORWARD = "forward"
INVERSE = "inverse"


class KeystreamExhausted(ValueError):
    pass


class InvalidSegmentWidth(ValueError):
    pass


class NotSquare(ValueError):
    pass


def _check_direction(direction: str) -> bool:
    if direction not in (FORWARD, INVERSE):
        raise ValueError(f"direction must be {FORWARD!r} or {INVERSE!r}")
    return direction == FORWARD


def rotl8(v: np.ndarray, r: np.ndarray | int) -> np.ndarray:
    v = np.asarray(v, dtype=np.uint16)
    r = np.asarray(r, dtype=np.uint16) & 7
    return (((v << r) | (v >> (8 - r))) & 0xFF).astype(np.uint8)


def rotr8(v: np.ndarray, r: np.ndarray | int) -> np.ndarray:
    return rotl8(v, (8 - (np.asarray(r, dtype=np.uint16) & 7)) & 7)


def _segment_xor(pix: np.ndarray, key: np.ndarray, k: int) -> np.ndarray:
    out = np.zeros_like(pix)
    width_mask = (1 << k) - 1
    for s in range(8 // k):
        m = np.uint8(width_mask << (s * k))
        out |= (pix & m) ^ (key & m)
    return out


def segment_diffuse(image: np.ndarray, ks: np.ndarray, k: int, direction: str = FORWARD) -> np.ndarray:
    """XOR each k-bit segment of a pixel with the aligned segment of ``ks[2i]``,
    then rotate the byte left by ``ks[2i+1] mod 8``."""
    if k not in (2, 4, 8):
        raise InvalidSegmentWidth(f"segment width must be 2, 4 or 8, got {k}")
    fwd = _check_direction(direction)
    n = image.size
    ks = np.asarray(ks, dtype=np.uint8)
    if ks.size < 2 * n:
        raise KeystreamExhausted(f"need {2 * n} key bytes, have {ks.size}")
    flat = image.reshape(-1)
    key, rot = ks[0 : 2 * n : 2], ks[1 : 2 * n : 2]
    if fwd:
        out = rotl8(_segment_xor(flat, key, k), rot)
    else:
        out = _segment_xor(rotr8(flat, rot), key, k)
    return out.reshape(image.shape)


def adjacent_diffuse(image: np.ndarray, direction: str = FORWARD) -> np.ndarray:
    """Bottom-up row cascade then right-to-left column cascade of XORs."""
    fwd = _check_direction(direction)
    a = np.array(image, dtype=np.uint8, copy=True)
    if fwd:
        a = np.bitwise_xor.accumulate(a[::-1, :], axis=0)[::-1, :]
        a = np.bitwise_xor.accumulate(a[:, ::-1], axis=1)[:, ::-1]
        return np.ascontiguousarray(a)
    a[:, :-1] ^= image[:, 1:]
    b = a.copy()
    b[:-1, :] ^= a[1:, :]
    return b


@lru_cache(maxsize=32)
def radial_layout(n: int) -> tuple[np.ndarray, np.ndarray, list[np.ndarray]]:
    """Chebyshev rings around ((n-1)//2, (n-1)//2).

    Returns (ring index per pixel, flat parent index per pixel, flat indices per
    ring). The center's parent is itself.
    """
    c = (n - 1) // 2
    ii, jj = np.indices((n, n))
    di, dj = ii - c, jj - c
    ring = np.maximum(np.abs(di), np.abs(dj))
    pi = np.where(np.abs(di) == ring, ii - np.sign(di), ii)
    pj = np.where(np.abs(dj) == ring, jj - np.sign(dj), jj)
    parent = (pi * n + pj).reshape(-1)
    flat_ring = ring.reshape(-1)
    order = np.argsort(flat_ring, kind="stable")
    bounds = np.searchsorted(flat_ring[order], np.arange(flat_ring.max() + 2))
    rings = [order[bounds[r] : bounds[r + 1]] for r in range(flat_ring.max() + 1)]
    for arr in (ring, parent):
        arr.setflags(write=False)
    return ring, parent, rings


def radial_parent(i: int, j: int, n: int) -> tuple[int, int]:
    p = int(radial_layout(n)[1][i * n + j])
    return divmod(p, n)


def radial_diffuse(image: np.ndarray, ks: np.ndarray, direction: str = FORWARD) -> np.ndarray:
    """XOR each pixel with its (updated) radial parent and a key byte, ring by ring outward."""
    fwd = _check_direction(direction)
    n = image.shape[0]
    if image.ndim != 2 or image.shape[1] != n:
        raise NotSquare(f"radial diffusion needs a square image, got {image.shape}")
    ks = np.asarray(ks, dtype=np.uint8)
    if ks.size < n * n:
        raise KeystreamExhausted(f"need {n * n} key bytes, have {ks.size}")
    _, parent, rings = radial_layout(n)
    src = image.reshape(-1)
    key = ks[: n * n]
    if not fwd:
        center = rings[0]
        out = src ^ src[parent] ^ key
        out[center] = src[center] ^ key[center]
        return out.reshape(n, n)
    out = src.copy()
    out[rings[0]] ^= key[rings[0]]
    for idx in rings[1:]:
        out[idx] = out[idx] ^ out[parent[idx]] ^ key[idx]
    return out.reshape(n, n)


# Nonlinear chained sweeps. The five stages above are affine over GF(2), so a
# one-pixel plaintext change would leave a key-independent difference pattern;
# these sweeps add carries (mod-256 addition) and feed every pixel forward in
# four directions so the change reaches the whole image.

CHAIN_ROTATION = 3


def _chain_step(cur: np.ndarray, prev: np.ndarray, key: np.ndarray) -> np.ndarray:
    return ((cur.astype(np.uint16) + rotl8(prev ^ key, CHAIN_ROTATION)) & 0xFF).astype(np.uint8)


def _chain_unstep(cur: np.ndarray, prev: np.ndarray, key: np.ndarray) -> np.ndarray:
    return ((cur.astype(np.int16) - rotl8(prev ^ key, CHAIN_ROTATION)) & 0xFF).astype(np.uint8)


@numba.njit(cache=True, nogil=True)
def _chain_forward(a, keys):
    """The four sequential sweeps (each pixel depends on its freshly updated predecessor)."""
    rows, cols = a.shape

    def f(cur, prev, key):
        v = prev ^ key
        return (cur + (((v << 3) | (v >> 5)) & 0xFF)) & 0xFF

    for i in range(1, rows):
        for j in range(cols):
            a[i, j] = f(np.int64(a[i, j]), np.int64(a[i - 1, j]), np.int64(keys[0, i, j]))
    for i in range(rows):
        for j in range(1, cols):
            a[i, j] = f(np.int64(a[i, j]), np.int64(a[i, j - 1]), np.int64(keys[1, i, j]))
    for i in range(rows - 2, -1, -1):
        for j in range(cols):
            a[i, j] = f(np.int64(a[i, j]), np.int64(a[i + 1, j]), np.int64(keys[2, i, j]))
    for i in range(rows):
        for j in range(cols - 2, -1, -1):
            a[i, j] = f(np.int64(a[i, j]), np.int64(a[i, j + 1]), np.int64(keys[3, i, j]))
    return a


def chained_diffuse(image: np.ndarray, ks: np.ndarray, direction: str = FORWARD) -> np.ndarray:
    """Four feedback sweeps: top-down, left-right, bottom-up, right-left.

    Each sweep sets ``out[i] = in[i] + rotl(out[i-1] ^ k, 3) (mod 256)`` along
    its axis, leaving the first line unchanged. Needs ``4 * pixels`` key bytes.
    """
    fwd = _check_direction(direction)
    rows, cols = image.shape
    n = rows * cols
    ks = np.asarray(ks, dtype=np.uint8)
    if ks.size < 4 * n:
        raise KeystreamExhausted(f"need {4 * n} key bytes, have {ks.size}")
    keys = ks[: 4 * n].reshape(4, rows, cols)
    a = np.array(image, dtype=np.uint8, copy=True)
    if fwd:
        return _chain_forward(a, keys)
    # each inverse sweep reads only the output of the sweep it undoes
    b = a.copy()
    b[:, :-1] = _chain_unstep(a[:, :-1], a[:, 1:], keys[3, :, :-1])
    a = b.copy()
    a[:-1] = _chain_unstep(b[:-1], b[1:], keys[2, :-1])
    b = a.copy()
    b[:, 1:] = _chain_unstep(a[:, 1:], a[:, :-1], keys[1, :, 1:])
    a = b.copy()
    a[1:] = _chain_unstep(b[1:], b[:-1], keys[0, 1:])
    return a
