"""Smooth synthetic test slices standing in for MRI data."""

from __future__ import annotations

import numpy as np

# (center y, center x, semi-axis y, semi-axis x, angle deg, intensity), unit-square coordinates
_ELLIPSES = (
    (0.00, 0.00, 0.69, 0.92, 0.0, 0.55),
    (-0.02, 0.00, 0.62, 0.87, 0.0, -0.20),
    (0.00, 0.22, 0.16, 0.31, -18.0, -0.12),
    (0.00, -0.22, 0.20, 0.41, 18.0, -0.12),
    (0.35, 0.00, 0.25, 0.21, 0.0, 0.18),
    (-0.10, 0.00, 0.05, 0.05, 0.0, 0.15),
    (-0.60, -0.08, 0.05, 0.07, 0.0, 0.12),
    (-0.60, 0.06, 0.05, 0.03, 0.0, 0.12),
)


def _blur(a: np.ndarray, radius: int) -> np.ndarray:
    if radius < 1:
        return a
    k = 2 * radius + 1
    for axis in (0, 1):
        pad = [(0, 0), (0, 0)]
        pad[axis] = (radius, radius)
        p = np.pad(a, pad, mode="edge")
        c = np.cumsum(p, axis=axis, dtype=np.float64)
        c = np.concatenate([np.zeros_like(c.take([0], axis=axis)), c], axis=axis)
        a = (c.take(np.arange(k, c.shape[axis]), axis=axis) - c.take(np.arange(0, c.shape[axis] - k), axis=axis)) / k
    return a


def phantom(n: int = 256, index: int = 0, bits: int = 8, cols: int | None = None) -> np.ndarray:
    """Head-like phantom; ``index`` shifts and reshapes the ellipses so slices differ."""
    rows, cols = n, cols or n
    y, x = np.mgrid[-1 : 1 : rows * 1j, -1 : 1 : cols * 1j]
    img = np.full((rows, cols), 0.05)
    scale = 1.0 - 0.06 * (index % 5)
    shift = 0.03 * index
    for cy, cx, ry, rx, ang, val in _ELLIPSES:
        t = np.radians(ang + 7.0 * index)
        dy, dx = y - (cy + shift * np.sign(cy)), x - cx
        u = dx * np.cos(t) + dy * np.sin(t)
        v = -dx * np.sin(t) + dy * np.cos(t)
        img[(u / (rx * scale)) ** 2 + (v / (ry * scale)) ** 2 <= 1.0] += val
    img += 0.08 * np.sin(3.0 * x + 0.5 * index) * np.cos(2.0 * y)
    img = _blur(img, max(1, min(rows, cols) // 64))
    img = np.clip(img, 0.0, 1.0)
    top = 255 if bits == 8 else 4095
    out = np.rint(img * top)
    return out.astype(np.uint8 if bits == 8 else np.uint16)
