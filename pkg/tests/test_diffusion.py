"""Diffusion stages checked against literal loop re-implementations of their definitions."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from hcme.diffusion import (
    INVERSE,
    InvalidSegmentWidth,
    KeystreamExhausted,
    NotSquare,
    adjacent_diffuse,
    chained_diffuse,
    radial_diffuse,
    radial_layout,
    radial_parent,
    rotl8,
    segment_diffuse,
)


def rotl(v, r):
    r &= 7
    return ((v << r) | (v >> (8 - r))) & 0xFF


def segment_oracle(p, key, rot, k):
    out = 0
    for s in range(0, 8, k):
        mask = ((1 << k) - 1) << s
        out |= (p & mask) ^ (key & mask)
    return rotl(out, rot)


def adjacent_oracle(a):
    a = [list(map(int, r)) for r in a]
    rows, cols = len(a), len(a[0])
    for i in range(rows - 2, -1, -1):
        for j in range(cols):
            a[i][j] ^= a[i + 1][j]
    for j in range(cols - 2, -1, -1):
        for i in range(rows):
            a[i][j] ^= a[i][j + 1]
    return np.array(a, dtype=np.uint8)


def parent_oracle(i, j, n):
    c = (n - 1) // 2
    ring = max(abs(i - c), abs(j - c))
    sgn = lambda v: (v > 0) - (v < 0)  # noqa: E731
    pi = i - sgn(i - c) if abs(i - c) == ring else i
    pj = j - sgn(j - c) if abs(j - c) == ring else j
    return pi, pj, ring


def radial_oracle(a, key):
    n = a.shape[0]
    out = a.astype(int).copy()
    c = (n - 1) // 2
    cells = sorted(((parent_oracle(i, j, n)[2], i, j) for i in range(n) for j in range(n)))
    for ring, i, j in cells:
        if ring == 0:
            out[i, j] ^= key[i * n + j]
        else:
            pi, pj, _ = parent_oracle(i, j, n)
            out[i, j] ^= out[pi, pj] ^ key[i * n + j]
    assert cells[0][1:] == (c, c)
    return out.astype(np.uint8)


square = st.integers(1, 12).flatmap(lambda n: hnp.arrays(np.uint8, (n, n)))


class TestSegment:
    def test_zero_key_identity(self):
        out = segment_diffuse(np.array([[0b10101100]], np.uint8), np.array([0, 0], np.uint8), 2)
        assert out[0, 0] == 0b10101100

    def test_documented_operands(self):
        out = segment_diffuse(np.array([[0b11001010]], np.uint8), np.array([0b10100101, 0], np.uint8), 4)
        assert out[0, 0] == 0b01101111

    @pytest.mark.parametrize("k", [2, 4, 8])
    def test_exhaustive_inverse_and_oracle(self, k):
        # every (pixel, key byte, rotation) combination in one 256*256*8 batch
        p, key, rot = np.meshgrid(np.arange(256), np.arange(256), np.arange(8), indexing="ij")
        img = p.astype(np.uint8).reshape(-1, 256)
        ks = np.empty(2 * p.size, np.uint8)
        ks[0::2] = key.reshape(-1)
        ks[1::2] = rot.reshape(-1)
        fwd = segment_diffuse(img, ks, k)
        assert np.array_equal(segment_diffuse(fwd, ks, k, INVERSE), img)
        sample = np.random.default_rng(k).integers(0, p.size, 2000)
        flat = fwd.reshape(-1)
        for idx in sample:
            pv, kv, rv = int(p.flat[idx]), int(key.flat[idx]), int(rot.flat[idx])
            assert flat[idx] == segment_oracle(pv, kv, rv, k)

    def test_bad_width(self):
        with pytest.raises(InvalidSegmentWidth):
            segment_diffuse(np.zeros((2, 2), np.uint8), np.zeros(8, np.uint8), 3)

    def test_short_stream(self):
        with pytest.raises(KeystreamExhausted):
            segment_diffuse(np.zeros((2, 2), np.uint8), np.zeros(7, np.uint8), 2)


class TestAdjacent:
    def test_single_pixel(self):
        assert adjacent_diffuse(np.array([[9]], np.uint8))[0, 0] == 9

    def test_hand_trace(self):
        out = adjacent_diffuse(np.array([[1, 2], [3, 4]], np.uint8))
        assert out.tolist() == [[4, 6], [7, 4]]

    def test_500_random(self, rng):
        for _ in range(500):
            a = rng.integers(0, 256, (16, 16), dtype=np.uint8)
            fwd = adjacent_diffuse(a)
            assert np.array_equal(fwd, adjacent_oracle(a))
            assert np.array_equal(adjacent_diffuse(fwd, INVERSE), a)

    @given(st.integers(1, 9), st.integers(1, 9), st.data())
    def test_rectangular(self, r, c, data):
        a = data.draw(hnp.arrays(np.uint8, (r, c)))
        assert np.array_equal(adjacent_diffuse(adjacent_diffuse(a), INVERSE), a)


class TestRadial:
    def test_single_pixel(self):
        assert radial_diffuse(np.array([[5]], np.uint8), np.array([3], np.uint8))[0, 0] == 5 ^ 3

    @pytest.mark.parametrize("n", [1, 2, 5, 8, 9, 16])
    def test_parent_ring(self, n):
        ring, _, _ = radial_layout(n)
        c = (n - 1) // 2
        for i in range(n):
            for j in range(n):
                if (i, j) == (c, c):
                    continue
                pi, pj = radial_parent(i, j, n)
                assert ring[pi, pj] == ring[i, j] - 1
                assert (pi, pj, ring[i, j]) == parent_oracle(i, j, n)

    @pytest.mark.parametrize("n", [8, 9])
    def test_500_random(self, rng, n):
        for _ in range(500):
            a = rng.integers(0, 256, (n, n), dtype=np.uint8)
            ks = rng.integers(0, 256, n * n, dtype=np.uint8)
            fwd = radial_diffuse(a, ks)
            assert np.array_equal(fwd, radial_oracle(a, ks))
            assert np.array_equal(radial_diffuse(fwd, ks, INVERSE), a)

    def test_16x16_against_definition(self, rng):
        for _ in range(500):
            a = rng.integers(0, 256, (16, 16), dtype=np.uint8)
            ks = rng.integers(0, 256, 256, dtype=np.uint8)
            fwd = radial_diffuse(a, ks)
            assert np.array_equal(fwd, radial_oracle(a, ks))
            assert np.array_equal(radial_diffuse(fwd, ks, INVERSE), a)

    def test_not_square(self):
        with pytest.raises(NotSquare):
            radial_diffuse(np.zeros((2, 3), np.uint8), np.zeros(6, np.uint8))

    def test_short_stream(self):
        with pytest.raises(KeystreamExhausted):
            radial_diffuse(np.zeros((3, 3), np.uint8), np.zeros(8, np.uint8))


def chained_oracle(a, ks):
    a = a.astype(int).copy()
    rows, cols = a.shape
    k = ks.reshape(4, rows, cols).astype(int)
    f = lambda cur, prev, key: (cur + rotl(prev ^ key, 3)) & 0xFF  # noqa: E731
    for i in range(1, rows):
        for j in range(cols):
            a[i, j] = f(a[i, j], a[i - 1, j], k[0, i, j])
    for j in range(1, cols):
        for i in range(rows):
            a[i, j] = f(a[i, j], a[i, j - 1], k[1, i, j])
    for i in range(rows - 2, -1, -1):
        for j in range(cols):
            a[i, j] = f(a[i, j], a[i + 1, j], k[2, i, j])
    for j in range(cols - 2, -1, -1):
        for i in range(rows):
            a[i, j] = f(a[i, j], a[i, j + 1], k[3, i, j])
    return a.astype(np.uint8)


class TestChained:
    def test_oracle_and_inverse(self, rng):
        for shape in [(1, 1), (1, 7), (6, 1), (16, 16), (5, 9)]:
            a = rng.integers(0, 256, shape, dtype=np.uint8)
            ks = rng.integers(0, 256, 4 * a.size, dtype=np.uint8)
            fwd = chained_diffuse(a, ks)
            assert np.array_equal(fwd, chained_oracle(a, ks))
            assert np.array_equal(chained_diffuse(fwd, ks, INVERSE), a)

    def test_short_stream(self):
        with pytest.raises(KeystreamExhausted):
            chained_diffuse(np.zeros((2, 2), np.uint8), np.zeros(15, np.uint8))


@given(st.integers(0, 255), st.integers(0, 7))
def test_rotl_matches_oracle(v, r):
    assert int(rotl8(np.uint8(v), r)) == rotl(v, r)
