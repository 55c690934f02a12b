import random

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hcme.captcha import (
    CHARSET,
    DimensionTooSmall,
    Verdict,
    ascii_art,
    generate_captcha,
    glyph,
    preview_rgb,
    scaled_glyph,
    verify_captcha,
)


def test_deterministic():
    a, b = generate_captcha(42, 128), generate_captcha(42, 128)
    assert a.answer == b.answer
    assert np.array_equal(a.plane, b.plane)


def test_answer_from_seeded_rng():
    rng = random.Random(99)
    assert generate_captcha(99, 64).answer == "".join(rng.choice(CHARSET) for _ in range(6))


def test_different_seeds():
    rng = np.random.default_rng(5)
    for s1, s2 in rng.integers(0, 2**63, (100, 2)):
        a, b = generate_captcha(int(s1), 64), generate_captcha(int(s2), 64)
        assert a.answer != b.answer
        assert np.mean(a.plane != b.plane) >= 0.01


@pytest.mark.parametrize("n", [64, 100, 256, 512])
def test_boxes_inside(n):
    ch = generate_captcha(7, n)
    assert len(ch.boxes) == 6
    for y0, y1, x0, x1 in ch.boxes:
        assert 0 <= y0 < y1 <= n and 0 <= x0 < x1 <= n


@given(st.integers(0, 2**64 - 1))
def test_boxes_inside_any_seed(seed):
    for y0, y1, x0, x1 in generate_captcha(seed, 64).boxes:
        assert 0 <= y0 < y1 <= 64 and 0 <= x0 < x1 <= 64


def test_too_small():
    with pytest.raises(DimensionTooSmall):
        generate_captcha(1, 63)


def test_font_complete():
    assert len(CHARSET) == 68
    glyphs = {glyph(c).tobytes() for c in CHARSET}
    assert len(glyphs) == 68
    assert all(glyph(c).any() for c in CHARSET)


@pytest.mark.parametrize("s", [6, 7, 12])
def test_scaled_glyphs_keep_strokes(s):
    assert all(scaled_glyph(c, s).any() for c in CHARSET)


def test_scaling_identity_and_upsample():
    assert np.array_equal(scaled_glyph("Q", 8), glyph("Q"))
    assert np.array_equal(scaled_glyph("Q", 16), np.kron(glyph("Q"), np.ones((2, 2), bool)))


def test_preview_and_ascii():
    ch = generate_captcha(3, 128)
    rgb = preview_rgb(ch)
    assert rgb.shape == (128, 128, 3) and rgb.dtype == np.uint8
    assert "#" in ascii_art(ch)


class TestVerify:
    def test_accept(self):
        assert verify_captcha("aB3$Qx", "aB3$Qx", 1, 3) is Verdict.ACCEPT

    def test_case_sensitive(self):
        assert verify_captcha("aB3$Qx", "ab3$qx", 1, 3) is Verdict.RETRY

    def test_exhausted(self):
        assert verify_captcha("aB3$Qx", "nope", 3, 3) is Verdict.REJECT

    def test_attempt_numbering(self):
        with pytest.raises(ValueError):
            verify_captcha("a", "a", 0)
