import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from hcme.diffusion import INVERSE
from hcme.keys import derive_keyset
from hcme.metrics import entropy, npcr_uaci, pearson
from hcme.phantom import phantom
from hcme.pipeline import (
    ByteImage,
    DimensionMismatch,
    NotAPermutation,
    captcha_overlay,
    decrypt_image,
    encrypt_image,
    from_byte_matrix,
    pad,
    permute_image,
    superimpose,
    to_byte_matrix,
    unpad,
)


@pytest.fixture
def keys(key, salt):
    return derive_keyset(key, salt)


class TestPad:
    def test_non_square(self, rng):
        img = rng.integers(0, 256, (220, 180), dtype=np.uint8)
        p = pad(img)
        assert p.data.shape == (256, 256)
        assert np.array_equal(p.data[:220, :180], img)
        assert not p.data[220:].any() and not p.data[:, 180:].any()

    def test_already_square(self, rng):
        img = rng.integers(0, 256, (256, 256), dtype=np.uint8)
        assert np.array_equal(pad(img).data, img)

    def test_single_pixel(self):
        assert pad(np.array([[7]], np.uint8)).data.tolist() == [[7]]

    def test_unpad_inverse(self, rng):
        img = rng.integers(0, 256, (37, 51), dtype=np.uint8)
        assert np.array_equal(unpad(pad(img)).data, img)

    def test_unpad_too_big(self):
        with pytest.raises(DimensionMismatch):
            unpad(ByteImage(np.zeros((4, 4), np.uint8), 5, 4))


class TestPermute:
    def test_identity(self, rng):
        img = rng.integers(0, 256, (5, 6), dtype=np.uint8)
        assert np.array_equal(permute_image(img, np.arange(5), np.arange(6)), img)

    def test_hand_example(self):
        out = permute_image(np.array([[1, 2], [3, 4]]), [1, 0], [1, 0])
        assert out.tolist() == [[4, 3], [2, 1]]

    def test_inverse(self, rng):
        img = rng.integers(0, 256, (64, 64), dtype=np.uint8)
        pr, pc = rng.permutation(64), rng.permutation(64)
        assert np.array_equal(permute_image(permute_image(img, pr, pc), pr, pc, INVERSE), img)

    def test_not_permutation(self):
        with pytest.raises(NotAPermutation):
            permute_image(np.zeros((2, 2)), [0, 0], [0, 1])


class TestSuperimpose:
    @given(hnp.arrays(np.uint8, (4, 5)), hnp.arrays(np.uint8, (4, 5)))
    def test_xor_laws(self, a, b):
        assert np.array_equal(superimpose(a, np.zeros_like(a)), a)
        assert np.array_equal(superimpose(superimpose(a, b), b), a)
        assert not superimpose(a, a).any()

    def test_shape(self):
        with pytest.raises(DimensionMismatch):
            superimpose(np.zeros((2, 2)), np.zeros((2, 3)))


class TestCipher:
    def test_roundtrip_128x90(self, rng, keys):
        img = rng.integers(0, 256, (128, 90), dtype=np.uint8)
        c = encrypt_image(img, keys)
        assert c.data.shape == (128, 128)
        assert np.array_equal(decrypt_image(c, keys).data, img)

    @given(st.integers(1, 40), st.integers(1, 40), st.binary(min_size=32, max_size=32), st.data())
    def test_roundtrip_property(self, r, c, key, data):
        keys = derive_keyset(key, bytes(16))
        img = data.draw(hnp.arrays(np.uint8, (r, c)))
        assert np.array_equal(decrypt_image(encrypt_image(img, keys), keys).data, img)

    def test_deterministic(self, keys):
        img = phantom(64)
        assert np.array_equal(encrypt_image(img, keys).data, encrypt_image(img, keys).data)

    def test_mid_gray_entropy(self, keys):
        assert entropy(encrypt_image(np.full((256, 256), 128, np.uint8), keys).data) >= 7.98

    def test_single_pixel_npcr(self, keys):
        img = phantom(256)
        alt = img.copy()
        alt[77, 140] ^= 1
        npcr, _ = npcr_uaci(encrypt_image(img, keys).data, encrypt_image(alt, keys).data)
        assert 99.5 <= npcr <= 99.8

    def test_wrong_key(self, keys, key, salt):
        img = phantom(128)
        c = encrypt_image(img, keys)
        wrong = derive_keyset(bytes([key[0] ^ 1]) + key[1:], salt)
        out = decrypt_image(c, wrong).data
        assert abs(pearson(out.ravel(), img.ravel())) <= 0.05

    def test_truncated_ciphertext(self, keys):
        c = encrypt_image(phantom(64), keys)
        with pytest.raises(DimensionMismatch):
            decrypt_image(ByteImage(c.data[:, :-1], 64, 64), keys)
        with pytest.raises(DimensionMismatch):
            decrypt_image(ByteImage(c.data[:32, :32], 64, 64), keys)


class TestCaptchaOverlay:
    def test_small_plane_uses_crop(self, key, salt):
        ch16, ov16 = captcha_overlay(key, salt, 16)
        ch64, ov64 = captcha_overlay(key, salt, 64)
        assert ch16.answer == ch64.answer
        assert np.array_equal(ov16, ov64[:16, :16])

    def test_size(self, key, salt):
        _, ov = captcha_overlay(key, salt, 128)
        assert ov.shape == (128, 128)


class TestByteMatrix:
    @given(st.integers(1, 9), st.integers(1, 9), st.data())
    def test_16bit(self, r, c, data):
        img = data.draw(hnp.arrays(np.uint16, (r, c)))
        m = to_byte_matrix(img)
        assert m.shape == (r, 2 * c)
        assert m[0, 0] == img[0, 0] & 0xFF
        assert np.array_equal(from_byte_matrix(m, 16), img)

    def test_8bit_passthrough(self):
        img = np.arange(6, dtype=np.uint8).reshape(2, 3)
        assert np.array_equal(from_byte_matrix(to_byte_matrix(img), 8), img)
