import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from hcme.metrics import (
    DIRECTIONS,
    DegenerateVariance,
    DimensionMismatch,
    adjacent_correlation,
    analyze,
    chi_square_uniformity,
    entropy,
    histogram,
    histogram_pgm,
    npcr_uaci,
    pearson,
    psnr,
    ssim,
)

images = st.tuples(st.integers(1, 24), st.integers(1, 24)).flatmap(lambda s: hnp.arrays(np.uint8, s))


def ssim_reference(a, b, w=8):
    """Explicit loop over every window (slow, obvious)."""
    a, b = a.astype(float), b.astype(float)
    c1, c2 = (0.01 * 255) ** 2, (0.03 * 255) ** 2
    vals = []
    for i in range(a.shape[0] - w + 1):
        for j in range(a.shape[1] - w + 1):
            x, y = a[i : i + w, j : j + w], b[i : i + w, j : j + w]
            mx, my = x.mean(), y.mean()
            vx, vy = ((x - mx) ** 2).mean(), ((y - my) ** 2).mean()
            cov = ((x - mx) * (y - my)).mean()
            vals.append(((2 * mx * my + c1) * (2 * cov + c2)) / ((mx**2 + my**2 + c1) * (vx + vy + c2)))
    return float(np.mean(vals))


class TestEntropy:
    def test_constant(self):
        assert entropy(np.full((9, 9), 4, np.uint8)) == 0

    def test_uniform(self):
        assert entropy(np.arange(256, dtype=np.uint8).reshape(16, 16)) == pytest.approx(8.0, abs=1e-12)

    @given(images, st.randoms())
    def test_bounds_and_permutation_invariance(self, img, rnd):
        h = entropy(img)
        assert 0 <= h <= 8
        flat = img.ravel().tolist()
        rnd.shuffle(flat)
        assert entropy(np.array(flat, np.uint8)) == pytest.approx(h, abs=1e-12)


class TestCorrelation:
    def test_gradient_rows(self):
        img = np.tile(np.arange(0, 200, 2, dtype=np.uint8), (50, 1))
        assert adjacent_correlation(img, "horizontal", 5000) == pytest.approx(1.0, abs=1e-12)

    def test_negation(self):
        u = np.array([1.0, 2.0, 3.0, 4.0])
        assert pearson(u, 5 - u) == pytest.approx(-1.0, abs=1e-12)

    def test_constant_flagged(self):
        assert math.isnan(adjacent_correlation(np.zeros((8, 8), np.uint8)))
        with pytest.raises(DegenerateVariance):
            pearson([1, 1, 1], [1, 2, 3])

    @given(
        hnp.arrays(np.float64, 20, elements=st.floats(-100, 100)),
        st.floats(0.1, 10),
        st.floats(-50, 50),
    )
    def test_affine_invariance(self, u, scale, shift):
        if np.ptp(u) < 1e-3:
            return
        v = np.roll(u, 1)
        if np.ptp(v) < 1e-3:
            return
        assert pearson(u, u) == pytest.approx(1.0, abs=1e-9)
        assert pearson(scale * u + shift, v) == pytest.approx(pearson(u, v), abs=1e-9)

    def test_reproducible_sampling(self, rng):
        img = rng.integers(0, 256, (64, 64), dtype=np.uint8)
        for d in DIRECTIONS:
            assert adjacent_correlation(img, d, 500, 3) == adjacent_correlation(img, d, 500, 3)

    def test_too_small(self):
        with pytest.raises(ValueError):
            adjacent_correlation(np.zeros((1, 5), np.uint8))


class TestDifferential:
    def test_identical(self):
        a = np.arange(16, dtype=np.uint8).reshape(4, 4)
        assert npcr_uaci(a, a) == (0.0, 0.0)

    def test_extremes(self):
        assert npcr_uaci(np.zeros((4, 4), np.uint8), np.full((4, 4), 255, np.uint8)) == (100.0, 100.0)

    @given(st.data())
    def test_symmetric_bounded(self, data):
        a = data.draw(hnp.arrays(np.uint8, (6, 5)))
        b = data.draw(hnp.arrays(np.uint8, (6, 5)))
        n1, u1 = npcr_uaci(a, b)
        assert (n1, u1) == npcr_uaci(b, a)
        assert 0 <= n1 <= 100 and 0 <= u1 <= 100

    def test_shape(self):
        with pytest.raises(DimensionMismatch):
            npcr_uaci(np.zeros((2, 2)), np.zeros((3, 2)))


class TestDistortion:
    def test_identical(self, rng):
        x = rng.integers(0, 256, (32, 32), dtype=np.uint8)
        assert psnr(x, x) == math.inf
        assert ssim(x, x) == pytest.approx(1.0, abs=1e-12)

    def test_zero_db(self):
        assert psnr(np.zeros((5, 5), np.uint8), np.full((5, 5), 255, np.uint8)) == 0.0

    @given(st.data())
    def test_ssim_matches_reference(self, data):
        shape = data.draw(st.tuples(st.integers(8, 14), st.integers(8, 14)))
        a = data.draw(hnp.arrays(np.uint8, shape))
        b = data.draw(hnp.arrays(np.uint8, shape))
        s = ssim(a, b)
        assert s == pytest.approx(ssim_reference(a, b), abs=1e-9)
        assert -1 <= s <= 1

    def test_small_image_single_window(self):
        a = np.arange(12, dtype=np.uint8).reshape(3, 4)
        assert ssim(a, a) == pytest.approx(1.0)

    def test_shape(self):
        with pytest.raises(DimensionMismatch):
            psnr(np.zeros((2, 2)), np.zeros((2, 3)))


class TestHistogram:
    @given(images)
    def test_sum(self, img):
        assert histogram(img).sum() == img.size

    def test_constant_maximal(self):
        img = np.full((16, 16), 9, np.uint8)
        assert chi_square_uniformity(histogram(img)) == pytest.approx(255 * img.size)

    def test_uniform_zero(self):
        img = np.tile(np.arange(256, dtype=np.uint8), 4)
        assert chi_square_uniformity(histogram(img)) == 0.0

    def test_bar_chart(self):
        pgm = histogram_pgm(histogram(np.zeros((4, 4), np.uint8)), height=10)
        assert pgm.shape == (10, 256)
        assert pgm[:, 0].all() and not pgm[:, 1:].any()


def test_report_json_and_csv(rng):
    a = rng.integers(0, 256, (32, 32), dtype=np.uint8)
    rep = analyze(a, a.copy(), samples=200)
    d = json.loads(rep.to_json())
    assert d["psnr"] == "inf"
    assert sum(d["histogram_a"]) == 32 * 32
    assert d["settings"]["ssim_window"] == 8
    assert rep.scalars_csv().splitlines()[0] == "metric,value"
    assert len(rep.histogram_csv().splitlines()) == 257
