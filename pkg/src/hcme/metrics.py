"""Security metrics for image ciphers and the JSON/CSV analysis report."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

DIRECTIONS = {"horizontal": (0, 1), "vertical": (1, 0), "diagonal": (1, 1)}
DEFAULT_SAMPLES = 5000
DEFAULT_RNG_SEED = 20240607
SSIM_WINDOW = 8
SSIM_K1, SSIM_K2, SSIM_L = 0.01, 0.03, 255.0
CHI2_CRITICAL_1PCT_255DF = 310.46
INF = "inf"


class DimensionMismatch(ValueError):
    pass


class DegenerateVariance(ArithmeticError):
    """One of the correlated vectors is constant; correlation is undefined."""


def _u8(image) -> np.ndarray:
    a = np.asarray(image)
    if a.size == 0:
        raise ValueError("empty image")
    return a


def _same_shape(a, b) -> tuple[np.ndarray, np.ndarray]:
    a, b = _u8(a), _u8(b)
    if a.shape != b.shape:
        raise DimensionMismatch(f"shapes differ: {a.shape} vs {b.shape}")
    return a, b


def histogram(image) -> np.ndarray:
    a = _u8(image)
    if a.dtype != np.uint8:
        raise ValueError("histogram expects an 8-bit plane")
    return np.bincount(a.ravel(), minlength=256).astype(np.int64)


def chi_square_uniformity(hist) -> float:
    h = np.asarray(hist, dtype=np.float64)
    expected = h.sum() / h.size
    return float(((h - expected) ** 2).sum() / expected)


def entropy(image) -> float:
    a = _u8(image)
    counts = np.bincount(a.ravel().astype(np.int64))
    p = counts[counts > 0] / a.size
    return float(-(p * np.log2(p)).sum()) + 0.0


def pearson(u, v) -> float:
    """Pearson r of two equal-length vectors; raises DegenerateVariance when either is constant."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    du, dv = u - u.mean(), v - v.mean()
    su, sv = (du * du).sum(), (dv * dv).sum()
    if su == 0 or sv == 0:
        raise DegenerateVariance("constant vector")
    return float((du * dv).sum() / math.sqrt(su * sv))


def adjacent_pairs(image, direction: str, samples: int, rng_seed: int = DEFAULT_RNG_SEED):
    a = _u8(image)
    if a.ndim != 2 or a.shape[0] < 2 or a.shape[1] < 2:
        raise ValueError("need a 2D image of at least 2x2")
    if samples < 2:
        raise ValueError("need at least two samples")
    dy, dx = DIRECTIONS[direction]
    rng = np.random.default_rng(rng_seed)
    ys = rng.integers(0, a.shape[0] - dy, samples)
    xs = rng.integers(0, a.shape[1] - dx, samples)
    return a[ys, xs], a[ys + dy, xs + dx]


def adjacent_correlation(
    image, direction: str = "horizontal", samples: int = DEFAULT_SAMPLES, rng_seed: int = DEFAULT_RNG_SEED
) -> float:
    """Correlation of randomly sampled neighbour pairs; NaN flags a constant sample."""
    u, v = adjacent_pairs(image, direction, samples, rng_seed)
    try:
        return pearson(u, v)
    except DegenerateVariance:
        return math.nan


def npcr_uaci(c1, c2) -> tuple[float, float]:
    a, b = _same_shape(c1, c2)
    diff = np.abs(a.astype(np.int64) - b.astype(np.int64))
    npcr = 100.0 * np.count_nonzero(diff) / diff.size
    uaci = 100.0 * diff.sum() / (255.0 * diff.size)
    return float(npcr), float(uaci)


def psnr(a, b) -> float:
    """Peak signal-to-noise ratio in dB; identical inputs give ``math.inf``."""
    a, b = _same_shape(a, b)
    mse = np.mean((a.astype(np.float64) - b.astype(np.float64)) ** 2)
    if mse == 0:
        return math.inf
    return float(10.0 * math.log10(SSIM_L**2 / mse))


def _window_sums(a: np.ndarray, w: int) -> np.ndarray:
    s = np.zeros((a.shape[0] + 1, a.shape[1] + 1))
    s[1:, 1:] = a.cumsum(0).cumsum(1)
    return s[w:, w:] - s[:-w, w:] - s[w:, :-w] + s[:-w, :-w]


def ssim(a, b, window: int = SSIM_WINDOW) -> float:
    """Mean SSIM over every valid ``window`` x ``window`` uniform window.

    Images smaller than the window are treated as a single window.
    """
    a, b = _same_shape(a, b)
    if a.ndim != 2:
        raise ValueError("ssim expects 2D planes")
    x, y = a.astype(np.float64), b.astype(np.float64)
    c1, c2 = (SSIM_K1 * SSIM_L) ** 2, (SSIM_K2 * SSIM_L) ** 2
    if x.shape[0] < window or x.shape[1] < window:
        mx, my = x.mean(), y.mean()
        vx, vy = x.var(), y.var()
        cxy = ((x - mx) * (y - my)).mean()
    else:
        area = window * window
        mx, my = _window_sums(x, window) / area, _window_sums(y, window) / area
        vx = _window_sums(x * x, window) / area - mx * mx
        vy = _window_sums(y * y, window) / area - my * my
        cxy = _window_sums(x * y, window) / area - mx * my
    s = ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
    return float(np.mean(s))


# ---------------------------------------------------------------- report


def _jsonable(v):
    if isinstance(v, float):
        if math.isinf(v):
            return INF if v > 0 else "-inf"
        if math.isnan(v):
            return None
    return v


@dataclass
class AnalysisReport:
    """Metrics comparing a plaintext ``a`` against a ciphertext ``b``."""

    shape: tuple[int, int]
    entropy_a: float
    entropy_b: float
    correlation_a: dict[str, float]
    correlation_b: dict[str, float]
    npcr: float
    uaci: float
    psnr: float
    ssim: float
    chi_square_b: float
    histogram_a: list[int] = field(default_factory=list)
    histogram_b: list[int] = field(default_factory=list)
    samples: int = DEFAULT_SAMPLES
    rng_seed: int = DEFAULT_RNG_SEED

    def settings(self) -> dict:
        return {
            "ssim_window": SSIM_WINDOW,
            "ssim_k1": SSIM_K1,
            "ssim_k2": SSIM_K2,
            "ssim_L": SSIM_L,
            "correlation_samples": self.samples,
            "rng_seed": self.rng_seed,
        }

    def to_dict(self) -> dict:
        d = asdict(self)
        d["shape"] = list(self.shape)
        for k in ("correlation_a", "correlation_b"):
            d[k] = {dk: _jsonable(dv) for dk, dv in d[k].items()}
        d = {k: _jsonable(v) for k, v in d.items()}
        d["settings"] = self.settings()
        return d

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    def scalars_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["metric", "value"])
        rows = [
            ("entropy_a", self.entropy_a),
            ("entropy_b", self.entropy_b),
            *((f"correlation_a_{k}", v) for k, v in self.correlation_a.items()),
            *((f"correlation_b_{k}", v) for k, v in self.correlation_b.items()),
            ("npcr", self.npcr),
            ("uaci", self.uaci),
            ("psnr", self.psnr),
            ("ssim", self.ssim),
            ("chi_square_b", self.chi_square_b),
        ]
        for k, v in rows:
            w.writerow([k, _jsonable(v)])
        return buf.getvalue()

    def histogram_csv(self) -> str:
        lines = ["level,count_a,count_b"]
        lines += [f"{i},{ha},{hb}" for i, (ha, hb) in enumerate(zip(self.histogram_a, self.histogram_b))]
        return "\n".join(lines) + "\n"


def analyze(a, b, samples: int = DEFAULT_SAMPLES, rng_seed: int = DEFAULT_RNG_SEED) -> AnalysisReport:
    a8, b8 = _same_shape(a, b)
    if a8.dtype != np.uint8 or b8.dtype != np.uint8:
        raise ValueError("analysis expects 8-bit planes")
    npcr, uaci = npcr_uaci(a8, b8)
    hb = histogram(b8)
    return AnalysisReport(
        shape=a.shape,
        entropy_a=entropy(a8),
        entropy_b=entropy(b8),
        correlation_a={d: adjacent_correlation(a8, d, samples, rng_seed) for d in DIRECTIONS},
        correlation_b={d: adjacent_correlation(b8, d, samples, rng_seed) for d in DIRECTIONS},
        npcr=npcr,
        uaci=uaci,
        psnr=psnr(a8, b8),
        ssim=ssim(a8, b8),
        chi_square_b=chi_square_uniformity(hb),
        histogram_a=histogram(a8).tolist(),
        histogram_b=hb.tolist(),
        samples=samples,
        rng_seed=rng_seed,
    )


def histogram_pgm(hist, height: int = 128) -> np.ndarray:
    """Bar chart of a 256-bin histogram as a (height, 256) 8-bit plane, bars white on black."""
    h = np.asarray(hist, dtype=np.float64)
    peak = h.max() or 1.0
    bars = np.rint(h / peak * height).astype(int)
    rows = np.arange(height)[::-1, None]
    return np.where(rows < bars[None, :], 255, 0).astype(np.uint8)
