"""3D quadratic hyperchaotic map: iteration, Lyapunov spectra and parameter sweeps.

The map is

    x' = a1*x + a2*y + a3*y**2
    y' = b1 - b2*z
    z' = c*x

Sequential loops (orbits, Benettin QR) are compiled with numba; the pure-Python
:func:`step` is kept as the reference the compiled kernels are tested against.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numba
import numpy as np

# prefer OpenMP over TBB: older system TBB builds make numba warn on every parallel call
numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

DIVERGENCE_LIMIT = 1e8
DEFAULT_TRANSIENT = 1024
DEFAULT_ZERO_TOL = 1e-3
CHART_SEED = (0.1, 0.2, 0.3)


class ChaoticDivergence(ArithmeticError):
    """An orbit left the ``|component| <= 1e8`` box."""

    def __init__(self, step: int):
        super().__init__(f"orbit diverged at step {step}")
        self.step = step


@dataclass(frozen=True)
class MapParams:
    a1: float = 0.35
    a2: float = 0.25
    a3: float = 0.12
    b1: float = 4.0
    b2: float = 1.15
    c: float = 2.15

    def __post_init__(self):
        for name in ("a1", "a2", "a3", "b1", "b2", "c"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"parameter {name} must be finite")

    def as_tuple(self) -> tuple[float, float, float, float, float, float]:
        return (self.a1, self.a2, self.a3, self.b1, self.b2, self.c)

    def with_(self, **kw) -> "MapParams":
        return replace(self, **kw)


CANONICAL = MapParams()


@dataclass(frozen=True)
class ChaosState:
    x: float
    y: float
    z: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)


def _state(s) -> ChaosState:
    return s if isinstance(s, ChaosState) else ChaosState(*map(float, s))


class AttractorClass(enum.IntEnum):
    """Attractor classes; the integer value is the legend index used in charts."""

    P = 0
    Q = 1
    C = 2
    HC2 = 3
    HC3 = 4
    D = 5


@dataclass(frozen=True)
class LyapunovSpectrum:
    lambda1: float
    lambda2: float
    lambda3: float
    n_iterations: int
    # orbit average of ln|det J|, kept for the exponent-sum identity check
    mean_log_det: float = math.nan

    @property
    def exponents(self) -> tuple[float, float, float]:
        return (self.lambda1, self.lambda2, self.lambda3)

    @property
    def total(self) -> float:
        return self.lambda1 + self.lambda2 + self.lambda3


def step(state: ChaosState, params: MapParams = CANONICAL) -> ChaosState:
    x, y, z = state.x, state.y, state.z
    return ChaosState(
        params.a1 * x + params.a2 * y + params.a3 * y * y,
        params.b1 - params.b2 * z,
        params.c * x,
    )


def jacobian(state: ChaosState, params: MapParams = CANONICAL) -> np.ndarray:
    return np.array(
        [
            [params.a1, params.a2 + 2.0 * params.a3 * state.y, 0.0],
            [0.0, 0.0, -params.b2],
            [params.c, 0.0, 0.0],
        ]
    )


@numba.njit(cache=True, nogil=True)
def _orbit_kernel(x, y, z, a1, a2, a3, b1, b2, c, n, transient, limit):
    out = np.empty((n, 3))
    for k in range(transient + n):
        x, y, z = a1 * x + a2 * y + a3 * y * y, b1 - b2 * z, c * x
        if not (abs(x) <= limit and abs(y) <= limit and abs(z) <= limit):
            return out, k
        if k >= transient:
            i = k - transient
            out[i, 0] = x
            out[i, 1] = y
            out[i, 2] = z
    return out, -1


def orbit(
    seed: ChaosState | Sequence[float],
    params: MapParams = CANONICAL,
    n: int = 1,
    transient: int = 0,
) -> np.ndarray:
    """Iterate from ``seed``; drop ``transient`` states and return the next ``n`` as an (n, 3) array.

    Raises :class:`ChaoticDivergence` with the 0-based step index (counting
    transient steps) at which a component first exceeded 1e8.
    """
    if n <= 0:
        raise ValueError("n must be positive")
    if transient < 0:
        raise ValueError("transient must be non-negative")
    s = _state(seed)
    out, bad = _orbit_kernel(s.x, s.y, s.z, *params.as_tuple(), n, transient, DIVERGENCE_LIMIT)
    if bad >= 0:
        raise ChaoticDivergence(int(bad))
    return out


@numba.njit(cache=True, nogil=True, error_model="numpy")
def _orthogonal_fill(q, w, i):
    """Write into column ``i`` of ``w`` the basis vector least aligned with q[:, :i], orthonormalised."""
    best, b0, b1, b2 = -1.0, 0.0, 0.0, 0.0
    for k in range(3):
        v0 = 1.0 if k == 0 else 0.0
        v1 = 1.0 if k == 1 else 0.0
        v2 = 1.0 if k == 2 else 0.0
        for jj in range(i):
            d = v0 * q[0, jj] + v1 * q[1, jj] + v2 * q[2, jj]
            v0 -= d * q[0, jj]
            v1 -= d * q[1, jj]
            v2 -= d * q[2, jj]
        norm = math.sqrt(v0 * v0 + v1 * v1 + v2 * v2)
        if norm > best:
            best, b0, b1, b2 = norm, v0, v1, v2
    w[0, i], w[1, i], w[2, i] = b0 / best, b1 / best, b2 / best


@numba.njit(cache=True, nogil=True, error_model="numpy")
def _benettin_kernel(x, y, z, a1, a2, a3, b1, b2, c, n, transient, limit):
    sums = np.zeros(3)
    for k in range(transient):
        x, y, z = a1 * x + a2 * y + a3 * y * y, b1 - b2 * z, c * x
        if not (abs(x) <= limit and abs(y) <= limit and abs(z) <= limit):
            return sums, 0.0, False
    q = np.eye(3)
    w = np.empty((3, 3))
    logdet = 0.0
    for _ in range(n):
        j01 = a2 + 2.0 * a3 * y
        # w = J @ q with J = [[a1, j01, 0], [0, 0, -b2], [c, 0, 0]]
        for col in range(3):
            w[0, col] = a1 * q[0, col] + j01 * q[1, col]
            w[1, col] = -b2 * q[2, col]
            w[2, col] = c * q[0, col]
        # modified Gram-Schmidt
        for i in range(3):
            for jj in range(i):
                d = w[0, i] * q[0, jj] + w[1, i] * q[1, jj] + w[2, i] * q[2, jj]
                w[0, i] -= d * q[0, jj]
                w[1, i] -= d * q[1, jj]
                w[2, i] -= d * q[2, jj]
            r = math.sqrt(w[0, i] ** 2 + w[1, i] ** 2 + w[2, i] ** 2)
            if r == 0.0:
                # singular Jacobian (e.g. b2 = 0): this direction collapses, so its
                # exponent is -inf; continue with any unit vector orthogonal to the rest
                sums[i] = -math.inf
                _orthogonal_fill(q, w, i)
                r = 1.0
            else:
                sums[i] += math.log(r)
            q[0, i] = w[0, i] / r
            q[1, i] = w[1, i] / r
            q[2, i] = w[2, i] / r
        det = abs(c * b2 * j01)
        logdet += math.log(det) if det > 0.0 else -math.inf
        x, y, z = a1 * x + a2 * y + a3 * y * y, b1 - b2 * z, c * x
        if not (abs(x) <= limit and abs(y) <= limit and abs(z) <= limit):
            return sums, logdet, False
    return sums / n, logdet / n, True


def lyapunov_spectrum(
    params: MapParams = CANONICAL,
    seed: ChaosState | Sequence[float] = CHART_SEED,
    n: int = 100_000,
    transient: int = DEFAULT_TRANSIENT,
) -> LyapunovSpectrum:
    """Benettin estimate of the three exponents (nats/iteration), sorted descending."""
    s = _state(seed)
    sums, logdet, ok = _benettin_kernel(
        s.x, s.y, s.z, *params.as_tuple(), n, transient, DIVERGENCE_LIMIT
    )
    if not ok:
        raise ChaoticDivergence(-1)
    lam = sorted(sums.tolist(), reverse=True)
    return LyapunovSpectrum(lam[0], lam[1], lam[2], n, logdet)


def classify(
    spectrum: LyapunovSpectrum | Sequence[float],
    zero_tol: float = DEFAULT_ZERO_TOL,
    diverged: bool = False,
) -> AttractorClass:
    """Map a spectrum to its attractor class.

    The class is decided by the number of exponents above ``zero_tol``; with
    none positive, a leading exponent within the tolerance band means a closed
    invariant curve (Q), otherwise a periodic point (P).
    """
    lam = spectrum.exponents if isinstance(spectrum, LyapunovSpectrum) else tuple(spectrum)
    # -inf is a legitimate exponent of a collapsing direction (singular Jacobian)
    if diverged or any(math.isnan(v) or v == math.inf for v in lam):
        return AttractorClass.D
    lam = sorted(lam, reverse=True)
    positive = sum(v > zero_tol for v in lam)
    if positive >= 3:
        return AttractorClass.HC3
    if positive == 2:
        return AttractorClass.HC2
    if positive == 1:
        return AttractorClass.C
    return AttractorClass.Q if abs(lam[0]) <= zero_tol else AttractorClass.P


# ---------------------------------------------------------------- sweeps

_PARAM_NAMES = ("a1", "a2", "a3", "b1", "b2", "c")


@dataclass
class BifurcationColumn:
    value: float
    xs: np.ndarray
    attractor: AttractorClass | None = None  # only set (to D) for divergent points


def bifurcation_sweep(
    axis: str = "b2",
    lo: float = 0.0,
    hi: float = 1.3,
    samples: int = 200,
    keep: int = 200,
    fixed: MapParams = CANONICAL,
    seed: Sequence[float] = CHART_SEED,
    transient: int = DEFAULT_TRANSIENT,
) -> list[BifurcationColumn]:
    if axis not in _PARAM_NAMES:
        raise ValueError(f"unknown parameter {axis!r}")
    if not lo <= hi or samples < 2:
        raise ValueError("need lo <= hi and samples >= 2")
    cols = []
    for v in np.linspace(lo, hi, samples):
        p = fixed.with_(**{axis: float(v)})
        try:
            xs = orbit(seed, p, keep, transient)[:, 0]
            cols.append(BifurcationColumn(float(v), xs))
        except ChaoticDivergence:
            cols.append(BifurcationColumn(float(v), np.empty(0), AttractorClass.D))
    return cols


def sweep_to_csv(cols: Iterable[BifurcationColumn]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["param", "x"])
    for col in cols:
        if col.attractor is AttractorClass.D:
            w.writerow([repr(col.value), "nan"])  # keep divergent points visible
        for x in col.xs:
            w.writerow([repr(col.value), repr(float(x))])
    return buf.getvalue()


@numba.njit(cache=True, nogil=True, parallel=True)
def _chart_kernel(a1s, b2s, a2, a3, b1, c, x0, y0, z0, n, transient, limit):
    rows, cols = a1s.size, b2s.size
    out = np.empty((rows, cols, 3))
    ok = np.empty((rows, cols), dtype=np.bool_)
    for idx in numba.prange(rows * cols):
        i = idx // cols
        j = idx % cols
        sums, _, good = _benettin_kernel(
            x0, y0, z0, a1s[i], a2, a3, b1, b2s[j], c, n, transient, limit
        )
        out[i, j, :] = sums
        ok[i, j] = good
    return out, ok


@dataclass
class LyapunovChart:
    a1: np.ndarray
    b2: np.ndarray
    classes: np.ndarray  # (len(a1), len(b2)) of AttractorClass values
    exponents: np.ndarray  # (len(a1), len(b2), 3), sorted descending

    def at(self, a1: float, b2: float) -> AttractorClass:
        i = int(np.argmin(np.abs(self.a1 - a1)))
        j = int(np.argmin(np.abs(self.b2 - b2)))
        return AttractorClass(int(self.classes[i, j]))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["a1", "b2", "class"])
        for i, a in enumerate(self.a1):
            for j, b in enumerate(self.b2):
                w.writerow([repr(float(a)), repr(float(b)), AttractorClass(int(self.classes[i, j])).name])
        return buf.getvalue()

    def to_pgm(self) -> bytes:
        """Class indices scaled by 42; rows follow a1, columns follow b2."""
        img = (self.classes.astype(np.uint16) * 42).astype(np.uint8)
        h, w = img.shape
        return b"P5\n%d %d\n255\n" % (w, h) + img.tobytes()


def lyapunov_chart(
    a1_range: tuple[float, float] = (-0.5, 0.5),
    b2_range: tuple[float, float] = (0.0, 1.4),
    grid: tuple[int, int] = (41, 29),
    fixed: MapParams = CANONICAL,
    n: int = 10_000,
    transient: int = DEFAULT_TRANSIENT,
    zero_tol: float = DEFAULT_ZERO_TOL,
    seed: Sequence[float] = CHART_SEED,
) -> LyapunovChart:
    """Classify every cell of an a1 x b2 grid (same fixed seed in every cell)."""
    rows, cols = grid
    if rows < 2 or cols < 2:
        raise ValueError("grid must be at least 2x2")
    a1s = np.linspace(*a1_range, rows)
    b2s = np.linspace(*b2_range, cols)
    with np.errstate(all="ignore"):
        sums, ok = _chart_kernel(
            a1s, b2s, fixed.a2, fixed.a3, fixed.b1, fixed.c, *map(float, seed),
            n, transient, DIVERGENCE_LIMIT,
        )
    exps = -np.sort(-sums, axis=2)
    exps[~ok] = np.nan  # divergent cells carry no spectrum
    classes = np.empty((rows, cols), dtype=np.uint8)
    for i in range(rows):
        for j in range(cols):
            classes[i, j] = classify(tuple(exps[i, j]), zero_tol, diverged=not ok[i, j])
    return LyapunovChart(a1s, b2s, classes, exps)
