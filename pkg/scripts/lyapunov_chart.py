"""Classify an a1 x b2 grid and report the portrait points.

Writes the chart as CSV and PGM and prints the measured class and exponents at
each reference point next to the class it is expected to have.

    python scripts/lyapunov_chart.py --out-dir results/
"""

import argparse
from pathlib import Path

from hcme.chaos import AttractorClass, MapParams, classify, lyapunov_chart, lyapunov_spectrum

REFERENCE = [
    (0.35, 1.15, AttractorClass.HC3),
    (0.25, 0.75, AttractorClass.HC2),
    (-0.25, 0.75, AttractorClass.Q),
    (-0.2, 0.512, AttractorClass.P),
]


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out-dir", type=Path, default=Path("results"))
    ap.add_argument("--grid", type=int, nargs=2, default=(41, 29), metavar=("A1", "B2"))
    ap.add_argument("--iterations", type=int, default=10_000, help="Benettin steps per chart cell")
    ap.add_argument("--point-iterations", type=int, default=100_000)
    ap.add_argument("--zero-tol", type=float, default=1e-3)
    args = ap.parse_args()

    args.out_dir.mkdir(parents=True, exist_ok=True)
    chart = lyapunov_chart(grid=tuple(args.grid), n=args.iterations, zero_tol=args.zero_tol)
    (args.out_dir / "lyapunov_chart.csv").write_text(chart.to_csv())
    (args.out_dir / "lyapunov_chart.pgm").write_bytes(chart.to_pgm())

    print(f"{'a1':>6} {'b2':>6}  {'expected':>8} {'measured':>8}  exponents")
    for a1, b2, want in REFERENCE:
        s = lyapunov_spectrum(MapParams(a1=a1, b2=b2), n=args.point_iterations)
        got = classify(s, args.zero_tol)
        lam = " ".join(f"{v:+.4f}" for v in s.exponents)
        print(f"{a1:6.3f} {b2:6.3f}  {want.name:>8} {got.name:>8}  {lam}  sum-ln|det|={s.total - s.mean_log_det:+.1e}")
    counts = {c.name: int((chart.classes == c).sum()) for c in AttractorClass}
    print("chart cells per class:", counts)


if __name__ == "__main__":
    main()
