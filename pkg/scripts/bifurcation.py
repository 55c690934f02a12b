"""Bifurcation diagram of the map along one parameter.

    python scripts/bifurcation.py --param b2 --range 0 1.3 --out results/bifurcation
"""

import argparse
from pathlib import Path

from hcme.chaos import AttractorClass, bifurcation_sweep, sweep_to_csv
from hcme.cli import bifurcation_image
from hcme.dicom import write_pgm


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--param", default="b2")
    ap.add_argument("--range", type=float, nargs=2, default=(0.0, 1.3), metavar=("LO", "HI"))
    ap.add_argument("--samples", type=int, default=400)
    ap.add_argument("--keep", type=int, default=300)
    ap.add_argument("--height", type=int, default=400)
    ap.add_argument("--out", type=Path, default=Path("results/bifurcation"), help="path prefix for .csv and .pgm")
    args = ap.parse_args()

    cols = bifurcation_sweep(args.param, *args.range, samples=args.samples, keep=args.keep)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.with_suffix(".csv").write_text(sweep_to_csv(cols))
    args.out.with_suffix(".pgm").write_bytes(write_pgm(bifurcation_image(cols, args.height)))
    diverged = [c.value for c in cols if c.attractor is AttractorClass.D]
    print(f"{len(cols)} columns, {len(diverged)} diverged", f"(first at {args.param}={diverged[0]:.4f})" if diverged else "")


if __name__ == "__main__":
    main()
