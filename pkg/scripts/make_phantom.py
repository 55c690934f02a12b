"""Write synthetic phantom slices as PGM files (input for the CLI examples).

    python scripts/make_phantom.py --size 256 --count 4 --out-dir phantoms/
"""

import argparse
from pathlib import Path

from hcme.dicom import write_pgm
from hcme.phantom import phantom


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--size", type=int, default=256)
    ap.add_argument("--cols", type=int, default=None)
    ap.add_argument("--count", type=int, default=1)
    ap.add_argument("--out-dir", type=Path, default=Path("phantoms"))
    args = ap.parse_args()
    args.out_dir.mkdir(parents=True, exist_ok=True)
    for i in range(args.count):
        path = args.out_dir / f"phantom_{i:02d}.pgm"
        path.write_bytes(write_pgm(phantom(args.size, i, cols=args.cols)))
        print(path)


if __name__ == "__main__":
    main()
