"""Security metrics for encrypted phantom slices, printed as a table and saved as JSON.

Encrypts ``--slices`` synthetic slices with a fixed key, then reports entropy,
adjacent-pixel correlation, PSNR/SSIM against the plaintext, the mean
NPCR/UACI of single-pixel plaintext changes and the NPCR of a one-bit key
change.

    python scripts/security_tables.py --size 256 --slices 4 --out results/security.json
"""

import argparse
import json
from pathlib import Path

import numpy as np

from hcme.keys import derive_keyset, keystream_bytes
from hcme.metrics import analyze, chi_square_uniformity, histogram, npcr_uaci
from hcme.phantom import phantom
from hcme.pipeline import encrypt_image
from hcme.volume import Volume, cipher_planes, encrypt_volume_whole

KEY = bytes(range(32))
SALT = bytes.fromhex("00112233445566778899aabbccddeeff")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--size", type=int, default=256)
    ap.add_argument("--slices", type=int, default=4)
    ap.add_argument("--trials", type=int, default=10, help="single-pixel differential trials")
    ap.add_argument("--seed", type=int, default=20240607)
    ap.add_argument("--out", type=Path, default=None)
    args = ap.parse_args()

    plain = [phantom(args.size, i) for i in range(args.slices)]
    cipher = cipher_planes(encrypt_volume_whole(Volume(plain), KEY, SALT, captcha=False))
    reports = [analyze(p, c[: args.size, : args.size], rng_seed=args.seed) for p, c in zip(plain, cipher)]

    print(f"{'slice':>5} {'H(c)':>7} {'r_h':>7} {'r_v':>7} {'r_d':>7} {'PSNR':>6} {'SSIM':>7}")
    for i, r in enumerate(reports):
        cb = r.correlation_b
        print(f"{i:5d} {r.entropy_b:7.4f} {cb['horizontal']:7.4f} {cb['vertical']:7.4f} {cb['diagonal']:7.4f} {r.psnr:6.2f} {r.ssim:7.4f}")

    rng = np.random.default_rng(args.seed)
    keys = derive_keyset(KEY, SALT)
    diffs = []
    for t in range(args.trials):
        img = plain[t % len(plain)]
        alt = img.copy()
        i, j = rng.integers(0, args.size, 2)
        alt[i, j] ^= 1
        diffs.append(npcr_uaci(encrypt_image(img, keys).data, encrypt_image(alt, keys).data))
    npcr, uaci = np.mean(diffs, axis=0)
    key_npcr, _ = npcr_uaci(
        encrypt_image(plain[0], keys).data,
        encrypt_image(plain[0], derive_keyset(bytes([KEY[0] ^ 1]) + KEY[1:], SALT)).data,
    )
    chi = chi_square_uniformity(histogram(keystream_bytes(keys.seed_z, 65536)))
    print(f"single-pixel NPCR {npcr:.3f}  UACI {uaci:.3f}  ({args.trials} trials)")
    print(f"one-bit key NPCR {key_npcr:.3f}")
    print(f"keystream chi-square (65536 bytes) {chi:.2f}")

    if args.out:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        summary = {
            "slices": [r.to_dict() for r in reports],
            "npcr": float(npcr),
            "uaci": float(uaci),
            "key_npcr": key_npcr,
            "keystream_chi_square": chi,
        }
        args.out.write_text(json.dumps(summary, indent=2))


if __name__ == "__main__":
    main()
