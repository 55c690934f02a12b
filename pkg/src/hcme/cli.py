"""Command-line front end: ``hcme <subcommand> ...``.

Exit codes: 0 success, 1 usage, 2 I/O or format, 3 authentication rejected,
4 divergence or numeric error.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import chaos, dicom, envelope, keys, metrics
from .captcha import LENGTH, ascii_art, preview_rgb
from .pipeline import captcha_overlay
from .volume import (
    CaptchaMismatch,
    CaptchaRejected,
    DuplicateOrderKey,
    InconsistentSeries,
    RoiBox,
    RoiOutOfBounds,
    Volume,
    cipher_planes,
    decrypt_volume,
    dicom_shell,
    encrypt_volume_partial,
    encrypt_volume_whole,
    load_image,
    load_series,
    write_series,
)

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_AUTH, EXIT_NUMERIC = 0, 1, 2, 3, 4
KEY_ENV = "HCME_KEY"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


@dataclass
class CliConfig:
    """Parsed invocation, independent of argparse."""

    command: str
    options: dict = field(default_factory=dict)

    def __getattr__(self, name):
        try:
            return self.options[name]
        except KeyError:
            raise AttributeError(name) from None


def atomic_write(path: str | os.PathLike, data: bytes) -> None:
    p = Path(path)
    tmp = p.with_name(f".{p.name}.tmp-{os.getpid()}")
    try:
        tmp.write_bytes(data)
        os.replace(tmp, p)
    finally:
        if tmp.exists():
            tmp.unlink()


def _range(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo,hi but got {text!r}") from None
    return lo, hi


def _grid(text: str) -> tuple[int, int]:
    try:
        a, b = (int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected rows,cols but got {text!r}") from None
    return a, b


def _roi(text: str) -> RoiBox:
    try:
        return RoiBox.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _add_key(p: argparse.ArgumentParser) -> None:
    p.add_argument("--key", help=f"master key, 64 hex chars (prefer the {KEY_ENV} environment variable)")


def _add_captcha_answer(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--captcha-answer",
        action="append",
        metavar="TEXT",
        help="INSECURE, for automated tests only: answer instead of prompting (repeat for retries)",
    )
    p.add_argument("--captcha-preview", metavar="PPM", help="also write the colour captcha preview here")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hcme", description="Hyperchaotic medical-image encryption toolkit")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    enc = sub.add_parser("encrypt", help="encrypt one DICOM or PGM image")
    enc.add_argument("--in", dest="input", required=True)
    enc.add_argument("--out", required=True)
    _add_key(enc)
    enc.add_argument("--salt", help="16-byte salt as 32 hex chars (random by default)")
    enc.add_argument("--no-captcha", action="store_true")
    enc.add_argument("--dicom-shell", metavar="DCM", help="also write slice 0 ciphertext as a viewable DICOM")

    dec = sub.add_parser("decrypt", help="decrypt an HCME envelope holding one image")
    dec.add_argument("--in", dest="input", required=True)
    dec.add_argument("--out", required=True)
    _add_key(dec)
    _add_captcha_answer(dec)

    vol = sub.add_parser("volume", help="whole or partial-ROI encryption of a DICOM series")
    vsub = vol.add_subparsers(dest="volume_command", required=True, parser_class=_Parser)
    venc = vsub.add_parser("encrypt")
    venc.add_argument("--dir", required=True, help="directory of .dcm files")
    venc.add_argument("--out", required=True)
    venc.add_argument("--roi", type=_roi, help="z0,z1,y0,y1,x0,x1 (half-open voxel box)")
    _add_key(venc)
    venc.add_argument("--salt")
    venc.add_argument("--no-captcha", action="store_true")
    venc.add_argument("--jobs", type=int, default=None, help="worker threads (default: logical CPUs)")
    vdec = vsub.add_parser("decrypt")
    vdec.add_argument("--in", dest="input", required=True)
    vdec.add_argument("--out", required=True, help="output directory")
    _add_key(vdec)
    _add_captcha_answer(vdec)
    vdec.add_argument("--jobs", type=int, default=None)

    ana = sub.add_parser("analyze", help="security metrics of plaintext A against ciphertext B")
    ana.add_argument("--a", required=True, help="plaintext PGM/DICOM")
    ana.add_argument("--b", required=True, help="ciphertext PGM/DICOM/HCME")
    ana.add_argument("--report", required=True, help="JSON report path")
    ana.add_argument("--csv", metavar="PREFIX", help="write PREFIX_scalars.csv and PREFIX_histogram.csv")
    ana.add_argument("--histogram-pgm", metavar="PGM", help="bar chart of B's histogram")
    ana.add_argument("--samples", type=int, default=metrics.DEFAULT_SAMPLES)
    ana.add_argument("--rng-seed", type=int, default=metrics.DEFAULT_RNG_SEED)

    ch = sub.add_parser("chart", help="bifurcation sweep or Lyapunov classification chart")
    ch.add_argument("--mode", choices=("bifurcation", "lyapunov"), required=True)
    ch.add_argument("--out", required=True, help=".csv or .pgm")
    ch.add_argument("--param", default="b2", help="swept parameter (bifurcation)")
    ch.add_argument("--range", dest="prange", type=_range, default=(0.0, 1.3), help="lo,hi (bifurcation)")
    ch.add_argument("--samples", type=int, default=200)
    ch.add_argument("--keep", type=int, default=200)
    ch.add_argument("--a1-range", type=_range, default=(-0.5, 0.5))
    ch.add_argument("--b2-range", type=_range, default=(0.0, 1.4))
    ch.add_argument("--grid", type=_grid, default=(41, 29), help="a1 rows,b2 cols (lyapunov)")
    ch.add_argument("--iterations", type=int, default=10_000)
    ch.add_argument("--zero-tol", type=float, default=chaos.DEFAULT_ZERO_TOL)

    cap = sub.add_parser("captcha", help="captcha utilities")
    csub = cap.add_subparsers(dest="captcha_command", required=True, parser_class=_Parser)
    prev = csub.add_parser("preview")
    _add_key(prev)
    prev.add_argument("--salt", required=True)
    prev.add_argument("--out", required=True, help=".ppm")
    prev.add_argument("--size", type=int, default=256)
    return parser


def parse_config(argv: Sequence[str] | None) -> CliConfig:
    ns = build_parser().parse_args(argv)
    opts = vars(ns).copy()
    command = opts.pop("command")
    return CliConfig(command, opts)


# ---------------------------------------------------------------- helpers


def _key(cfg: CliConfig) -> bytes:
    text = cfg.options.get("key") or os.environ.get(KEY_ENV)
    if not text:
        raise UsageError(f"a master key is required (--key or {KEY_ENV})")
    return keys.parse_hex_key(text)


def _salt(cfg: CliConfig) -> bytes | None:
    text = cfg.options.get("salt")
    if text is None:
        return None
    try:
        return keys.check_salt(bytes.fromhex(text))
    except ValueError as exc:
        raise UsageError("salt must be 32 hex characters") from exc


def _answers(cfg: CliConfig):
    given = cfg.options.get("captcha_answer")
    if given:
        return list(given)

    def prompt(challenge, attempt):
        print(ascii_art(challenge), file=sys.stderr)
        print(f"captcha attempt {attempt}, type the {LENGTH} characters: ", end="", file=sys.stderr, flush=True)
        line = sys.stdin.readline()
        return line.rstrip("\r\n")

    return prompt


def _maybe_preview(cfg: CliConfig, env: envelope.Envelope, key: bytes) -> None:
    out = cfg.options.get("captcha_preview")
    if out and env.has_captcha:
        challenge, _ = captcha_overlay(key, env.salt, env.padded)
        atomic_write(out, dicom.write_ppm(preview_rgb(challenge)))


def _plane(path: str) -> np.ndarray:
    """First 8-bit plane of a PGM, DICOM or HCME file (HCME: stored ciphertext cropped to the image)."""
    data = Path(path).read_bytes()
    if data.startswith(envelope.MAGIC):
        env = envelope.read_envelope(data)
        plane = cipher_planes(env)[0]
        if env.partial:
            return plane
        return np.ascontiguousarray(plane[: env.rows, : env.cols * (env.bits_allocated // 8)])
    vol = load_image(path)
    s = vol.slices[0]
    if s.dtype != np.uint8:
        raise UsageError("analysis needs 8-bit images")
    return s


# ---------------------------------------------------------------- commands


def cmd_encrypt(cfg: CliConfig) -> int:
    key, salt = _key(cfg), _salt(cfg)
    vol = load_image(cfg.input)
    env = encrypt_volume_whole(vol, key, salt, captcha=not cfg.no_captcha)
    atomic_write(cfg.out, envelope.write_envelope(env))
    if cfg.dicom_shell:
        atomic_write(cfg.dicom_shell, dicom_shell(env))
    return EXIT_OK


def _decrypt_env(cfg: CliConfig, key: bytes) -> Volume:
    env = envelope.read_envelope(Path(cfg.input).read_bytes())
    _maybe_preview(cfg, env, key)
    return decrypt_volume(env, key, _answers(cfg), jobs=cfg.options.get("jobs"))


def cmd_decrypt(cfg: CliConfig) -> int:
    key = _key(cfg)
    vol = _decrypt_env(cfg, key)
    if vol.sources:
        if len(vol.sources) != 1:
            raise UsageError("envelope holds a series; use 'volume decrypt'")
        data = vol.sources[0].to_bytes()
    else:
        if len(vol.slices) != 1:
            raise UsageError("envelope holds several slices; use 'volume decrypt'")
        data = dicom.write_pgm(vol.slices[0])
    atomic_write(cfg.out, data)
    return EXIT_OK


def cmd_volume(cfg: CliConfig) -> int:
    key = _key(cfg)
    if cfg.volume_command == "encrypt":
        files = sorted(Path(cfg.dir).glob("*.dcm"))
        if not files:
            raise FileNotFoundError(f"no .dcm files in {cfg.dir}")
        vol = load_series(files)
        captcha = not cfg.no_captcha
        if cfg.roi is not None:
            env = encrypt_volume_partial(vol, cfg.roi, key, _salt(cfg), captcha, jobs=cfg.jobs)
        else:
            env = encrypt_volume_whole(vol, key, _salt(cfg), captcha, jobs=cfg.jobs)
        atomic_write(cfg.out, envelope.write_envelope(env))
        return EXIT_OK
    vol = _decrypt_env(cfg, key)
    write_series(vol, cfg.out)
    return EXIT_OK


def cmd_analyze(cfg: CliConfig) -> int:
    a, b = _plane(cfg.a), _plane(cfg.b)
    if a.shape != b.shape:
        raise UsageError(f"image shapes differ: {a.shape} vs {b.shape}")
    report = metrics.analyze(a, b, cfg.samples, cfg.rng_seed)
    atomic_write(cfg.report, report.to_json().encode())
    if cfg.csv:
        atomic_write(f"{cfg.csv}_scalars.csv", report.scalars_csv().encode())
        atomic_write(f"{cfg.csv}_histogram.csv", report.histogram_csv().encode())
    if cfg.histogram_pgm:
        atomic_write(cfg.histogram_pgm, dicom.write_pgm(metrics.histogram_pgm(report.histogram_b)))
    return EXIT_OK


def cmd_chart(cfg: CliConfig) -> int:
    as_pgm = cfg.out.lower().endswith(".pgm")
    if cfg.mode == "lyapunov":
        chart = chaos.lyapunov_chart(cfg.a1_range, cfg.b2_range, cfg.grid, n=cfg.iterations, zero_tol=cfg.zero_tol)
        data = chart.to_pgm() if as_pgm else chart.to_csv().encode()
    else:
        cols = chaos.bifurcation_sweep(cfg.param, *cfg.prange, samples=cfg.samples, keep=cfg.keep)
        if as_pgm:
            data = dicom.write_pgm(bifurcation_image(cols))
        else:
            data = chaos.sweep_to_csv(cols).encode()
    atomic_write(cfg.out, data)
    return EXIT_OK


def bifurcation_image(cols, height: int = 256) -> np.ndarray:
    """Plot columns as white dots on black; x-range taken from the finite samples."""
    img = np.zeros((height, len(cols)), dtype=np.uint8)
    finite = [c.xs[np.isfinite(c.xs)] for c in cols]
    allx = np.concatenate([f for f in finite if f.size] or [np.zeros(1)])
    lo, hi = float(allx.min()), float(allx.max())
    span = hi - lo or 1.0
    for j, xs in enumerate(finite):
        rows = np.rint((hi - xs) / span * (height - 1)).astype(int)
        img[rows, j] = 255
    return img


def cmd_captcha(cfg: CliConfig) -> int:
    key, salt = _key(cfg), _salt(cfg)
    challenge, _ = captcha_overlay(key, salt, cfg.size)
    atomic_write(cfg.out, dicom.write_ppm(preview_rgb(challenge)))
    return EXIT_OK


COMMANDS = {
    "encrypt": cmd_encrypt,
    "decrypt": cmd_decrypt,
    "volume": cmd_volume,
    "analyze": cmd_analyze,
    "chart": cmd_chart,
    "captcha": cmd_captcha,
}

_IO_ERRORS = (
    OSError,
    dicom.DicomError,
    dicom.MalformedHeader,
    dicom.UnsupportedMaxval,
    envelope.EnvelopeError,
    InconsistentSeries,
    DuplicateOrderKey,
)


def run(argv: Sequence[str] | None = None) -> int:
    try:
        cfg = parse_config(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        return COMMANDS[cfg.command](cfg)
    except (CaptchaRejected, CaptchaMismatch) as exc:
        code, msg = EXIT_AUTH, exc
    except (chaos.ChaoticDivergence, ArithmeticError, FloatingPointError) as exc:
        code, msg = EXIT_NUMERIC, exc
    except (UsageError, keys.InvalidKeyLength, keys.InvalidSaltLength, RoiOutOfBounds) as exc:
        code, msg = EXIT_USAGE, exc
    except _IO_ERRORS as exc:
        code, msg = EXIT_IO, exc
    except ValueError as exc:
        code, msg = EXIT_IO, exc
    print(f"hcme: error: {msg}", file=sys.stderr)
    return code


def main() -> None:
    sys.exit(run())
