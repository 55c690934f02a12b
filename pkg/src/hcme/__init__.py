"""Hyperchaotic medical-image encryption toolkit."""

from .chaos import CANONICAL, AttractorClass, MapParams, classify, lyapunov_spectrum, orbit
from .envelope import Envelope, read_envelope, write_envelope
from .keys import KeySet, derive_keyset
from .pipeline import ByteImage, decrypt_image, encrypt_image
from .volume import RoiBox, Volume, decrypt_volume, encrypt_volume_partial, encrypt_volume_whole, load_series

__version__ = "0.1.0"

__all__ = [
    "CANONICAL",
    "AttractorClass",
    "ByteImage",
    "Envelope",
    "KeySet",
    "MapParams",
    "RoiBox",
    "Volume",
    "classify",
    "decrypt_image",
    "decrypt_volume",
    "derive_keyset",
    "encrypt_image",
    "encrypt_volume_partial",
    "encrypt_volume_whole",
    "load_series",
    "lyapunov_spectrum",
    "orbit",
    "read_envelope",
    "write_envelope",
]
