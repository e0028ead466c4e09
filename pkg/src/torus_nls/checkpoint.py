"""Binary checkpoint files.

Layout (little-endian)::

    b"TNLS"            4 bytes magic
    version            u32
    M                  u32
    beta_1..beta_3     3 x f64
    p                  f64
    t                  f64
    body               M^3 x (f64 real, f64 imag), row-major over (k1, k2, k3),
                       each axis in DFT index order
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import InvalidInputError
from .spectral import Grid, SpectralField

MAGIC = b"TNLS"
VERSION = 1
_HEADER = struct.Struct("<4sII3ddd")


def save_checkpoint(path, field: SpectralField, betas, p: float, t: float) -> Path:
    path = Path(path)
    M = field.grid.M
    header = _HEADER.pack(MAGIC, VERSION, M, *(float(b) for b in betas), float(p), float(t))
    body = np.ascontiguousarray(field.coeffs, dtype="<c16").tobytes(order="C")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(header + body)
    return path


def load_checkpoint(path, padded_factor: int = 2):
    """Returns ``(field, betas, p, t)``."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise InvalidInputError(f"{path}: truncated header")
    magic, version, M, b1, b2, b3, p, t = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise InvalidInputError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise InvalidInputError(f"{path}: unsupported format version {version}")
    expected = _HEADER.size + 16 * M**3
    if len(raw) != expected:
        raise InvalidInputError(f"{path}: expected {expected} bytes, found {len(raw)}")
    coeffs = np.frombuffer(raw, dtype="<c16", offset=_HEADER.size).reshape(M, M, M)
    field = SpectralField(Grid(M, padded_factor), coeffs.astype(np.complex128))
    return field, (b1, b2, b3), p, t
