"""Binary raster ("TFIM") and validity-mask ("TFMK") file formats.

Both formats are little endian and bit-exact across platforms:

  TFIM: magic "TFIM", u32 version = 1, u32 width, u32 height, u32 channels,
        then width * height * channels IEEE-754 binary32 values, row major,
        channel interleaved.
  TFMK: magic "TFMK", u32 width, u32 height, then the row-major boolean mask
        packed 8 pixels per byte, most significant bit first, zero padded at
        the end.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import BadMagic, DimensionMismatch, TruncatedFile, VersionMismatch

RASTER_MAGIC = b"TFIM"
MASK_MAGIC = b"TFMK"
RASTER_VERSION = 1

_RASTER_HEADER = struct.Struct("<4sIIII")
_MASK_HEADER = struct.Struct("<4sII")


def write_raster(path, data: np.ndarray) -> None:
    """Write a (H, W) or (H, W, C) float raster as a TFIM file."""
    arr = np.asarray(data)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3:
        raise DimensionMismatch(f"raster must be 2-D or 3-D, got shape {arr.shape}")
    h, w, c = arr.shape
    payload = np.ascontiguousarray(arr, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(_RASTER_HEADER.pack(RASTER_MAGIC, RASTER_VERSION, w, h, c))
        fh.write(payload)


def read_raster(path) -> np.ndarray:
    """Read a TFIM file; returns a (H, W, C) float32 array."""
    blob = Path(path).read_bytes()
    if len(blob) < _RASTER_HEADER.size:
        raise TruncatedFile(f"{path}: shorter than the TFIM header")
    magic, version, w, h, c = _RASTER_HEADER.unpack_from(blob)
    if magic != RASTER_MAGIC:
        raise BadMagic(f"{path}: bad magic {magic!r}")
    if version != RASTER_VERSION:
        raise VersionMismatch(f"{path}: unsupported TFIM version {version}")
    expected = _RASTER_HEADER.size + 4 * w * h * c
    if len(blob) < expected:
        raise TruncatedFile(f"{path}: expected {expected} bytes, got {len(blob)}")
    flat = np.frombuffer(blob, dtype="<f4", count=w * h * c, offset=_RASTER_HEADER.size)
    return flat.reshape(h, w, c).copy()


def write_mask(path, mask: np.ndarray) -> None:
    """Write a (H, W) boolean validity mask as a TFMK file."""
    m = np.asarray(mask, dtype=bool)
    if m.ndim != 2:
        raise DimensionMismatch(f"mask must be 2-D, got shape {m.shape}")
    h, w = m.shape
    with open(path, "wb") as fh:
        fh.write(_MASK_HEADER.pack(MASK_MAGIC, w, h))
        fh.write(np.packbits(m.ravel(order="C")).tobytes())


def read_mask(path) -> np.ndarray:
    """Read a TFMK file; returns a (H, W) boolean array."""
    blob = Path(path).read_bytes()
    if len(blob) < _MASK_HEADER.size:
        raise TruncatedFile(f"{path}: shorter than the TFMK header")
    magic, w, h = _MASK_HEADER.unpack_from(blob)
    if magic != MASK_MAGIC:
        raise BadMagic(f"{path}: bad magic {magic!r}")
    n_bytes = (w * h + 7) // 8
    if len(blob) < _MASK_HEADER.size + n_bytes:
        raise TruncatedFile(f"{path}: mask payload truncated")
    bits = np.unpackbits(
        np.frombuffer(blob, dtype=np.uint8, count=n_bytes, offset=_MASK_HEADER.size)
    )
    return bits[: w * h].astype(bool).reshape(h, w)
