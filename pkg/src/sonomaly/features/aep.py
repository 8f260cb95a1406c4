"""AEP1 embedding files: the bridge format between feature extractors.

Layout (little-endian):
    magic "AEP1" | u32 n_levels
    per level: u32 H | u32 W | u32 C | H*W*C float32, row-major (h, w, c fastest)
    u32 CRC32 over all preceding bytes
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

from ..errors import FormatError
from .pyramid import FeatureMapPyramid

MAGIC = b"AEP1"
_MAX_ELEMENTS = 2**31  # guards H*W*C overflow before multiplying by 4 bytes


def export_embeddings(p: FeatureMapPyramid, path: str | Path) -> None:
    """Write a pyramid as an AEP1 file; round-trips bit-exactly."""
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<I", len(p.levels))
    for arr in p.levels:
        h, w, c = arr.shape
        blob += struct.pack("<III", h, w, c)
        blob += np.ascontiguousarray(arr, dtype="<f4").tobytes()
    blob += struct.pack("<I", zlib.crc32(bytes(blob)) & 0xFFFFFFFF)
    Path(path).write_bytes(bytes(blob))


def import_embeddings(path: str | Path) -> FeatureMapPyramid:
    """Read an AEP1 file back into a pyramid.

    The format carries no source (T, F); source_shape defaults to the first
    level's (H, W) and pipeline callers override it with the spectrogram shape
    the pyramid belongs to (see FeatureMapPyramid.with_source_shape).
    """
    path = str(path)
    data = Path(path).read_bytes()
    if len(data) < 4 or data[:4] != MAGIC:
        raise FormatError("bad magic bytes, expected 'AEP1'", path=path, offset=0)
    if len(data) < 8:
        raise FormatError("truncated header", path=path, offset=len(data))

    offset = 4
    (n_levels,) = struct.unpack_from("<I", data, offset)
    offset += 4
    if n_levels == 0:
        raise FormatError("file declares zero levels", path=path, offset=4)

    levels = []
    for i in range(n_levels):
        if offset + 12 > len(data) - 4:
            raise FormatError(
                f"truncated: level {i} header missing (declared {n_levels} levels)",
                path=path,
                offset=offset,
            )
        h, w, c = struct.unpack_from("<III", data, offset)
        offset += 12
        n_elem = int(h) * int(w) * int(c)
        if h == 0 or w == 0 or c == 0 or n_elem > _MAX_ELEMENTS:
            raise FormatError(
                f"level {i} dimensions {h}x{w}x{c} are invalid or overflow",
                path=path,
                offset=offset - 12,
            )
        n_bytes = n_elem * 4
        if offset + n_bytes > len(data) - 4:
            raise FormatError(
                f"truncated: level {i} declares {n_bytes} data bytes past end of file",
                path=path,
                offset=offset,
            )
        arr = np.frombuffer(data, dtype="<f4", count=n_elem, offset=offset).reshape(h, w, c)
        levels.append(arr.astype(np.float32))
        offset += n_bytes

    if offset + 4 != len(data):
        raise FormatError("trailing bytes after declared levels", path=path, offset=offset + 4)
    (stored_crc,) = struct.unpack_from("<I", data, offset)
    actual_crc = zlib.crc32(data[:offset]) & 0xFFFFFFFF
    if stored_crc != actual_crc:
        raise FormatError(
            f"CRC mismatch: stored {stored_crc:#010x}, computed {actual_crc:#010x}",
            path=path,
            offset=offset,
        )

    names = tuple(f"level_{i}" for i in range(n_levels))
    h0, w0 = levels[0].shape[:2]
    return FeatureMapPyramid(tuple(levels), names, (h0, w0))
