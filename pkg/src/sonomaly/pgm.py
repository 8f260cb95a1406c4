"""Binary PGM (P5, maxval 255) export for masks and heatmap previews."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import FormatError


def write_pgm(path: str | Path, image: np.ndarray) -> None:
    """Write a 2-D uint8 array as binary PGM."""
    image = np.asarray(image)
    if image.ndim != 2:
        raise FormatError("PGM images must be 2-D")
    if image.dtype != np.uint8:
        raise FormatError("PGM images must be uint8; scale values first")
    h, w = image.shape
    header = f"P5\n{w} {h}\n255\n".encode("ascii")
    Path(path).write_bytes(header + image.tobytes())


def read_pgm(path: str | Path) -> np.ndarray:
    """Read a binary PGM written by write_pgm."""
    data = Path(path).read_bytes()
    if not data.startswith(b"P5"):
        raise FormatError("not a binary PGM (P5) file", path=str(path), offset=0)
    parts = data.split(b"\n", 3)
    if len(parts) < 4:
        raise FormatError("truncated PGM header", path=str(path), offset=len(data))
    dims = parts[1].split()
    w, h = int(dims[0]), int(dims[1])
    maxval = int(parts[2])
    if maxval != 255:
        raise FormatError(f"unsupported maxval {maxval}", path=str(path))
    pixels = parts[3]
    if len(pixels) < w * h:
        raise FormatError("truncated PGM payload", path=str(path), offset=len(data))
    return np.frombuffer(pixels[: w * h], dtype=np.uint8).reshape(h, w).copy()


def mask_to_pgm(path: str | Path, mask: np.ndarray) -> None:
    """Boolean mask -> PGM with 0 = normal, 255 = anomalous."""
    write_pgm(path, np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8))


def pgm_to_mask(path: str | Path) -> np.ndarray:
    return read_pgm(path) >= 128


def to_byte_image(values: np.ndarray) -> np.ndarray:
    """Min-max scale a float array to 0..255 (constant arrays become 0)."""
    values = np.asarray(values, dtype=np.float64)
    lo, hi = values.min(), values.max()
    if hi > lo:
        scaled = (values - lo) / (hi - lo)
    else:
        scaled = np.zeros_like(values)
    return np.rint(scaled * 255.0).astype(np.uint8)
