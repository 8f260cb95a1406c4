"""AVDM model files: one fitted detector per file.

Layout (little-endian):
    magic "AVDM" | u8 detector id | detector payload | u32 CRC32 of all
    preceding bytes. Numeric payload data is float32 / u32 only.

Detector ids: 1 = padim, 2 = patchcore, 3 = stfpm. Every payload embeds the
extractor spec so `score` can rebuild the full pipeline from the model file.
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

from ..errors import FormatError
from ..features.convnet import ConvStack
from ..features.extractor import ExtractorSpec
from .padim import GaussianField
from .patchcore import MemoryBank
from .stfpm import StfpmConfig, StudentModel

MAGIC = b"AVDM"
DETECTOR_IDS = {"padim": 1, "patchcore": 2, "stfpm": 3}
_ID_TO_NAME = {v: k for k, v in DETECTOR_IDS.items()}
_KIND_CODES = {"reference": 0, "imported": 1}
_CODE_KINDS = {v: k for k, v in _KIND_CODES.items()}


class _Writer:
    def __init__(self):
        self.buf = bytearray()

    def u8(self, v):
        self.buf += struct.pack("<B", v)

    def u32(self, v):
        self.buf += struct.pack("<I", v)

    def u64(self, v):
        self.buf += struct.pack("<Q", v & 0xFFFFFFFFFFFFFFFF)

    def f32(self, v):
        self.buf += struct.pack("<f", v)

    def f32_array(self, arr):
        self.buf += np.ascontiguousarray(arr, dtype="<f4").tobytes()

    def u32_array(self, arr):
        self.buf += np.ascontiguousarray(arr, dtype="<u4").tobytes()

    def string(self, s: str):
        raw = s.encode("ascii")
        self.u8(len(raw))
        self.buf += raw


class _Reader:
    def __init__(self, data: bytes, path: str):
        self.data = data
        self.path = path
        self.offset = 0

    def _take(self, fmt: str):
        size = struct.calcsize(fmt)
        if self.offset + size > len(self.data):
            raise FormatError("truncated model file", path=self.path, offset=self.offset)
        vals = struct.unpack_from(fmt, self.data, self.offset)
        self.offset += size
        return vals[0] if len(vals) == 1 else vals

    def u8(self):
        return self._take("<B")

    def u32(self):
        return self._take("<I")

    def u64(self):
        return self._take("<Q")

    def f32(self):
        return self._take("<f")

    def f32_array(self, count, shape):
        n_bytes = count * 4
        if self.offset + n_bytes > len(self.data):
            raise FormatError("truncated model payload", path=self.path, offset=self.offset)
        arr = np.frombuffer(self.data, dtype="<f4", count=count, offset=self.offset)
        self.offset += n_bytes
        return arr.reshape(shape).astype(np.float64)

    def u32_array(self, count):
        n_bytes = count * 4
        if self.offset + n_bytes > len(self.data):
            raise FormatError("truncated model payload", path=self.path, offset=self.offset)
        arr = np.frombuffer(self.data, dtype="<u4", count=count, offset=self.offset)
        self.offset += n_bytes
        return arr.astype(np.int64)

    def string(self) -> str:
        n = self.u8()
        if self.offset + n > len(self.data):
            raise FormatError("truncated string", path=self.path, offset=self.offset)
        s = self.data[self.offset : self.offset + n].decode("ascii")
        self.offset += n
        return s


def _write_extractor(w: _Writer, spec: ExtractorSpec):
    w.u8(_KIND_CODES[spec.kind])
    w.u64(spec.seed)
    w.u8(len(spec.channels_per_block))
    for c in spec.channels_per_block:
        w.u32(c)
    w.u8(len(spec.selected_levels))
    for name in spec.selected_levels:
        w.string(name)


def _read_extractor(r: _Reader) -> ExtractorSpec:
    kind_code = r.u8()
    if kind_code not in _CODE_KINDS:
        raise FormatError(f"unknown extractor kind code {kind_code}", path=r.path, offset=r.offset - 1)
    seed = r.u64()
    n_blocks = r.u8()
    channels = tuple(r.u32() for _ in range(n_blocks))
    n_sel = r.u8()
    selected = tuple(r.string() for _ in range(n_sel))
    return ExtractorSpec(kind=_CODE_KINDS[kind_code], seed=seed, channels_per_block=channels, selected_levels=selected)


def save_model(path: str | Path, detector: str, model, extractor: ExtractorSpec) -> None:
    """Serialize a fitted detector (plus its extractor spec) to one file."""
    if detector not in DETECTOR_IDS:
        raise FormatError(f"unknown detector {detector!r}")
    w = _Writer()
    w.buf += MAGIC
    w.u8(DETECTOR_IDS[detector])
    _write_extractor(w, extractor)
    if detector == "padim":
        _write_padim(w, model)
    elif detector == "patchcore":
        _write_patchcore(w, model)
    else:
        _write_stfpm(w, model)
    w.u32(zlib.crc32(bytes(w.buf)) & 0xFFFFFFFF)
    Path(path).write_bytes(bytes(w.buf))


def load_model(path: str | Path):
    """Read an AVDM file -> (detector name, model, extractor spec)."""
    path = str(path)
    data = Path(path).read_bytes()
    if len(data) < 4 or data[:4] != MAGIC:
        raise FormatError("bad magic bytes, expected 'AVDM'", path=path, offset=0)
    if len(data) < 9:
        raise FormatError("file too short", path=path, offset=len(data))
    stored_crc = struct.unpack_from("<I", data, len(data) - 4)[0]
    actual_crc = zlib.crc32(data[:-4]) & 0xFFFFFFFF
    if stored_crc != actual_crc:
        raise FormatError(
            f"CRC mismatch: stored {stored_crc:#010x}, computed {actual_crc:#010x}",
            path=path,
            offset=len(data) - 4,
        )
    r = _Reader(data[:-4], path)
    r.offset = 4
    det_id = r.u8()
    if det_id not in _ID_TO_NAME:
        raise FormatError(f"unknown detector id {det_id}", path=path, offset=4)
    name = _ID_TO_NAME[det_id]
    extractor = _read_extractor(r)
    if name == "padim":
        model = _read_padim(r)
    elif name == "patchcore":
        model = _read_patchcore(r)
    else:
        model = _read_stfpm(r, extractor)
    if r.offset != len(r.data):
        raise FormatError("trailing bytes after payload", path=path, offset=r.offset)
    return name, model, extractor


def model_crc(path: str | Path) -> int:
    """The stored CRC32 of a model file (used for determinism checks)."""
    data = Path(path).read_bytes()
    if len(data) < 4:
        raise FormatError("file too short", path=str(path), offset=0)
    return struct.unpack_from("<I", data, len(data) - 4)[0]


def _write_padim(w: _Writer, field: GaussianField):
    h, wd, c = field.shape
    w.u32(h)
    w.u32(wd)
    w.u32(c)
    w.f32(field.epsilon)
    w.f32_array(field.mean)
    w.f32_array(field.precision)


def _read_padim(r: _Reader) -> GaussianField:
    h, wd, c = r.u32(), r.u32(), r.u32()
    eps = r.f32()
    mean = r.f32_array(h * wd * c, (h, wd, c))
    precision = r.f32_array(h * wd * c * c, (h, wd, c, c))
    return GaussianField(mean, precision, eps)


def _write_patchcore(w: _Writer, bank: MemoryBank):
    n, c = bank.coreset.shape
    w.u32(n)
    w.u32(c)
    w.f32(bank.coreset_fraction)
    w.u32(bank.source_count)
    w.u32_array(bank.selected_indices)
    w.f32_array(bank.coreset)


def _read_patchcore(r: _Reader) -> MemoryBank:
    n, c = r.u32(), r.u32()
    fraction = r.f32()
    source_count = r.u32()
    indices = r.u32_array(n)
    coreset = r.f32_array(n * c, (n, c))
    return MemoryBank(coreset, fraction, source_count, indices)


def _write_stfpm(w: _Writer, model: StudentModel):
    cfg = model.cfg
    w.u32(cfg.steps)
    w.f32(cfg.lr)
    w.f32(cfg.momentum)
    w.u32(cfg.batch_size)
    w.u64(cfg.seed)
    w.u8(model.stack.n_blocks)
    for weight, bias in zip(model.stack.weights, model.stack.biases):
        _, _, c_in, c_out = weight.shape
        w.u32(c_in)
        w.u32(c_out)
        w.f32_array(weight)
        w.f32_array(bias)


def _read_stfpm(r: _Reader, extractor: ExtractorSpec) -> StudentModel:
    cfg = StfpmConfig(steps=r.u32(), lr=r.f32(), momentum=r.f32(), batch_size=r.u32(), seed=r.u64())
    n_blocks = r.u8()
    weights, biases = [], []
    for _ in range(n_blocks):
        c_in, c_out = r.u32(), r.u32()
        weights.append(r.f32_array(9 * c_in * c_out, (3, 3, c_in, c_out)))
        biases.append(r.f32_array(c_out, (c_out,)))
    return StudentModel(ConvStack(weights, biases), extractor, cfg)
