"""Mono waveforms and PCM16 WAV I/O."""

from __future__ import annotations

import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import FormatError, ParameterError

_RANGE_TOL = 1e-9  # tolerate float dust just past +/-1


@dataclass(frozen=True)
class Waveform:
    """Mono PCM signal: float amplitudes in [-1, 1] at a fixed sample rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        object.__setattr__(self, "samples", samples)
        if samples.ndim != 1 or samples.size == 0:
            raise ParameterError("waveform must be a non-empty 1-D sample array")
        if not np.all(np.isfinite(samples)):
            raise ParameterError("waveform contains non-finite samples")
        if np.max(np.abs(samples)) > 1.0 + _RANGE_TOL:
            raise ParameterError("waveform amplitudes must lie in [-1, 1]")
        if not isinstance(self.sample_rate, (int, np.integer)) or self.sample_rate <= 0:
            raise ParameterError("sample_rate must be a positive integer")
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self) -> int:
        return int(self.samples.size)

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate


def write_wav(path: str | Path, w: Waveform) -> None:
    """Write a waveform as mono PCM16 WAV (deterministic quantization)."""
    pcm = np.clip(np.rint(w.samples * 32767.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(w.sample_rate)
        fh.writeframes(pcm.tobytes())


def read_wav(path: str | Path) -> Waveform:
    """Read a mono PCM16 WAV file into a float waveform in [-1, 1]."""
    path = str(path)
    try:
        with wave.open(path, "rb") as fh:
            if fh.getnchannels() != 1:
                raise FormatError("only mono WAV files are supported", path=path)
            if fh.getsampwidth() != 2:
                raise FormatError("only PCM16 WAV files are supported", path=path)
            n = fh.getnframes()
            raw = fh.readframes(n)
            rate = fh.getframerate()
    except wave.Error as exc:
        raise FormatError(f"not a valid WAV file: {exc}", path=path) from exc
    if n == 0:
        raise FormatError("WAV file contains no frames", path=path)
    pcm = np.frombuffer(raw, dtype="<i2")
    return Waveform(pcm.astype(np.float64) / 32768.0, rate)
