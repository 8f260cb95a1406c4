"""Waveform to log-mel spectrogram transform.

Framing uses fully interior frames (no padding): T = 1 + (len - n_fft) // hop.
Each frame is Hann-windowed (periodic window), the power spectrum is pooled
through a triangular HTK-spaced mel filterbank, and a natural log with a small
additive offset is taken.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..config import (
    DEFAULT_FMAX,
    DEFAULT_FMIN,
    DEFAULT_HOP,
    DEFAULT_LOG_OFFSET,
    DEFAULT_N_FFT,
    DEFAULT_N_MELS,
)
from ..errors import LengthError, ParameterError
from .waveform import Waveform


@dataclass(frozen=True)
class SpectrogramParams:
    n_fft: int = DEFAULT_N_FFT
    hop: int = DEFAULT_HOP
    n_mels: int = DEFAULT_N_MELS
    fmin: float = DEFAULT_FMIN
    fmax: float = DEFAULT_FMAX
    log_offset: float = DEFAULT_LOG_OFFSET

    def validate(self, sample_rate: int) -> None:
        if self.n_fft <= 0 or self.hop <= 0 or self.hop > self.n_fft:
            raise ParameterError("need 0 < hop <= n_fft")
        if not (0 <= self.fmin < self.fmax <= sample_rate / 2):
            raise ParameterError("need 0 <= fmin < fmax <= sample_rate / 2")
        if self.n_mels < 1:
            raise ParameterError("n_mels must be >= 1")
        if self.log_offset <= 0:
            raise ParameterError("log_offset must be positive")

    def to_dict(self) -> dict:
        return {
            "n_fft": self.n_fft,
            "hop": self.hop,
            "n_mels": self.n_mels,
            "fmin": self.fmin,
            "fmax": self.fmax,
            "log_offset": self.log_offset,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SpectrogramParams":
        return cls(**{k: d[k] for k in ("n_fft", "hop", "n_mels", "fmin", "fmax", "log_offset")})


@dataclass(frozen=True)
class Spectrogram:
    """T x F grid of log-mel energies (rows = time frames, cols = mel bands)."""

    values: np.ndarray
    params: SpectrogramParams
    sample_rate: int

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        if values.ndim != 2:
            raise ParameterError("spectrogram values must be a 2-D array")
        if not np.all(np.isfinite(values)):
            raise ParameterError("spectrogram contains non-finite values")

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape  # (T, F)

    def with_values(self, values: np.ndarray) -> "Spectrogram":
        return replace(self, values=values)


def n_frames(n_samples: int, n_fft: int, hop: int) -> int:
    """Closed-form frame count for the interior framing used here."""
    if n_samples < n_fft:
        return 0
    return 1 + (n_samples - n_fft) // hop


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_band_centers(p: SpectrogramParams) -> np.ndarray:
    """Center frequency (Hz) of each triangular mel filter."""
    pts = np.linspace(hz_to_mel(p.fmin), hz_to_mel(p.fmax), p.n_mels + 2)
    return mel_to_hz(pts)[1:-1]


def mel_filterbank(p: SpectrogramParams, sample_rate: int) -> np.ndarray:
    """Triangular HTK-spaced filterbank, shape (n_mels, n_fft//2 + 1)."""
    p.validate(sample_rate)
    bin_hz = np.arange(p.n_fft // 2 + 1) * (sample_rate / p.n_fft)
    mel_pts = np.linspace(hz_to_mel(p.fmin), hz_to_mel(p.fmax), p.n_mels + 2)
    hz_pts = mel_to_hz(mel_pts)
    lo, ctr, hi = hz_pts[:-2, None], hz_pts[1:-1, None], hz_pts[2:, None]
    rise = (bin_hz[None, :] - lo) / np.maximum(ctr - lo, 1e-12)
    fall = (hi - bin_hz[None, :]) / np.maximum(hi - ctr, 1e-12)
    return np.maximum(0.0, np.minimum(rise, fall))


def _hann(n: int) -> np.ndarray:
    # periodic Hann, standard for STFT analysis
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def log_mel_spectrogram(w: Waveform, p: SpectrogramParams | None = None) -> Spectrogram:
    """Transform a waveform into a T x F log-mel spectrogram.

    Raises LengthError if the clip is shorter than one analysis frame.
    """
    p = p or SpectrogramParams()
    p.validate(w.sample_rate)
    x = w.samples
    if x.size < p.n_fft:
        raise LengthError(f"clip of {x.size} samples is shorter than one frame (n_fft={p.n_fft})")
    t = n_frames(x.size, p.n_fft, p.hop)
    idx = np.arange(p.n_fft)[None, :] + p.hop * np.arange(t)[:, None]
    frames = x[idx] * _hann(p.n_fft)[None, :]
    power = np.abs(np.fft.rfft(frames, axis=1)) ** 2
    mel = power @ mel_filterbank(p, w.sample_rate).T
    return Spectrogram(np.log(mel + p.log_offset), p, w.sample_rate)
