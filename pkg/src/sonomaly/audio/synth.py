"""Deterministic synthetic clips: desk-scale stand-ins for environmental audio.

Backgrounds are sustained signals below ~1.5 kHz; anomalies live in the
2-6.5 kHz region so they are spectrally distinct from any background. Every
kind is scaled to a common full-window RMS so SNR-targeted mixing keeps the
scaled anomaly comfortably inside [-1, 1] (no clipping at the default grid).
"""

from __future__ import annotations

import numpy as np

from ..config import DEFAULT_SAMPLE_RATE
from ..errors import ParameterError
from .waveform import Waveform

CLIP_KINDS = (
    "tonal_background",
    "noise_background",
    "chirp_anomaly",
    "click_anomaly",
    "tone_burst_anomaly",
)

_TARGET_RMS = 0.03
_PEAK_CAP = 0.9


def synth_clip(
    kind: str,
    duration_s: float,
    seed: int,
    sample_rate: int = DEFAULT_SAMPLE_RATE,
) -> Waveform:
    """Synthesize a deterministic clip of the given kind.

    Identical (kind, duration_s, seed, sample_rate) always produce
    bit-identical samples; peak amplitude stays <= 0.9.
    """
    if duration_s <= 0:
        raise ParameterError(f"duration_s must be positive, got {duration_s}")
    if kind not in CLIP_KINDS:
        raise ParameterError(f"unknown clip kind {kind!r}; expected one of {CLIP_KINDS}")
    rng = np.random.default_rng(seed)
    n = max(1, int(round(duration_s * sample_rate)))
    t = np.arange(n) / sample_rate

    if kind == "tonal_background":
        x = _tonal_background(rng, t)
    elif kind == "noise_background":
        x = _noise_background(rng, n, sample_rate)
    elif kind == "chirp_anomaly":
        x = _chirp(rng, t, duration_s)
    elif kind == "click_anomaly":
        x = _clicks(rng, n, sample_rate)
    else:
        x = _tone_burst(rng, t, n)

    rms = float(np.sqrt(np.mean(x**2)))
    if rms > 0:
        x = x * (_TARGET_RMS / rms)
    peak = float(np.max(np.abs(x)))
    if peak > _PEAK_CAP:
        x = x * (_PEAK_CAP / peak)
    return Waveform(x, sample_rate)


def _tonal_background(rng, t):
    # machine-hum stand-in: detuned low harmonics, slow AM, broadband floor
    f0 = rng.uniform(100.0, 130.0)
    x = np.zeros_like(t)
    for harmonic, amp in ((1.0, 1.0), (2.0, 0.5), (3.0, 0.3)):
        detune = 1.0 + rng.uniform(-0.005, 0.005)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        x += amp * np.sin(2.0 * np.pi * f0 * harmonic * detune * t + phase)
    am_freq = rng.uniform(0.3, 1.5)
    am_phase = rng.uniform(0.0, 2.0 * np.pi)
    x *= 1.0 + 0.25 * np.sin(2.0 * np.pi * am_freq * t + am_phase)
    x += 0.2 * rng.standard_normal(t.size)
    return x


def _noise_background(rng, n, sample_rate):
    # one-pole lowpassed white noise, cutoff randomized per clip
    from scipy.signal import lfilter

    cutoff = rng.uniform(300.0, 800.0)
    a = float(np.exp(-2.0 * np.pi * cutoff / sample_rate))
    white = rng.standard_normal(n)
    return lfilter([1.0 - a], [1.0, -a], white)


def _chirp(rng, t, duration_s):
    f0 = rng.uniform(2000.0, 4000.0)
    f1 = f0 + rng.uniform(1500.0, 2500.0)
    phase = 2.0 * np.pi * (f0 * t + (f1 - f0) / (2.0 * duration_s) * t**2)
    envelope = np.sin(np.pi * np.minimum(t / duration_s, 1.0)) ** 2
    return envelope * np.sin(phase + rng.uniform(0.0, 2.0 * np.pi))


def _clicks(rng, n, sample_rate):
    # sparse damped tone bursts; energy concentrated in well under 20% of samples
    duration_s = n / sample_rate
    n_bursts = max(2, int(round(4.0 * duration_s)))
    burst_len = int(0.035 * sample_rate)
    carrier = rng.uniform(2500.0, 6000.0)
    tau = rng.uniform(0.007, 0.010) * sample_rate
    x = np.zeros(n)
    slots = np.linspace(0, max(1, n - burst_len), n_bursts + 1)[:-1]
    for slot in slots:
        start = int(slot + rng.uniform(0.0, 0.3) * max(1, n / n_bursts - burst_len))
        start = min(start, n - burst_len) if n > burst_len else 0
        k = np.arange(min(burst_len, n - start))
        env = np.exp(-k / tau)
        tone = np.sin(2.0 * np.pi * carrier * k / sample_rate + rng.uniform(0.0, 2.0 * np.pi))
        x[start : start + k.size] += env * (tone + 0.1 * rng.standard_normal(k.size))
    return x


def _tone_burst(rng, t, n):
    freq = rng.uniform(1500.0, 6000.0)
    burst_frac = rng.uniform(0.6, 0.8)
    start_frac = (1.0 - burst_frac) * rng.uniform(0.2, 0.8)
    start = int(start_frac * n)
    length = max(1, int(burst_frac * n))
    envelope = np.zeros(n)
    k = np.arange(min(length, n - start))
    envelope[start : start + k.size] = np.sin(np.pi * k / max(1, length)) ** 2
    return envelope * np.sin(2.0 * np.pi * freq * t + rng.uniform(0.0, 2.0 * np.pi))
