from .waveform import Waveform, read_wav, write_wav
from .spectrogram import Spectrogram, SpectrogramParams, log_mel_spectrogram, mel_filterbank, n_frames
from .synth import CLIP_KINDS, synth_clip
from .mixing import InjectionRecord, measure_snr_db, mix_at_snr

__all__ = [
    "Waveform",
    "read_wav",
    "write_wav",
    "Spectrogram",
    "SpectrogramParams",
    "log_mel_spectrogram",
    "mel_filterbank",
    "n_frames",
    "CLIP_KINDS",
    "synth_clip",
    "InjectionRecord",
    "measure_snr_db",
    "mix_at_snr",
]
