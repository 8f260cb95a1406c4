"""Shared defaults for the whole pipeline.

Common machine-listening settings; every value can be overridden through
the CLI flags, the service schemas, or the experiment configuration.
"""

from __future__ import annotations

DEFAULT_SAMPLE_RATE = 16_000
DEFAULT_N_FFT = 1024
DEFAULT_HOP = 512
DEFAULT_N_MELS = 64
DEFAULT_FMIN = 50.0
DEFAULT_FMAX = 8_000.0
DEFAULT_LOG_OFFSET = 1e-6

# Reference extractor: three frozen conv blocks, widths low to high.
DEFAULT_CHANNELS_PER_BLOCK = (16, 32, 64)
DEFAULT_EXTRACTOR_SEED = 1234

DEFAULT_PADIM_EPSILON = 0.01
# Desk-scale default; PatchCore quality saturates quickly on the synthetic corpus
# while greedy selection cost grows linearly with the kept fraction.
DEFAULT_CORESET_FRACTION = 0.01
DEFAULT_STFPM_STEPS = 500
DEFAULT_STFPM_LR = 0.01
DEFAULT_STFPM_MOMENTUM = 0.9
DEFAULT_STFPM_BATCH = 4

DEFAULT_SMOOTHING_SIGMA = 4.0
DEFAULT_SAMPLE_REDUCE = "max"

DEFAULT_SPECT_PERCENTILE = 40.0
DEFAULT_TEMPORAL_PERCENTILE = 50.0
DEFAULT_TEMPORAL_TOP_K = 5
DEFAULT_PRO_FPR_LIMIT = 0.3

DEFAULT_SNR_LEVELS = (6.0, 0.0, -6.0)
