"""SNR-controlled injection of an anomaly clip into a background clip.

snr_db is the scaled-anomaly-to-background power ratio measured over the
overlap window only, so short anomalies are not diluted by silence around
them. Lower SNR means a quieter anomaly, hence a harder detection problem.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import BoundsError, DegenerateSignalError, ParameterError
from .waveform import Waveform


@dataclass
class InjectionRecord:
    """Ground-truth provenance of one anomaly injection."""

    anomaly_id: str
    t_start_sample: int
    t_end_sample: int
    snr_db: float
    scale_alpha: float
    clipped_samples: int = 0
    anomaly_spec_ref: str = ""
    background_ref: str = ""

    def __post_init__(self):
        if not (0 <= self.t_start_sample < self.t_end_sample):
            raise ParameterError("need 0 <= t_start_sample < t_end_sample")
        if self.scale_alpha <= 0:
            raise ParameterError("scale_alpha must be positive")

    def to_dict(self) -> dict:
        return {
            "anomaly_id": self.anomaly_id,
            "t_start_sample": self.t_start_sample,
            "t_end_sample": self.t_end_sample,
            "snr_db": self.snr_db,
            "scale_alpha": self.scale_alpha,
            "clipped_samples": self.clipped_samples,
            "anomaly_spec_ref": self.anomaly_spec_ref,
            "background_ref": self.background_ref,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "InjectionRecord":
        return cls(
            anomaly_id=d["anomaly_id"],
            t_start_sample=int(d["t_start_sample"]),
            t_end_sample=int(d["t_end_sample"]),
            snr_db=float(d["snr_db"]),
            scale_alpha=float(d["scale_alpha"]),
            clipped_samples=int(d.get("clipped_samples", 0)),
            anomaly_spec_ref=d.get("anomaly_spec_ref", ""),
            background_ref=d.get("background_ref", ""),
        )


def measure_snr_db(background: Waveform, scaled_anomaly: np.ndarray, t_start_sample: int) -> float:
    """Re-measure the overlap-window SNR of an already scaled anomaly."""
    t1 = t_start_sample + scaled_anomaly.size
    p_bg = float(np.mean(background.samples[t_start_sample:t1] ** 2))
    p_an = float(np.mean(np.asarray(scaled_anomaly, dtype=np.float64) ** 2))
    if p_bg <= 0 or p_an <= 0:
        raise DegenerateSignalError("zero power over the overlap window")
    return 10.0 * np.log10(p_an / p_bg)


def mix_at_snr(
    background: Waveform,
    anomaly: Waveform,
    snr_db: float,
    t_start_sample: int,
    anomaly_id: str = "anomaly",
) -> tuple[Waveform, InjectionRecord]:
    """Scale `anomaly` to the target overlap SNR and add it into `background`.

    Returns the mixed waveform (hard-clipped to [-1, 1], with the clip count
    reported in the record) and the injection record holding the applied
    scale and sample indices.
    """
    if background.sample_rate != anomaly.sample_rate:
        raise ParameterError(
            f"sample rates differ: {background.sample_rate} vs {anomaly.sample_rate}"
        )
    if t_start_sample < 0:
        raise BoundsError(f"t_start_sample must be >= 0, got {t_start_sample}")
    t0 = int(t_start_sample)
    t1 = t0 + len(anomaly)
    if t1 > len(background):
        raise BoundsError(
            f"anomaly of {len(anomaly)} samples does not fit at offset {t0} "
            f"in a background of {len(background)} samples"
        )
    window = background.samples[t0:t1]
    p_bg = float(np.mean(window**2))
    p_an = float(np.mean(anomaly.samples**2))
    if p_an <= 0:
        raise DegenerateSignalError("anomaly has zero power over the overlap window")
    if p_bg <= 0:
        raise DegenerateSignalError("background has zero power over the overlap window")

    alpha = float(np.sqrt(p_bg * 10.0 ** (snr_db / 10.0) / p_an))
    mixed = background.samples.copy()
    mixed[t0:t1] += alpha * anomaly.samples
    clipped = int(np.count_nonzero(np.abs(mixed) > 1.0))
    mixed = np.clip(mixed, -1.0, 1.0)

    record = InjectionRecord(
        anomaly_id=anomaly_id,
        t_start_sample=t0,
        t_end_sample=t1,
        snr_db=float(snr_db),
        scale_alpha=alpha,
        clipped_samples=clipped,
    )
    return Waveform(mixed, background.sample_rate), record
