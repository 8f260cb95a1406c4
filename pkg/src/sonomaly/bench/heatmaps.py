"""Three-panel PGM heatmaps: mixed spectrogram | isolated anomaly | anomaly map.

Panels are drawn with time left-to-right and low frequencies at the bottom,
each min-max scaled to the byte range, stacked vertically with a white
separator line.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..audio import log_mel_spectrogram, read_wav
from ..detectors import AnomalyMap
from ..pgm import to_byte_image, write_pgm
from .corpus import DatasetManifest

_SEPARATOR_ROWS = 2


def _panel(values: np.ndarray) -> np.ndarray:
    # (T, F) -> image rows = frequency (high on top), cols = time
    return to_byte_image(np.flipud(values.T))


def triptych(mixed: np.ndarray, anomaly: np.ndarray, map_values: np.ndarray) -> np.ndarray:
    panels = [_panel(mixed), _panel(anomaly), _panel(map_values)]
    width = panels[0].shape[1]
    separator = np.full((_SEPARATOR_ROWS, width), 255, dtype=np.uint8)
    stacked = []
    for i, panel in enumerate(panels):
        if i:
            stacked.append(separator)
        stacked.append(panel)
    return np.vstack(stacked)


def emit_heatmaps(
    manifest: DatasetManifest,
    corpus_dir: str | Path,
    maps_by_detector: dict[str, dict[str, AnomalyMap]],
    out_dir: str | Path,
) -> list[str]:
    """Write one triptych per anomalous test clip per detector."""
    corpus_dir = Path(corpus_dir)
    out_dir = Path(out_dir)
    written: list[str] = []
    anomalous = [c for c in manifest.test_clips() if c.label == "anomalous"]
    for detector, maps in maps_by_detector.items():
        det_dir = out_dir / detector
        det_dir.mkdir(parents=True, exist_ok=True)
        for clip in anomalous:
            if clip.clip_id not in maps:
                continue
            mixed = log_mel_spectrogram(
                read_wav(corpus_dir / clip.wav_path), manifest.spectrogram
            ).values
            anomaly = np.load(corpus_dir / clip.injection.anomaly_spec_ref).astype(np.float64)
            image = triptych(mixed, anomaly, maps[clip.clip_id].values)
            path = det_dir / f"{clip.clip_id}.pgm"
            write_pgm(path, image)
            written.append(str(path))
    return written
