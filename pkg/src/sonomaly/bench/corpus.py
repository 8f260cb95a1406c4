"""Synthetic benchmark corpora with full ground-truth provenance.

A corpus is a directory of WAV clips plus, for every anomalous test clip, the
isolated scaled-anomaly spectrogram (float32 .npy), the spectrogram-level
ground-truth mask (PGM), and one manifest.json tying everything together with
paths relative to the manifest's directory. Training clips are always normal:
the unsupervised setting is enforced structurally.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..audio import (
    InjectionRecord,
    SpectrogramParams,
    Waveform,
    log_mel_spectrogram,
    mix_at_snr,
    synth_clip,
    write_wav,
)
from ..audio.spectrogram import n_frames
from ..config import DEFAULT_SAMPLE_RATE, DEFAULT_SNR_LEVELS
from ..errors import ConfigurationError, DegenerateSignalError
from ..metrics import spect_ground_truth, temporal_ground_truth
from ..pgm import mask_to_pgm

MANIFEST_VERSION = 1


@dataclass(frozen=True)
class CorpusConfig:
    n_train: int = 40
    n_test_normal: int = 20
    n_test_anomalous: int = 20  # per SNR level
    snr_levels: tuple[float, ...] = DEFAULT_SNR_LEVELS
    duration_s: float = 4.0
    sample_rate: int = DEFAULT_SAMPLE_RATE
    spectrogram: SpectrogramParams = field(default_factory=SpectrogramParams)
    background_kinds: tuple[str, ...] = ("tonal_background",)
    anomaly_kinds: tuple[str, ...] = ("chirp_anomaly", "click_anomaly", "tone_burst_anomaly")
    anomaly_duration_range: tuple[float, float] = (0.5, 1.5)

    def __post_init__(self):
        if self.n_train < 1:
            raise ConfigurationError("n_train must be >= 1: nothing to fit otherwise")
        if self.n_test_normal < 0 or self.n_test_anomalous < 0:
            raise ConfigurationError("test clip counts must be >= 0")
        if not self.snr_levels:
            raise ConfigurationError("snr_levels must be non-empty")
        if not self.background_kinds or not self.anomaly_kinds:
            raise ConfigurationError("need at least one background and one anomaly kind")
        lo, hi = self.anomaly_duration_range
        if not (0 < lo <= hi < self.duration_s):
            raise ConfigurationError("anomaly durations must fit inside the clip")

    def to_dict(self) -> dict:
        return {
            "n_train": self.n_train,
            "n_test_normal": self.n_test_normal,
            "n_test_anomalous": self.n_test_anomalous,
            "snr_levels": list(self.snr_levels),
            "duration_s": self.duration_s,
            "sample_rate": self.sample_rate,
            "spectrogram": self.spectrogram.to_dict(),
            "background_kinds": list(self.background_kinds),
            "anomaly_kinds": list(self.anomaly_kinds),
            "anomaly_duration_range": list(self.anomaly_duration_range),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CorpusConfig":
        kwargs = dict(d)
        if "spectrogram" in kwargs:
            kwargs["spectrogram"] = SpectrogramParams.from_dict(kwargs["spectrogram"])
        for key in ("snr_levels", "background_kinds", "anomaly_kinds", "anomaly_duration_range"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        return cls(**kwargs)


@dataclass
class ManifestClip:
    clip_id: str
    wav_path: str
    split: str  # train | test
    label: str  # normal | anomalous
    injection: InjectionRecord | None = None
    gt_mask_path: str | None = None

    def to_dict(self) -> dict:
        d = {
            "clip_id": self.clip_id,
            "wav_path": self.wav_path,
            "split": self.split,
            "label": self.label,
        }
        if self.injection is not None:
            d["injection"] = self.injection.to_dict()
        if self.gt_mask_path is not None:
            d["gt_mask_path"] = self.gt_mask_path
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ManifestClip":
        return cls(
            clip_id=d["clip_id"],
            wav_path=d["wav_path"],
            split=d["split"],
            label=d["label"],
            injection=InjectionRecord.from_dict(d["injection"]) if "injection" in d else None,
            gt_mask_path=d.get("gt_mask_path"),
        )


@dataclass
class DatasetManifest:
    seed: int
    sample_rate: int
    spectrogram: SpectrogramParams
    clips: list[ManifestClip]
    version: int = MANIFEST_VERSION

    def __post_init__(self):
        for clip in self.clips:
            if clip.split not in ("train", "test"):
                raise ConfigurationError(f"clip {clip.clip_id}: unknown split {clip.split!r}")
            if clip.label not in ("normal", "anomalous"):
                raise ConfigurationError(f"clip {clip.clip_id}: unknown label {clip.label!r}")
            if clip.split == "train" and clip.label != "normal":
                raise ConfigurationError(
                    f"clip {clip.clip_id}: training split must contain only normal clips"
                )
            if clip.label == "anomalous" and (clip.injection is None or clip.gt_mask_path is None):
                raise ConfigurationError(
                    f"clip {clip.clip_id}: anomalous clips need an injection record and a gt mask"
                )

    def train_clips(self) -> list[ManifestClip]:
        return [c for c in self.clips if c.split == "train"]

    def test_clips(self) -> list[ManifestClip]:
        return [c for c in self.clips if c.split == "test"]

    def snr_levels(self) -> list[float]:
        seen: list[float] = []
        for c in self.clips:
            if c.injection is not None and c.injection.snr_db not in seen:
                seen.append(c.injection.snr_db)
        return seen

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "seed": self.seed,
            "sample_rate": self.sample_rate,
            "spectrogram": self.spectrogram.to_dict(),
            "clips": [c.to_dict() for c in self.clips],
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "DatasetManifest":
        d = json.loads(Path(path).read_text())
        return cls(
            seed=int(d["seed"]),
            sample_rate=int(d["sample_rate"]),
            spectrogram=SpectrogramParams.from_dict(d["spectrogram"]),
            clips=[ManifestClip.from_dict(c) for c in d["clips"]],
            version=int(d.get("version", MANIFEST_VERSION)),
        )


def _clip_seed(base_seed: int, *context: int) -> int:
    return int(np.random.SeedSequence((base_seed, *context)).generate_state(1)[0])


def injection_columns(
    t_start_sample: int, t_end_sample: int, params: SpectrogramParams, total_frames: int
) -> tuple[int, int]:
    """Half-open frame-column interval overlapping [t_start, t_end) samples."""
    c0 = max(0, (t_start_sample - params.n_fft) // params.hop + 1)
    c1 = min(total_frames, (t_end_sample - 1) // params.hop + 1)
    if c1 <= c0:  # extremely short anomaly: fall back to the containing frame
        c0 = min(max(0, t_start_sample // params.hop), total_frames - 1)
        c1 = c0 + 1
    return int(c0), int(c1)


def build_corpus(cfg: CorpusConfig, seed: int, out_dir: str | Path) -> DatasetManifest:
    """Generate the corpus under out_dir; fully reproducible from the seed."""
    out_dir = Path(out_dir)
    for sub in ("wavs", "anomaly_specs", "gt_masks"):
        (out_dir / sub).mkdir(parents=True, exist_ok=True)

    clips: list[ManifestClip] = []
    snr_tag = lambda s: f"{s:g}".replace("-", "m").replace(".", "_")

    for i in range(cfg.n_train):
        clips.append(_normal_clip(cfg, seed, out_dir, f"train_{i:04d}", "train", 0, i))
    for i in range(cfg.n_test_normal):
        clips.append(_normal_clip(cfg, seed, out_dir, f"test_normal_{i:04d}", "test", 1, i))
    for si, snr in enumerate(cfg.snr_levels):
        for i in range(cfg.n_test_anomalous):
            clip_id = f"test_anom_{snr_tag(snr)}_{i:04d}"
            clips.append(_anomalous_clip(cfg, seed, out_dir, clip_id, snr, si, i))

    manifest = DatasetManifest(
        seed=seed, sample_rate=cfg.sample_rate, spectrogram=cfg.spectrogram, clips=clips
    )
    manifest.save(out_dir / "manifest.json")
    return manifest


def _normal_clip(cfg, seed, out_dir, clip_id, split, purpose, index) -> ManifestClip:
    kind = cfg.background_kinds[index % len(cfg.background_kinds)]
    w = synth_clip(kind, cfg.duration_s, _clip_seed(seed, purpose, index, 0), cfg.sample_rate)
    rel = f"wavs/{clip_id}.wav"
    write_wav(out_dir / rel, w)
    return ManifestClip(clip_id=clip_id, wav_path=rel, split=split, label="normal")


def _anomalous_clip(cfg, seed, out_dir, clip_id, snr, snr_index, index) -> ManifestClip:
    last_error: Exception | None = None
    for attempt in range(5):
        ctx = (2, snr_index, index, attempt)
        rng = np.random.default_rng(np.random.SeedSequence((seed, *ctx)))
        bg_kind = cfg.background_kinds[index % len(cfg.background_kinds)]
        an_kind = cfg.anomaly_kinds[index % len(cfg.anomaly_kinds)]
        background = synth_clip(bg_kind, cfg.duration_s, _clip_seed(seed, *ctx, 1), cfg.sample_rate)
        duration = float(rng.uniform(*cfg.anomaly_duration_range))
        anomaly = synth_clip(an_kind, duration, _clip_seed(seed, *ctx, 2), cfg.sample_rate)
        t_start = int(rng.integers(0, len(background) - len(anomaly) + 1))
        try:
            mixed, record = mix_at_snr(background, anomaly, snr, t_start, anomaly_id=an_kind)
        except DegenerateSignalError as exc:  # regenerate with a derived sub-seed
            last_error = exc
            continue

        wav_rel = f"wavs/{clip_id}.wav"
        bg_rel = f"wavs/{clip_id}.bg.wav"
        spec_rel = f"anomaly_specs/{clip_id}.npy"
        mask_rel = f"gt_masks/{clip_id}.pgm"
        write_wav(out_dir / wav_rel, mixed)
        write_wav(out_dir / bg_rel, background)

        timeline = np.zeros(len(background))
        timeline[record.t_start_sample : record.t_end_sample] = np.clip(
            record.scale_alpha * anomaly.samples, -1.0, 1.0
        )
        anomaly_spec = log_mel_spectrogram(Waveform(timeline, cfg.sample_rate), cfg.spectrogram)
        np.save(out_dir / spec_rel, anomaly_spec.values.astype(np.float32))

        t_total = n_frames(len(background), cfg.spectrogram.n_fft, cfg.spectrogram.hop)
        c0, c1 = injection_columns(
            record.t_start_sample, record.t_end_sample, cfg.spectrogram, t_total
        )
        gt_mask = spect_ground_truth(anomaly_spec, (c0, c1, 0, cfg.spectrogram.n_mels))
        mask_to_pgm(out_dir / mask_rel, gt_mask)
        # temporal ground truth persisted as a T x 1 mask for audit; eval
        # recomputes it from the stored anomaly spectrogram either way
        temporal_gt = temporal_ground_truth(anomaly_spec, (c0, c1))
        mask_to_pgm(out_dir / f"gt_masks/{clip_id}.temporal.pgm", temporal_gt[:, None])

        record.anomaly_spec_ref = spec_rel
        record.background_ref = bg_rel
        return ManifestClip(
            clip_id=clip_id,
            wav_path=wav_rel,
            split="test",
            label="anomalous",
            injection=record,
            gt_mask_path=mask_rel,
        )
    raise DegenerateSignalError(
        f"could not generate a valid mix for {clip_id} after 5 attempts: {last_error}"
    )
