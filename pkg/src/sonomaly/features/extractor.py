"""Pluggable patch-embedding extractors.

The reference extractor is a frozen, seeded conv stack: detectors only need a
stable feature map, so it is never trained. Real pretrained embeddings enter
the pipeline through the AEP1 import path instead.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..audio.spectrogram import Spectrogram
from ..config import DEFAULT_CHANNELS_PER_BLOCK, DEFAULT_EXTRACTOR_SEED
from ..errors import ConfigurationError, ParameterError
from .convnet import ConvStack
from .pyramid import FeatureMapPyramid

EXTRACTOR_KINDS = ("reference", "imported")


def block_names(n_blocks: int) -> tuple[str, ...]:
    return tuple(f"block{i + 1}" for i in range(n_blocks))


@dataclass(frozen=True)
class ExtractorSpec:
    kind: str = "reference"
    seed: int = DEFAULT_EXTRACTOR_SEED
    channels_per_block: tuple[int, ...] = DEFAULT_CHANNELS_PER_BLOCK
    selected_levels: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in EXTRACTOR_KINDS:
            raise ParameterError(f"unknown extractor kind {self.kind!r}")
        object.__setattr__(self, "channels_per_block", tuple(int(c) for c in self.channels_per_block))
        selected = tuple(self.selected_levels)
        if self.kind == "reference":
            names = block_names(len(self.channels_per_block))
            selected = selected or names
            unknown = [s for s in selected if s not in names]
            if unknown:
                raise ParameterError(f"selected levels {unknown} not among {list(names)}")
        # imported: an empty selection means "all levels of each imported file",
        # resolved when the pyramid is in hand; presence is checked per file.
        object.__setattr__(self, "selected_levels", selected)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "seed": self.seed,
            "channels_per_block": list(self.channels_per_block),
            "selected_levels": list(self.selected_levels),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExtractorSpec":
        return cls(
            kind=d.get("kind", "reference"),
            seed=int(d.get("seed", DEFAULT_EXTRACTOR_SEED)),
            channels_per_block=tuple(d.get("channels_per_block", DEFAULT_CHANNELS_PER_BLOCK)),
            selected_levels=tuple(d.get("selected_levels", ())),
        )


class ReferenceExtractor:
    """Frozen seeded conv stack realized from an ExtractorSpec."""

    def __init__(self, spec: ExtractorSpec):
        if spec.kind != "reference":
            raise ConfigurationError("ReferenceExtractor requires spec.kind == 'reference'")
        self.spec = spec
        self.stack = ConvStack.initialize(spec.channels_per_block, spec.seed)
        self.level_names = block_names(self.stack.n_blocks)

    def extract(self, s: Spectrogram) -> FeatureMapPyramid:
        levels = self.stack.forward(s.values)
        return FeatureMapPyramid(tuple(levels), self.level_names, s.values.shape)

    def receptive_field(self, level_name: str) -> int:
        """Input cells influencing one cell of the named level (per axis)."""
        depth = self.level_names.index(level_name) + 1
        rf, jump = 1, 1
        for _ in range(depth):
            rf += 2 * jump  # 3x3 conv
            rf += jump  # 2x2 pool
            jump *= 2
        return rf


def reference_extract(s: Spectrogram, spec: ExtractorSpec) -> FeatureMapPyramid:
    """One-shot extraction; build a ReferenceExtractor to amortize weights."""
    return ReferenceExtractor(spec).extract(s)
