"""Student-teacher feature matching on the conv-stack pyramid.

A randomly initialized student is trained to reproduce the frozen teacher's
per-position, L2-normalized features on normal spectrograms; at inference the
per-position squared mismatch is the anomaly map. Training is plain SGD with
momentum; gradients come from exact backpropagation through the student's
conv / ReLU / pool stack, deterministic given the seeds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..audio.spectrogram import Spectrogram
from ..config import (
    DEFAULT_STFPM_BATCH,
    DEFAULT_STFPM_LR,
    DEFAULT_STFPM_MOMENTUM,
    DEFAULT_STFPM_STEPS,
)
from ..errors import ConfigurationError, ParameterError, ShapeError
from ..features.convnet import ConvStack
from ..features.extractor import ExtractorSpec, ReferenceExtractor
from ..features.pyramid import CoordMap, bilinear_resize

NORM_FLOOR = 1e-12  # guards zero-norm feature vectors instead of erroring


@dataclass
class StfpmConfig:
    steps: int = DEFAULT_STFPM_STEPS
    lr: float = DEFAULT_STFPM_LR
    momentum: float = DEFAULT_STFPM_MOMENTUM
    batch_size: int = DEFAULT_STFPM_BATCH
    seed: int = 0

    def __post_init__(self):
        if self.steps < 0:
            raise ParameterError("steps must be >= 0")
        if self.batch_size < 1:
            raise ParameterError("batch_size must be >= 1")
        if self.lr <= 0:
            raise ParameterError("lr must be positive")


@dataclass
class StudentModel:
    """Trainable copy of the teacher architecture plus its training config."""

    stack: ConvStack
    teacher_spec: ExtractorSpec
    cfg: StfpmConfig


def _normalize_positions(level: np.ndarray):
    """Per-position L2 normalization with a small norm floor."""
    norms = np.sqrt((level * level).sum(axis=2, keepdims=True))
    denom = np.maximum(norms, NORM_FLOOR)
    return level / denom, norms, denom


def stfpm_loss_and_grads(
    student: ConvStack,
    inputs: list[np.ndarray],
    teacher_levels: list[list[np.ndarray]],
    level_indices: list[int],
):
    """Matching loss (mean over clips) and student weight gradients.

    Per clip the loss is the flat mean over selected levels and positions of
    0.5 * ||t_hat - s_hat||^2 with per-position normalized feature vectors.
    """
    grad_ws = [np.zeros_like(w) for w in student.weights]
    grad_bs = [np.zeros_like(b) for b in student.biases]
    total_loss = 0.0
    for x, t_levels in zip(inputs, teacher_levels):
        s_levels, cache = student.forward_with_cache(x)
        n_positions = sum(s_levels[i].shape[0] * s_levels[i].shape[1] for i in level_indices)
        grad_levels: list[np.ndarray | None] = [None] * student.n_blocks
        clip_loss = 0.0
        for sel, idx in enumerate(level_indices):
            s = s_levels[idx]
            t_hat, _, _ = _normalize_positions(t_levels[sel])
            s_hat, s_norm, s_denom = _normalize_positions(s)
            diff = s_hat - t_hat
            clip_loss += 0.5 * float((diff * diff).sum())
            g_hat = diff / n_positions  # dL/d(s_hat)
            # through the normalization: project out the radial component
            dot = (s_hat * g_hat).sum(axis=2, keepdims=True)
            grad_s = np.where(s_norm > NORM_FLOOR, (g_hat - s_hat * dot) / s_denom, g_hat / NORM_FLOOR)
            grad_levels[idx] = grad_s
        gws, gbs = student.backward(cache, grad_levels)
        for i in range(student.n_blocks):
            grad_ws[i] += gws[i]
            grad_bs[i] += gbs[i]
        total_loss += clip_loss / n_positions
    n = len(inputs)
    for i in range(student.n_blocks):
        grad_ws[i] /= n
        grad_bs[i] /= n
    return total_loss / n, grad_ws, grad_bs


def stfpm_train(
    train_specs: list[Spectrogram],
    teacher: ExtractorSpec,
    cfg: StfpmConfig | None = None,
) -> StudentModel:
    """Train a student to mimic the teacher on the given normal spectrograms."""
    cfg = cfg or StfpmConfig()
    if not train_specs:
        raise ParameterError("need at least one training spectrogram")
    if teacher.kind != "reference":
        raise ConfigurationError(
            "stfpm needs a forward-capable teacher; imported embeddings cannot "
            "be evaluated on new inputs"
        )
    teacher_ex = ReferenceExtractor(teacher)
    level_indices = [teacher_ex.level_names.index(name) for name in teacher.selected_levels]

    init_seed, batch_seed = (int(s.generate_state(1)[0]) for s in np.random.SeedSequence(cfg.seed).spawn(2))
    student = ConvStack.initialize(teacher.channels_per_block, init_seed)
    if cfg.steps == 0:
        return StudentModel(student, teacher, cfg)

    inputs = [s.values for s in train_specs]
    cached_teacher = []  # selected levels only, normalized lazily in the loss
    for x in inputs:
        levels = teacher_ex.stack.forward(x)
        cached_teacher.append([levels[i] for i in level_indices])

    rng = np.random.default_rng(batch_seed)
    vel_w = [np.zeros_like(w) for w in student.weights]
    vel_b = [np.zeros_like(b) for b in student.biases]
    n_clips = len(inputs)
    batch = min(cfg.batch_size, n_clips)
    for _ in range(cfg.steps):
        idxs = rng.choice(n_clips, size=batch, replace=False)
        _, gws, gbs = stfpm_loss_and_grads(
            student,
            [inputs[i] for i in idxs],
            [cached_teacher[i] for i in idxs],
            level_indices,
        )
        for i in range(student.n_blocks):
            vel_w[i] = cfg.momentum * vel_w[i] + gws[i]
            vel_b[i] = cfg.momentum * vel_b[i] + gbs[i]
            student.weights[i] -= cfg.lr * vel_w[i]
            student.biases[i] -= cfg.lr * vel_b[i]
    return StudentModel(student, teacher, cfg)


def stfpm_score(
    spec: Spectrogram,
    teacher: ExtractorSpec | ReferenceExtractor,
    student: StudentModel,
) -> tuple[np.ndarray, CoordMap]:
    """Patch-resolution map: per-level normalized mismatch, upsampled to the
    finest selected level and summed."""
    teacher_ex = teacher if isinstance(teacher, ReferenceExtractor) else ReferenceExtractor(teacher)
    spec_names = teacher_ex.spec.selected_levels
    level_indices = [teacher_ex.level_names.index(name) for name in spec_names]

    t_levels = teacher_ex.stack.forward(spec.values)
    s_levels = student.stack.forward(spec.values)
    maps = []
    for idx in level_indices:
        t, s = t_levels[idx], s_levels[idx]
        if t.shape != s.shape:
            raise ShapeError(f"teacher/student level shapes differ: {t.shape} vs {s.shape}")
        t_hat, _, _ = _normalize_positions(t)
        s_hat, _, _ = _normalize_positions(s)
        maps.append(0.5 * ((t_hat - s_hat) ** 2).sum(axis=2))

    finest = max(range(len(maps)), key=lambda i: maps[i].shape[0] * maps[i].shape[1])
    target_h, target_w = maps[finest].shape
    combined = np.zeros((target_h, target_w))
    for m in maps:
        combined += m if m.shape == (target_h, target_w) else bilinear_resize(m, target_h, target_w)
    t_size, f_size = spec.values.shape
    return combined, CoordMap(t_size, f_size, target_h, target_w)
