"""Per-position multivariate Gaussian modeling with Mahalanobis scoring."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NumericalError, ParameterError, ShapeError, StatisticsError
from ..features.pyramid import PatchGrid


@dataclass(frozen=True)
class GaussianField:
    """Per-position mean and precision of the normal patch distribution."""

    mean: np.ndarray  # (H, W, C)
    precision: np.ndarray  # (H, W, C, C), inverse of (sample cov + eps * I)
    epsilon: float

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.mean.shape


def padim_fit(train_grids: list[PatchGrid], epsilon: float = 0.01) -> GaussianField:
    """Fit a Gaussian per patch position over the training grids.

    Covariance uses the n-1 denominator plus epsilon * I regularization;
    positive definiteness is verified via Cholesky before inversion.
    """
    if epsilon <= 0:
        raise ParameterError("epsilon must be positive")
    if len(train_grids) < 2:
        raise StatisticsError(f"need at least 2 training grids, got {len(train_grids)}")
    shapes = {g.shape for g in train_grids}
    if len(shapes) != 1:
        raise ShapeError(f"training grids disagree on shape: {sorted(shapes)}")
    h, w, c = train_grids[0].shape

    stack = np.stack([np.asarray(g.grid, dtype=np.float64) for g in train_grids])  # (n, H, W, C)
    n = stack.shape[0]
    mean = stack.mean(axis=0)
    centered = stack - mean
    cov = np.einsum("nhwi,nhwj->hwij", centered, centered) / (n - 1)
    cov += epsilon * np.eye(c)

    flat = cov.reshape(h * w, c, c)
    try:
        np.linalg.cholesky(flat)
    except np.linalg.LinAlgError:
        bad = _first_non_pd_position(flat, h, w)
        raise NumericalError(
            f"covariance not positive definite after regularization at position {bad}"
        ) from None
    precision = np.linalg.inv(flat).reshape(h, w, c, c)
    return GaussianField(mean, precision, float(epsilon))


def _first_non_pd_position(flat_cov: np.ndarray, h: int, w: int) -> tuple[int, int]:
    for idx in range(flat_cov.shape[0]):
        try:
            np.linalg.cholesky(flat_cov[idx])
        except np.linalg.LinAlgError:
            return divmod(idx, w)
    return (0, 0)


def padim_score(grid: PatchGrid, field: GaussianField) -> np.ndarray:
    """Patch-resolution anomaly map: Mahalanobis distance at each position."""
    if grid.shape != field.shape:
        raise ShapeError(f"grid shape {grid.shape} does not match field {field.shape}")
    delta = np.asarray(grid.grid, dtype=np.float64) - field.mean
    sq = np.einsum("hwi,hwij,hwj->hw", delta, field.precision, delta)
    return np.sqrt(np.maximum(sq, 0.0))
