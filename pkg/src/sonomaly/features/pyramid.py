"""Feature-map pyramids, patch grids, and multi-resolution alignment."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ParameterError, ShapeError


@dataclass(frozen=True)
class FeatureMapPyramid:
    """Ordered per-level (H, W, C) feature maps plus the source (T, F) shape."""

    levels: tuple[np.ndarray, ...]
    level_names: tuple[str, ...]
    source_shape: tuple[int, int]

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(np.asarray(l) for l in self.levels))
        object.__setattr__(self, "level_names", tuple(self.level_names))
        object.__setattr__(self, "source_shape", tuple(int(v) for v in self.source_shape))
        if len(self.levels) < 1:
            raise ParameterError("a pyramid needs at least one level")
        if len(self.levels) != len(self.level_names):
            raise ParameterError("one name per level required")
        for arr in self.levels:
            if arr.ndim != 3:
                raise ShapeError("each level must be (H, W, C)")
            if not np.all(np.isfinite(arr)):
                raise ParameterError("pyramid contains non-finite values")
        for prev, cur in zip(self.levels, self.levels[1:]):
            if cur.shape[0] > prev.shape[0] or cur.shape[1] > prev.shape[1]:
                raise ParameterError("level resolutions must be non-increasing")

    def level(self, name: str) -> np.ndarray:
        try:
            return self.levels[self.level_names.index(name)]
        except ValueError:
            raise ParameterError(f"unknown level {name!r}; have {list(self.level_names)}") from None

    def with_source_shape(self, t: int, f: int) -> "FeatureMapPyramid":
        return FeatureMapPyramid(self.levels, self.level_names, (t, f))


@dataclass(frozen=True)
class CoordMap:
    """Maps patch positions (h, w) to the spectrogram cell rectangle they cover.

    Rectangles use integer edges floor(i * T / H), which tile the T x F plane
    exactly, with no gaps and no overlaps.
    """

    t_size: int
    f_size: int
    h: int
    w: int

    def rect(self, hi: int, wi: int) -> tuple[int, int, int, int]:
        """(t0, t1, f0, f1) half-open rectangle covered by patch (hi, wi)."""
        if not (0 <= hi < self.h and 0 <= wi < self.w):
            raise ParameterError(f"patch index ({hi}, {wi}) outside {self.h}x{self.w} grid")
        t0 = (hi * self.t_size) // self.h
        t1 = ((hi + 1) * self.t_size) // self.h
        f0 = (wi * self.f_size) // self.w
        f1 = ((wi + 1) * self.f_size) // self.w
        return t0, t1, f0, f1


@dataclass(frozen=True)
class PatchGrid:
    """H x W patch-embedding grid; each patch vector has dimension C."""

    grid: np.ndarray
    coord: CoordMap

    def __post_init__(self):
        object.__setattr__(self, "grid", np.asarray(self.grid))
        if self.grid.ndim != 3:
            raise ShapeError("patch grid must be (H, W, C)")
        if (self.grid.shape[0], self.grid.shape[1]) != (self.coord.h, self.coord.w):
            raise ShapeError("coord map dims do not match the grid")

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.grid.shape

    def patch_vectors(self) -> np.ndarray:
        """All H*W patch vectors as an (H*W, C) matrix, row-major order."""
        h, w, c = self.grid.shape
        return self.grid.reshape(h * w, c)


def bilinear_resize(arr: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Resize (H, W[, C]) with bilinear interpolation, half-pixel centers."""
    if out_h < 1 or out_w < 1:
        raise ParameterError("output size must be at least 1x1")
    squeeze = arr.ndim == 2
    if squeeze:
        arr = arr[:, :, None]
    h, w, _ = arr.shape
    if (h, w) == (out_h, out_w):
        out = arr.copy()
        return out[:, :, 0] if squeeze else out

    src_y = np.clip((np.arange(out_h) + 0.5) * h / out_h - 0.5, 0.0, h - 1.0)
    src_x = np.clip((np.arange(out_w) + 0.5) * w / out_w - 0.5, 0.0, w - 1.0)
    y0 = np.floor(src_y).astype(int)
    x0 = np.floor(src_x).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = (src_y - y0)[:, None, None]
    wx = (src_x - x0)[None, :, None]

    top = arr[y0][:, x0] * (1.0 - wx) + arr[y0][:, x1] * wx
    bot = arr[y1][:, x0] * (1.0 - wx) + arr[y1][:, x1] * wx
    out = top * (1.0 - wy) + bot * wy
    return out[:, :, 0] if squeeze else out


def align_and_concat(p: FeatureMapPyramid, selected: list[str] | tuple[str, ...]) -> PatchGrid:
    """Resize every selected level to the first selected level's resolution
    and concatenate channels into one patch grid."""
    if not selected:
        raise ParameterError("at least one level must be selected")
    maps = [p.level(name) for name in selected]
    target_h, target_w = maps[0].shape[:2]
    aligned = [maps[0]] + [bilinear_resize(m, target_h, target_w) for m in maps[1:]]
    grid = np.concatenate(aligned, axis=2)
    t, f = p.source_shape
    return PatchGrid(grid, CoordMap(t, f, target_h, target_w))
