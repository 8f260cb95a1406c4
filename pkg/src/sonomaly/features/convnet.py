"""Minimal conv / ReLU / average-pool stack with exact backpropagation.

One block = 3x3 convolution (stride 1, reflect padding) -> ReLU -> 2x2
average pool (stride 2, truncating odd edges). Arrays are channels-last
(H, W, C) float64 throughout; all operations are deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import SizeError


def _im2col(xp: np.ndarray) -> np.ndarray:
    """(H+2, W+2, C) padded input -> (H*W, 9*C) patch matrix, (kh, kw, c) order."""
    h, w = xp.shape[0] - 2, xp.shape[1] - 2
    windows = np.lib.stride_tricks.sliding_window_view(xp, (3, 3), axis=(0, 1))
    # (H, W, C, 3, 3) -> (H, W, 3, 3, C)
    return np.ascontiguousarray(windows.transpose(0, 1, 3, 4, 2)).reshape(h * w, -1)


def conv3x3_forward(x: np.ndarray, weight: np.ndarray, bias: np.ndarray):
    """x (H, W, Cin), weight (3, 3, Cin, Cout), bias (Cout,) -> (H, W, Cout)."""
    h, w, c_in = x.shape
    if h < 2 or w < 2:
        raise SizeError(f"conv input {h}x{w} too small for reflect padding")
    xp = np.pad(x, ((1, 1), (1, 1), (0, 0)), mode="reflect")
    cols = _im2col(xp)
    out = cols @ weight.reshape(9 * c_in, -1) + bias
    return out.reshape(h, w, -1), cols


def conv3x3_backward(grad_out: np.ndarray, cols: np.ndarray, weight: np.ndarray, x_shape):
    """Gradients of the conv wrt weight, bias, and input (reflect-pad adjoint)."""
    h, w, c_in = x_shape
    c_out = grad_out.shape[-1]
    g = grad_out.reshape(h * w, c_out)
    grad_w = (cols.T @ g).reshape(3, 3, c_in, c_out)
    grad_b = g.sum(axis=0)

    grad_cols = (g @ weight.reshape(9 * c_in, c_out).T).reshape(h, w, 3, 3, c_in)
    grad_xp = np.zeros((h + 2, w + 2, c_in))
    for kh in range(3):
        for kw in range(3):
            grad_xp[kh : kh + h, kw : kw + w] += grad_cols[:, :, kh, kw, :]

    # adjoint of np.pad(..., mode="reflect"): padded row 0 mirrors row 1, etc.
    grad_x = grad_xp[1 : h + 1, 1 : w + 1].copy()
    grad_x[1, :] += grad_xp[0, 1 : w + 1]
    grad_x[h - 2, :] += grad_xp[h + 1, 1 : w + 1]
    grad_x[:, 1] += grad_xp[1 : h + 1, 0]
    grad_x[:, w - 2] += grad_xp[1 : h + 1, w + 1]
    grad_x[1, 1] += grad_xp[0, 0]
    grad_x[1, w - 2] += grad_xp[0, w + 1]
    grad_x[h - 2, 1] += grad_xp[h + 1, 0]
    grad_x[h - 2, w - 2] += grad_xp[h + 1, w + 1]
    return grad_w, grad_b, grad_x


def avgpool2_forward(x: np.ndarray) -> np.ndarray:
    h, w, c = x.shape
    hh, ww = h // 2, w // 2
    if hh < 1 or ww < 1:
        raise SizeError(f"pool input {h}x{w} too small for 2x2 pooling")
    trimmed = x[: hh * 2, : ww * 2]
    return trimmed.reshape(hh, 2, ww, 2, c).mean(axis=(1, 3))


def avgpool2_backward(grad_out: np.ndarray, x_shape) -> np.ndarray:
    h, w, c = x_shape
    hh, ww = grad_out.shape[0], grad_out.shape[1]
    grad_x = np.zeros((h, w, c))
    spread = np.repeat(np.repeat(grad_out, 2, axis=0), 2, axis=1) * 0.25
    grad_x[: hh * 2, : ww * 2] = spread
    return grad_x


@dataclass
class ConvStack:
    """A frozen-or-trainable stack of conv blocks with per-block outputs."""

    weights: list[np.ndarray]  # each (3, 3, Cin, Cout)
    biases: list[np.ndarray]  # each (Cout,)

    @classmethod
    def initialize(cls, channels_per_block, seed: int, in_channels: int = 1) -> "ConvStack":
        """He-style variance-scaled init, biases zero, deterministic from seed."""
        rng = np.random.default_rng(seed)
        weights, biases = [], []
        c_in = in_channels
        for c_out in channels_per_block:
            std = np.sqrt(2.0 / (9 * c_in))
            weights.append(rng.standard_normal((3, 3, c_in, c_out)) * std)
            biases.append(np.zeros(c_out))
            c_in = c_out
        return cls(weights, biases)

    @property
    def n_blocks(self) -> int:
        return len(self.weights)

    @property
    def channels_per_block(self) -> tuple[int, ...]:
        return tuple(w.shape[-1] for w in self.weights)

    def min_input_size(self) -> int:
        return 2**self.n_blocks

    def forward(self, x: np.ndarray) -> list[np.ndarray]:
        """Input (H, W) or (H, W, C) -> list of per-block pooled outputs."""
        if x.ndim == 2:
            x = x[:, :, None]
        h, w = x.shape[:2]
        need = self.min_input_size()
        if h < need or w < need:
            raise SizeError(f"input {h}x{w} below the minimum {need}x{need} for {self.n_blocks} blocks")
        levels = []
        for weight, bias in zip(self.weights, self.biases):
            y, _ = conv3x3_forward(x, weight, bias)
            x = avgpool2_forward(np.maximum(y, 0.0))
            levels.append(x)
        return levels

    def forward_with_cache(self, x: np.ndarray):
        """Forward pass retaining the intermediates needed for backward()."""
        if x.ndim == 2:
            x = x[:, :, None]
        levels, cache = [], []
        for weight, bias in zip(self.weights, self.biases):
            y, cols = conv3x3_forward(x, weight, bias)
            relu = np.maximum(y, 0.0)
            pooled = avgpool2_forward(relu)
            cache.append((x.shape, cols, y, relu.shape))
            levels.append(pooled)
            x = pooled
        return levels, cache

    def backward(self, cache, grad_levels: list[np.ndarray | None]):
        """Backprop per-level output gradients into per-block (dW, db).

        grad_levels[i] is dL/d(level_i output) or None; gradients flow both
        directly into each block and through deeper blocks' inputs.
        """
        grad_ws = [np.zeros_like(w) for w in self.weights]
        grad_bs = [np.zeros_like(b) for b in self.biases]
        grad_next = None  # dL/d(pooled output of current block), walking backwards
        for i in reversed(range(self.n_blocks)):
            x_shape, cols, y, relu_shape = cache[i]
            g = grad_levels[i]
            if grad_next is not None:
                g = grad_next if g is None else g + grad_next
            if g is None:
                continue
            grad_relu = avgpool2_backward(g, relu_shape)
            grad_y = grad_relu * (y > 0.0)
            gw, gb, grad_x = conv3x3_backward(grad_y, cols, self.weights[i], x_shape)
            grad_ws[i] += gw
            grad_bs[i] += gb
            grad_next = grad_x
        return grad_ws, grad_bs
