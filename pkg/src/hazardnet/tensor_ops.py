"""Rank-3 tensor primitives: valid convolution, 2x2 max-pooling, activations.

Tensors are float64 numpy arrays of shape (maps, rows, cols); the flat C-order
layout is map-major, then row-major. All operations here are pure functions
and return freshly allocated arrays, so values are safe to share read-only
across threads.

Conventions, pinned for reproducibility:
  - convolution is valid cross-correlation (no kernel flip), stride 1,
    no padding, one scalar bias per output map;
  - pooling is 2x2 windows with stride 2, ties broken to the first cell
    in row-major window order;
  - tansig(x) = 2/(1 + exp(-2x)) - 1, computed as tanh(x) (identical
    function, better conditioned); purelin is the identity.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DimensionError


class Activation(Enum):
    """Elementwise transfer functions used by the network layers."""

    TANSIG = 0
    PURELIN = 1


@dataclass
class KernelBank:
    """Weights of one convolution layer.

    weights: (out_maps, in_maps, k_rows, k_cols), flat order is out-major,
    in-major, row-major. biases: (out_maps,), one scalar per output map.
    """

    weights: np.ndarray
    biases: np.ndarray

    @property
    def out_maps(self) -> int:
        return self.weights.shape[0]

    @property
    def in_maps(self) -> int:
        return self.weights.shape[1]

    @property
    def k_rows(self) -> int:
        return self.weights.shape[2]

    @property
    def k_cols(self) -> int:
        return self.weights.shape[3]

    def __post_init__(self) -> None:
        if self.weights.ndim != 4:
            raise DimensionError(
                f"kernel weights must be rank 4 (out, in, k_rows, k_cols), "
                f"got shape {self.weights.shape}"
            )
        if self.biases.shape != (self.weights.shape[0],):
            raise DimensionError(
                f"biases shape {self.biases.shape} does not match "
                f"out_maps={self.weights.shape[0]}"
            )

    @classmethod
    def zeros(cls, out_maps: int, in_maps: int, k_rows: int, k_cols: int) -> "KernelBank":
        return cls(
            weights=np.zeros((out_maps, in_maps, k_rows, k_cols)),
            biases=np.zeros(out_maps),
        )


@dataclass
class PoolCache:
    """Winner positions from a max-pool forward pass.

    offset_rows/offset_cols hold the winning cell's offset inside its 2x2
    window (values 0 or 1), shape (maps, out_rows, out_cols). input_rows and
    input_cols remember the pre-pool spatial size for gradient routing.
    """

    offset_rows: np.ndarray
    offset_cols: np.ndarray
    input_rows: int
    input_cols: int

    def winners(self) -> tuple[np.ndarray, np.ndarray]:
        """Absolute (row, col) of each window's winning input cell."""
        out_rows, out_cols = self.offset_rows.shape[1:]
        base_r = 2 * np.arange(out_rows)[None, :, None]
        base_c = 2 * np.arange(out_cols)[None, None, :]
        return base_r + self.offset_rows, base_c + self.offset_cols


def check_tensor(x: np.ndarray, what: str = "tensor") -> np.ndarray:
    """Validate the rank-3 tensor contract; returns x unchanged."""
    if x.ndim != 3:
        raise DimensionError(f"{what} must be rank 3 (maps, rows, cols), got shape {x.shape}")
    if min(x.shape) < 1:
        raise DimensionError(f"{what} dimensions must be >= 1, got shape {x.shape}")
    return x


def conv2d_valid(x: np.ndarray, kernels: KernelBank) -> np.ndarray:
    """Valid cross-correlation of x (in_maps, H, W) with a kernel bank.

    Returns pre-activation values of shape
    (out_maps, H - k_rows + 1, W - k_cols + 1):

        out[o, r, c] = biases[o] + sum_{i,u,v} x[i, r+u, c+v] * weights[o, i, u, v]
    """
    check_tensor(x, "conv input")
    in_maps, rows, cols = x.shape
    if in_maps != kernels.in_maps:
        raise DimensionError(
            f"conv input has {in_maps} maps but kernels expect "
            f"{kernels.in_maps} (input {x.shape}, weights {kernels.weights.shape})"
        )
    kr, kc = kernels.k_rows, kernels.k_cols
    if kr > rows or kc > cols:
        raise DimensionError(
            f"kernel {kr}x{kc} larger than input {rows}x{cols} "
            f"(input {x.shape}, weights {kernels.weights.shape})"
        )
    out_rows, out_cols = rows - kr + 1, cols - kc + 1

    # Patch matrix in tap-major layout (in*kr*kc, positions): one GEMM per
    # layer and the output lands C-contiguous without a final transpose.
    patches = sliding_window_view(x, (kr, kc), axis=(1, 2))
    cols = patches.transpose(0, 3, 4, 1, 2).reshape(in_maps * kr * kc, -1)
    w_mat = kernels.weights.reshape(kernels.out_maps, -1)
    out = w_mat @ cols + kernels.biases[:, None]
    return out.reshape(kernels.out_maps, out_rows, out_cols)


def conv2d_backward(
    x: np.ndarray,
    kernels: KernelBank,
    grad_out: np.ndarray,
    need_input_grad: bool = True,
) -> tuple[np.ndarray | None, KernelBank]:
    """Gradients of a scalar loss through conv2d_valid.

    grad_out must match the forward output shape. Returns (grad_input,
    grad_kernels); grad_kernels carries the weight gradients and per-map
    bias gradients (sum of grad_out over each map) in KernelBank shape.
    With need_input_grad=False the input gradient is skipped (None), for
    the first layer where nothing upstream consumes it.
    """
    check_tensor(x, "conv input")
    check_tensor(grad_out, "conv grad_out")
    in_maps, rows, cols = x.shape
    kr, kc = kernels.k_rows, kernels.k_cols
    expected = (kernels.out_maps, rows - kr + 1, cols - kc + 1)
    if in_maps != kernels.in_maps or grad_out.shape != expected:
        raise DimensionError(
            f"conv backward shapes disagree: input {x.shape}, weights "
            f"{kernels.weights.shape}, grad_out {grad_out.shape} (expected {expected})"
        )
    out_maps, out_rows, out_cols = grad_out.shape

    patches = sliding_window_view(x, (kr, kc), axis=(1, 2))
    cols = patches.transpose(0, 3, 4, 1, 2).reshape(in_maps * kr * kc, -1)
    g_mat = grad_out.reshape(out_maps, -1)

    grad_w = (g_mat @ cols.T).reshape(kernels.weights.shape)
    grad_b = g_mat.sum(axis=1)
    grad_kernels = KernelBank(weights=grad_w, biases=grad_b)
    if not need_input_grad:
        return None, grad_kernels

    # Scatter-add each kernel tap's contribution back onto the input. The
    # (w.T @ g) product comes out tap-major, so every slice add below is a
    # contiguous block.
    w_mat = kernels.weights.reshape(out_maps, -1)
    grad_cols = (w_mat.T @ g_mat).reshape(in_maps, kr, kc, out_rows, out_cols)
    grad_x = np.zeros_like(x)
    for u in range(kr):
        for v in range(kc):
            grad_x[:, u : u + out_rows, v : v + out_cols] += grad_cols[:, u, v]
    return grad_x, grad_kernels


def maxpool2x2(x: np.ndarray) -> tuple[np.ndarray, PoolCache]:
    """Disjoint 2x2 max-pooling with stride 2.

    Requires even spatial dimensions. Ties go to the first cell in row-major
    window order, matching np.argmax.
    """
    check_tensor(x, "pool input")
    maps, rows, cols = x.shape
    if rows % 2 or cols % 2:
        raise DimensionError(f"pool input must have even rows and cols, got {rows}x{cols}")

    # Four strided quadrant views in row-major window order; >= keeps the
    # earlier cell on ties, which composes to the first-cell rule overall.
    a = x[:, 0::2, 0::2]
    b = x[:, 0::2, 1::2]
    c = x[:, 1::2, 0::2]
    d = x[:, 1::2, 1::2]
    top_is_a = a >= b
    bot_is_c = c >= d
    top = np.where(top_is_a, a, b)
    bot = np.where(bot_is_c, c, d)
    from_top = top >= bot
    out = np.where(from_top, top, bot)
    offset_rows = np.where(from_top, 0, 1)
    offset_cols = np.where(from_top, ~top_is_a, ~bot_is_c).astype(np.int64)
    cache = PoolCache(
        offset_rows=offset_rows,
        offset_cols=offset_cols,
        input_rows=rows,
        input_cols=cols,
    )
    return out, cache


def maxpool2x2_backward(cache: PoolCache, grad_out: np.ndarray) -> np.ndarray:
    """Route each pooled-cell gradient to its cached winner; zeros elsewhere."""
    check_tensor(grad_out, "pool grad_out")
    if grad_out.shape != cache.offset_rows.shape:
        raise DimensionError(
            f"pool grad_out shape {grad_out.shape} does not match cache "
            f"shape {cache.offset_rows.shape}"
        )
    maps = grad_out.shape[0]
    rows_abs, cols_abs = cache.winners()
    grad_x = np.zeros((maps, cache.input_rows, cache.input_cols))
    grad_x[np.arange(maps)[:, None, None], rows_abs, cols_abs] = grad_out
    return grad_x


def activate(x: np.ndarray, kind: Activation) -> np.ndarray:
    """Elementwise tansig or purelin."""
    if kind is Activation.TANSIG:
        return np.tanh(x)
    return x.copy()


def activate_backward(output: np.ndarray, grad_out: np.ndarray, kind: Activation) -> np.ndarray:
    """Chain-rule factor for activate, given the layer's activated output.

    Tansig: grad_out * (1 - y^2) where y is the activated value (the tansig
    derivative expressed through its own output). Purelin: grad_out unchanged
    (bit-identical copy).
    """
    if output.shape != grad_out.shape:
        raise DimensionError(
            f"activation backward shapes disagree: output {output.shape}, "
            f"grad_out {grad_out.shape}"
        )
    if kind is Activation.TANSIG:
        # single temporary, reused in place (allocation is the hot cost here)
        out = np.multiply(output, output)
        np.subtract(1.0, out, out=out)
        np.multiply(grad_out, out, out=out)
        return out
    return grad_out.copy()
