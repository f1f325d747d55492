"""Convolution, transposed convolution, ReLU and fused sum+ReLU layers.

All forward ops are pure functions of (input, parameters); every op has a
hand-derived backward counterpart. Convolution uses the cross-correlation
convention (no kernel flip) with zero padding; the transposed convolution
is defined as its exact adjoint under matched stride/padding, which is
what ties the encoder and decoder halves of the network together.
"""

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import check_nchw

__all__ = [
    "ConvParams",
    "LayerGrads",
    "conv2d_forward",
    "conv2d_backward",
    "deconv2d_forward",
    "deconv2d_backward",
    "relu_forward",
    "relu_backward",
    "sum_relu_forward",
    "sum_relu_backward",
]


@dataclass
class ConvParams:
    """Weights (out_c, in_c, kh, kw), per-output-channel bias, stride, padding.

    The same container describes a convolution or a transposed convolution;
    in_c/out_c are always the layer's own input/output channel counts.
    """

    weights: np.ndarray
    bias: np.ndarray
    stride: int = 1
    padding: int = 0

    def __post_init__(self):
        if self.weights.ndim != 4:
            raise ValueError(f"weights must be 4-D (out_c, in_c, kh, kw), "
                             f"got {self.weights.shape}")
        if self.bias.shape != (self.weights.shape[0],):
            raise ValueError(f"bias length {self.bias.shape} does not match "
                             f"out_c={self.weights.shape[0]}")
        if self.stride < 1:
            raise ValueError(f"stride must be >= 1, got {self.stride}")
        if self.padding < 0:
            raise ValueError(f"padding must be >= 0, got {self.padding}")

    @property
    def out_channels(self) -> int:
        return self.weights.shape[0]

    @property
    def in_channels(self) -> int:
        return self.weights.shape[1]

    @property
    def kernel(self) -> tuple[int, int]:
        return self.weights.shape[2], self.weights.shape[3]


@dataclass
class LayerGrads:
    """Gradients mirroring a layer's forward operands."""

    d_input: np.ndarray
    d_weights: np.ndarray
    d_bias: np.ndarray


def _conv_out_size(size: int, k: int, stride: int, pad: int) -> int:
    span = size + 2 * pad - k
    if span < 0:
        raise ValueError(f"kernel {k} larger than padded input {size + 2 * pad}")
    if span % stride:
        raise ValueError(f"geometry not divisible: (size {size} + 2*pad {pad} "
                         f"- kernel {k}) must be a multiple of stride {stride}")
    return span // stride + 1


def _im2col(x: np.ndarray, kh: int, kw: int, stride: int, pad: int):
    """Patch matrix of shape (c*kh*kw, n*oh*ow) plus the output dims.

    The channel/kernel axis leads so the spatial axes stay innermost,
    which keeps the gather cache-friendly.
    """
    n, c, h, w = x.shape
    oh = _conv_out_size(h, kh, stride, pad)
    ow = _conv_out_size(w, kw, stride, pad)
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    win = sliding_window_view(x, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    cols = win.transpose(1, 4, 5, 0, 2, 3).reshape(c * kh * kw, n * oh * ow)
    return np.ascontiguousarray(cols), oh, ow


def _col2im(cols: np.ndarray, n: int, c: int, h: int, w: int,
            kh: int, kw: int, stride: int, pad: int) -> np.ndarray:
    """Adjoint of _im2col: scatter-add patch columns back onto the image."""
    oh = _conv_out_size(h, kh, stride, pad)
    ow = _conv_out_size(w, kw, stride, pad)
    hp, wp = h + 2 * pad, w + 2 * pad
    out = np.zeros((n, c, hp, wp), dtype=cols.dtype)
    parts = cols.reshape(c, kh, kw, n, oh, ow)
    for di in range(kh):
        for dj in range(kw):
            out[:, :, di:di + stride * oh:stride,
                dj:dj + stride * ow:stride] += \
                parts[:, di, dj].transpose(1, 0, 2, 3)
    return out[:, :, pad:pad + h, pad:pad + w] if pad else out


def _to_nchw(flat: np.ndarray, n: int, oh: int, ow: int) -> np.ndarray:
    # (channels, n*oh*ow) -> (n, channels, oh, ow)
    return np.ascontiguousarray(
        flat.reshape(-1, n, oh, ow).transpose(1, 0, 2, 3))


def _from_nchw(x: np.ndarray) -> np.ndarray:
    # (n, channels, h, w) -> (channels, n*h*w)
    n, c, h, w = x.shape
    return np.ascontiguousarray(x.transpose(1, 0, 2, 3)).reshape(c, n * h * w)


def conv2d_forward(x: np.ndarray, p: ConvParams) -> np.ndarray:
    """Strided cross-correlation with zero padding plus bias."""
    check_nchw(x, "conv input")
    if x.shape[1] != p.in_channels:
        raise ValueError(f"input has {x.shape[1]} channels, layer expects "
                         f"{p.in_channels}")
    n = x.shape[0]
    kh, kw = p.kernel
    cols, oh, ow = _im2col(x, kh, kw, p.stride, p.padding)
    out = _to_nchw(p.weights.reshape(p.out_channels, -1) @ cols, n, oh, ow)
    out += p.bias[None, :, None, None]
    return out


def conv2d_backward(x: np.ndarray, p: ConvParams, dy: np.ndarray) -> LayerGrads:
    """Chain-rule gradients of conv2d_forward for input, weights and bias."""
    check_nchw(x, "conv input")
    check_nchw(dy, "conv output gradient")
    n, _, h, w = x.shape
    kh, kw = p.kernel
    oh = _conv_out_size(h, kh, p.stride, p.padding)
    ow = _conv_out_size(w, kw, p.stride, p.padding)
    if dy.shape != (n, p.out_channels, oh, ow):
        raise ValueError(f"output gradient shape {dy.shape} does not match "
                         f"forward output {(n, p.out_channels, oh, ow)}")
    cols, _, _ = _im2col(x, kh, kw, p.stride, p.padding)
    dy_flat = _from_nchw(dy)
    d_weights = (dy_flat @ cols.T).reshape(p.weights.shape)
    d_bias = dy.sum(axis=(0, 2, 3))
    d_cols = p.weights.reshape(p.out_channels, -1).T @ dy_flat
    d_input = _col2im(d_cols, n, p.in_channels, h, w, kh, kw,
                      p.stride, p.padding)
    return LayerGrads(d_input, d_weights, d_bias)


def _deconv_out_size(size: int, k: int, stride: int, pad: int) -> int:
    out = (size - 1) * stride - 2 * pad + k
    if out < 1:
        raise ValueError(f"transposed-conv geometry yields non-positive "
                         f"output size {out} (input {size}, kernel {k}, "
                         f"stride {stride}, padding {pad})")
    return out


def deconv2d_forward(x: np.ndarray, p: ConvParams) -> np.ndarray:
    """Transposed convolution: the adjoint of conv2d_forward plus bias.

    Output spatial size is (in - 1)*stride - 2*padding + kernel, so a
    stride-2 layer doubles resolution (up to the padding correction).
    """
    check_nchw(x, "deconv input")
    if x.shape[1] != p.in_channels:
        raise ValueError(f"input has {x.shape[1]} channels, layer expects "
                         f"{p.in_channels}")
    n, ci, h, w = x.shape
    kh, kw = p.kernel
    oh = _deconv_out_size(h, kh, p.stride, p.padding)
    ow = _deconv_out_size(w, kw, p.stride, p.padding)
    # Adjoint of a conv mapping (n, out_c, oh, ow) -> (n, in_c, h, w).
    v_flat = np.ascontiguousarray(p.weights.swapaxes(0, 1)).reshape(ci, -1)
    cols = v_flat.T @ _from_nchw(x)
    out = _col2im(cols, n, p.out_channels, oh, ow, kh, kw, p.stride, p.padding)
    return out + p.bias[None, :, None, None]


def deconv2d_backward(x: np.ndarray, p: ConvParams, dy: np.ndarray) -> LayerGrads:
    """Adjoint counterpart of conv2d_backward for the transposed convolution."""
    check_nchw(x, "deconv input")
    check_nchw(dy, "deconv output gradient")
    n, ci, h, w = x.shape
    kh, kw = p.kernel
    oh = _deconv_out_size(h, kh, p.stride, p.padding)
    ow = _deconv_out_size(w, kw, p.stride, p.padding)
    if dy.shape != (n, p.out_channels, oh, ow):
        raise ValueError(f"output gradient shape {dy.shape} does not match "
                         f"forward output {(n, p.out_channels, oh, ow)}")
    v_flat = np.ascontiguousarray(p.weights.swapaxes(0, 1)).reshape(ci, -1)
    dy_cols, _, _ = _im2col(dy, kh, kw, p.stride, p.padding)
    d_input = _to_nchw(v_flat @ dy_cols, n, h, w)
    d_weights = (_from_nchw(x) @ dy_cols.T).reshape(
        ci, p.out_channels, kh, kw).swapaxes(0, 1)
    d_bias = dy.sum(axis=(0, 2, 3))
    return LayerGrads(d_input, np.ascontiguousarray(d_weights), d_bias)


def relu_forward(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0)


def relu_backward(x: np.ndarray, dy: np.ndarray) -> np.ndarray:
    """dy masked to where x > 0; subgradient at exactly 0 is 0."""
    if x.shape != dy.shape:
        raise ValueError(f"shape mismatch: x {x.shape} vs dy {dy.shape}")
    return dy * (x > 0)


def sum_relu_forward(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """max(0, a + b): skip-junction merge of two same-shape feature maps."""
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return np.maximum(a + b, 0)


def sum_relu_backward(a: np.ndarray, b: np.ndarray,
                      dy: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Routes dy to both branches where a + b > 0."""
    if not (a.shape == b.shape == dy.shape):
        raise ValueError(f"shape mismatch: a {a.shape}, b {b.shape}, "
                         f"dy {dy.shape}")
    g = dy * ((a + b) > 0)
    return g, g.copy()
