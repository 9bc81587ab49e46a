"""Differentiable operations used by the BDCN graph.

Every op keeps the dtype of its inputs. Spatial ops take rank-4 tensors laid out as
(batch, channels, height, width).
"""

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from ..errors import ConfigurationError, TensorUsageError
from .core import Function, Tensor


@dataclass(frozen=True)
class ConvSpec:
    """Geometry of a 2-D convolution; ``dilation`` is the sampling stride inside the kernel."""

    kernel: tuple[int, int] = (3, 3)
    stride: int = 1
    padding: int = 0
    dilation: int = 1

    def __post_init__(self):
        if min(self.kernel) < 1:
            raise ConfigurationError(f"Kernel dims must be >= 1, got {self.kernel}")
        if self.stride < 1:
            raise ConfigurationError(f"Stride must be >= 1, got {self.stride}")
        if self.padding < 0:
            raise ConfigurationError(f"Padding must be >= 0, got {self.padding}")
        if self.dilation < 1:
            raise ConfigurationError(f"Dilation must be >= 1, got {self.dilation}")

    @classmethod
    def same(cls, kernel: int = 3, dilation: int = 1) -> "ConvSpec":
        """Stride-1 spec whose zero padding preserves the spatial size (odd kernels)."""
        return cls(kernel=(kernel, kernel), padding=dilation * (kernel - 1) // 2, dilation=dilation)

    def span(self) -> tuple[int, int]:
        """Input extent covered by one dilated kernel."""
        kh, kw = self.kernel
        return self.dilation * (kh - 1) + 1, self.dilation * (kw - 1) + 1

    def output_size(self, height: int, width: int) -> tuple[int, int]:
        span_h, span_w = self.span()
        out_h = (height + 2 * self.padding - span_h) // self.stride + 1
        out_w = (width + 2 * self.padding - span_w) // self.stride + 1
        if out_h < 1 or out_w < 1:
            raise ConfigurationError(
                f"Convolution output would be {out_h}x{out_w} for input {height}x{width} "
                f"with {self}"
            )
        return out_h, out_w


def _require_rank4(array: np.ndarray, what: str) -> None:
    if array.ndim != 4:
        raise ConfigurationError(f"{what} must be rank 4 (n, c, h, w), got shape {array.shape}")
    if min(array.shape) < 1:
        raise ConfigurationError(f"{what} has an empty dimension: {array.shape}")


class Conv2d(Function):
    """Dilated convolution via im2col windows contracted with einsum."""

    def forward(self, x: np.ndarray, weight: np.ndarray, bias: np.ndarray, spec: ConvSpec) -> np.ndarray:
        _require_rank4(x, "Convolution input")
        _require_rank4(weight, "Convolution weight")
        c_out, c_in, kh, kw = weight.shape
        if (kh, kw) != spec.kernel:
            raise ConfigurationError(f"Weight kernel {(kh, kw)} does not match spec {spec.kernel}")
        if x.shape[1] != c_in:
            raise ConfigurationError(f"Input has {x.shape[1]} channels, weight expects {c_in}")
        if bias.shape != (c_out,):
            raise ConfigurationError(f"Bias shape {bias.shape} does not match {c_out} output channels")

        out_h, out_w = spec.output_size(x.shape[2], x.shape[3])
        p = spec.padding
        padded = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p))) if p else x
        cols = self._windows(padded, spec, out_h, out_w)

        self.spec = spec
        self.x_shape = x.shape
        self.padded_shape = padded.shape
        self.cols = cols
        self.weight = weight

        y = np.einsum("nchwij,ocij->nohw", cols, weight, optimize=True)
        y += bias[None, :, None, None]
        return y.astype(x.dtype, copy=False)

    @staticmethod
    def _windows(padded: np.ndarray, spec: ConvSpec, out_h: int, out_w: int) -> np.ndarray:
        r, s = spec.dilation, spec.stride
        windows = sliding_window_view(padded, spec.span(), axis=(2, 3))
        return windows[:, :, ::s, ::s, ::r, ::r][:, :, :out_h, :out_w]

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray | None, ...]:
        spec = self.spec
        dx = dw = db = None
        if self.needs_grad(1):
            dw = np.einsum("nohw,nchwij->ocij", grad, self.cols, optimize=True).astype(grad.dtype)
        if self.needs_grad(2):
            db = grad.sum(axis=(0, 2, 3), dtype=np.float64).astype(grad.dtype)
        if self.needs_grad(0):
            dcols = np.einsum("nohw,ocij->nchwij", grad, self.weight, optimize=True)
            dpad = np.zeros(self.padded_shape, dtype=grad.dtype)
            out_h, out_w = grad.shape[2], grad.shape[3]
            r, s = spec.dilation, spec.stride
            kh, kw = spec.kernel
            for i in range(kh):
                for j in range(kw):
                    rows = slice(i * r, i * r + s * (out_h - 1) + 1, s)
                    cols = slice(j * r, j * r + s * (out_w - 1) + 1, s)
                    dpad[:, :, rows, cols] += dcols[..., i, j]
            p = spec.padding
            _, _, h, w = self.x_shape
            dx = dpad[:, :, p : p + h, p : p + w]
        return dx, dw, db


class MaxPool2(Function):
    """2x2 max pooling with stride 2; odd sizes are replicate-padded first."""

    def forward(self, x: np.ndarray) -> np.ndarray:
        _require_rank4(x, "Pooling input")
        n, c, h, w = x.shape
        pad_h, pad_w = h % 2, w % 2
        padded = np.pad(x, ((0, 0), (0, 0), (0, pad_h), (0, pad_w)), mode="edge") if pad_h or pad_w else x
        h2, w2 = padded.shape[2] // 2, padded.shape[3] // 2
        windows = padded.reshape(n, c, h2, 2, w2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h2, w2, 4)
        # argmax returns the first maximum, i.e. row-major order inside the window
        self.argmax = windows.argmax(axis=-1)
        self.x_shape = x.shape
        self.pad = (pad_h, pad_w)
        return np.take_along_axis(windows, self.argmax[..., None], axis=-1)[..., 0]

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray | None, ...]:
        n, c, h, w = self.x_shape
        h2, w2 = grad.shape[2], grad.shape[3]
        windows = np.zeros((n, c, h2, w2, 4), dtype=grad.dtype)
        np.put_along_axis(windows, self.argmax[..., None], grad[..., None], axis=-1)
        dpad = windows.reshape(n, c, h2, w2, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, 2 * h2, 2 * w2)
        dx = dpad[:, :, :h, :w].copy()
        pad_h, pad_w = self.pad
        if pad_h:
            dx[:, :, h - 1, :] += dpad[:, :, h, :w]
        if pad_w:
            dx[:, :, :, w - 1] += dpad[:, :, :h, w]
        if pad_h and pad_w:
            dx[:, :, h - 1, w - 1] += dpad[:, :, h, w]
        return (dx,)


def interpolation_matrix(size_in: int, size_out: int) -> np.ndarray:
    """Align-corners linear interpolation weights of shape (size_out, size_in)."""
    matrix = np.zeros((size_out, size_in), dtype=np.float64)
    rows = np.arange(size_out)
    if size_in == 1 or size_out == 1:
        matrix[:, 0] = 1.0
        return matrix
    src = rows * (size_in - 1) / (size_out - 1)
    lo = np.minimum(np.floor(src).astype(np.int64), size_in - 1)
    hi = np.minimum(lo + 1, size_in - 1)
    frac = src - lo
    np.add.at(matrix, (rows, lo), 1.0 - frac)
    np.add.at(matrix, (rows, hi), frac)
    return matrix


class UpsampleBilinear(Function):
    """Fixed (non-learned) align-corners bilinear upsampling."""

    def forward(self, x: np.ndarray, target_h: int, target_w: int) -> np.ndarray:
        _require_rank4(x, "Upsampling input")
        h, w = x.shape[2], x.shape[3]
        if target_h < h or target_w < w:
            raise ConfigurationError(f"Cannot upsample {h}x{w} to smaller target {target_h}x{target_w}")
        self.rows = interpolation_matrix(h, target_h).astype(x.dtype)
        self.cols = interpolation_matrix(w, target_w).astype(x.dtype)
        return self.rows @ x @ self.cols.T

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray | None, ...]:
        return (self.rows.T @ grad @ self.cols,)


class Relu(Function):
    def forward(self, x: np.ndarray) -> np.ndarray:
        self.mask = x > 0
        return np.where(self.mask, x, 0).astype(x.dtype, copy=False)

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray | None, ...]:
        return (grad * self.mask,)


class Sigmoid(Function):
    def forward(self, x: np.ndarray) -> np.ndarray:
        self.out = expit(x).astype(x.dtype, copy=False)
        return self.out

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray | None, ...]:
        return (grad * self.out * (1 - self.out),)


class AddN(Function):
    """Element-wise sum of equally shaped tensors."""

    def forward(self, *arrays: np.ndarray) -> np.ndarray:
        first = arrays[0]
        for a in arrays[1:]:
            if a.shape != first.shape:
                raise TensorUsageError(f"Cannot add shapes {first.shape} and {a.shape}")
        out = first.copy()
        for a in arrays[1:]:
            out += a
        return out

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray | None, ...]:
        return tuple(grad if self.needs_grad(i) else None for i in range(len(self.inputs)))


class Concat(Function):
    """Concatenation along the channel axis."""

    def forward(self, *arrays: np.ndarray) -> np.ndarray:
        self.splits = np.cumsum([a.shape[1] for a in arrays])[:-1]
        return np.concatenate(arrays, axis=1)

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray | None, ...]:
        return tuple(np.split(grad, self.splits, axis=1))


class Scale(Function):
    def forward(self, x: np.ndarray, factor: float) -> np.ndarray:
        self.factor = factor
        return (x * factor).astype(x.dtype, copy=False)

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray | None, ...]:
        return ((grad * self.factor).astype(grad.dtype, copy=False),)


class SumAll(Function):
    """Sum of every element, accumulated in float64."""

    def forward(self, x: np.ndarray) -> np.ndarray:
        self.shape = x.shape
        return np.asarray(x.sum(dtype=np.float64), dtype=x.dtype)

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray | None, ...]:
        return (np.full(self.shape, grad, dtype=grad.dtype),)


def conv2d(x: Tensor, weight: Tensor, bias: Tensor, spec: ConvSpec | None = None) -> Tensor:
    """Dilated 2-D convolution: y[i, j] = sum_{m,n} x[i + r*m, j + r*n] * w[m, n] + b."""
    if spec is None:
        spec = ConvSpec(kernel=(weight.shape[2], weight.shape[3]))
    return Conv2d.apply(x, weight, bias, spec=spec)


def maxpool2(x: Tensor) -> Tensor:
    return MaxPool2.apply(x)


def upsample_bilinear(x: Tensor, target_h: int, target_w: int) -> Tensor:
    return UpsampleBilinear.apply(x, target_h=target_h, target_w=target_w)


def relu(x: Tensor) -> Tensor:
    return Relu.apply(x)


def sigmoid(x: Tensor) -> Tensor:
    return Sigmoid.apply(x)


def add(a: Tensor, b: Tensor) -> Tensor:
    return AddN.apply(a, b)


def add_n(tensors: list[Tensor]) -> Tensor:
    if not tensors:
        raise TensorUsageError("add_n needs at least one tensor")
    if len(tensors) == 1:
        return tensors[0]
    return AddN.apply(*tensors)


def concat(tensors: list[Tensor]) -> Tensor:
    return Concat.apply(*tensors)


def scale(x: Tensor, factor: float) -> Tensor:
    return Scale.apply(x, factor=float(factor))


def sum_all(x: Tensor) -> Tensor:
    return SumAll.apply(x)
