"""
Layer implementations with exact backward passes.

Layers work on batches (NCHW for spatial layers, NF for dense ones) and are
stateless during inference: ``forward`` returns the output together with a
cache that ``backward`` consumes. A trained layer can therefore be shared by
many threads at once.
"""

from abc import ABC, abstractmethod
from typing import Any, ClassVar, Dict, Optional, Tuple, Type

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from src.utils.exceptions import ShapeError

Params = Dict[str, np.ndarray]


class Layer(ABC):
    """
    Base class for all layers.

    Attributes:
        kind: Registry name used in checkpoint manifests.
        params: Trainable tensors by name (empty for parameter-free layers).
    """

    kind: ClassVar[str] = ""

    def __init__(self) -> None:
        self.params: Params = {}

    @abstractmethod
    def output_shape(self, input_shape: Tuple[int, ...]) -> Tuple[int, ...]:
        """Per-sample output shape for a per-sample input shape."""

    @abstractmethod
    def forward(self, x: np.ndarray) -> Tuple[np.ndarray, Any]:
        """Return (output, cache)."""

    @abstractmethod
    def backward(self, grad_out: np.ndarray, cache: Any) -> Tuple[np.ndarray, Params]:
        """Return (gradient w.r.t. input, gradients w.r.t. params)."""

    def config(self) -> Dict[str, Any]:
        """Constructor arguments, JSON-serialisable."""
        return {}

    def init_params(self, input_shape: Tuple[int, ...], rng: np.random.Generator) -> None:
        """Draw initial parameters. Parameter-free layers do nothing."""

    def clone(self, params: Optional[Params] = None) -> "Layer":
        """Copy of this layer, optionally with replacement parameters."""
        layer = type(self)(**self.config())
        source = self.params if params is None else params
        layer.params = {name: np.array(value, copy=True) for name, value in source.items()}
        return layer


class Conv2D(Layer):
    """2-D convolution (cross-correlation) with zero padding, im2col formulation."""

    kind = "conv"

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int, padding: int = 0, stride: int = 1) -> None:
        super().__init__()
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.padding = padding
        self.stride = stride

    def config(self) -> Dict[str, Any]:
        return {
            "in_channels": self.in_channels,
            "out_channels": self.out_channels,
            "kernel_size": self.kernel_size,
            "padding": self.padding,
            "stride": self.stride,
        }

    def output_shape(self, input_shape: Tuple[int, ...]) -> Tuple[int, ...]:
        if len(input_shape) != 3 or input_shape[0] != self.in_channels:
            raise ShapeError(f"conv expects ({self.in_channels}, H, W) input, got {input_shape}")
        _, h, w = input_shape
        k, p, s = self.kernel_size, self.padding, self.stride
        out_h = (h + 2 * p - k) // s + 1
        out_w = (w + 2 * p - k) // s + 1
        if out_h < 1 or out_w < 1:
            raise ShapeError(f"conv kernel {k} does not fit input {input_shape} with padding {p}")
        return (self.out_channels, out_h, out_w)

    def init_params(self, input_shape: Tuple[int, ...], rng: np.random.Generator) -> None:
        fan_in = self.in_channels * self.kernel_size ** 2
        shape = (self.out_channels, self.in_channels, self.kernel_size, self.kernel_size)
        self.params = {
            "W": (rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)).astype(np.float32),
            "b": np.zeros(self.out_channels, dtype=np.float32),
        }

    def forward(self, x: np.ndarray) -> Tuple[np.ndarray, Any]:
        n = x.shape[0]
        k, p, s = self.kernel_size, self.padding, self.stride
        xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p))) if p else x
        windows = sliding_window_view(xp, (k, k), axis=(2, 3))[:, :, ::s, ::s]
        out_h, out_w = windows.shape[2], windows.shape[3]
        cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(n * out_h * out_w, -1)
        weights = self.params["W"].reshape(self.out_channels, -1)
        out = cols @ weights.T + self.params["b"]
        out = out.reshape(n, out_h, out_w, self.out_channels).transpose(0, 3, 1, 2)
        return out, (cols, x.shape, out_h, out_w)

    def backward(self, grad_out: np.ndarray, cache: Any) -> Tuple[np.ndarray, Params]:
        cols, in_shape, out_h, out_w = cache
        n, c, h, w = in_shape
        k, p, s = self.kernel_size, self.padding, self.stride
        g2 = grad_out.transpose(0, 2, 3, 1).reshape(-1, self.out_channels)
        weights = self.params["W"].reshape(self.out_channels, -1)
        grads = {
            "W": (g2.T @ cols).reshape(self.params["W"].shape),
            "b": g2.sum(axis=0),
        }
        dcols = (g2 @ weights).reshape(n, out_h, out_w, c, k, k)
        dxp = np.zeros((n, c, h + 2 * p, w + 2 * p), dtype=dcols.dtype)
        for i in range(k):
            for j in range(k):
                dxp[:, :, i:i + s * out_h:s, j:j + s * out_w:s] += dcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
        return dxp[:, :, p:p + h, p:p + w], grads


class Dense(Layer):
    """Fully connected layer, ``y = x @ W + b``."""

    kind = "dense"

    def __init__(self, in_features: int, out_features: int) -> None:
        super().__init__()
        self.in_features = in_features
        self.out_features = out_features

    def config(self) -> Dict[str, Any]:
        return {"in_features": self.in_features, "out_features": self.out_features}

    def output_shape(self, input_shape: Tuple[int, ...]) -> Tuple[int, ...]:
        if tuple(input_shape) != (self.in_features,):
            raise ShapeError(f"dense expects ({self.in_features},) input, got {input_shape}")
        return (self.out_features,)

    def init_params(self, input_shape: Tuple[int, ...], rng: np.random.Generator) -> None:
        shape = (self.in_features, self.out_features)
        self.params = {
            "W": (rng.standard_normal(shape) * np.sqrt(2.0 / self.in_features)).astype(np.float32),
            "b": np.zeros(self.out_features, dtype=np.float32),
        }

    def forward(self, x: np.ndarray) -> Tuple[np.ndarray, Any]:
        return x @ self.params["W"] + self.params["b"], x

    def backward(self, grad_out: np.ndarray, cache: Any) -> Tuple[np.ndarray, Params]:
        x = cache
        grads = {"W": x.T @ grad_out, "b": grad_out.sum(axis=0)}
        return grad_out @ self.params["W"].T, grads


class ReLU(Layer):
    kind = "relu"

    def output_shape(self, input_shape: Tuple[int, ...]) -> Tuple[int, ...]:
        return tuple(input_shape)

    def forward(self, x: np.ndarray) -> Tuple[np.ndarray, Any]:
        mask = x > 0
        return x * mask, mask

    def backward(self, grad_out: np.ndarray, cache: Any) -> Tuple[np.ndarray, Params]:
        return grad_out * cache, {}


class MaxPool2D(Layer):
    """Non-overlapping max pooling; trailing rows/columns that do not fill a window are dropped."""

    kind = "maxpool"

    def __init__(self, size: int = 2) -> None:
        super().__init__()
        self.size = size

    def config(self) -> Dict[str, Any]:
        return {"size": self.size}

    def output_shape(self, input_shape: Tuple[int, ...]) -> Tuple[int, ...]:
        c, h, w = input_shape
        if h < self.size or w < self.size:
            raise ShapeError(f"maxpool {self.size} does not fit input {input_shape}")
        return (c, h // self.size, w // self.size)

    def forward(self, x: np.ndarray) -> Tuple[np.ndarray, Any]:
        n, c, h, w = x.shape
        s = self.size
        out_h, out_w = h // s, w // s
        windows = (
            x[:, :, :out_h * s, :out_w * s]
            .reshape(n, c, out_h, s, out_w, s)
            .transpose(0, 1, 2, 4, 3, 5)
            .reshape(n, c, out_h, out_w, s * s)
        )
        # first maximum wins on ties, so the gradient goes to exactly one input
        idx = windows.argmax(axis=-1)
        out = np.take_along_axis(windows, idx[..., None], axis=-1)[..., 0]
        return out, (idx, x.shape)

    def backward(self, grad_out: np.ndarray, cache: Any) -> Tuple[np.ndarray, Params]:
        idx, in_shape = cache
        n, c, h, w = in_shape
        s = self.size
        out_h, out_w = idx.shape[2], idx.shape[3]
        gwin = np.zeros((n, c, out_h, out_w, s * s), dtype=grad_out.dtype)
        np.put_along_axis(gwin, idx[..., None], grad_out[..., None], axis=-1)
        gwin = gwin.reshape(n, c, out_h, out_w, s, s).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, out_h * s, out_w * s)
        dx = np.zeros(in_shape, dtype=grad_out.dtype)
        dx[:, :, :out_h * s, :out_w * s] = gwin
        return dx, {}


class GlobalAvgPool(Layer):
    kind = "gap"

    def output_shape(self, input_shape: Tuple[int, ...]) -> Tuple[int, ...]:
        return (input_shape[0],)

    def forward(self, x: np.ndarray) -> Tuple[np.ndarray, Any]:
        return x.mean(axis=(2, 3)), x.shape

    def backward(self, grad_out: np.ndarray, cache: Any) -> Tuple[np.ndarray, Params]:
        n, c, h, w = cache
        dx = np.broadcast_to(grad_out[:, :, None, None] / (h * w), cache)
        return np.array(dx), {}


class Flatten(Layer):
    kind = "flatten"

    def output_shape(self, input_shape: Tuple[int, ...]) -> Tuple[int, ...]:
        return (int(np.prod(input_shape)),)

    def forward(self, x: np.ndarray) -> Tuple[np.ndarray, Any]:
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, grad_out: np.ndarray, cache: Any) -> Tuple[np.ndarray, Params]:
        return grad_out.reshape(cache), {}


LAYER_TYPES: Dict[str, Type[Layer]] = {
    cls.kind: cls for cls in (Conv2D, Dense, ReLU, MaxPool2D, GlobalAvgPool, Flatten)
}


def layer_from_config(kind: str, config: Dict[str, Any]) -> Layer:
    """
    Instantiate a layer from its registry name and constructor arguments.

    Raises:
        ShapeError: If the kind is unknown or the arguments do not fit.
    """
    if kind not in LAYER_TYPES:
        raise ShapeError(f"Unknown layer kind '{kind}'. Valid kinds: {', '.join(sorted(LAYER_TYPES))}")
    try:
        return LAYER_TYPES[kind](**config)
    except TypeError as e:
        raise ShapeError(f"Invalid arguments for layer '{kind}': {config}") from e
