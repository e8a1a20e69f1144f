"""
Feed-forward classifier made of a sequence of layers.
"""

from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from src.nn.layers import Layer, Params, layer_from_config
from src.utils.exceptions import ShapeError


class Network:
    """
    A sequential classifier with exact forward and backward passes.

    Treat instances as immutable once trained: training returns new
    networks instead of mutating, so one network can serve many concurrent
    forward/gradient calls.

    Attributes:
        arch_id: Architecture identifier (e.g. "cnn-a").
        input_shape: Per-sample input shape (C, H, W).
        num_classes: Number of output logits K.
        layers: Ordered layers.
    """

    def __init__(self, arch_id: str, input_shape: Sequence[int], num_classes: int, layers: Sequence[Layer]) -> None:
        self.arch_id = arch_id
        self.input_shape = tuple(int(d) for d in input_shape)
        self.num_classes = int(num_classes)
        self.layers: List[Layer] = list(layers)
        self._shapes = self._infer_shapes()
        if self._shapes[-1] != (self.num_classes,):
            raise ShapeError(
                f"Network '{arch_id}' produces output shape {self._shapes[-1]}, expected ({self.num_classes},)"
            )

    def _infer_shapes(self) -> List[Tuple[int, ...]]:
        shapes = [self.input_shape]
        for index, layer in enumerate(self.layers):
            try:
                shapes.append(tuple(layer.output_shape(shapes[-1])))
            except ShapeError as e:
                raise ShapeError(f"Layer {index} ({layer.kind}) of '{self.arch_id}': {e}") from e
        return shapes

    @classmethod
    def from_layer_configs(
        cls,
        arch_id: str,
        input_shape: Sequence[int],
        num_classes: int,
        layer_configs: Sequence[Dict[str, Any]],
        seed: Optional[int] = 0,
    ) -> "Network":
        """
        Build a network from ``{"kind": ..., **args}`` entries and initialise its parameters.

        Args:
            arch_id: Architecture identifier.
            input_shape: Per-sample input shape.
            num_classes: Number of classes.
            layer_configs: Layer descriptions in order.
            seed: Initialisation seed. None leaves parameters empty (checkpoint loading fills them).
        """
        layers = []
        for entry in layer_configs:
            args = {k: v for k, v in entry.items() if k != "kind"}
            layers.append(layer_from_config(entry["kind"], args))
        if seed is not None:
            rng = np.random.default_rng(seed)
            shape: Tuple[int, ...] = tuple(input_shape)
            for layer in layers:
                layer.init_params(shape, rng)
                shape = layer.output_shape(shape)
        return cls(arch_id, input_shape, num_classes, layers)

    def layer_configs(self) -> List[Dict[str, Any]]:
        """Layer descriptions accepted by ``from_layer_configs``."""
        return [{"kind": layer.kind, **layer.config()} for layer in self.layers]

    def check_input(self, x: np.ndarray) -> None:
        """
        Raises:
            ShapeError: If a batch does not match the network input shape.
        """
        if x.ndim != 4 or tuple(x.shape[1:]) != self.input_shape:
            raise ShapeError(
                f"Network '{self.arch_id}' expects input of shape {self.input_shape}, "
                f"got {tuple(x.shape[1:]) if x.ndim == 4 else x.shape}"
            )

    def forward_batch(self, x: np.ndarray) -> np.ndarray:
        """Logits (N, K) for an NCHW batch."""
        self.check_input(x)
        out = x
        for layer in self.layers:
            out, _ = layer.forward(out)
        return out

    def forward_with_cache(self, x: np.ndarray) -> Tuple[np.ndarray, List[Any]]:
        self.check_input(x)
        caches = []
        out = x
        for layer in self.layers:
            out, cache = layer.forward(out)
            caches.append(cache)
        return out, caches

    def backward(self, caches: List[Any], grad_logits: np.ndarray) -> Tuple[np.ndarray, List[Params]]:
        """
        Back-propagate a logits gradient.

        Returns:
            (gradient w.r.t. the input batch, per-layer parameter gradients)
        """
        grad = grad_logits
        param_grads: List[Params] = [{} for _ in self.layers]
        for index in range(len(self.layers) - 1, -1, -1):
            grad, param_grads[index] = self.layers[index].backward(grad, caches[index])
        return grad, param_grads

    def named_parameters(self) -> Iterator[Tuple[int, str, np.ndarray]]:
        for index, layer in enumerate(self.layers):
            for name in sorted(layer.params):
                yield index, name, layer.params[name]

    def parameter_count(self) -> int:
        return int(sum(p.size for _, _, p in self.named_parameters()))

    def with_parameters(self, params: Sequence[Params]) -> "Network":
        """New network with the same structure and the given per-layer parameters."""
        layers = [layer.clone(p) for layer, p in zip(self.layers, params)]
        return Network(self.arch_id, self.input_shape, self.num_classes, layers)

    def copy(self) -> "Network":
        return self.with_parameters([layer.params for layer in self.layers])

    def astype(self, dtype: Any) -> "Network":
        """Copy with every parameter cast to ``dtype`` (float64 copies serve gradient checks)."""
        return self.with_parameters(
            [{name: value.astype(dtype) for name, value in layer.params.items()} for layer in self.layers]
        )

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(p)) for _, _, p in self.named_parameters())

    def __repr__(self) -> str:
        return (
            f"Network(arch_id={self.arch_id!r}, input_shape={self.input_shape}, "
            f"num_classes={self.num_classes}, params={self.parameter_count()})"
        )
