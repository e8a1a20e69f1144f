"""
Stateless operations on networks: forward pass, softmax, loss and gradients.

Every function accepts either a single CHW image or an NCHW batch. Batched
calls return per-sample results, so attacks can push many candidates through
one matrix multiply without changing any individual result.
"""

from dataclasses import dataclass
from typing import List, Tuple, Union

import numpy as np
import numpy.typing as npt

from src.nn.layers import Params
from src.nn.network import Network
from src.nn.tensor import as_batch
from src.utils.exceptions import NumericalError, ShapeError

Labels = Union[int, npt.ArrayLike]


@dataclass(frozen=True)
class GradientResult:
    """
    Loss and input gradient of a cross-entropy evaluation.

    Attributes:
        loss: Scalar loss (single image) or per-sample losses (batch).
        input_grad: Gradient with the same shape as the input.
    """
    loss: Union[float, np.ndarray]
    input_grad: np.ndarray


def _as_float(x: npt.ArrayLike) -> np.ndarray:
    array = np.asarray(x)
    if not np.issubdtype(array.dtype, np.floating):
        array = array.astype(np.float32)
    return array


def _labels_for(batch_size: int, y: Labels, num_classes: int) -> np.ndarray:
    labels = np.broadcast_to(np.asarray(y, dtype=np.int64), (batch_size,))
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise ShapeError(f"Label out of range for {num_classes} classes: {np.asarray(y).tolist()}")
    return labels


def forward(net: Network, x: npt.ArrayLike) -> np.ndarray:
    """
    Raw logits of ``net`` for an image (shape (K,)) or a batch (shape (N, K)).

    Raises:
        ShapeError: If the input shape does not match the network.
    """
    batch, single = as_batch(_as_float(x))
    logits = net.forward_batch(batch)
    return logits[0] if single else logits


def predict(net: Network, x: npt.ArrayLike) -> Union[int, np.ndarray]:
    """Predicted class index (or indices for a batch)."""
    logits = forward(net, x)
    if logits.ndim == 1:
        return int(np.argmax(logits))
    return np.argmax(logits, axis=1)


def softmax(logits: npt.ArrayLike) -> np.ndarray:
    """
    Numerically stable softmax over the last axis, computed in float64.

    Raises:
        NumericalError: If any logit is NaN or infinite.
    """
    z = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise NumericalError("softmax received non-finite logits")
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _log_softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def cross_entropy_loss(logits: npt.ArrayLike, y: Labels) -> Union[float, np.ndarray]:
    """
    ``-log softmax(logits)[y]`` for one logit vector, or per row for a (N, K) matrix.

    Raises:
        ShapeError: If a label is outside [0, K).
        NumericalError: If the logits are not finite.
    """
    z = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise NumericalError("cross_entropy_loss received non-finite logits")
    single = z.ndim == 1
    z2 = z[None] if single else z
    labels = _labels_for(z2.shape[0], y, z2.shape[1])
    losses = -_log_softmax(z2)[np.arange(z2.shape[0]), labels]
    losses = np.maximum(losses, 0.0)
    return float(losses[0]) if single else losses


def _loss_and_logit_grad(logits: np.ndarray, labels: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    z = logits.astype(np.float64)
    if not np.all(np.isfinite(z)):
        raise NumericalError("Network produced non-finite logits")
    log_probs = _log_softmax(z)
    rows = np.arange(z.shape[0])
    losses = np.maximum(-log_probs[rows, labels], 0.0)
    grad = np.exp(log_probs)
    grad[rows, labels] -= 1.0
    return losses, grad.astype(logits.dtype)


def input_gradient(net: Network, x: npt.ArrayLike, y: Labels) -> GradientResult:
    """
    Cross-entropy loss and its exact gradient with respect to the input.

    For a batch, the loss is per sample and each gradient row is the gradient
    of that sample's own loss.

    Args:
        net: Network to differentiate.
        x: CHW image or NCHW batch.
        y: Label, or one label per batch row.

    Returns:
        GradientResult with the input-shaped gradient.

    Raises:
        ShapeError: On input or label mismatch.
    """
    batch, single = as_batch(_as_float(x))
    labels = _labels_for(batch.shape[0], y, net.num_classes)
    logits, caches = net.forward_with_cache(batch)
    losses, grad_logits = _loss_and_logit_grad(logits, labels)
    grad_input, _ = net.backward(caches, grad_logits)
    if single:
        return GradientResult(loss=float(losses[0]), input_grad=grad_input[0])
    return GradientResult(loss=losses, input_grad=grad_input)


def parameter_gradients(net: Network, images: np.ndarray, labels: Labels) -> Tuple[float, List[Params]]:
    """
    Mean cross-entropy over a batch and its gradient for every layer parameter.

    Returns:
        (mean loss, per-layer gradient dictionaries)
    """
    batch, _ = as_batch(_as_float(images))
    label_vec = _labels_for(batch.shape[0], labels, net.num_classes)
    logits, caches = net.forward_with_cache(batch)
    losses, grad_logits = _loss_and_logit_grad(logits, label_vec)
    _, grads = net.backward(caches, grad_logits / batch.shape[0])
    return float(losses.mean()), grads
