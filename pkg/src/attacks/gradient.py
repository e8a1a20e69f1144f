"""
Gradient-based transfer attacks on a surrogate: PGD, FGSM and TIMI.

The ``*_batch`` functions attack an NCHW batch of start points in one pass
(each row is independent, so results do not depend on batching). The
single-image wrappers check the spec and return an AttackResult.

No attack adds its own random start: the start point is given by the caller.
"""

from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage
from scipy.stats import norm

from src.attacks.models import AttackResult, AttackSpec, TimiParams
from src.nn.functional import cross_entropy_loss, forward, input_gradient
from src.nn.network import Network
from src.nn.tensor import as_image
from src.utils.exceptions import AttackConfigError, ShapeError

BatchOutcome = Tuple[np.ndarray, np.ndarray, np.ndarray]


def project(x: np.ndarray, start: np.ndarray, epsilon: float) -> np.ndarray:
    """Project onto the L-infinity ball of radius epsilon around start, intersected with [0, 1]."""
    eps = np.float32(epsilon)
    out = np.clip(x, start - eps, start + eps)
    return np.clip(out, 0.0, 1.0).astype(start.dtype, copy=False)


def _prepare(net: Network, starts: np.ndarray, labels: Sequence[int]) -> Tuple[np.ndarray, np.ndarray]:
    x0 = np.asarray(starts)
    if not np.issubdtype(x0.dtype, np.floating):
        x0 = x0.astype(np.float32)
    net.check_input(x0)
    y = np.asarray(labels, dtype=np.int64).reshape(-1)
    if len(y) != len(x0):
        raise ShapeError(f"{len(x0)} start images but {len(y)} labels")
    return x0, y


def _finish(net: Network, x: np.ndarray, y: np.ndarray, trace: List[np.ndarray]) -> BatchOutcome:
    logits = forward(net, x)
    trace.append(np.atleast_1d(cross_entropy_loss(logits, y)))
    success = np.argmax(logits, axis=1) != y
    return x, success, np.stack(trace, axis=1)


def pgd_batch(
    net: Network,
    starts: np.ndarray,
    labels: Sequence[int],
    epsilon: float,
    steps: int,
    step_size: float,
) -> BatchOutcome:
    """
    Projected sign-gradient ascent on the cross-entropy of each start image.

    Args:
        net: Surrogate network.
        starts: NCHW start images in [0, 1].
        labels: True label per image.
        epsilon: L-infinity budget around each start.
        steps: Number of iterations.
        step_size: Size of each sign step.

    Returns:
        (adversarial batch, success-on-surrogate flags, loss trace of shape (N, steps + 1))
    """
    x0, y = _prepare(net, starts, labels)
    x = x0.copy()
    step = np.asarray(step_size, dtype=x.dtype)
    trace: List[np.ndarray] = []
    for _ in range(steps):
        result = input_gradient(net, x, y)
        trace.append(np.atleast_1d(result.loss))
        x = project(x + step * np.sign(result.input_grad), x0, epsilon)
    return _finish(net, x, y, trace)


def fgsm_batch(net: Network, starts: np.ndarray, labels: Sequence[int], epsilon: float) -> BatchOutcome:
    """One sign step of size epsilon: exactly ``pgd_batch`` with steps=1, step_size=epsilon."""
    return pgd_batch(net, starts, labels, epsilon, steps=1, step_size=epsilon)


def ti_kernel(kernel_size: int) -> np.ndarray:
    """Normalised 2-D Gaussian smoothing kernel over [-3, 3] standard deviations."""
    taps = norm.pdf(np.linspace(-3.0, 3.0, kernel_size))
    kernel = np.outer(taps, taps)
    return kernel / kernel.sum()


def _smooth(grad: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    if kernel.shape[0] == 1:
        return grad
    # within each image and channel only
    k = kernel.astype(grad.dtype)
    return ndimage.correlate(grad, k[None, None], mode="constant", cval=0.0)


def _diversity_plan(
    rng: np.random.Generator, shape: Tuple[int, int, int], params: TimiParams
) -> Optional[Tuple[np.ndarray, np.ndarray, int, int]]:
    if rng.random() >= params.diversity_prob:
        return None
    _, h, w = shape
    rh = int(rng.integers(int(np.ceil(params.resize_ratio * h)), h + 1))
    rw = int(rng.integers(int(np.ceil(params.resize_ratio * w)), w + 1))
    top = int(rng.integers(0, h - rh + 1))
    left = int(rng.integers(0, w - rw + 1))
    rows = (np.arange(rh) * h) // rh
    cols = (np.arange(rw) * w) // rw
    return rows, cols, top, left


def _resize_pad(x: np.ndarray, plan: Tuple[np.ndarray, np.ndarray, int, int]) -> np.ndarray:
    rows, cols, top, left = plan
    out = np.zeros_like(x)
    out[:, top:top + len(rows), left:left + len(cols)] = x[:, rows][:, :, cols]
    return out


def _resize_pad_adjoint(grad: np.ndarray, plan: Tuple[np.ndarray, np.ndarray, int, int]) -> np.ndarray:
    rows, cols, top, left = plan
    out = np.zeros_like(grad)
    window = grad[:, top:top + len(rows), left:left + len(cols)]
    np.add.at(out, (slice(None), rows[:, None], cols[None, :]), window)
    return out


def timi_batch(
    net: Network,
    starts: np.ndarray,
    labels: Sequence[int],
    epsilon: float,
    steps: int,
    step_size: float,
    params: TimiParams,
    rngs: Sequence[np.random.Generator],
) -> BatchOutcome:
    """
    Momentum iterative sign attack with input diversity and translation-invariant smoothing.

    Per step and per image: with probability ``diversity_prob`` the image is
    nearest-neighbour resized to a random size in [ratio * side, side] and
    zero-padded at a random position before the gradient call (the gradient is
    mapped back through that transform). The gradient is then smoothed with a
    normalised Gaussian kernel, L1-normalised and accumulated with momentum;
    its sign drives a projected step as in PGD.

    Args:
        rngs: One generator per image, so batching does not change results.

    Returns:
        (adversarial batch, success-on-surrogate flags, loss trace of shape (N, steps + 1));
        trace entries before the last are losses of the (possibly transformed) gradient inputs.
    """
    x0, y = _prepare(net, starts, labels)
    if len(rngs) != len(x0):
        raise ShapeError(f"timi_batch needs one generator per image, got {len(rngs)} for {len(x0)}")
    x = x0.copy()
    kernel = ti_kernel(params.kernel_size)
    step = np.asarray(step_size, dtype=x.dtype)
    momentum = np.zeros_like(x)
    trace: List[np.ndarray] = []
    for _ in range(steps):
        plans = [_diversity_plan(rng, x.shape[1:], params) for rng in rngs]
        inputs = np.stack([x[i] if plan is None else _resize_pad(x[i], plan) for i, plan in enumerate(plans)])
        result = input_gradient(net, inputs, y)
        grad = np.stack([
            result.input_grad[i] if plan is None else _resize_pad_adjoint(result.input_grad[i], plan)
            for i, plan in enumerate(plans)
        ])
        trace.append(np.atleast_1d(result.loss))
        grad = _smooth(grad, kernel)
        scale = np.abs(grad).mean(axis=(1, 2, 3), keepdims=True)
        normalised = np.divide(grad, scale, out=np.zeros_like(grad), where=scale > 0)
        momentum = np.asarray(params.momentum, dtype=x.dtype) * momentum + normalised
        x = project(x + step * np.sign(momentum), x0, epsilon)
    return _finish(net, x, y, trace)


def _single(net: Network, start: np.ndarray, y: int) -> Tuple[np.ndarray, List[int]]:
    image = as_image(start, net.input_shape)
    return image[None], [int(y)]


def _check_algorithm(spec: AttackSpec, *expected: str) -> None:
    if spec.algorithm not in expected:
        raise AttackConfigError(f"Expected a {'/'.join(expected)} spec, got '{spec.algorithm}'")


def _result(outcome: BatchOutcome) -> AttackResult:
    x, success, trace = outcome
    return AttackResult(adversarial=x[0], queries_used=0, success_on_source=bool(success[0]), trace=trace[0])


def attack_pgd(f_prime: Network, start: np.ndarray, y: int, spec: AttackSpec) -> AttackResult:
    """
    PGD on the surrogate from ``start`` (no random start).

    Raises:
        AttackConfigError: If the spec is not a pgd spec.
        ShapeError: If the image does not fit the network.
    """
    _check_algorithm(spec, "pgd")
    x0, labels = _single(f_prime, start, y)
    return _result(pgd_batch(f_prime, x0, labels, spec.epsilon, spec.resolved_steps, spec.resolved_step_size))


def attack_fgsm(f_prime: Network, start: np.ndarray, y: int, spec: AttackSpec) -> AttackResult:
    """Single sign step of size epsilon on the surrogate."""
    _check_algorithm(spec, "fgsm")
    x0, labels = _single(f_prime, start, y)
    return _result(fgsm_batch(f_prime, x0, labels, spec.epsilon))


def attack_timi(f_prime: Network, start: np.ndarray, y: int, spec: AttackSpec) -> AttackResult:
    """TIMI on the surrogate; its randomness comes from ``spec.seed``."""
    _check_algorithm(spec, "timi")
    x0, labels = _single(f_prime, start, y)
    rngs = [np.random.default_rng(spec.seed)]
    return _result(timi_batch(
        f_prime, x0, labels, spec.epsilon, spec.resolved_steps, spec.resolved_step_size, spec.timi, rngs
    ))
