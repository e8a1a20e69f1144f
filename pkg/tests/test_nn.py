"""Tests for the numpy network engine: forward, softmax, loss, gradients and training."""

import math

import numpy as np
import pytest

from src.nn.functional import (
    cross_entropy_loss,
    forward,
    input_gradient,
    parameter_gradients,
    predict,
    softmax,
)
from src.nn.network import Network
from src.nn.tensor import LabeledSample
from src.nn.training import TrainConfig, train_epoch
from src.utils.exceptions import NumericalError, ShapeError

FD_STEP = 1e-3
KINK_MARGIN = 1e-2


def _relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    scale = max(np.max(np.abs(analytic)), np.max(np.abs(numeric)), 1e-8)
    return float(np.max(np.abs(analytic - numeric)) / scale)


def _numeric_input_gradient(net: Network, x: np.ndarray, y: int) -> np.ndarray:
    grad = np.zeros_like(x)
    for index in np.ndindex(x.shape):
        plus, minus = x.copy(), x.copy()
        plus[index] += FD_STEP
        minus[index] -= FD_STEP
        grad[index] = (cross_entropy_loss(forward(net, plus), y) - cross_entropy_loss(forward(net, minus), y)) / (
            2 * FD_STEP
        )
    return grad


def _kink_free_input(net: Network, rng: np.random.Generator) -> np.ndarray:
    # keep every conv pre-activation away from the ReLU kink so central differences stay smooth
    for _ in range(500):
        x = rng.uniform(0.0, 1.0, size=net.input_shape)
        pre, _ = net.layers[0].forward(x[None])
        if np.min(np.abs(pre)) > KINK_MARGIN:
            return x
    pytest.skip("no kink-free input found")


class TestForward:
    def test_zero_weights_give_zero_logits(self, make_dense_net):
        net = make_dense_net(np.zeros((4, 3), dtype=np.float32))
        logits = forward(net, np.random.default_rng(0).uniform(size=(1, 1, 4)))
        assert np.array_equal(logits, np.zeros(3, dtype=np.float32))

    def test_identity_dense(self, make_dense_net):
        net = make_dense_net(np.ones((1, 1), dtype=np.float32))
        assert forward(net, np.full((1, 1, 1), 0.7, dtype=np.float32))[0] == pytest.approx(0.7)

    def test_matches_straight_line_matrix_multiply(self):
        rng = np.random.default_rng(3)
        net = Network.from_layer_configs("two-layer", (1, 2, 3), 4, [
            {"kind": "flatten"},
            {"kind": "dense", "in_features": 6, "out_features": 5},
            {"kind": "relu"},
            {"kind": "dense", "in_features": 5, "out_features": 4},
        ], seed=11)
        x = rng.uniform(size=(1, 2, 3)).astype(np.float32)
        w1, b1 = net.layers[1].params["W"], net.layers[1].params["b"]
        w2, b2 = net.layers[3].params["W"], net.layers[3].params["b"]
        flat = [float(v) for v in x.reshape(-1)]
        hidden = []
        for j in range(5):
            total = float(b1[j])
            for i in range(6):
                total += flat[i] * float(w1[i, j])
            hidden.append(max(total, 0.0))
        expected = []
        for k in range(4):
            total = float(b2[k])
            for j in range(5):
                total += hidden[j] * float(w2[j, k])
            expected.append(total)
        assert np.allclose(forward(net, x), expected, atol=1e-5)

    def test_batch_rows_equal_single_calls(self, make_conv_net):
        net = make_conv_net(1)
        batch = np.random.default_rng(1).uniform(size=(5, 2, 6, 6)).astype(np.float32)
        logits = forward(net, batch)
        for i in range(5):
            assert np.allclose(logits[i], forward(net, batch[i]), atol=1e-6)

    def test_forward_is_pure(self, make_conv_net):
        net = make_conv_net(2)
        x = np.random.default_rng(2).uniform(size=(2, 6, 6)).astype(np.float32)
        assert np.array_equal(forward(net, x), forward(net, x))

    def test_shape_mismatch_is_rejected(self, make_conv_net):
        with pytest.raises(ShapeError, match="expects input of shape"):
            forward(make_conv_net(0), np.zeros((2, 5, 5), dtype=np.float32))

    def test_predict_single_and_batch(self, make_dense_net):
        net = make_dense_net(np.array([[1.0, 0.0], [0.0, 1.0]], dtype=np.float32))
        assert predict(net, np.array([[[0.9, 0.1]]], dtype=np.float32)) == 0
        batch = np.array([[[[0.9, 0.1]]], [[[0.1, 0.9]]]], dtype=np.float32)
        assert predict(net, batch).tolist() == [0, 1]

    def test_incompatible_layers_rejected(self):
        with pytest.raises(ShapeError):
            Network.from_layer_configs("bad", (1, 2, 2), 3, [
                {"kind": "flatten"},
                {"kind": "dense", "in_features": 5, "out_features": 3},
            ])

    def test_unknown_layer_kind(self):
        with pytest.raises(ShapeError, match="Unknown layer kind"):
            Network.from_layer_configs("bad", (1, 2, 2), 3, [{"kind": "batchnorm"}])


class TestSoftmax:
    def test_symmetric(self):
        assert np.allclose(softmax([0.0, 0.0]), [0.5, 0.5])

    @pytest.mark.parametrize("c", [-1000.0, 0.0, 3.5, 1000.0])
    def test_constant_logits(self, c):
        assert np.allclose(softmax([c] * 4), 0.25)

    def test_hand_evaluation(self):
        e = [math.exp(v) for v in (1.0, 2.0, 3.0)]
        expected = [v / sum(e) for v in e]
        assert np.allclose(softmax([1.0, 2.0, 3.0]), expected, atol=1e-6)

    def test_sums_to_one(self):
        logits = np.random.default_rng(0).normal(scale=30.0, size=(50, 7))
        probs = softmax(logits)
        assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-6)
        assert np.array_equal(np.argmax(probs, axis=1), np.argmax(logits, axis=1))

    def test_non_finite_rejected(self):
        with pytest.raises(NumericalError):
            softmax([0.0, np.nan])


class TestCrossEntropy:
    def test_two_zero_logits(self):
        assert cross_entropy_loss([0.0, 0.0], 0) == pytest.approx(math.log(2), abs=1e-6)

    def test_confident_correct(self):
        assert cross_entropy_loss([100.0, 0.0, 0.0], 0) == pytest.approx(0.0, abs=1e-12)

    def test_shift_invariance(self):
        logits = np.array([0.3, -1.2, 2.0])
        assert cross_entropy_loss(logits + 17.0, 2) == pytest.approx(cross_entropy_loss(logits, 2))

    def test_non_negative(self):
        logits = np.random.default_rng(4).normal(size=(20, 5))
        assert np.all(cross_entropy_loss(logits, 1) >= 0.0)

    def test_label_out_of_range(self):
        with pytest.raises(ShapeError, match="Label out of range"):
            cross_entropy_loss([0.0, 0.0], 2)


class TestInputGradient:
    def test_zero_network_has_zero_gradient(self, make_conv_net):
        net = make_conv_net(0)
        zero = net.with_parameters([{k: np.zeros_like(v) for k, v in layer.params.items()} for layer in net.layers])
        result = input_gradient(zero, np.random.default_rng(0).uniform(size=(2, 6, 6)), 1)
        assert result.input_grad.shape == (2, 6, 6)
        assert not np.any(result.input_grad)

    def test_linear_closed_form(self, make_dense_net):
        w = np.array([[0.5, -1.0], [2.0, 0.25], [-0.75, 1.5]])
        net = make_dense_net(w)
        x = np.array([[[0.2, 0.4, 0.6]]])
        logits = x.reshape(-1) @ w
        p = np.exp(logits - logits.max())
        p /= p.sum()
        expected = w @ (p - np.array([1.0, 0.0]))
        result = input_gradient(net, x, 0)
        assert np.allclose(result.input_grad.reshape(-1), expected, atol=1e-10)

    @pytest.mark.parametrize("seed", range(20))
    def test_matches_finite_differences(self, seed, make_conv_net):
        net = make_conv_net(seed).astype(np.float64)
        rng = np.random.default_rng(1000 + seed)
        for _ in range(5):
            x = _kink_free_input(net, rng)
            y = int(rng.integers(net.num_classes))
            analytic = input_gradient(net, x, y).input_grad
            assert analytic.shape == x.shape
            assert _relative_error(analytic, _numeric_input_gradient(net, x, y)) < 1e-3

    def test_batch_rows_are_per_sample_gradients(self, make_conv_net):
        net = make_conv_net(5)
        batch = np.random.default_rng(5).uniform(size=(3, 2, 6, 6)).astype(np.float32)
        result = input_gradient(net, batch, [0, 1, 2])
        for i in range(3):
            single = input_gradient(net, batch[i], i)
            assert np.allclose(result.input_grad[i], single.input_grad, atol=1e-6)
            assert result.loss[i] == pytest.approx(single.loss, rel=1e-5)


def test_parameter_gradients_match_finite_differences():
    net = Network.from_layer_configs("dense-only", (1, 1, 4), 3, [
        {"kind": "flatten"},
        {"kind": "dense", "in_features": 4, "out_features": 5},
        {"kind": "dense", "in_features": 5, "out_features": 3},
    ], seed=9).astype(np.float64)
    rng = np.random.default_rng(9)
    images = rng.uniform(size=(6, 1, 1, 4))
    labels = rng.integers(0, 3, size=6)
    _, grads = parameter_gradients(net, images, labels)

    def mean_loss(candidate: Network) -> float:
        return float(np.mean(cross_entropy_loss(forward(candidate, images), labels)))

    for layer_index in (1, 2):
        for name in ("W", "b"):
            value = net.layers[layer_index].params[name]
            numeric = np.zeros_like(value)
            for index in np.ndindex(value.shape):
                params = [dict(layer.params) for layer in net.layers]
                plus, minus = value.copy(), value.copy()
                plus[index] += FD_STEP
                minus[index] -= FD_STEP
                params[layer_index][name] = plus
                loss_plus = mean_loss(net.with_parameters(params))
                params[layer_index][name] = minus
                loss_minus = mean_loss(net.with_parameters(params))
                numeric[index] = (loss_plus - loss_minus) / (2 * FD_STEP)
            assert _relative_error(grads[layer_index][name], numeric) < 1e-3


def _separable_set(n: int = 100, seed: int = 0):
    rng = np.random.default_rng(seed)
    samples = []
    for i in range(n):
        label = i % 2
        centre = 0.1 if label == 0 else 0.9
        image = np.clip(centre + rng.normal(scale=0.05, size=(1, 1, 2)), 0.0, 1.0).astype(np.float32)
        samples.append(LabeledSample(image=image, label=label, sample_id=i))
    return samples


def _linear_net(seed: int = 0) -> Network:
    return Network.from_layer_configs("toy", (1, 1, 2), 2, [
        {"kind": "flatten"},
        {"kind": "dense", "in_features": 2, "out_features": 2},
    ], seed=seed)


class TestTrainEpoch:
    def test_zero_learning_rate_leaves_parameters(self):
        net = _linear_net()
        trained, loss = train_epoch(net, _separable_set(), TrainConfig(lr=0.0))
        assert np.isfinite(loss)
        for before, after in zip(net.layers, trained.layers):
            for name in before.params:
                assert np.array_equal(before.params[name], after.params[name])

    def test_input_network_not_modified(self):
        net = _linear_net()
        snapshot = net.layers[1].params["W"].copy()
        train_epoch(net, _separable_set(), TrainConfig(lr=0.5))
        assert np.array_equal(net.layers[1].params["W"], snapshot)

    def test_separable_toy_set_converges(self):
        data = _separable_set()
        net = _linear_net()
        for epoch in range(50):
            net, _ = train_epoch(net, data, TrainConfig(lr=0.5, batch_size=10, seed=epoch))
        images = np.stack([s.image for s in data])
        labels = np.array([s.label for s in data])
        assert np.mean(predict(net, images) == labels) >= 0.95
        assert net.all_finite()

    def test_deterministic_given_seed(self, make_conv_net):
        rng = np.random.default_rng(0)
        data = [
            LabeledSample(image=rng.uniform(size=(2, 6, 6)).astype(np.float32), label=i % 3, sample_id=i)
            for i in range(12)
        ]
        first, loss_a = train_epoch(make_conv_net(4), data, TrainConfig(lr=0.1, batch_size=4, seed=3))
        second, loss_b = train_epoch(make_conv_net(4), data, TrainConfig(lr=0.1, batch_size=4, seed=3))
        assert loss_a == loss_b
        for a, b in zip(first.layers, second.layers):
            for name in a.params:
                assert np.array_equal(a.params[name], b.params[name])

    def test_empty_dataset_rejected(self):
        with pytest.raises(ShapeError, match="non-empty"):
            train_epoch(_linear_net(), [], TrainConfig())
