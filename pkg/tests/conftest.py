"""Shared pytest fixtures and configuration."""

import sys
from pathlib import Path

import numpy as np
import pytest

# Add project root to Python path for imports
PROJECT_ROOT = Path(__file__).parent.parent
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

from src.datasets.models import SyntheticSpec
from src.datasets.synthetic import generate_synthetic_dataset
from src.nn.network import Network
from src.zoo.checkpoint import save_zoo
from src.zoo.models import ZooConfig
from src.zoo.zoo import train_zoo

TINY_SPEC = SyntheticSpec(classes=4, shape=(3, 16, 16), per_class=40, test_per_class=25, noise=0.05, seed=0)
TINY_ZOO_CONFIG = ZooConfig(epochs=20, lr=0.05, batch_size=16, min_accuracy=0.5, seed=0)


def small_conv_net(seed: int, shape=(2, 6, 6), classes: int = 3) -> Network:
    """Random conv + dense network for gradient checks."""
    c, h, w = shape
    return Network.from_layer_configs("small-conv", shape, classes, [
        {"kind": "conv", "in_channels": c, "out_channels": 3, "kernel_size": 3, "padding": 1},
        {"kind": "relu"},
        {"kind": "flatten"},
        {"kind": "dense", "in_features": 3 * h * w, "out_features": classes},
    ], seed=seed)


def dense_net(weights: np.ndarray, bias: np.ndarray | None = None) -> Network:
    """Single dense layer on a (1, 1, F) input with the given (F, K) weights."""
    features, classes = weights.shape
    net = Network.from_layer_configs("linear", (1, 1, features), classes, [
        {"kind": "flatten"},
        {"kind": "dense", "in_features": features, "out_features": classes},
    ], seed=0)
    b = np.zeros(classes, dtype=weights.dtype) if bias is None else bias
    return net.with_parameters([{}, {"W": weights, "b": b}])


QUERY_ATTACK_SCRIPT = """
import json
import sys
import numpy as np

source, query, target, shift, rounds = sys.argv[1], sys.argv[2], sys.argv[3], float(sys.argv[4]), int(sys.argv[5])
data = open(source, "rb").read()
pixels = np.frombuffer(data[24:], dtype="<f4")
replies = []
image = pixels
for i in range(rounds):
    image = np.clip(pixels + shift * i, 0.0, 1.0).astype("<f4")
    open(query, "wb").write(data[:24] + image.tobytes())
    print("query", flush=True)
    replies.append(json.loads(sys.stdin.readline()))
print("finished after", len(replies), "replies", flush=True)
open(target, "wb").write(data[:24] + image.tobytes())
json.dump(replies, open("replies.json", "w"))
"""


@pytest.fixture
def query_attack_command(tmp_path):
    """Command template of a stand-in external query attack.

    Queries ``start + shift * i`` for ``i < rounds``, writes the last query as its
    output and keeps every reply in ``replies.json`` of its work directory.
    """
    script = tmp_path / "query_attack.py"
    script.write_text(QUERY_ATTACK_SCRIPT)

    def command(shift: float = 0.0, rounds: int = 1):
        return [sys.executable, str(script), "{input}", "{query}", "{output}", str(shift), str(rounds)]

    return command


@pytest.fixture
def make_conv_net():
    return small_conv_net


@pytest.fixture
def make_dense_net():
    return dense_net


@pytest.fixture(scope="session")
def tiny_profile():
    return TINY_SPEC.profile("tiny")


@pytest.fixture(scope="session")
def tiny_dataset():
    return generate_synthetic_dataset(TINY_SPEC)


@pytest.fixture(scope="session")
def tiny_zoo(tiny_profile, tiny_dataset):
    """Five-model zoo trained once per session on the tiny synthetic set."""
    train, test = tiny_dataset
    return train_zoo(tiny_profile, train, test, TINY_ZOO_CONFIG, workers=2)


@pytest.fixture(scope="session")
def tiny_zoo_dir(tiny_zoo, tmp_path_factory):
    """Checkpoint of tiny_zoo, so harness runs load it instead of training."""
    directory = tmp_path_factory.mktemp("zoo")
    save_zoo(tiny_zoo, directory)
    return directory


@pytest.fixture
def tiny_config_dict(tmp_path, tiny_zoo_dir):
    """Experiment config mapping for end-to-end harness tests on the tiny set."""
    return {
        "dataset": {
            "name": "tiny",
            "synthetic": {
                "classes": TINY_SPEC.classes,
                "shape": list(TINY_SPEC.shape),
                "per_class": TINY_SPEC.per_class,
                "test_per_class": TINY_SPEC.test_per_class,
                "noise": TINY_SPEC.noise,
                "seed": TINY_SPEC.seed,
            },
        },
        "zoo": {
            "dir": str(tiny_zoo_dir),
            "epochs": TINY_ZOO_CONFIG.epochs,
            "lr": TINY_ZOO_CONFIG.lr,
            "batch_size": TINY_ZOO_CONFIG.batch_size,
            "min_accuracy": TINY_ZOO_CONFIG.min_accuracy,
        },
        "pool_size": 3,
        "epsilon": 8.0 / 255.0,
        "n": 4,
        "samplings": ["S2"],
        "strategies": ["baseline", "vanilla", "top1-adversarial"],
        "attack": {"steps": 3},
        "bootstrap": {"resamples": 50},
        "seed": 0,
        "output_dir": str(tmp_path / "out"),
        "workers": 2,
    }
