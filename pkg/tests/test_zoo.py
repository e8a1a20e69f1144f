"""Tests for zoo architectures, training, role enumeration and checkpoints."""

import json

import numpy as np
import pytest

from src.datasets.models import SyntheticSpec
from src.datasets.synthetic import generate_synthetic_dataset
from src.nn.functional import forward
from src.nn.tensor import LabeledSample
from src.utils.config import SUPPORTED_ARCHITECTURES
from src.utils.exceptions import CheckpointError, ZooError, ZooTrainingError
from src.zoo.architectures import build_architecture
from src.zoo.checkpoint import FORMAT_VERSION, MANIFEST, load_zoo, save_zoo
from src.zoo.models import ModelZoo, RoleAssignment, ZooConfig, ZooEntry
from src.zoo.zoo import enumerate_roles, evaluate_accuracy, train_zoo


@pytest.fixture
def untrained_zoo(tiny_profile):
    entries = [
        ZooEntry(arch_id, build_architecture(arch_id, tiny_profile, seed=i), 0.5 + 0.1 * i)
        for i, arch_id in enumerate(SUPPORTED_ARCHITECTURES)
    ]
    return ModelZoo(tiny_profile, tuple(entries))


class TestArchitectures:
    @pytest.mark.parametrize("arch_id", SUPPORTED_ARCHITECTURES)
    def test_output_has_one_logit_per_class(self, arch_id, tiny_profile):
        net = build_architecture(arch_id, tiny_profile, seed=0)
        x = np.random.default_rng(0).random((2, *tiny_profile.shape), dtype=np.float32)
        assert forward(net, x).shape == (2, tiny_profile.num_classes)

    @pytest.mark.parametrize("arch_id", SUPPORTED_ARCHITECTURES)
    def test_same_seed_same_weights(self, arch_id, tiny_profile):
        a = build_architecture(arch_id, tiny_profile, seed=3)
        b = build_architecture(arch_id, tiny_profile, seed=3)
        for (_, _, pa), (_, _, pb) in zip(a.named_parameters(), b.named_parameters()):
            assert np.array_equal(pa, pb)

    def test_architectures_differ(self, tiny_profile):
        counts = {build_architecture(a, tiny_profile).parameter_count() for a in SUPPORTED_ARCHITECTURES}
        assert len(counts) == len(SUPPORTED_ARCHITECTURES)

    def test_mlp_has_no_convolution(self, tiny_profile):
        kinds = [cfg["kind"] for cfg in build_architecture("mlp", tiny_profile).layer_configs()]
        assert "conv" not in kinds

    def test_unknown_id_lists_valid_ids(self, tiny_profile):
        with pytest.raises(ZooError, match="cnn-a"):
            build_architecture("resnet-50", tiny_profile)


class TestEvaluateAccuracy:
    def _one_hot_samples(self):
        return [
            LabeledSample(np.eye(4, dtype=np.float32)[label].reshape(1, 1, 4), label)
            for label in [0, 1, 2, 3, 3, 2, 1, 0]
        ]

    def test_perfect_classifier(self, make_dense_net):
        net = make_dense_net(np.eye(4, dtype=np.float32))
        assert evaluate_accuracy(net, self._one_hot_samples()) == 1.0

    def test_constant_classifier(self, make_dense_net):
        net = make_dense_net(np.zeros((4, 4), dtype=np.float32), np.array([1, 0, 0, 0], dtype=np.float32))
        assert evaluate_accuracy(net, self._one_hot_samples()) == pytest.approx(0.25)

    def test_empty_data(self, make_dense_net):
        with pytest.raises(ZooError, match="empty"):
            evaluate_accuracy(make_dense_net(np.eye(4, dtype=np.float32)), [])


class TestRoles:
    def test_five_models_give_twenty_assignments(self, untrained_zoo):
        roles = enumerate_roles(untrained_zoo)
        assert len(roles) == 20
        assert len({r.pair_id for r in roles}) == 20
        for role in roles:
            assert role.victim != role.surrogate
            assert len(role.ranking) == 3
            assert {role.victim, role.surrogate, *role.ranking} == set(SUPPORTED_ARCHITECTURES)

    def test_order_is_victim_then_surrogate(self, untrained_zoo):
        roles = enumerate_roles(untrained_zoo)
        assert roles[0].victim == "cnn-a" and roles[0].surrogate == "cnn-b"
        assert roles[0].ranking == ("cnn-wide", "mlp", "cnn-pool")
        assert roles[-1].victim == "cnn-pool" and roles[-1].surrogate == "mlp"

    def test_too_few_models(self, tiny_profile):
        entries = tuple(ZooEntry(a, build_architecture(a, tiny_profile), 1.0) for a in ("cnn-a", "mlp"))
        with pytest.raises(ZooError, match="at least 3"):
            enumerate_roles(ModelZoo(tiny_profile, entries))

    def test_roles_must_be_distinct(self):
        with pytest.raises(ZooError):
            RoleAssignment(victim="mlp", surrogate="cnn-a", ranking=("mlp",))


class TestModelZoo:
    def test_duplicate_ids_rejected(self, tiny_profile):
        net = build_architecture("mlp", tiny_profile)
        with pytest.raises(ZooError, match="Duplicate"):
            ModelZoo(tiny_profile, (ZooEntry("mlp", net, 1.0), ZooEntry("mlp", net, 1.0)))

    def test_lookup(self, untrained_zoo):
        assert "mlp" in untrained_zoo
        assert untrained_zoo.get("mlp").arch_id == "mlp"
        with pytest.raises(ZooError, match="not in the zoo"):
            untrained_zoo.get("vgg")


class TestTrainZoo:
    def test_trained_zoo_meets_floor(self, tiny_zoo, tiny_dataset):
        _, test = tiny_dataset
        assert tiny_zoo.ids == SUPPORTED_ARCHITECTURES
        for entry in tiny_zoo.entries:
            assert entry.accuracy >= 0.5
            assert evaluate_accuracy(entry.network, test) == pytest.approx(entry.accuracy)

    def test_unreachable_floor_names_failures(self):
        spec = SyntheticSpec(classes=2, shape=(1, 8, 8), per_class=4, seed=0)
        train, test = generate_synthetic_dataset(spec)
        config = ZooConfig(architectures=("mlp", "cnn-wide"), epochs=1, min_accuracy=1.01)
        with pytest.raises(ZooTrainingError) as excinfo:
            train_zoo(spec.profile(), train, test, config, workers=2)
        assert excinfo.value.failed == ["mlp", "cnn-wide"]
        assert "mlp" in str(excinfo.value)

    def test_empty_heldout(self, tiny_profile, tiny_dataset):
        train, _ = tiny_dataset
        with pytest.raises(ZooError, match="held-out"):
            train_zoo(tiny_profile, train, [], ZooConfig(epochs=1))


class TestCheckpoint:
    def test_round_trip_is_bit_exact(self, untrained_zoo, tmp_path):
        manifest = save_zoo(untrained_zoo, tmp_path)
        assert manifest == tmp_path / MANIFEST
        loaded = load_zoo(tmp_path)
        assert loaded.ids == untrained_zoo.ids
        assert loaded.profile == untrained_zoo.profile
        x = np.random.default_rng(1).random((3, *untrained_zoo.profile.shape), dtype=np.float32)
        for original, restored in zip(untrained_zoo.entries, loaded.entries):
            assert restored.accuracy == original.accuracy
            for (_, _, a), (_, _, b) in zip(original.network.named_parameters(), restored.network.named_parameters()):
                assert a.tobytes() == b.tobytes()
            assert np.array_equal(forward(original.network, x), forward(restored.network, x))

    def test_blob_layout(self, untrained_zoo, tmp_path):
        save_zoo(untrained_zoo, tmp_path)
        blob = tmp_path / "mlp" / "01_W.f32"
        assert blob.stat().st_size == 4 * 768 * 64

    def test_version_mismatch(self, untrained_zoo, tmp_path):
        save_zoo(untrained_zoo, tmp_path)
        manifest = json.loads((tmp_path / MANIFEST).read_text())
        manifest["format_version"] = FORMAT_VERSION + 1
        (tmp_path / MANIFEST).write_text(json.dumps(manifest))
        with pytest.raises(CheckpointError, match="format version"):
            load_zoo(tmp_path)

    def test_truncated_blob(self, untrained_zoo, tmp_path):
        save_zoo(untrained_zoo, tmp_path)
        blob = tmp_path / "cnn-a" / "00_W.f32"
        blob.write_bytes(blob.read_bytes()[:-4])
        with pytest.raises(CheckpointError, match="truncated"):
            load_zoo(tmp_path)

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(CheckpointError, match="manifest"):
            load_zoo(tmp_path)
