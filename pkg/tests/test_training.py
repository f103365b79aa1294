import math

import numpy as np
import pytest

from vmfosr.augment import AugmentConfig
from vmfosr.datagen import SyntheticSpec, generate_dataset
from vmfosr.errors import NonFiniteLoss, ShapeMismatch, SplitLeak
from vmfosr.experiment import model_config_for
from vmfosr.losses import vmfal_hard
from vmfosr.model import CLASSIFIER, ModelConfig, encode
from vmfosr.numerics import l2_normalize, seeded_rng
from vmfosr.training import (
    FeatureBank,
    TrainConfig,
    cross_entropy,
    extract_features,
    learning_rate_at,
    train_stage_one,
    train_stage_two,
)

SMALL_SPEC = SyntheticSpec(n_known_classes=3, n_unknown_classes=2, samples_per_class_train=20,
                           samples_per_class_test=10, input_dim=8, p_latent=6)


@pytest.fixture(scope="module")
def small_data():
    return generate_dataset(SMALL_SPEC)


def small_model_cfg():
    return model_config_for(SMALL_SPEC, ModelConfig(hidden_layers=[12], d=8, p=5))


class TestCrossEntropy:
    def test_uniform_logits(self):
        assert cross_entropy(np.zeros(6), 2) == pytest.approx(math.log(6), abs=1e-15)

    def test_huge_margin(self):
        assert cross_entropy(np.array([50.0, 0.0, 0.0]), 0) < 1e-6

    def test_soft_label(self):
        logits = np.array([1.0, 2.0])
        y = np.array([0.25, 0.75])
        expected = -(0.25 * math.log(math.e / (math.e + math.e**2)) + 0.75 * math.log(math.e**2 / (math.e + math.e**2)))
        assert cross_entropy(logits, y) == pytest.approx(expected, abs=1e-14)

    def test_matches_hard_vmfal(self):
        rng = seeded_rng(0)
        Z = l2_normalize(rng.standard_normal((5, 4)))
        M = l2_normalize(rng.standard_normal((3, 4)))
        t = rng.integers(0, 3, 5)
        assert cross_entropy(Z @ M.T / 0.2, t) == pytest.approx(vmfal_hard(Z, t, M, 0.2), abs=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            cross_entropy(np.zeros(3), np.array([0.5, 0.5]))


class TestSchedule:
    def test_cosine_endpoints(self):
        cfg = TrainConfig(learning_rate=0.1)
        assert learning_rate_at(cfg, 0, 10) == pytest.approx(0.1)
        assert learning_rate_at(cfg, 5, 10) == pytest.approx(0.05)

    def test_constant(self):
        assert learning_rate_at(TrainConfig(lr_schedule="constant"), 7, 10) == 0.05


class TestStageOne:
    def test_zero_learning_rate_keeps_parameters(self, small_data):
        train, _ = small_data
        cfg = TrainConfig(epochs_stage1=3, learning_rate=0.0)
        aug = AugmentConfig(jitter_std=0.0, mixup_enabled=False)
        init, _ = train_stage_one(train, small_model_cfg(), TrainConfig(epochs_stage1=0), seeded_rng(1))
        state, hist = train_stage_one(train, small_model_cfg(), cfg, seeded_rng(1), aug)
        for k in init.params:
            assert np.array_equal(init.params[k], state.params[k]), k
        assert max(hist["loss"]) - min(hist["loss"]) <= 1e-12

    def test_bit_identical_reruns(self, small_data):
        train, _ = small_data
        cfg = TrainConfig(epochs_stage1=4)
        a, ha = train_stage_one(train, small_model_cfg(), cfg, seeded_rng(2))
        b, hb = train_stage_one(train, small_model_cfg(), cfg, seeded_rng(2))
        assert ha == hb
        assert all(np.array_equal(a.params[k], b.params[k]) for k in a.params)

    def test_embedding_rows_unit_every_epoch(self, small_data):
        train, _ = small_data
        _, hist = train_stage_one(train, small_model_cfg(), TrainConfig(epochs_stage1=10, learning_rate=0.5),
                                  seeded_rng(3))
        assert max(hist["embedding_norm_dev"]) <= 1e-9

    def test_classifier_untouched(self, small_data):
        train, _ = small_data
        init, _ = train_stage_one(train, small_model_cfg(), TrainConfig(epochs_stage1=0), seeded_rng(4))
        state, _ = train_stage_one(train, small_model_cfg(), TrainConfig(epochs_stage1=3), seeded_rng(4))
        assert all(np.array_equal(init.params[k], state.params[k]) for k in init.params if k.startswith(CLASSIFIER))

    def test_rejects_test_split(self, small_data):
        _, test = small_data
        with pytest.raises(SplitLeak):
            train_stage_one(test, small_model_cfg(), TrainConfig(epochs_stage1=1), seeded_rng(0))

    def test_non_finite_loss_reports_batch(self, small_data):
        train, _ = small_data
        bad = train.subset(np.ones(len(train), dtype=bool))
        bad.inputs[5, 0] = np.nan
        with pytest.raises(NonFiniteLoss) as info:
            train_stage_one(bad, small_model_cfg(), TrainConfig(epochs_stage1=1, batch_size=8), seeded_rng(0))
        assert 5 in info.value.diagnostic["indices"]

    def test_loss_decreases_on_default_spec(self):
        spec = SyntheticSpec()
        for seed in range(5):
            train, _ = generate_dataset(SyntheticSpec(seed=seed))
            _, hist = train_stage_one(train, model_config_for(spec), TrainConfig(), seeded_rng(seed, 2))
            assert all(np.isfinite(hist["loss"]))
            assert hist["loss"][-1] < hist["loss"][0]


class TestFeatureBank:
    def test_unnormalized_and_sized(self, small_data):
        train, _ = small_data
        state, _ = train_stage_one(train, small_model_cfg(), TrainConfig(epochs_stage1=2), seeded_rng(5))
        bank = extract_features(state, train)
        assert len(bank) == len(train)
        assert np.ptp(np.linalg.norm(bank.features, axis=1)) > 1e-3
        again = extract_features(state, train)
        assert np.array_equal(bank.features, again.features)

    def test_rejects_test_split(self, small_data):
        train, test = small_data
        state, _ = train_stage_one(train, small_model_cfg(), TrainConfig(epochs_stage1=0), seeded_rng(0))
        with pytest.raises(SplitLeak):
            extract_features(state, test)


class TestStageTwo:
    def setup_state(self, small_data, seed=6):
        train, _ = small_data
        state, _ = train_stage_one(train, small_model_cfg(), TrainConfig(epochs_stage1=5), seeded_rng(seed))
        return state, extract_features(state, train)

    def test_only_classifier_changes(self, small_data):
        state, bank = self.setup_state(small_data)
        trained, _ = train_stage_two(bank, state, TrainConfig(epochs_stage2=3), seeded_rng(7))
        for k in state.params:
            same = np.array_equal(state.params[k], trained.params[k])
            assert same != k.startswith(CLASSIFIER), k

    def test_zero_learning_rate(self, small_data):
        state, bank = self.setup_state(small_data)
        trained, _ = train_stage_two(bank, state, TrainConfig(epochs_stage2=3, learning_rate=0.0), seeded_rng(8))
        assert all(np.array_equal(state.params[k], trained.params[k]) for k in state.params)

    def test_separable_bank(self):
        rng = seeded_rng(9)
        spec = SyntheticSpec(kappa_data=200.0, observation_map="identity", input_dim=16)
        train, _ = generate_dataset(spec)
        cfg = model_config_for(spec, ModelConfig(hidden_layers=[], activation="identity", d=16))
        state, _ = train_stage_one(train, cfg, TrainConfig(epochs_stage1=0), rng)
        state.params["enc.W0"] = np.eye(16)
        state.params["enc.b0"] = np.zeros(16)
        bank = FeatureBank(encode(train.inputs, state), train.labels, train.inputs)
        _, hist = train_stage_two(bank, state, TrainConfig(epochs_stage2=50), rng)
        assert hist["accuracy"][-1] >= 0.99

    def test_static_bank_mode(self, small_data):
        state, bank = self.setup_state(small_data)
        cfg = TrainConfig(epochs_stage2=2, stage2_reencode=False)
        a, _ = train_stage_two(bank, state, cfg, seeded_rng(10))
        b, _ = train_stage_two(bank, state, cfg, seeded_rng(10))
        assert all(np.array_equal(a.params[k], b.params[k]) for k in a.params)
