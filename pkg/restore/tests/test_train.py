import numpy as np
import pytest
import torch

from cnnrestore import (
    NetworkConfig,
    TrainingConfig,
    TrainingPair,
    augment,
    build_network,
    normalize_pair,
    restore,
    train,
)


def _toy_pairs(n, size=16, seed=0):
    rng = np.random.default_rng(seed)
    pairs = []
    for _ in range(n):
        truth = rng.random((size, size)).astype(np.float32)
        corrupted = truth + 0.1 * rng.standard_normal((size, size)).astype(np.float32)
        pairs.append(normalize_pair(corrupted, truth))
    return pairs


class TestTrainingConfig:
    def test_lr_schedule_endpoints(self):
        tcfg = TrainingConfig(lr_initial=1e-4, lr_final=1e-6, epochs=10)
        assert tcfg.lr_at(0) == 1e-4
        assert tcfg.lr_at(9) == pytest.approx(1e-6)

    def test_monotone_decay(self):
        tcfg = TrainingConfig(epochs=20)
        lrs = [tcfg.lr_at(e) for e in range(20)]
        assert all(a >= b for a, b in zip(lrs, lrs[1:]))

    def test_inverted_schedule_rejected(self):
        with pytest.raises(ValueError):
            TrainingConfig(lr_initial=1e-6, lr_final=1e-4)


class TestTrain:
    def test_empty_dataset_rejected(self):
        model = build_network(NetworkConfig((16, 16), base_channels=2, growth_rate=2))
        with pytest.raises(ValueError):
            train(model, [], TrainingConfig(epochs=1))

    def test_single_pair_overfit(self):
        model = build_network(
            NetworkConfig((16, 16), base_channels=4, growth_rate=4)
        )
        tcfg = TrainingConfig(lr_initial=1e-3, lr_final=1e-4, epochs=60, batch_size=1, seed=3)
        _, history = train(model, _toy_pairs(1), tcfg)
        assert history[-1] < 0.05 * history[0]

    def test_deterministic_given_seed(self):
        cfg = NetworkConfig((16, 16), base_channels=2, growth_rate=2)
        tcfg = TrainingConfig(epochs=3, seed=11)
        histories = []
        for _ in range(2):
            torch.manual_seed(123)
            model = build_network(cfg)
            _, history = train(model, _toy_pairs(4), tcfg)
            histories.append(history)
        assert histories[0] == histories[1]

    def test_history_length(self):
        model = build_network(NetworkConfig((16, 16), base_channels=2, growth_rate=2))
        _, history = train(model, _toy_pairs(2), TrainingConfig(epochs=5))
        assert len(history) == 5


class TestAugment:
    def test_expansion_factor(self):
        assert len(augment(_toy_pairs(1), seed=0)) == 11
        assert len(augment(_toy_pairs(50), seed=0)) == 550

    def test_deterministic_per_seed(self):
        a = augment(_toy_pairs(2), seed=5)
        b = augment(_toy_pairs(2), seed=5)
        assert all(np.array_equal(x.corrupted, y.corrupted) for x, y in zip(a, b))
        c = augment(_toy_pairs(2), seed=6)
        assert any(not np.array_equal(x.corrupted, y.corrupted) for x, y in zip(a, c))

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            augment([])


class TestRestore:
    def test_order_and_count_preserved(self):
        torch.manual_seed(0)
        model = build_network(NetworkConfig((16, 16), base_channels=2, growth_rate=2))
        slices = [p.corrupted for p in _toy_pairs(5)]
        out = restore(model, slices)
        assert len(out) == 5
        # with a zeroed head, restore is the identity, so order is checkable
        torch.nn.init.zeros_(model.head.weight)
        torch.nn.init.zeros_(model.head.bias)
        out = restore(model, slices)
        assert all(np.allclose(o, s) for o, s in zip(out, slices))


class TestNormalize:
    def test_truth_mapped_to_unit_range(self):
        pair = _toy_pairs(1)[0]
        assert pair.truth.min() == pytest.approx(0.0)
        assert pair.truth.max() == pytest.approx(1.0)
        assert pair.hi > pair.lo

    def test_constant_truth_rejected(self):
        with pytest.raises(ValueError):
            normalize_pair(np.zeros((4, 4)), np.ones((4, 4)))

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            TrainingPair(np.zeros((4, 4)), np.zeros((4, 5)), 0.0, 1.0)
