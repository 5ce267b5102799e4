"""Tests for the projection head: init, prediction, training loop and
checkpoint round trips."""

import math

import numpy as np
import pytest

from revdict.checkpoint import CheckpointError
from revdict.data import SupervisedSet
from revdict.nnet import forward
from revdict.optim import TrainConfig
from revdict.projection import (
    ProjectionHead,
    init_head,
    load_head,
    predict,
    save_head,
    train_head,
)


def toy_sets(n=10, d_enc=4, d_out=3, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, d_enc))
    a = rng.normal(size=(d_out, d_enc))
    y = x @ a.T
    ids = [f"e{i}" for i in range(n)]
    sup = SupervisedSet(features=x, targets=y, ids=ids)
    return sup, sup


class TestInitHead:
    def test_same_seed_identical(self):
        a = init_head(6, 5, 4, seed=11)
        b = init_head(6, 5, 4, seed=11)
        for pa, pb in zip(a.stack.parameters(), b.stack.parameters()):
            np.testing.assert_array_equal(pa, pb)

    def test_defaults(self):
        head = init_head()
        assert head.d_enc == 768
        assert head.d_hidden == 768
        assert head.d_out == 256

    def test_hidden_defaults_to_input_dim(self):
        head = init_head(d_enc=33, d_out=5)
        assert head.d_hidden == 33

    def test_biases_zero(self):
        head = init_head(8, 8, 4, seed=0)
        np.testing.assert_array_equal(head.stack.layers[0].bias, np.zeros(8))
        np.testing.assert_array_equal(head.stack.layers[1].bias, np.zeros(4))

    def test_weight_sample_mean_near_zero(self):
        # Uniform(-a, a): mean 0, sd a/sqrt(3); the sample mean over n
        # draws should land within 3 standard errors.
        head = init_head(128, 128, 64, seed=5)
        for layer in head.stack.layers:
            w = layer.weights
            a = math.sqrt(6 / (layer.d_in + layer.d_out))
            se = (a / math.sqrt(3)) / math.sqrt(w.size)
            assert abs(w.mean()) < 3 * se

    def test_activation_pattern_enforced(self):
        from revdict.nnet import DenseLayer, FeedForwardStack

        relu_first = FeedForwardStack(
            [
                DenseLayer(np.zeros((3, 4)), np.zeros(3), "relu"),
                DenseLayer(np.zeros((2, 3)), np.zeros(2), "identity"),
            ]
        )
        with pytest.raises(ValueError, match="tanh"):
            ProjectionHead(relu_first)


class TestPredict:
    def test_zero_head_predicts_zero(self):
        head = init_head(4, 3, 2, seed=0)
        for p in head.stack.parameters():
            p[...] = 0.0
        out = predict(head, np.ones((5, 4)))
        np.testing.assert_array_equal(out, np.zeros((5, 2)))

    def test_matches_hand_expansion(self):
        head = init_head(2, 2, 2, seed=1)
        w1, b1 = head.stack.layers[0].weights, head.stack.layers[0].bias
        w2, b2 = head.stack.layers[1].weights, head.stack.layers[1].bias
        x = np.array([[0.3, -1.2], [2.0, 0.1]])
        expected = np.tanh(x @ w1.T + b1) @ w2.T + b2
        np.testing.assert_allclose(predict(head, x), expected, rtol=1e-15)

    def test_batch_order_preserved(self):
        head = init_head(3, 3, 2, seed=2)
        x = np.random.default_rng(0).normal(size=(7, 3))
        perm = np.random.default_rng(1).permutation(7)
        np.testing.assert_array_equal(predict(head, x)[perm], predict(head, x[perm]))


class TestTrainHead:
    def test_toy_problem_improves_and_tracks_best(self):
        train, dev = toy_sets()
        cfg = TrainConfig(batch_size=100, epochs=20, seed=0)
        trained = train_head(train, dev, cfg)
        cosines = [h.dev_cosine for h in trained.history]
        assert len(cosines) == 20
        assert any(b > a for a, b in zip(cosines, cosines[1:]))
        assert trained.best_dev_cosine == max(cosines)
        assert trained.best_epoch == cosines.index(max(cosines))

    def test_single_epoch_takes_ceil_n_over_batch_steps(self, monkeypatch):
        train, dev = toy_sets(n=25)
        cfg = TrainConfig(batch_size=10, epochs=2, seed=0)
        calls = []
        import revdict.projection as proj

        real = proj.onecycle_lr

        def spy(step, sched):
            calls.append((step, sched.total_steps))
            return real(step, sched)

        monkeypatch.setattr(proj, "onecycle_lr", spy)
        train_head(train, dev, cfg)
        assert len(calls) == 2 * math.ceil(25 / 10)
        assert [c[0] for c in calls] == list(range(6))
        assert all(c[1] == 6 for c in calls)

    def test_deterministic_given_seed(self):
        train, dev = toy_sets(n=30)
        cfg = TrainConfig(batch_size=8, epochs=3, seed=4)
        a = train_head(train, dev, cfg)
        b = train_head(train, dev, cfg)
        for pa, pb in zip(a.head.stack.parameters(), b.head.stack.parameters()):
            np.testing.assert_array_equal(pa, pb)
        assert a.best_epoch == b.best_epoch
        assert [h.loss for h in a.history] == [h.loss for h in b.history]

    def test_returned_weights_are_best_epoch_snapshot(self):
        train, dev = toy_sets(n=40, seed=3)
        cfg = TrainConfig(batch_size=10, epochs=5, seed=1)
        trained = train_head(train, dev, cfg)
        pred = predict(trained.head, dev.features)
        from revdict.nnet import row_cosines

        assert float(np.mean(row_cosines(pred, dev.targets))) == pytest.approx(
            trained.best_dev_cosine, abs=1e-12
        )

    def test_non_finite_loss_aborts_with_location(self):
        train, dev = toy_sets()
        train.targets[0, 0] = np.inf
        cfg = TrainConfig(batch_size=100, epochs=2, seed=0)
        with pytest.raises(FloatingPointError, match="epoch 0 batch 0"):
            train_head(train, dev, cfg)

    @pytest.mark.filterwarnings("ignore:invalid value encountered")
    def test_non_finite_gradient_aborts_with_location(self):
        # tanh saturates an inf feature, so the loss stays finite but the
        # first-layer gradient goes NaN; the abort still names the batch.
        train, dev = toy_sets()
        train.features[0, 0] = np.inf
        cfg = TrainConfig(batch_size=100, epochs=2, seed=0)
        with pytest.raises(FloatingPointError, match="epoch 0 batch 0"):
            train_head(train, dev, cfg)


class TestCheckpointRoundTrip:
    def test_save_load_predictions_bitwise_equal(self, tmp_path):
        train, dev = toy_sets(n=20)
        cfg = TrainConfig(batch_size=10, epochs=2, seed=7)
        trained = train_head(train, dev, cfg, encoder_id="hg32")
        path = tmp_path / "head.ckpt.json"
        save_head(trained, path)
        loaded, metadata = load_head(path)
        x = np.random.default_rng(1).normal(size=(6, 4))
        np.testing.assert_array_equal(predict(trained.head, x), predict(loaded.head, x))
        assert metadata["encoder_id"] == "hg32"
        assert loaded.best_epoch == trained.best_epoch
        assert loaded.best_dev_cosine == trained.best_dev_cosine
        assert len(loaded.history) == len(trained.history)

    def test_wrong_feature_dim_fails_at_predict(self, tmp_path):
        train, dev = toy_sets()
        trained = train_head(train, dev, TrainConfig(batch_size=5, epochs=1, seed=0))
        path = tmp_path / "head.ckpt.json"
        save_head(trained, path)
        loaded, _ = load_head(path)
        with pytest.raises(ValueError, match="columns"):
            predict(loaded.head, np.zeros((1, 9)))

    def test_truncated_file_is_corrupt_not_crash(self, tmp_path):
        train, dev = toy_sets()
        trained = train_head(train, dev, TrainConfig(batch_size=5, epochs=1, seed=0))
        path = tmp_path / "head.ckpt.json"
        save_head(trained, path)
        data = path.read_bytes()
        path.write_bytes(data[: len(data) // 2])
        with pytest.raises(CheckpointError, match="corrupt"):
            load_head(path)

    def test_version_mismatch_rejected(self, tmp_path):
        import json

        train, dev = toy_sets()
        trained = train_head(train, dev, TrainConfig(batch_size=5, epochs=1, seed=0))
        path = tmp_path / "head.ckpt.json"
        save_head(trained, path)
        doc = json.loads(path.read_text())
        doc["format_version"] = 99
        path.write_text(json.dumps(doc))
        with pytest.raises(CheckpointError, match="version"):
            load_head(path)

    def test_save_is_byte_deterministic(self, tmp_path):
        train, dev = toy_sets()
        cfg = TrainConfig(epochs=2, seed=0)
        a_path, b_path = tmp_path / "a.json", tmp_path / "b.json"
        save_head(train_head(train, dev, cfg), a_path)
        save_head(train_head(train, dev, cfg), b_path)
        assert a_path.read_bytes() == b_path.read_bytes()
