import numpy as np
import pytest

import ruralhq.training as training_mod
from ruralhq.errors import DivergedLoss, EmptyDataset, EmptySplit, ShapeMismatch
from ruralhq.nn import NetworkSpec, DenseBlockSpec, TransitionSpec, build_network
from ruralhq.training import (
    TrainConfig,
    load_image_batch,
    predict_corpus,
    split_dataset,
    train,
)


def _small_spec():
    return NetworkSpec(
        input_side=16,
        stem_channels=8,
        blocks=tuple(DenseBlockSpec(1, 4) for _ in range(4)),
        transitions=tuple(TransitionSpec(0.5) for _ in range(3)),
    )


def eq1_reference(pred: np.ndarray, targets: np.ndarray) -> float:
    """Independent two-nested-sum evaluation of the per-bin MSE."""
    n, bins = pred.shape
    total = 0.0
    for j in range(bins):
        inner = 0.0
        for i in range(n):
            inner += (float(pred[i, j]) - float(targets[i, j])) ** 2
        total += inner / n
    return total / bins


class TestSplit:
    def test_100_ids(self):
        ids = [f"i{k}" for k in range(100)]
        tr, va, te = split_dataset(ids, (0.8, 0.1, 0.1), seed=42)
        assert (len(tr), len(va), len(te)) == (80, 10, 10)

    def test_small_partition_contract(self):
        ids = [f"i{k}" for k in range(10)]
        tr, va, te = split_dataset(ids, (0.8, 0.1, 0.1), seed=0)
        assert (len(tr), len(va), len(te)) == (8, 1, 1)
        assert sorted(tr + va + te) == sorted(ids)
        assert not (set(tr) & set(va)) and not (set(tr) & set(te)) and not (set(va) & set(te))

    def test_deterministic(self):
        ids = [f"i{k}" for k in range(37)]
        assert split_dataset(ids, (0.8, 0.1, 0.1), 7) == split_dataset(ids, (0.8, 0.1, 0.1), 7)

    def test_empty(self):
        with pytest.raises(EmptyDataset):
            split_dataset([], (0.8, 0.1, 0.1), 0)

    def test_bad_ratios(self):
        with pytest.raises(ValueError):
            split_dataset(["a", "b"], (0.8, 0.2, 0.1), 0)


class TestConfig:
    def test_defaults_match_training_protocol(self):
        config = TrainConfig()
        assert config.batch_size == 32
        assert config.epochs == 100
        assert config.lr0 == 1e-5
        assert config.lr_decay_factor == 0.1
        assert config.split == (0.8, 0.1, 0.1)

    def test_kv_file_and_overrides(self, tmp_path):
        path = tmp_path / "train.cfg"
        path.write_text("epochs=5\nlr0=0.001\nsplit=0.6,0.2,0.2\n# comment\n")
        config = TrainConfig.from_kv_file(path, seed=9)
        assert config.epochs == 5 and config.lr0 == 0.001
        assert config.split == (0.6, 0.2, 0.2)
        assert config.seed == 9

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "train.cfg"
        path.write_text("learning_rate=1\n")
        with pytest.raises(ValueError):
            TrainConfig.from_kv_file(path)


class TestTrainLoop:
    def test_zero_epochs_returns_init(self, small_corpus):
        spec = _small_spec()
        config = TrainConfig(epochs=0, seed=3)
        params, history = train(small_corpus, config, spec)
        init = build_network(spec, seed=3)
        assert len(history) == 0
        for name in init.names():
            assert np.array_equal(params[name], init[name])

    def test_loss_matches_independent_reevaluation(self, small_corpus):
        audited = []

        def on_batch(epoch, preds, targets, loss):
            audited.append((preds.copy(), targets.copy(), loss))

        config = TrainConfig(epochs=3, lr0=1e-3, seed=1)
        train(small_corpus, config, _small_spec(), on_batch=on_batch)
        assert audited
        for preds, targets, loss in audited:
            assert loss == pytest.approx(eq1_reference(preds, targets), abs=1e-10)

    def test_plateau_decays_lr_by_exact_factor(self, small_corpus, monkeypatch):
        monkeypatch.setattr(training_mod, "evaluate_loss", lambda *a, **k: 0.5)
        config = TrainConfig(epochs=8, lr0=1e-3, plateau_patience=5, seed=1)
        _, history = train(small_corpus, config, _small_spec())
        lrs = [rec.lr for rec in history]
        assert lrs[:6] == [1e-3] * 6
        assert lrs[6] == pytest.approx(1e-3 * 0.1, rel=1e-12)

    def test_lr_non_increasing_and_best_val(self, small_corpus):
        config = TrainConfig(epochs=6, lr0=1e-3, plateau_patience=2, seed=2)
        params, history = train(small_corpus, config, _small_spec())
        lrs = [rec.lr for rec in history]
        assert all(a >= b for a, b in zip(lrs, lrs[1:]))
        # Returned parameters achieve the minimum recorded validation loss.
        ids = small_corpus.qualified_images()
        _, val_ids, _ = split_dataset(ids, config.split, config.seed)
        x_val = load_image_batch(small_corpus, val_ids, 16)
        y_val = np.array([small_corpus.distribution_of(i).p for i in val_ids], dtype=np.float32)
        from ruralhq.nn.network import DenseScoreNet

        best = training_mod.evaluate_loss(DenseScoreNet(_small_spec()), params, x_val, y_val, 32)
        assert best <= min(rec.val_loss for rec in history) + 1e-12

    def test_learning_progress_quick(self, small_corpus):
        config = TrainConfig(epochs=8, lr0=1e-3, seed=1)
        _, history = train(small_corpus, config, _small_spec())
        assert history.epochs[-1].val_loss < history.epochs[0].val_loss

    def test_diverged_loss(self, small_corpus, monkeypatch):
        from ruralhq.nn.network import DenseScoreNet

        real = DenseScoreNet.loss_and_gradients

        def poisoned(self, params, x, targets):
            loss, grads, preds = real(self, params, x, targets)
            return float("nan"), grads, preds

        monkeypatch.setattr(DenseScoreNet, "loss_and_gradients", poisoned)
        with pytest.raises(DivergedLoss):
            train(small_corpus, TrainConfig(epochs=1, seed=1), _small_spec())

    def test_empty_corpus_is_empty_split(self, tmp_path):
        from ruralhq.corpus import Corpus

        with pytest.raises(EmptySplit):
            train(Corpus(), TrainConfig(epochs=1), _small_spec())

    def test_empty_split(self, small_corpus):
        # 120 qualified images at a 0.8/0.1/0.1 split is fine; shrink the
        # corpus to 2 images so validation or test ends up empty.
        ids = small_corpus.qualified_images()[:2]
        from ruralhq.corpus import Corpus

        tiny = Corpus(root=small_corpus.root)
        tiny.ingest_images([small_corpus.image(i) for i in ids], check_rasters=False)
        for ballot in small_corpus.ballots():
            if ballot.image_id in ids:
                tiny.submit_ballot(ballot)
        with pytest.raises(EmptySplit):
            train(tiny, TrainConfig(epochs=1), _small_spec())

    def test_history_csv(self, small_corpus, tmp_path):
        config = TrainConfig(epochs=2, lr0=1e-3, seed=1)
        _, history = train(small_corpus, config, _small_spec())
        path = tmp_path / "history.csv"
        history.write_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "epoch,train_loss,val_loss,lr"
        assert len(lines) == 3


class TestPredict:
    def test_rows_on_simplex_and_moments(self, small_corpus):
        spec = _small_spec()
        params = build_network(spec, seed=5)
        ids = small_corpus.image_ids()[:7]
        preds = predict_corpus(params, ids, small_corpus)
        for dist in preds.values():
            assert abs(sum(dist.p) - 1.0) <= 1e-6
            assert 1.0 <= dist.mean <= 10.0
            assert not dist.qualified and dist.n_ballots == 0

    def test_duplicates_collapse(self, small_corpus):
        params = build_network(_small_spec(), seed=5)
        ids = small_corpus.image_ids()[:3]
        preds = predict_corpus(params, ids + ids, small_corpus)
        assert sorted(preds) == sorted(ids)

    def test_batch_size_invariance(self, small_corpus):
        params = build_network(_small_spec(), seed=5)
        ids = small_corpus.image_ids()[:40]
        one = predict_corpus(params, ids, small_corpus, batch_size=1)
        many = predict_corpus(params, ids, small_corpus, batch_size=32)
        for image_id in ids:
            assert one[image_id].mean == pytest.approx(many[image_id].mean, abs=1e-5)

    def test_wrong_raster_size(self, small_corpus):
        params = build_network(NetworkSpec(
            input_side=32,
            stem_channels=8,
            blocks=tuple(DenseBlockSpec(1, 4) for _ in range(4)),
            transitions=tuple(TransitionSpec(0.5) for _ in range(3)),
        ), seed=5)
        with pytest.raises(ShapeMismatch):
            predict_corpus(params, small_corpus.image_ids()[:1], small_corpus)
