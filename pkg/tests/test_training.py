import numpy as np
import pytest
import torch

from tullink.augmentation import AugmentationConfig
from tullink.data import DatasetSplit, build_vocab
from tullink.distillation import DistillationConfig
from tullink.errors import ConfigError, DataError, DivergenceError
from tullink.evaluation import acc_at_k, labels_for, link
from tullink.model import ModelConfig
from tullink import training
from tullink.training import EarlyStopping, TrainConfig, lr_at, make_batch, train


def tiny(**kw):
    kw.setdefault("model", ModelConfig(dim=16, heads=2, ff_mult=2))
    kw.setdefault("batch_size", 16)
    return TrainConfig(**kw)


@pytest.mark.parametrize("epoch, lr", [(0, 0.001), (4, 0.001), (5, 0.0009), (10, 0.00081)])
def test_lr_schedule(epoch, lr):
    assert lr_at(epoch, TrainConfig()) == pytest.approx(lr, rel=1e-12)


def test_early_stopping_rule():
    stopper = EarlyStopping(3)
    seq = [0.2, 0.3, 0.3, 0.3, 0.3]
    stops = [stopper.step(e, s) for e, s in enumerate(seq)]
    assert stops == [False, False, False, False, True]
    assert stopper.best_epoch == 1 and stopper.best == 0.3  # second epoch, 0-based index 1


def test_config_validation():
    with pytest.raises(ConfigError):
        TrainConfig(lr0=0).validate()
    with pytest.raises(ConfigError):
        TrainConfig(decay=1.0).validate()
    with pytest.raises(ConfigError):
        TrainConfig(patience=0).validate()
    with pytest.raises(ConfigError):
        TrainConfig(distill=DistillationConfig(temperature=0)).validate()
    with pytest.raises(ConfigError):
        TrainConfig(model=ModelConfig(dim=30, heads=8)).validate()


def _items(split):
    return [(u, i) for u, ts in split.train.items() for i in range(len(ts))]


def test_make_batch_none_strategy(small_split):
    cfg = tiny(augmentation=AugmentationConfig("none", 8))
    vocab = build_vocab(DatasetSplit.flatten(small_split.train))
    b_in, b_au, y = make_batch(_items(small_split)[:4], small_split.train, vocab, cfg, np.random.default_rng(0))
    for name in ("pois", "categories", "slots", "times", "lengths"):
        assert torch.equal(getattr(b_in, name), getattr(b_au, name))
    assert y.tolist() == [vocab.user_index[u] for u, _ in _items(small_split)[:4]]


def test_make_batch_random_contains_input(small_split):
    cfg = tiny(augmentation=AugmentationConfig("random", 2))
    vocab = build_vocab(DatasetSplit.flatten(small_split.train))
    items = _items(small_split)[:4]
    b_in, b_au, _ = make_batch(items, small_split.train, vocab, cfg, np.random.default_rng(0))
    assert torch.all(b_au.lengths >= b_in.lengths)
    again = make_batch(items, small_split.train, vocab, cfg, np.random.default_rng(0))
    assert torch.equal(b_au.pois, again[1].pois)


def test_one_epoch_only(small_split):
    model = train(small_split, tiny(max_epochs=1, patience=1))
    assert model.epochs_run == 1 and model.best_epoch == 0


def test_seed_determinism(small_split, monkeypatch):
    orders = []
    real = training.epoch_order
    monkeypatch.setattr(training, "epoch_order", lambda items, rng: orders.append(real(items, rng)) or orders[-1])
    a = train(small_split, tiny(max_epochs=1))
    b = train(small_split, tiny(max_epochs=1))
    assert orders[0] == orders[1]
    assert a.history[0].train_loss == b.history[0].train_loss


def test_checkpoint_is_best_epoch(trained_tiny):
    model, split = trained_tiny
    val = DatasetSplit.flatten(split.validation)
    recomputed = acc_at_k(link(model, val), labels_for(model, val), 1)
    assert recomputed == pytest.approx(model.best_val_acc1, abs=1e-6)
    assert model.best_val_acc1 == max(r.val_acc1 for r in model.history)


def test_loss_trend(small_split):
    model = train(small_split, tiny(max_epochs=4, patience=10))
    assert model.history[3].train_loss < model.history[0].train_loss


def test_divergence_is_reported(small_split, monkeypatch):
    def nan_loss(*a, **k):
        return torch.tensor(float("nan"), requires_grad=True), None, None

    monkeypatch.setattr(training, "batch_loss", nan_loss)
    with pytest.raises(DivergenceError, match="epoch 0, batch 0"):
        train(small_split, tiny(max_epochs=1))


def test_needs_validation(small_split):
    with pytest.raises(DataError):
        train(DatasetSplit(train=small_split.train), tiny())


def test_disable_l2_skips_swapped_pass(small_split, monkeypatch):
    calls = []
    real = training.directional_loss
    monkeypatch.setattr(training, "directional_loss", lambda *a: calls.append(1) or real(*a))
    train(small_split, tiny(max_epochs=1, distill=DistillationConfig(disable_l2=True)))
    n_batches = -(-sum(len(t) for t in small_split.train.values()) // 16)
    assert len(calls) == n_batches


def test_both_encoders_get_gradients(small_split):
    cfg = tiny()
    vocab = build_vocab(DatasetSplit.flatten(small_split.train))
    from tullink.model import TULModel

    torch.manual_seed(0)
    net = TULModel(vocab, cfg.model)
    batch = make_batch(_items(small_split)[:8], small_split.train, vocab, cfg, np.random.default_rng(0))
    loss, _, _ = training.batch_loss(net, *batch, cfg.distill)
    loss.backward()
    for part in (net.recurrent, net.attention, net.embedding):
        assert any(p.grad is not None and p.grad.abs().sum() > 0 for p in part.parameters())
    assert net.attention.pe.freqs.grad is not None
