"""Batch construction, optimisation with step-decayed Adam, and early stopping."""

from __future__ import annotations

import copy
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import torch

from tullink.augmentation import AugmentationConfig, augment
from tullink.data import DatasetSplit, SubTrajectory, Vocabulary, build_vocab
from tullink.distillation import DistillationConfig, directional_loss, total_loss
from tullink.embedding import TrajectoryBatch, encode_batch
from tullink.errors import ConfigError, DataError, DivergenceError
from tullink.evaluation import acc_at_k, labels_for, link
from tullink.model import ModelConfig, TULModel

logger = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    lr0: float = 0.001
    decay: float = 0.10
    decay_period: int = 5
    patience: int = 3
    batch_size: int = 64
    max_epochs: int = 50
    seed: int = 0
    clip_norm: float = 5.0
    augmentation: AugmentationConfig = field(default_factory=AugmentationConfig)
    distill: DistillationConfig = field(default_factory=DistillationConfig)
    model: ModelConfig = field(default_factory=ModelConfig)

    def validate(self) -> None:
        if not self.lr0 > 0:
            raise ConfigError(f"train.lr0 must be positive, got {self.lr0}")
        if not 0 <= self.decay < 1:
            raise ConfigError(f"train.decay must lie in [0, 1), got {self.decay}")
        if self.decay_period < 1 or self.patience < 1:
            raise ConfigError("train.decay_period and train.patience must be >= 1")
        if self.batch_size < 1 or self.max_epochs < 1:
            raise ConfigError("train.batch_size and train.max_epochs must be >= 1")
        self.augmentation.validate()
        self.distill.validate()
        self.model.validate()


@dataclass
class EpochRecord:
    epoch: int
    lr: float
    train_loss: float
    val_acc1: float
    seconds: float


@dataclass
class TrainedModel:
    network: TULModel
    vocab: Vocabulary
    config: TrainConfig
    history: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = -1
    best_val_acc1: float = float("nan")

    @property
    def epochs_run(self) -> int:
        return len(self.history)


def lr_at(epoch: int, cfg: TrainConfig) -> float:
    return cfg.lr0 * (1 - cfg.decay) ** (epoch // cfg.decay_period)


class EarlyStopping:
    """Tracks the best validation score; ``step`` returns True once training should stop."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best = -math.inf
        self.best_epoch = -1
        self.bad_epochs = 0

    def step(self, epoch: int, score: float) -> bool:
        if score > self.best:
            self.best, self.best_epoch, self.bad_epochs = score, epoch, 0
            return False
        self.bad_epochs += 1
        return self.bad_epochs >= self.patience


def make_batch(
    items: Sequence[tuple[str, int]],
    history: Mapping[str, Sequence[SubTrajectory]],
    vocab: Vocabulary,
    cfg: TrainConfig,
    rng: np.random.Generator,
) -> tuple[TrajectoryBatch, TrajectoryBatch, torch.Tensor]:
    """Encode a batch of training trajectories and their augmented counterparts.

    ``items`` are ``(user, position)`` pairs into ``history``, the per-user
    training pools; augmentation never sees validation or test data.
    """
    inputs, augmented, labels = [], [], []
    for user, pos in items:
        pool = history[user]
        inputs.append(pool[pos])
        augmented.append(augment(pool, pos, cfg.augmentation, rng))
        labels.append(vocab.user_index[user])
    unit = cfg.model.time_unit
    return (
        encode_batch(inputs, vocab, unit),
        encode_batch(augmented, vocab, unit),
        torch.tensor(labels, dtype=torch.long),
    )


def batch_loss(net: TULModel, batch_in, batch_au, labels, cfg: DistillationConfig):
    z_in_rnn, z_au_att, z_in_att, z_au_rnn = net(batch_in, batch_au, swapped=not cfg.disable_l2)
    l1 = directional_loss(z_in_rnn, z_au_att, labels, cfg)
    l2 = None if cfg.disable_l2 else directional_loss(z_in_att, z_au_rnn, labels, cfg)
    return total_loss(l1, l2), l1, l2


def epoch_order(items: Sequence, rng: np.random.Generator) -> list:
    return [items[i] for i in rng.permutation(len(items))]


def _val_acc1(model: TrainedModel, trajs: Sequence[SubTrajectory]) -> float:
    return acc_at_k(link(model, trajs), labels_for(model, trajs), 1)


def train(split: DatasetSplit, cfg: TrainConfig, vocab: Vocabulary | None = None) -> TrainedModel:
    """Optimise the summed mutual-distillation loss; keep the best-validation weights.

    Model selection uses validation Acc@1 of the recurrent encoder on
    un-augmented trajectories, i.e. the deployment path.
    """
    cfg.validate()
    train_trajs = DatasetSplit.flatten(split.train)
    val_trajs = DatasetSplit.flatten(split.validation)
    if not train_trajs or not val_trajs:
        raise DataError("training needs non-empty train and validation splits")
    vocab = vocab or build_vocab(train_trajs, cfg.model.num_time_slices)
    val_trajs = [t for t in val_trajs if t.user_id in vocab.user_index]

    torch.manual_seed(cfg.seed)
    order_rng = np.random.default_rng(cfg.seed)
    aug_rng = np.random.default_rng(cfg.augmentation.seed)

    net = TULModel(vocab, cfg.model)
    model = TrainedModel(net, vocab, cfg)
    params = [p for p in net.parameters() if p.requires_grad]
    opt = torch.optim.Adam(params, lr=cfg.lr0)
    items = [(u, i) for u, trajs in split.train.items() for i in range(len(trajs))]
    stopper = EarlyStopping(cfg.patience)
    best_state = copy.deepcopy(net.state_dict())

    for epoch in range(cfg.max_epochs):
        started = time.perf_counter()
        lr = lr_at(epoch, cfg)
        for group in opt.param_groups:
            group["lr"] = lr
        net.train()
        losses = []
        ordered = epoch_order(items, order_rng)
        for b, start in enumerate(range(0, len(ordered), cfg.batch_size)):
            batch_in, batch_au, labels = make_batch(
                ordered[start : start + cfg.batch_size], split.train, vocab, cfg, aug_rng
            )
            loss, _, _ = batch_loss(net, batch_in, batch_au, labels, cfg.distill)
            if not torch.isfinite(loss):
                raise DivergenceError(f"non-finite loss at epoch {epoch}, batch {b}")
            opt.zero_grad()
            loss.backward()
            torch.nn.utils.clip_grad_norm_(params, cfg.clip_norm)
            opt.step()
            losses.append(loss.item())
        val_acc = _val_acc1(model, val_trajs)
        record = EpochRecord(
            epoch, lr, float(np.mean(losses)), val_acc, time.perf_counter() - started
        )
        model.history.append(record)
        logger.info(
            "epoch %d lr=%.6f loss=%.4f val_acc@1=%.4f (%.1fs)",
            epoch, lr, record.train_loss, val_acc, record.seconds,
        )
        stop = stopper.step(epoch, val_acc)
        if stopper.best_epoch == epoch:
            best_state = copy.deepcopy(net.state_dict())
        if stop:
            logger.info("early stop after epoch %d (best epoch %d)", epoch, stopper.best_epoch)
            break

    net.load_state_dict(best_state)
    model.best_epoch = stopper.best_epoch
    model.best_val_acc1 = stopper.best
    return model
