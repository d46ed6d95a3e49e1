"""The full network: one embedding layer feeding a recurrent and an attention encoder."""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from tullink.data import Vocabulary
from tullink.embedding import CheckinEmbedding, TrajectoryBatch
from tullink.errors import ConfigError
from tullink.recurrent import RecurrentEncoder
from tullink.temporal import PE_MODES, AttentionEncoder


@dataclass
class ModelConfig:
    dim: int = 512
    hidden: int = 0  # 0 means "same as dim"
    use_context: bool = True
    num_time_slices: int = 24
    layers: int = 2
    heads: int = 8
    ff_mult: int = 4
    dropout: float = 0.1
    max_len: int = 512
    pe_mode: str = "temporal"
    time_unit: float = 3600.0

    def validate(self) -> None:
        if self.dim <= 0 or self.dim % 2:
            raise ConfigError(f"model.dim must be a positive even integer, got {self.dim}")
        if self.dim % self.heads:
            raise ConfigError(f"model.dim={self.dim} is not divisible by transformer.heads={self.heads}")
        if self.pe_mode not in PE_MODES:
            raise ConfigError(f"pe.mode must be one of {PE_MODES}, got {self.pe_mode!r}")
        if 86400 % self.num_time_slices:
            raise ConfigError(f"{self.num_time_slices} time slices do not divide a day")
        if self.time_unit <= 0 or self.max_len < 1:
            raise ConfigError("pe.time_unit and transformer.max_len must be positive")


class TULModel(nn.Module):
    def __init__(self, vocab: Vocabulary, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.embedding = CheckinEmbedding(
            vocab.num_pois, vocab.num_categories, vocab.num_time_slices, cfg.dim, cfg.use_context
        )
        self.recurrent = RecurrentEncoder(cfg.dim, vocab.num_users, cfg.hidden or cfg.dim)
        self.attention = AttentionEncoder(
            cfg.dim,
            vocab.num_users,
            layers=cfg.layers,
            heads=cfg.heads,
            ff_mult=cfg.ff_mult,
            dropout=cfg.dropout,
            max_len=cfg.max_len,
            pe_mode=cfg.pe_mode,
        )

    def forward(self, batch_in: TrajectoryBatch, batch_au: TrajectoryBatch, swapped: bool = True):
        """Return ``(z_in_rnn, z_au_att, z_in_att, z_au_rnn)``.

        The last two feed the swapped loss and are ``None`` when ``swapped`` is false.
        """
        emb_in = self.embedding(batch_in)
        emb_au = self.embedding(batch_au)
        z_in_rnn = self.recurrent(emb_in)
        z_au_att = self.attention(emb_au)
        if not swapped:
            return z_in_rnn, z_au_att, None, None
        return z_in_rnn, z_au_att, self.attention(emb_in), self.recurrent(emb_au)

    def score(self, batch: TrajectoryBatch) -> torch.Tensor:
        """Deployment path: user logits from the recurrent encoder alone."""
        return self.recurrent(self.embedding(batch))
