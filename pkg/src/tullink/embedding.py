"""Batched index encoding of trajectories and the multi-semantic check-in embedding."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import torch
from torch import nn

from tullink.data import SubTrajectory, Vocabulary, time_slice


@dataclass
class TrajectoryBatch:
    """Right-padded index tensors for a list of trajectories.

    ``times`` holds visit times in ``time_unit`` units relative to each
    trajectory's earliest check-in, so sinusoid arguments stay small.
    """

    pois: torch.Tensor  # (B, m) long
    categories: torch.Tensor  # (B, m) long
    slots: torch.Tensor  # (B, m) long
    times: torch.Tensor  # (B, m) float
    lengths: torch.Tensor  # (B,) long

    @property
    def mask(self) -> torch.Tensor:
        m = self.pois.shape[1]
        return torch.arange(m)[None, :] < self.lengths[:, None]

    def __len__(self) -> int:
        return self.pois.shape[0]


@dataclass
class EmbeddedTrajectory:
    x_poi: torch.Tensor  # (B, m, d)
    x_cat: torch.Tensor  # (B, m, d)
    times: torch.Tensor  # (B, m)
    lengths: torch.Tensor  # (B,)

    @property
    def mask(self) -> torch.Tensor:
        m = self.x_poi.shape[1]
        return torch.arange(m, device=self.lengths.device)[None, :] < self.lengths[:, None]


def encode_batch(
    trajs: Sequence[SubTrajectory], vocab: Vocabulary, time_unit: float = 3600.0
) -> TrajectoryBatch:
    if not trajs:
        raise ValueError("cannot encode an empty batch")
    m = max(len(t) for t in trajs)
    b = len(trajs)
    pois = torch.zeros(b, m, dtype=torch.long)
    cats = torch.zeros(b, m, dtype=torch.long)
    slots = torch.zeros(b, m, dtype=torch.long)
    times = torch.zeros(b, m, dtype=torch.float32)
    lengths = torch.empty(b, dtype=torch.long)
    for i, t in enumerate(trajs):
        if not len(t):
            raise ValueError("trajectory has no check-ins")
        t0 = min(r.timestamp for r in t.records)
        n = len(t)
        lengths[i] = n
        pois[i, :n] = torch.tensor([vocab.poi(r.poi_id) for r in t.records])
        cats[i, :n] = torch.tensor([vocab.category(r.category_id) for r in t.records])
        slots[i, :n] = torch.tensor([time_slice(r.timestamp, vocab.num_time_slices) for r in t.records])
        times[i, :n] = torch.tensor([(r.timestamp - t0) / time_unit for r in t.records])
    return TrajectoryBatch(pois, cats, slots, times, lengths)


class CheckinEmbedding(nn.Module):
    """tanh of the concatenated POI (or category) and time-slice affine lookups.

    A row lookup in ``W`` is the product of ``W`` with a one-hot vector, so the
    tables are stored as ``nn.Embedding`` weights. The time part is shared by
    the POI and category sequences.
    """

    def __init__(
        self,
        num_pois: int,
        num_categories: int,
        num_time_slices: int,
        dim: int = 512,
        use_context: bool = True,
    ):
        super().__init__()
        if dim % 2:
            raise ValueError(f"embedding dim must be even, got {dim}")
        self.dim = dim
        half = dim // 2
        self.poi = nn.Embedding(num_pois, half)
        self.category = nn.Embedding(num_categories, half)
        self.slot = nn.Embedding(num_time_slices, half)
        self.poi_bias = nn.Parameter(torch.empty(half))
        self.category_bias = nn.Parameter(torch.empty(half))
        self.slot_bias = nn.Parameter(torch.empty(half))
        self.use_context = use_context
        self.reset_parameters()

    def reset_parameters(self) -> None:
        bound = 1.0 / math.sqrt(self.dim)
        for p in self.parameters():
            nn.init.uniform_(p, -bound, bound)
        if not self.use_context:
            # category and time information removed: zero and freeze the tables
            for table in (self.category, self.slot):
                nn.init.zeros_(table.weight)
                table.weight.requires_grad_(False)

    def forward(self, batch: TrajectoryBatch) -> EmbeddedTrajectory:
        n_p, n_c, n_s = self.poi.num_embeddings, self.category.num_embeddings, self.slot.num_embeddings
        if (
            batch.pois.max() >= n_p
            or batch.categories.max() >= n_c
            or batch.slots.max() >= n_s
        ):
            raise ValueError("batch indices exceed the embedding tables; vocabulary mismatch")
        time_part = self.slot(batch.slots) + self.slot_bias
        x_poi = torch.tanh(torch.cat([self.poi(batch.pois) + self.poi_bias, time_part], dim=-1))
        x_cat = torch.tanh(
            torch.cat([self.category(batch.categories) + self.category_bias, time_part], dim=-1)
        )
        return EmbeddedTrajectory(x_poi, x_cat, batch.times, batch.lengths)
