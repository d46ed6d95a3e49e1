"""LSTM trajectory encoder used for both training and deployment."""

from __future__ import annotations

import torch
from torch import nn
from torch.nn.utils.rnn import pack_padded_sequence

from tullink.embedding import EmbeddedTrajectory


class MLPHead(nn.Module):
    def __init__(self, in_dim: int, hidden: int, num_users: int):
        super().__init__()
        self.net = nn.Sequential(nn.Linear(in_dim, hidden), nn.Tanh(), nn.Linear(hidden, num_users))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.net(x)


class RecurrentEncoder(nn.Module):
    """One LSTM shared by the POI and category sequences.

    Each sequence is summarised by the hidden state at its last valid step;
    the two summaries are blended with ``alpha = sigmoid(alpha_raw)`` and
    mapped to user logits.
    """

    def __init__(self, dim: int, num_users: int, hidden: int | None = None):
        super().__init__()
        hidden = hidden or dim
        self.lstm = nn.LSTM(dim, hidden, num_layers=1, batch_first=True)
        self.alpha_raw = nn.Parameter(torch.zeros(()))
        self.head = MLPHead(hidden, hidden, num_users)

    @property
    def alpha(self) -> torch.Tensor:
        return torch.sigmoid(self.alpha_raw)

    def represent(self, x: torch.Tensor, lengths: torch.Tensor) -> torch.Tensor:
        packed = pack_padded_sequence(x, lengths.cpu(), batch_first=True, enforce_sorted=False)
        _, (h_n, _) = self.lstm(packed)
        return h_n[-1]

    def blend(self, emb: EmbeddedTrajectory) -> torch.Tensor:
        if int(emb.lengths.min()) < 1:
            raise ValueError("recurrent encoder needs trajectories of length >= 1")
        a = self.alpha
        return a * self.represent(emb.x_poi, emb.lengths) + (1 - a) * self.represent(
            emb.x_cat, emb.lengths
        )

    def forward(self, emb: EmbeddedTrajectory) -> torch.Tensor:
        return self.head(self.blend(emb))
