"""Self-attention trajectory encoder with learnable-frequency temporal position encoding."""

from __future__ import annotations

import logging

import torch
from torch import nn

from tullink.embedding import EmbeddedTrajectory
from tullink.recurrent import MLPHead

logger = logging.getLogger(__name__)

PE_MODES = ("temporal", "index")


def sinusoid_frequencies(dim: int) -> torch.Tensor:
    q = torch.arange(dim // 2, dtype=torch.float32)
    return 1.0 / torch.pow(10000.0, 2 * q / dim)


def temporal_pe(times: torch.Tensor, freqs: torch.Tensor) -> torch.Tensor:
    """Sin/cos features of ``freqs * times``.

    Frequency ``q`` fills slot ``2q`` with ``sin`` and ``2q + 1`` with ``cos``,
    so ``pe(t) @ pe(t + delta)`` equals ``sum_q cos(freqs[q] * delta)``.
    ``times`` has shape ``(..., m)``; the result has shape ``(..., m, 2 * len(freqs))``.
    """
    angles = times.unsqueeze(-1) * freqs
    return torch.stack([torch.sin(angles), torch.cos(angles)], dim=-1).flatten(-2)


class TemporalPositionEncoding(nn.Module):
    """``mode="temporal"`` encodes visit times with trained frequencies;
    ``mode="index"`` is the fixed sinusoid over token positions."""

    def __init__(self, dim: int, mode: str = "temporal"):
        super().__init__()
        if mode not in PE_MODES:
            raise ValueError(f"pe mode must be one of {PE_MODES}, got {mode!r}")
        if dim % 2:
            raise ValueError(f"position encoding dim must be even, got {dim}")
        self.mode = mode
        freqs = sinusoid_frequencies(dim)
        if mode == "temporal":
            self.freqs = nn.Parameter(freqs)
        else:
            self.register_buffer("freqs", freqs)

    def forward(self, times: torch.Tensor) -> torch.Tensor:
        if self.mode == "index":
            times = torch.arange(times.shape[-1], dtype=self.freqs.dtype).expand_as(times)
        return temporal_pe(times, self.freqs)


def keep_recent(x: torch.Tensor, lengths: torch.Tensor, max_len: int) -> torch.Tensor:
    """Gather the last ``max_len`` valid steps of each right-padded row of ``x``."""
    start = (lengths - max_len).clamp(min=0)
    idx = start[:, None] + torch.arange(max_len)[None, :]
    if x.dim() == 3:
        idx = idx.unsqueeze(-1).expand(-1, -1, x.shape[-1])
    return torch.gather(x, 1, idx)


class AttentionEncoder(nn.Module):
    def __init__(
        self,
        dim: int,
        num_users: int,
        layers: int = 2,
        heads: int = 8,
        ff_mult: int = 4,
        dropout: float = 0.1,
        max_len: int = 512,
        pe_mode: str = "temporal",
    ):
        super().__init__()
        if dim % heads:
            raise ValueError(f"model dim {dim} not divisible by {heads} heads")
        self.max_len = max_len
        self.pe = TemporalPositionEncoding(dim, pe_mode)
        layer = nn.TransformerEncoderLayer(
            dim, heads, ff_mult * dim, dropout=dropout, batch_first=True
        )
        self.encoder = nn.TransformerEncoder(layer, layers, enable_nested_tensor=False)
        self.beta_raw = nn.Parameter(torch.zeros(()))
        self.head = MLPHead(dim, dim, num_users)

    @property
    def beta(self) -> torch.Tensor:
        return torch.sigmoid(self.beta_raw)

    def represent(self, x: torch.Tensor, times: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        h = self.encoder(x + self.pe(times), src_key_padding_mask=~mask)
        w = mask.unsqueeze(-1).to(h.dtype)
        return (h * w).sum(1) / w.sum(1)

    def blend(self, emb: EmbeddedTrajectory) -> torch.Tensor:
        x_p, x_c, times, lengths = emb.x_poi, emb.x_cat, emb.times, emb.lengths
        if int(lengths.min()) < 1:
            raise ValueError("attention encoder needs trajectories of length >= 1")
        if x_p.shape[1] > self.max_len:
            if int(lengths.max()) > self.max_len:
                logger.warning("truncating trajectories to the most recent %d check-ins", self.max_len)
            x_p = keep_recent(x_p, lengths, self.max_len)
            x_c = keep_recent(x_c, lengths, self.max_len)
            times = keep_recent(times, lengths, self.max_len)
            times = times - times[:, :1]
            lengths = lengths.clamp(max=self.max_len)
        mask = torch.arange(x_p.shape[1])[None, :] < lengths[:, None]
        b = self.beta
        return b * self.represent(x_p, times, mask) + (1 - b) * self.represent(x_c, times, mask)

    def forward(self, emb: EmbeddedTrajectory) -> torch.Tensor:
        return self.head(self.blend(emb))
