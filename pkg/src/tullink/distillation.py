"""Mutual distillation objective: two directional losses summed."""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F

from tullink.errors import ConfigError


@dataclass
class DistillationConfig:
    temperature: float = 4.0
    lambda_: float = 10.0
    disable_l2: bool = False
    disable_input_ce: bool = False

    def validate(self) -> None:
        if not self.temperature > 0:
            raise ConfigError(f"distill.temperature must be positive, got {self.temperature}")
        if self.lambda_ < 0:
            raise ConfigError(f"distill.lambda must be non-negative, got {self.lambda_}")


@dataclass
class LossBreakdown:
    ce_in: torch.Tensor
    ce_au: torch.Tensor
    kd: torch.Tensor
    total: torch.Tensor

    def detached(self) -> dict[str, float]:
        return {k: getattr(self, k).item() for k in ("ce_in", "ce_au", "kd", "total")}


def kd_term(first: torch.Tensor, second: torch.Tensor, temperature: float) -> torch.Tensor:
    """Per-row ``KL(softmax(first/T) || softmax(second/T))``, summed over classes.

    Both sides are computed through ``log_softmax`` so large logits stay finite.
    """
    if first.shape != second.shape:
        raise ValueError(f"logit shapes differ: {tuple(first.shape)} vs {tuple(second.shape)}")
    log_p = F.log_softmax(first / temperature, dim=-1)
    log_q = F.log_softmax(second / temperature, dim=-1)
    return (log_p.exp() * (log_p - log_q)).sum(-1)


def directional_loss(
    z_in: torch.Tensor, z_au: torch.Tensor, labels: torch.Tensor, cfg: DistillationConfig
) -> LossBreakdown:
    """Cross-entropy of both encoders' logits plus the scaled KL between them.

    Every term is a batch mean. Nothing is detached, so both encoders are
    trained by every term.
    """
    num_users = z_in.shape[-1]
    if labels.numel() and (int(labels.min()) < 0 or int(labels.max()) >= num_users):
        raise ValueError(f"labels must lie in [0, {num_users})")
    if z_in.shape[0] != labels.shape[0] or z_au.shape[0] != labels.shape[0]:
        raise ValueError("logits and labels disagree on batch size")
    ce_au = F.cross_entropy(z_au, labels)
    if cfg.disable_input_ce:
        ce_in = torch.zeros((), dtype=z_in.dtype)
    else:
        ce_in = F.cross_entropy(z_in, labels)
    t = cfg.temperature
    if cfg.lambda_ == 0:
        kd = torch.zeros((), dtype=z_in.dtype)
    else:
        kd = cfg.lambda_ * t * t * kd_term(z_in, z_au, t).mean()
    return LossBreakdown(ce_in, ce_au, kd, ce_in + ce_au + kd)


def total_loss(l1: LossBreakdown, l2: LossBreakdown | None) -> torch.Tensor:
    return l1.total if l2 is None else l1.total + l2.total
