"""Long-term trajectory augmentation from a user's own history."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from tullink.data import SubTrajectory
from tullink.errors import ConfigError

STRATEGIES = ("neighbor", "random", "none")


@dataclass
class AugmentationConfig:
    strategy: str = "random"
    k: int = 8
    seed: int = 0

    def validate(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"augment.strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        if self.k < 0:
            raise ConfigError(f"augment.k must be non-negative, got {self.k}")
        if self.strategy == "neighbor" and self.k % 2:
            raise ConfigError(f"neighbor augmentation needs an even k, got {self.k}")


def _merge(user_id: str, interval_index: int, parts: Sequence[SubTrajectory]) -> SubTrajectory:
    records = sorted((r for p in parts for r in p.records), key=lambda r: r.timestamp)
    return SubTrajectory(user_id, interval_index, tuple(records))


def neighbor_augment(history: Sequence[SubTrajectory], input_index: int, k: int) -> SubTrajectory:
    """Merge every sub-trajectory whose day lies within ``k/2`` days of the input's.

    Days absent from ``history`` are skipped; the window is truncated at the
    ends of the history rather than wrapped.
    """
    if k % 2:
        raise ConfigError(f"neighbor augmentation needs an even k, got {k}")
    center = history[input_index]
    if k == 0:
        return center
    half = k // 2
    lo, hi = center.interval_index - half, center.interval_index + half
    window = [t for t in history if lo <= t.interval_index <= hi]
    return _merge(center.user_id, center.interval_index, window)


def random_augment(
    history: Sequence[SubTrajectory], input: SubTrajectory, k: int, rng: np.random.Generator
) -> SubTrajectory:
    """Merge ``input`` with ``k`` other sub-trajectories of the same user drawn without replacement."""
    if k == 0:
        return input
    others = [t for t in history if t.interval_index != input.interval_index]
    if len(others) > k:
        picked = rng.choice(len(others), size=k, replace=False)
        others = [others[i] for i in sorted(picked)]
    return _merge(input.user_id, input.interval_index, [input, *others])


def augment(
    history: Sequence[SubTrajectory],
    input_index: int,
    cfg: AugmentationConfig,
    rng: np.random.Generator,
) -> SubTrajectory:
    if cfg.strategy == "none" or cfg.k == 0:
        return history[input_index]
    if cfg.strategy == "neighbor":
        return neighbor_augment(history, input_index, cfg.k)
    return random_augment(history, history[input_index], cfg.k, rng)
