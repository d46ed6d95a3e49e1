"""Seeded generator of separable synthetic check-in logs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from tullink.data import SECONDS_PER_DAY, CheckinRecord
from tullink.errors import ConfigError


@dataclass
class SynthConfig:
    num_users: int = 10
    num_days: int = 60
    checkins_per_day: tuple[int, int] = (2, 4)  # inclusive range
    pois_per_user: int = 8
    overlap: float = 0.2
    shared_pois: int = 16
    category_count: int = 12
    time_jitter: float = 90.0  # minutes, std of the normal jitter
    seed: int = 7
    start: int = 1262304000  # 2010-01-01T00:00:00Z

    def validate(self) -> None:
        lo, hi = self.checkins_per_day
        if self.num_users < 2:
            raise ConfigError("synth.num_users must be at least 2")
        if not 0 <= self.overlap < 1:
            raise ConfigError(f"synth.overlap must lie in [0, 1), got {self.overlap}")
        if not 1 <= lo <= hi:
            raise ConfigError(f"bad synth.checkins_per_day range {self.checkins_per_day}")
        if self.num_days < 1 or self.pois_per_user < 1 or self.category_count < 1:
            raise ConfigError("synth sizes must be positive")
        if self.overlap > 0 and self.shared_pois < 1:
            raise ConfigError("synth.shared_pois must be positive when overlap > 0")
        if self.start % SECONDS_PER_DAY:
            raise ConfigError("synth.start must fall on a UTC midnight")


def generate(cfg: SynthConfig) -> list[CheckinRecord]:
    """Daily check-ins per user, mostly at private POIs around preferred hours.

    Each check-in comes from the shared POI pool with probability
    ``cfg.overlap`` and from the user's private set otherwise. Slot ``j`` of
    a day is centred on the user's ``j``-th preferred hour and jittered by a
    normal draw, clipped so the visit stays within the same day.
    """
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    lo, hi = cfg.checkins_per_day
    n_private = cfg.num_users * cfg.pois_per_user
    n_total = n_private + (cfg.shared_pois if cfg.overlap > 0 else 0)
    poi_category = rng.integers(cfg.category_count, size=n_total)

    records = []
    for u in range(cfg.num_users):
        user = f"u{u:03d}"
        private = np.arange(u * cfg.pois_per_user, (u + 1) * cfg.pois_per_user)
        preference = rng.dirichlet(np.ones(cfg.pois_per_user))
        hours = np.sort(rng.uniform(6, 23, size=hi))
        for day in range(cfg.num_days):
            base = cfg.start + day * SECONDS_PER_DAY
            n = int(rng.integers(lo, hi + 1))
            slots = np.sort(rng.choice(hi, size=n, replace=False))
            stamps = []
            for s in slots:
                minute = hours[s] * 60 + rng.normal(0, cfg.time_jitter)
                stamps.append(int(np.clip(minute * 60, 0, SECONDS_PER_DAY - 1)))
            for ts in sorted(stamps):
                if cfg.overlap > 0 and rng.random() < cfg.overlap:
                    poi = n_private + int(rng.integers(cfg.shared_pois))
                else:
                    poi = int(rng.choice(private, p=preference))
                records.append(
                    CheckinRecord(user, base + ts, f"p{poi:05d}", f"c{poi_category[poi]:03d}")
                )
    return records
