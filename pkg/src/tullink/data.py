"""Check-in parsing, daily segmentation, vocabularies and the chronological split."""

from __future__ import annotations

import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable, Mapping, Sequence, TextIO

from tullink.errors import DataError

logger = logging.getLogger(__name__)

SECONDS_PER_DAY = 86400
OOV = "<oov>"


@dataclass(frozen=True)
class CheckinRecord:
    user_id: str
    timestamp: int
    poi_id: str
    category_id: str
    lat: float | None = None
    lon: float | None = None

    def __post_init__(self):
        if self.timestamp < 0:
            raise ValueError(f"negative timestamp {self.timestamp}")
        if not self.poi_id or not self.category_id:
            raise ValueError("poi_id and category_id must be non-empty")


@dataclass(frozen=True)
class SubTrajectory:
    """Check-ins of one user inside one UTC day, in chronological order."""

    user_id: str
    interval_index: int
    records: tuple[CheckinRecord, ...]

    def __len__(self) -> int:
        return len(self.records)

    @property
    def start(self) -> int:
        return self.records[0].timestamp

    @property
    def end(self) -> int:
        return self.records[-1].timestamp


@dataclass
class Vocabulary:
    poi_index: dict[str, int]
    category_index: dict[str, int]
    user_index: dict[str, int]
    num_time_slices: int = 24

    @property
    def num_pois(self) -> int:
        return len(self.poi_index)

    @property
    def num_categories(self) -> int:
        return len(self.category_index)

    @property
    def num_users(self) -> int:
        return len(self.user_index)

    def poi(self, poi_id: str) -> int:
        return self.poi_index.get(poi_id, 0)

    def category(self, category_id: str) -> int:
        return self.category_index.get(category_id, 0)

    def to_dict(self) -> dict:
        return {
            "poi_index": self.poi_index,
            "category_index": self.category_index,
            "user_index": self.user_index,
            "num_time_slices": self.num_time_slices,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> Vocabulary:
        return cls(
            poi_index=dict(d["poi_index"]),
            category_index=dict(d["category_index"]),
            user_index=dict(d["user_index"]),
            num_time_slices=int(d["num_time_slices"]),
        )


@dataclass
class DatasetSplit:
    train: dict[str, list[SubTrajectory]] = field(default_factory=dict)
    validation: dict[str, list[SubTrajectory]] = field(default_factory=dict)
    test: dict[str, list[SubTrajectory]] = field(default_factory=dict)

    def parts(self):
        return (self.train, self.validation, self.test)

    @staticmethod
    def flatten(part: Mapping[str, Sequence[SubTrajectory]]) -> list[SubTrajectory]:
        return [t for trajs in part.values() for t in trajs]


@dataclass(frozen=True)
class DatasetStats:
    num_users: int = 0
    num_trajectories: int = 0
    num_pois: int = 0
    num_categories: int = 0
    duration: float = 0.0


@dataclass(frozen=True)
class FormatSpec:
    """Column layout of a check-in file. Column positions are 0-based."""

    delimiter: str = "\t"
    user_col: int = 0
    time_col: int = 1
    poi_col: int = 2
    category_col: int = 3
    lat_col: int | None = 4
    lon_col: int | None = 5
    time_format: str | None = None  # strptime pattern; None means epoch int or ISO-8601
    skip_header: bool = False

    @classmethod
    def from_columns(
        cls,
        columns: str,
        delimiter: str = "\t",
        time_format: str | None = None,
        skip_header: bool = False,
    ) -> FormatSpec:
        """Build a spec from column names in file order, e.g. ``"user,poi,category,_,lat,lon,_,time"``.

        ``_`` marks an ignored column; ``lat`` and ``lon`` are optional.
        """
        names = [c.strip() for c in columns.split(",")]
        pos = {name: i for i, name in enumerate(names) if name != "_"}
        unknown = set(pos) - {"user", "time", "poi", "category", "lat", "lon"}
        missing = {"user", "time", "poi", "category"} - set(pos)
        if unknown or missing:
            raise ValueError(f"bad column list {columns!r}: unknown {sorted(unknown)}, missing {sorted(missing)}")
        return cls(
            delimiter=delimiter,
            user_col=pos["user"],
            time_col=pos["time"],
            poi_col=pos["poi"],
            category_col=pos["category"],
            lat_col=pos.get("lat"),
            lon_col=pos.get("lon"),
            time_format=time_format or None,
            skip_header=skip_header,
        )


# raw export layouts
PRESETS = {
    "tsv": FormatSpec(),
    # Foursquare NYC/TKY dumps: user, venue, category id, category name, lat, lon, tz offset, UTC time
    "foursquare": FormatSpec.from_columns(
        "user,poi,category,_,lat,lon,_,time", time_format="%a %b %d %H:%M:%S %z %Y"
    ),
}


def parse_timestamp(value: str, time_format: str | None = None) -> int:
    value = value.strip()
    if time_format is not None:
        dt = datetime.strptime(value, time_format)
    else:
        try:
            return int(value)
        except ValueError:
            dt = datetime.fromisoformat(value.replace("Z", "+00:00"))
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def _optional_float(fields: list[str], col: int | None) -> float | None:
    if col is None or col >= len(fields) or not fields[col].strip():
        return None
    return float(fields[col])


def parse_checkins(
    stream: TextIO | Iterable[str], fmt: FormatSpec | None = None
) -> tuple[list[CheckinRecord], int]:
    """Parse a line-oriented check-in log.

    Returns the records in input order and the number of malformed lines
    that were skipped. Raises :class:`DataError` when the stream cannot be
    read or more than half of the non-blank lines are malformed.
    """
    fmt = fmt or FormatSpec()
    records: list[CheckinRecord] = []
    bad = 0
    total = 0
    needed = max(fmt.user_col, fmt.time_col, fmt.poi_col, fmt.category_col)
    try:
        for lineno, line in enumerate(stream):
            if fmt.skip_header and lineno == 0:
                continue
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            total += 1
            fields = line.split(fmt.delimiter)
            try:
                if len(fields) <= needed:
                    raise ValueError("too few fields")
                records.append(
                    CheckinRecord(
                        user_id=fields[fmt.user_col].strip(),
                        timestamp=parse_timestamp(fields[fmt.time_col], fmt.time_format),
                        poi_id=fields[fmt.poi_col].strip(),
                        category_id=fields[fmt.category_col].strip(),
                        lat=_optional_float(fields, fmt.lat_col),
                        lon=_optional_float(fields, fmt.lon_col),
                    )
                )
            except ValueError as exc:
                bad += 1
                logger.debug("skipping line %d: %s", lineno + 1, exc)
    except (OSError, UnicodeDecodeError) as exc:
        raise DataError(f"cannot read check-in stream: {exc}") from exc
    if total and bad * 2 > total:
        raise DataError(f"{bad} of {total} lines are malformed")
    if bad:
        logger.warning("skipped %d malformed line(s) out of %d", bad, total)
    return records, bad


def read_checkins(path, fmt: FormatSpec | None = None) -> list[CheckinRecord]:
    try:
        with open(path, encoding="utf-8") as fh:
            records, _ = parse_checkins(fh, fmt)
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc}") from exc
    return records


def write_checkins(records: Iterable[CheckinRecord], stream: TextIO) -> None:
    for r in records:
        fields = [r.user_id, str(r.timestamp), r.poi_id, r.category_id]
        if r.lat is not None and r.lon is not None:
            fields += [repr(r.lat), repr(r.lon)]
        stream.write("\t".join(fields) + "\n")


def top_users(records: Sequence[CheckinRecord], n: int) -> list[CheckinRecord]:
    """Keep only the ``n`` users with the most check-ins (ties by user id)."""
    counts = Counter(r.user_id for r in records)
    keep = {u for u, _ in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:n]}
    return [r for r in records if r.user_id in keep]


def segment_trajectories(records: Iterable[CheckinRecord]) -> list[SubTrajectory]:
    """Split each user's check-ins into UTC-day sub-trajectories.

    Output is ordered by user (first appearance) and then by day.
    """
    by_user: dict[str, list[CheckinRecord]] = defaultdict(list)
    for r in records:
        by_user[r.user_id].append(r)
    out = []
    for user, recs in by_user.items():
        recs.sort(key=lambda r: r.timestamp)  # stable: equal stamps keep input order
        day_recs: list[CheckinRecord] = []
        day = None
        for r in recs:
            d = r.timestamp // SECONDS_PER_DAY
            if d != day and day_recs:
                out.append(SubTrajectory(user, day, tuple(day_recs)))
                day_recs = []
            day = d
            day_recs.append(r)
        if day_recs:
            out.append(SubTrajectory(user, day, tuple(day_recs)))
    return out


def group_by_user(trajs: Iterable[SubTrajectory]) -> dict[str, list[SubTrajectory]]:
    per_user: dict[str, list[SubTrajectory]] = defaultdict(list)
    for t in trajs:
        per_user[t.user_id].append(t)
    for ts in per_user.values():
        ts.sort(key=lambda t: t.interval_index)
    return dict(per_user)


def time_slice(timestamp: int, num_time_slices: int = 24) -> int:
    if SECONDS_PER_DAY % num_time_slices:
        raise ValueError(f"{num_time_slices} slices do not divide a day evenly")
    return (timestamp % SECONDS_PER_DAY) // (SECONDS_PER_DAY // num_time_slices)


def build_vocab(train_trajectories: Iterable[SubTrajectory], num_time_slices: int = 24) -> Vocabulary:
    """Index POIs, categories and users by first occurrence; index 0 is the OOV slot."""
    pois = {OOV: 0}
    cats = {OOV: 0}
    users: dict[str, int] = {}
    for traj in train_trajectories:
        users.setdefault(traj.user_id, len(users))
        for r in traj.records:
            pois.setdefault(r.poi_id, len(pois))
            cats.setdefault(r.category_id, len(cats))
    if not users:
        raise DataError("cannot build a vocabulary from an empty training set")
    if SECONDS_PER_DAY % num_time_slices:
        raise DataError(f"{num_time_slices} time slices do not divide a day evenly")
    return Vocabulary(pois, cats, users, num_time_slices)


def split_dataset(
    per_user: Mapping[str, Sequence[SubTrajectory]], min_trajectories: int = 5
) -> DatasetSplit:
    """Chronological per-user split.

    The oldest ``floor(0.8 n)`` sub-trajectories form the training pool and the
    rest go to test. The most recent ``ceil(0.2 pool)`` of the pool become the
    validation set.
    """
    split = DatasetSplit()
    dropped = []
    for user, trajs in per_user.items():
        n = len(trajs)
        if n < min_trajectories:
            dropped.append(user)
            continue
        trajs = sorted(trajs, key=lambda t: t.interval_index)
        pool = (4 * n) // 5
        n_val = math.ceil(pool / 5)
        split.train[user] = list(trajs[: pool - n_val])
        split.validation[user] = list(trajs[pool - n_val : pool])
        split.test[user] = list(trajs[pool:])
    if dropped:
        logger.warning(
            "dropped %d user(s) with fewer than %d sub-trajectories", len(dropped), min_trajectories
        )
    if not split.train:
        raise DataError("no user has enough sub-trajectories to split")
    return split


def prepare_split(
    records: Sequence[CheckinRecord], min_trajectories: int = 5, top_n_users: int | None = None
) -> DatasetSplit:
    if top_n_users:
        records = top_users(records, top_n_users)
    return split_dataset(group_by_user(segment_trajectories(records)), min_trajectories)


def compute_stats(split: DatasetSplit) -> DatasetStats:
    users = set()
    pois = set()
    cats = set()
    n_traj = 0
    t_min, t_max = None, None
    for part in split.parts():
        for user, trajs in part.items():
            if trajs:
                users.add(user)
            for t in trajs:
                n_traj += 1
                t_min = t.start if t_min is None else min(t_min, t.start)
                t_max = t.end if t_max is None else max(t_max, t.end)
                for r in t.records:
                    pois.add(r.poi_id)
                    cats.add(r.category_id)
    if not n_traj:
        return DatasetStats()
    return DatasetStats(
        num_users=len(users),
        num_trajectories=n_traj,
        num_pois=len(pois),
        num_categories=len(cats),
        duration=(t_max - t_min) / SECONDS_PER_DAY,
    )
