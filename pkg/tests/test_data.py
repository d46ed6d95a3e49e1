import io

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tullink.data import (
    CheckinRecord,
    DatasetSplit,
    FormatSpec,
    build_vocab,
    compute_stats,
    group_by_user,
    parse_checkins,
    segment_trajectories,
    split_dataset,
    time_slice,
    top_users,
)
from tullink.errors import DataError
from tullink.synthetic import SynthConfig, generate

from conftest import make_traj


def test_parse_tab_line():
    recs, bad = parse_checkins(io.StringIO("u1\t1262322000\tp7\tFood\t40.7\t-74.0\n"))
    assert bad == 0
    assert recs == [CheckinRecord("u1", 1262322000, "p7", "Food", 40.7, -74.0)]


def test_parse_empty_stream():
    assert parse_checkins(io.StringIO("")) == ([], 0)


def test_parse_skips_bad_timestamp():
    text = "u1\t100\tp1\tc\nu1\tnoon\tp2\tc\nu2\t200\tp3\tc\n"
    recs, bad = parse_checkins(io.StringIO(text))
    assert bad == 1
    assert [r.poi_id for r in recs] == ["p1", "p3"]


def test_parse_too_many_bad_lines_is_fatal():
    with pytest.raises(DataError, match="2 of 3"):
        parse_checkins(io.StringIO("u\tx\tp\tc\nu\ty\tp\tc\nu\t1\tp\tc\n"))


def test_parse_iso_and_remapped_columns():
    fmt = FormatSpec(delimiter=",", user_col=1, time_col=0, poi_col=3, category_col=2, lat_col=None, lon_col=None)
    recs, _ = parse_checkins(["2010-01-01T01:00:00Z,u9,Bar,p1\n", "2010-01-01T02:00:00,u9,Bar,p2\n"], fmt)
    assert [r.timestamp for r in recs] == [1262307600, 1262311200]
    assert recs[0].user_id == "u9" and recs[0].category_id == "Bar"


def test_parse_unreadable_stream():
    class Broken:
        def __iter__(self):
            raise OSError("disk gone")

    with pytest.raises(DataError):
        parse_checkins(Broken())


def test_segment_same_day():
    recs = [CheckinRecord("u1", 200, "b", "c"), CheckinRecord("u1", 100, "a", "c")]
    (traj,) = segment_trajectories(recs)
    assert len(traj) == 2 and traj.records[0].poi_id == "a"


def test_segment_across_midnight():
    trajs = segment_trajectories([CheckinRecord("u1", 100, "a", "c"), CheckinRecord("u1", 90000, "b", "c")])
    assert [t.interval_index for t in trajs] == [0, 1]


def test_segment_two_users():
    trajs = segment_trajectories([CheckinRecord("u1", 100, "a", "c"), CheckinRecord("u2", 100, "a", "c")])
    assert sorted(t.user_id for t in trajs) == ["u1", "u2"]


def test_segment_empty():
    assert segment_trajectories([]) == []


@pytest.mark.parametrize(
    "seconds, expected",
    [(13 * 3600 + 45 * 60, 13), (0, 0), (86399, 23), (86400 * 5 + 3600, 1)],
)
def test_time_slice(seconds, expected):
    assert time_slice(1262304000 + seconds) == expected


def test_time_slice_coarse():
    assert time_slice(13 * 3600, 4) == 2


def test_vocab_first_occurrence_and_oov():
    vocab = build_vocab([make_traj("u", 0, [1, 2, 3], pois=["a", "b", "a"])])
    assert vocab.poi_index == {"<oov>": 0, "a": 1, "b": 2}
    assert vocab.poi("z") == 0
    assert vocab.category("never") == 0
    assert vocab.num_time_slices == 24


def test_vocab_empty_is_fatal():
    with pytest.raises(DataError):
        build_vocab([])


@pytest.mark.parametrize("n, sizes", [(10, (6, 2, 2)), (5, (3, 1, 1)), (6, (3, 1, 2)), (20, (12, 4, 4))])
def test_split_sizes(n, sizes):
    trajs = [make_traj("u", d, [1]) for d in range(n)]
    split = split_dataset({"u": trajs})
    assert (len(split.train["u"]), len(split.validation["u"]), len(split.test["u"])) == sizes
    ordered = split.train["u"] + split.validation["u"] + split.test["u"]
    assert [t.interval_index for t in ordered] == list(range(n))


def test_split_drops_small_users():
    split = split_dataset({"a": [make_traj("a", d, [1]) for d in range(4)], "b": [make_traj("b", d, [1]) for d in range(5)]})
    assert list(split.train) == ["b"]


def test_split_all_dropped_is_fatal():
    with pytest.raises(DataError):
        split_dataset({"a": [make_traj("a", d, [1]) for d in range(4)]})


def test_stats_small():
    trajs = [make_traj(u, d, [9], pois=[f"{u}{d}"]) for u in ("a", "b") for d in range(3)]
    split = DatasetSplit(train=group_by_user(trajs))
    stats = compute_stats(split)
    assert stats.num_trajectories == 6 and stats.num_users == 2 and stats.num_pois == 6
    assert stats.duration == 2.0


def test_stats_empty():
    assert compute_stats(DatasetSplit()) == compute_stats(DatasetSplit(train={"u": []}))
    assert compute_stats(DatasetSplit()).num_trajectories == 0


def test_top_users():
    recs = [CheckinRecord(u, i, "p", "c") for u, n in (("a", 3), ("b", 1), ("c", 2)) for i in range(n)]
    assert {r.user_id for r in top_users(recs, 2)} == {"a", "c"}


records_strategy = st.lists(
    st.builds(
        CheckinRecord,
        user_id=st.sampled_from(["u1", "u2", "u3"]),
        timestamp=st.integers(0, 30 * 86400),
        poi_id=st.sampled_from(["a", "b", "c"]),
        category_id=st.just("x"),
    ),
    max_size=200,
)


@given(records_strategy)
def test_segmentation_partitions_records(records):
    trajs = segment_trajectories(records)
    for user in {r.user_id for r in records}:
        mine = [t for t in trajs if t.user_id == user]
        assert sum(len(t) for t in mine) == sum(r.user_id == user for r in records)
    for t in trajs:
        stamps = [r.timestamp for r in t.records]
        assert stamps == sorted(stamps)
        assert {s // 86400 for s in stamps} == {t.interval_index}
    assert sorted(id(r) for t in trajs for r in t.records) == sorted(id(r) for r in records)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_split_is_chronological_and_deterministic(seed):
    recs = generate(SynthConfig(num_users=3, num_days=12, seed=seed, checkins_per_day=(1, 3)))
    per_user = group_by_user(segment_trajectories(recs))
    split = split_dataset(per_user)
    again = split_dataset(group_by_user(segment_trajectories(list(recs))))
    assert split == again
    for u in split.train:
        assert max(t.end for t in split.train[u]) < min(t.start for t in split.validation[u])
        assert max(t.end for t in split.validation[u]) < min(t.start for t in split.test[u])
    vocab = build_vocab(DatasetSplit.flatten(split.train))
    assert vocab == build_vocab(DatasetSplit.flatten(again.train))
    for part in split.parts():
        for t in DatasetSplit.flatten(part):
            for r in t.records:
                assert 0 <= vocab.poi(r.poi_id) < vocab.num_pois
                assert 0 <= vocab.category(r.category_id) < vocab.num_categories
