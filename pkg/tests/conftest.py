import sys

import pytest

from tullink.data import CheckinRecord, SubTrajectory, prepare_split
from tullink.model import ModelConfig
from tullink.synthetic import SynthConfig, generate


def make_traj(user, day, hours, pois=None, cats=None):
    pois = pois or [f"p{i}" for i in range(len(hours))]
    cats = cats or ["c"] * len(hours)
    recs = tuple(
        CheckinRecord(user, day * 86400 + int(h * 3600), p, c) for h, p, c in zip(hours, pois, cats)
    )
    return SubTrajectory(user, day, recs)


@pytest.fixture(scope="session")
def small_split():
    return prepare_split(generate(SynthConfig(num_users=4, num_days=20, seed=3)))


@pytest.fixture
def tiny_model_cfg():
    return ModelConfig(dim=16, heads=2, ff_mult=2, dropout=0.0)


@pytest.fixture(scope="session")
def trained_tiny(small_split):
    from tullink.training import TrainConfig, train

    cfg = TrainConfig(max_epochs=2, batch_size=16, model=ModelConfig(dim=16, heads=2, ff_mult=2))
    return train(small_split, cfg), small_split


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
