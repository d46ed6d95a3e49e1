import json

import numpy as np
import pytest
import torch

from tullink import checkpoint
from tullink import config as config_mod
from tullink.data import DatasetSplit
from tullink.errors import DataError
from tullink.evaluation import link
from tullink.training import train


def test_save_load_round_trip(trained_tiny, tmp_path):
    model, split = trained_tiny
    checkpoint.save(model, tmp_path / "ck")
    manifest = json.loads((tmp_path / "ck" / "manifest.json").read_text())
    assert manifest["best_epoch"] == model.best_epoch
    assert set(manifest["vocab_hashes"]) == {"poi_index", "category_index", "user_index"}
    for name, meta in manifest["tensors"].items():
        assert (tmp_path / "ck" / meta["file"]).exists()
    loaded, cfg = checkpoint.load(tmp_path / "ck")
    assert cfg.train == model.config
    assert loaded.vocab == model.vocab
    trajs = DatasetSplit.flatten(split.test)
    np.testing.assert_array_equal(link(loaded, trajs).scores, link(model, trajs).scores)


def test_tampered_vocab_rejected(trained_tiny, tmp_path):
    model, _ = trained_tiny
    out = checkpoint.save(model, tmp_path / "ck")
    vocab = json.loads((out / "vocab.json").read_text())
    vocab["user_index"]["intruder"] = 99
    (out / "vocab.json").write_text(json.dumps(vocab))
    with pytest.raises(DataError, match="hashes"):
        checkpoint.load(out)


def test_missing_checkpoint(tmp_path):
    with pytest.raises(DataError):
        checkpoint.load(tmp_path / "nope")


def test_config_echo_reproduces_run(small_split, tmp_path):
    cfg = config_mod.from_flat(
        {"model.dim": "16", "transformer.heads": "2", "transformer.ff_mult": "2", "train.max_epochs": "2", "train.batch_size": "16"}
    )
    first = train(small_split, cfg.train)
    checkpoint.save(first, tmp_path / "a", cfg)
    _, echoed = checkpoint.load(tmp_path / "a")
    second = train(small_split, echoed.train)
    checkpoint.save(second, tmp_path / "b", echoed)
    for f in sorted((tmp_path / "a").iterdir()):
        if f.suffix == ".npy":
            assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes(), f.name
    a = json.loads((tmp_path / "a" / "manifest.json").read_text())
    b = json.loads((tmp_path / "b" / "manifest.json").read_text())
    assert a["config"] == b["config"]
    assert [h["train_loss"] for h in a["history"]] == [h["train_loss"] for h in b["history"]]
