"""Checkpoint directory: ``manifest.json``, ``vocab.json`` and one ``.npy`` blob per tensor."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict
from pathlib import Path

import numpy as np
import torch

from tullink import config as config_mod
from tullink.data import Vocabulary
from tullink.errors import DataError
from tullink.model import TULModel
from tullink.training import EpochRecord, TrainedModel

FORMAT_VERSION = 1


def vocab_hashes(vocab: Vocabulary) -> dict[str, str]:
    def digest(obj) -> str:
        return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()

    return {
        "poi_index": digest(vocab.poi_index),
        "category_index": digest(vocab.category_index),
        "user_index": digest(vocab.user_index),
    }


def save(model: TrainedModel, directory, run_config: config_mod.RunConfig | None = None) -> Path:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    run_config = run_config or config_mod.RunConfig(train=model.config)
    tensors = {}
    for name, tensor in model.network.state_dict().items():
        fname = f"{name}.npy"
        np.save(out / fname, tensor.detach().cpu().numpy(), allow_pickle=False)
        tensors[name] = {"file": fname, "shape": list(tensor.shape), "dtype": str(tensor.dtype)}
    (out / "vocab.json").write_text(json.dumps(model.vocab.to_dict(), sort_keys=True))
    manifest = {
        "format_version": FORMAT_VERSION,
        "config": config_mod.to_flat(run_config),
        "vocab_hashes": vocab_hashes(model.vocab),
        "num_users": model.vocab.num_users,
        "best_epoch": model.best_epoch,
        "best_val_acc1": model.best_val_acc1,
        "history": [asdict(r) for r in model.history],
        "tensors": tensors,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return out


def load(directory) -> tuple[TrainedModel, config_mod.RunConfig]:
    root = Path(directory)
    try:
        manifest = json.loads((root / "manifest.json").read_text())
        vocab = Vocabulary.from_dict(json.loads((root / "vocab.json").read_text()))
    except (OSError, ValueError, KeyError) as exc:
        raise DataError(f"cannot read checkpoint {root}: {exc}") from exc
    if manifest.get("format_version") != FORMAT_VERSION:
        raise DataError(f"unsupported checkpoint version {manifest.get('format_version')}")
    if vocab_hashes(vocab) != manifest["vocab_hashes"]:
        raise DataError("vocabulary does not match the manifest hashes")
    run_config = config_mod.from_flat(manifest["config"])
    net = TULModel(vocab, run_config.train.model)
    state = {}
    for name, meta in manifest["tensors"].items():
        arr = np.load(root / meta["file"], allow_pickle=False)
        if list(arr.shape) != meta["shape"]:
            raise DataError(f"tensor {name} has shape {arr.shape}, manifest says {meta['shape']}")
        state[name] = torch.from_numpy(arr)
    net.load_state_dict(state)
    net.eval()
    model = TrainedModel(
        net,
        vocab,
        run_config.train,
        history=[EpochRecord(**r) for r in manifest["history"]],
        best_epoch=manifest["best_epoch"],
        best_val_acc1=manifest["best_val_acc1"],
    )
    return model, run_config
