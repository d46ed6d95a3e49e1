"""Flat ``key=value`` run configuration with dotted namespaces."""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Mapping

from tullink.data import PRESETS, FormatSpec
from tullink.errors import ConfigError
from tullink.synthetic import SynthConfig
from tullink.training import TrainConfig


@dataclass
class DataConfig:
    min_trajectories: int = 5
    top_n_users: int = 0  # 0 keeps every user


@dataclass
class FormatConfig:
    """Input layout. ``columns`` (if set) overrides the preset's column order."""

    preset: str = "tsv"
    columns: str = ""
    delimiter: str = ""
    time_format: str = ""
    skip_header: bool = False

    def spec(self) -> FormatSpec:
        if self.preset not in PRESETS:
            raise ConfigError(f"format.preset must be one of {sorted(PRESETS)}, got {self.preset!r}")
        base = PRESETS[self.preset]
        delimiter = _unescape(self.delimiter) if self.delimiter else base.delimiter
        time_format = self.time_format or base.time_format
        if self.columns:
            try:
                return FormatSpec.from_columns(self.columns, delimiter, time_format, self.skip_header)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        return replace(base, delimiter=delimiter, time_format=time_format, skip_header=self.skip_header or base.skip_header)


def _unescape(text: str) -> str:
    return {"\\t": "\t", "tab": "\t", "comma": ","}.get(text, text)


@dataclass
class RunConfig:
    train: TrainConfig = field(default_factory=TrainConfig)
    data: DataConfig = field(default_factory=DataConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)
    format: FormatConfig = field(default_factory=FormatConfig)

    def validate(self) -> None:
        self.format.spec()
        self.train.validate()
        self.synth.validate()
        if self.data.min_trajectories < 1 or self.data.top_n_users < 0:
            raise ConfigError("data.min_trajectories must be >= 1 and data.top_n_users >= 0")


# public key -> attribute path inside RunConfig
KEYS: dict[str, tuple[str, ...]] = {
    "train.lr0": ("train", "lr0"),
    "train.decay": ("train", "decay"),
    "train.decay_period": ("train", "decay_period"),
    "train.patience": ("train", "patience"),
    "train.batch_size": ("train", "batch_size"),
    "train.max_epochs": ("train", "max_epochs"),
    "train.seed": ("train", "seed"),
    "train.clip_norm": ("train", "clip_norm"),
    "augment.strategy": ("train", "augmentation", "strategy"),
    "augment.k": ("train", "augmentation", "k"),
    "augment.seed": ("train", "augmentation", "seed"),
    "distill.temperature": ("train", "distill", "temperature"),
    "distill.lambda": ("train", "distill", "lambda_"),
    "distill.disable_l2": ("train", "distill", "disable_l2"),
    "distill.disable_input_ce": ("train", "distill", "disable_input_ce"),
    "model.dim": ("train", "model", "dim"),
    "model.hidden": ("train", "model", "hidden"),
    "model.use_context": ("train", "model", "use_context"),
    "model.num_time_slices": ("train", "model", "num_time_slices"),
    "transformer.layers": ("train", "model", "layers"),
    "transformer.heads": ("train", "model", "heads"),
    "transformer.ff_mult": ("train", "model", "ff_mult"),
    "transformer.dropout": ("train", "model", "dropout"),
    "transformer.max_len": ("train", "model", "max_len"),
    "pe.mode": ("train", "model", "pe_mode"),
    "pe.time_unit": ("train", "model", "time_unit"),
    "data.min_trajectories": ("data", "min_trajectories"),
    "data.top_n_users": ("data", "top_n_users"),
    "synth.num_users": ("synth", "num_users"),
    "synth.num_days": ("synth", "num_days"),
    "synth.checkins_per_day": ("synth", "checkins_per_day"),
    "synth.pois_per_user": ("synth", "pois_per_user"),
    "synth.overlap": ("synth", "overlap"),
    "synth.shared_pois": ("synth", "shared_pois"),
    "synth.category_count": ("synth", "category_count"),
    "synth.time_jitter": ("synth", "time_jitter"),
    "synth.seed": ("synth", "seed"),
    "synth.start": ("synth", "start"),
    "format.preset": ("format", "preset"),
    "format.columns": ("format", "columns"),
    "format.delimiter": ("format", "delimiter"),
    "format.time_format": ("format", "time_format"),
    "format.skip_header": ("format", "skip_header"),
}


def _owner(cfg: RunConfig, path: tuple[str, ...]):
    obj = cfg
    for name in path[:-1]:
        obj = getattr(obj, name)
    return obj


def get(cfg: RunConfig, key: str) -> Any:
    path = KEYS[key]
    return getattr(_owner(cfg, path), path[-1])


def _coerce(key: str, raw: Any, current: Any) -> Any:
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    try:
        if isinstance(current, bool):
            if text.lower() in ("1", "true", "yes", "on"):
                return True
            if text.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if isinstance(current, int):
            return int(text)
        if isinstance(current, float):
            return float(text)
        if isinstance(current, tuple):
            return tuple(int(x) for x in text.split(","))
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None
    return text


def set_value(cfg: RunConfig, key: str, raw: Any) -> None:
    if key not in KEYS:
        raise ConfigError(f"unknown config key {key!r}")
    path = KEYS[key]
    owner = _owner(cfg, path)
    setattr(owner, path[-1], _coerce(key, raw, getattr(owner, path[-1])))


def _format(value: Any) -> str:
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def to_flat(cfg: RunConfig) -> dict[str, str]:
    return {key: _format(get(cfg, key)) for key in KEYS}


def dumps(cfg: RunConfig) -> str:
    return "".join(f"{k}={v}\n" for k, v in to_flat(cfg).items())


def parse_lines(lines: Iterable[str]) -> dict[str, str]:
    out = {}
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {n} is not key=value: {line!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def from_flat(values: Mapping[str, Any], base: RunConfig | None = None) -> RunConfig:
    cfg = base or RunConfig()
    for key, value in values.items():
        set_value(cfg, key, value)
    return cfg


def load(path=None, overrides: Iterable[str] = (), env: Mapping[str, str] | None = None) -> RunConfig:
    """File values, then ``key=value`` overrides, then ``TUL_SEED`` from the environment."""
    values: dict[str, str] = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                values.update(parse_lines(fh))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    values.update(parse_lines(overrides))
    env = os.environ if env is None else env
    if env.get("TUL_SEED"):
        values["train.seed"] = env["TUL_SEED"]
    cfg = from_flat(values)
    cfg.validate()
    return cfg
