"""Component/loss ablations and the augmentation k-sweep, averaged over seeds."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from tullink import config as config_mod
from tullink.data import DatasetSplit
from tullink.errors import ConfigError
from tullink.evaluation import MetricReport, evaluate, labels_for, link
from tullink.training import TrainedModel, train

# each variant flips exactly one switch relative to the default run
VARIANTS: dict[str, dict[str, str]] = {
    "default": {},
    "no-mutual": {"distill.disable_l2": "true"},
    "no-kl": {"distill.lambda": "0"},
    "no-input-ce": {"distill.disable_input_ce": "true"},
    "no-context": {"model.use_context": "false"},
    "index-pe": {"pe.mode": "index"},
}
ALIASES = {"tul-mut": "no-mutual", "tul-ca": "no-context", "tul-ta": "index-pe"}


def resolve(name: str) -> str:
    name = ALIASES.get(name.lower(), name.lower())
    if name not in VARIANTS:
        raise ConfigError(f"unknown variant {name!r}; choose from {sorted(VARIANTS)}")
    return name


def variant_config(base: config_mod.RunConfig, name: str) -> config_mod.RunConfig:
    cfg = copy.deepcopy(base)
    for key, value in VARIANTS[resolve(name)].items():
        config_mod.set_value(cfg, key, value)
    cfg.validate()
    return cfg


def with_seed(base: config_mod.RunConfig, seed: int) -> config_mod.RunConfig:
    cfg = copy.deepcopy(base)
    cfg.train.seed = seed
    cfg.train.augmentation.seed = seed
    return cfg


def fit_and_score(split: DatasetSplit, cfg: config_mod.RunConfig) -> tuple[MetricReport, TrainedModel]:
    model = train(split, cfg.train)
    test = [t for t in DatasetSplit.flatten(split.test) if t.user_id in model.vocab.user_index]
    return evaluate(link(model, test), labels_for(model, test)), model


@dataclass
class Comparison:
    reports: dict[str, list[MetricReport]] = field(default_factory=dict)

    def mean(self, name: str, metric: str = "macro_f1") -> float:
        return float(np.mean([_metric(r, metric) for r in self.reports[name]]))

    def table(self, metrics: Sequence[str] = ("acc1", "acc5", "macro_precision", "macro_recall", "macro_f1")) -> str:
        width = max(len(n) for n in self.reports)
        header = f"{'variant':<{width}}  " + "  ".join(f"{m:>15}" for m in metrics)
        lines = [header]
        for name in self.reports:
            cells = "  ".join(f"{self.mean(name, m) * 100:14.2f}%" for m in metrics)
            lines.append(f"{name:<{width}}  {cells}")
        return "\n".join(lines)


def _metric(report: MetricReport, metric: str) -> float:
    if metric.startswith("acc"):
        k = int(metric[3:])
        return report.acc_at.get(k, max(report.acc_at.values()))
    return getattr(report, metric)


def compare(
    split_for_seed: Callable[[int], DatasetSplit],
    base: config_mod.RunConfig,
    runs: Mapping[str, config_mod.RunConfig] | Iterable[str],
    seeds: Sequence[int],
) -> Comparison:
    """Train every configuration on every seed and collect test metrics.

    ``runs`` is either variant names or a mapping of label to a full config.
    """
    if not isinstance(runs, Mapping):
        runs = {resolve(n): variant_config(base, n) for n in runs}
    out = Comparison({name: [] for name in runs})
    for seed in seeds:
        split = split_for_seed(seed)
        for name, cfg in runs.items():
            report, _ = fit_and_score(split, with_seed(cfg, seed))
            out.reports[name].append(report)
    return out


def k_sweep_configs(base: config_mod.RunConfig, strategy: str, ks: Sequence[int]) -> dict[str, config_mod.RunConfig]:
    runs = {}
    for k in ks:
        cfg = copy.deepcopy(base)
        cfg.train.augmentation.strategy = strategy
        cfg.train.augmentation.k = k
        cfg.validate()
        runs[f"{strategy} k={k}"] = cfg
    return runs
