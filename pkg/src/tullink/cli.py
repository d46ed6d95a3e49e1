"""Command-line entry point: synth, prepare, train, eval, link, ablate, sweep."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

from tullink import ablation, checkpoint
from tullink import config as config_mod
from tullink.data import (
    DatasetSplit,
    compute_stats,
    group_by_user,
    prepare_split,
    read_checkins,
    segment_trajectories,
    write_checkins,
)
from tullink.errors import ConfigError, DataError, TulError
from tullink.evaluation import accuracy_curve_csv, evaluate, labels_for, link
from tullink.synthetic import generate
from tullink.training import train

logger = logging.getLogger("tullink")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="key=value config file")
    common.add_argument(
        "--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
        help="override one config key (repeatable)",
    )
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="tullink", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic check-in file")
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("prepare", parents=[common], help="segment, split and summarise a check-in file")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--out", type=Path, help="directory for stats.json and split.json")

    p = sub.add_parser("train", parents=[common], help="train a model and write a checkpoint")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True, help="checkpoint directory")

    p = sub.add_parser("eval", parents=[common], help="evaluate a checkpoint on the held-out split")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--split", choices=("test", "validation"), default="test")
    p.add_argument("--ks", type=_int_list, default=[1, 5, 10])
    p.add_argument("--report", type=Path, help="write the metric report as JSON")
    p.add_argument("--plot", type=Path, help="write accuracy-vs-k as CSV")

    p = sub.add_parser("link", parents=[common], help="rank users for unlabeled trajectories")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--data", type=Path, required=True, help="check-in file; first column groups trajectories")
    p.add_argument("--top", type=int, default=5)
    p.add_argument("--out", type=Path, help="TSV output (default stdout)")

    p = sub.add_parser("ablate", parents=[common], help="compare ablation variants")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument(
        "--variant", dest="variants", action="append",
        help=f"variant to run (repeatable); one of {sorted(ablation.VARIANTS)} or tul-mut/tul-ca/tul-ta",
    )
    p.add_argument("--seeds", type=_int_list, default=[0])
    p.add_argument("--out", type=Path, help="write the comparison as JSON")

    p = sub.add_parser("sweep", parents=[common], help="augmentation k-sweep")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--strategy", choices=("random", "neighbor"), default="random")
    p.add_argument("--ks", type=_int_list, default=[0, 2, 4, 8, 16])
    p.add_argument("--seeds", type=_int_list, default=[0])
    p.add_argument("--out", type=Path, help="write the comparison as JSON")
    return parser


def _split(args, cfg: config_mod.RunConfig) -> DatasetSplit:
    records = read_checkins(args.data, cfg.format.spec())
    if not records:
        raise DataError(f"{args.data} holds no check-ins")
    return prepare_split(records, cfg.data.min_trajectories, cfg.data.top_n_users or None)


def cmd_synth(args, cfg):
    records = generate(cfg.synth)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    with open(args.out, "w", encoding="utf-8") as fh:
        write_checkins(records, fh)
    print(f"wrote {len(records)} check-ins to {args.out}")


def cmd_prepare(args, cfg):
    split = _split(args, cfg)
    stats = compute_stats(split)
    for name, value in asdict(stats).items():
        print(f"{name:<16} {value}")
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "stats.json").write_text(json.dumps(asdict(stats), indent=2))
        listing = {
            part: {u: [[t.interval_index, len(t)] for t in ts] for u, ts in trajs.items()}
            for part, trajs in zip(("train", "validation", "test"), split.parts())
        }
        (args.out / "split.json").write_text(json.dumps(listing, sort_keys=True))
        (args.out / "config.txt").write_text(config_mod.dumps(cfg))


def cmd_train(args, cfg):
    split = _split(args, cfg)
    model = train(split, cfg.train)
    checkpoint.save(model, args.out, cfg)
    print(f"best epoch {model.best_epoch}, validation Acc@1 {model.best_val_acc1:.4f}; saved to {args.out}")


def _load(args) -> tuple:
    model, saved = checkpoint.load(args.checkpoint)
    # command-line overrides apply on top of the configuration echoed in the checkpoint
    cfg = config_mod.from_flat(config_mod.parse_lines(args.overrides), saved)
    return model, cfg


def cmd_eval(args, cfg):
    model, cfg = _load(args)
    split = _split(args, cfg)
    part = split.test if args.split == "test" else split.validation
    trajs = [t for t in DatasetSplit.flatten(part) if t.user_id in model.vocab.user_index]
    if not trajs:
        raise DataError("no evaluation trajectories belong to users known to the checkpoint")
    result = link(model, trajs)
    labels = labels_for(model, trajs)
    report = evaluate(result, labels, args.ks)
    print(report.to_table())
    if args.report:
        args.report.write_text(report.to_json())
    if args.plot:
        args.plot.write_text(accuracy_curve_csv(result, labels))


def cmd_link(args, cfg):
    model, _ = _load(args)
    trajs = [t for ts in group_by_user(segment_trajectories(read_checkins(args.data, cfg.format.spec()))).values() for t in ts]
    result = link(model, trajs)
    users = {i: u for u, i in model.vocab.user_index.items()}
    top = min(args.top, model.vocab.num_users)
    lines = ["trajectory\tday\trank\tuser\tscore"]
    for t, ranking, scores in zip(trajs, result.rankings, result.scores):
        for r in range(top):
            lines.append(f"{t.user_id}\t{t.interval_index}\t{r + 1}\t{users[int(ranking[r])]}\t{scores[r]:.6f}")
    text = "\n".join(lines) + "\n"
    if args.out:
        args.out.write_text(text)
    else:
        sys.stdout.write(text)


def _emit(comparison: ablation.Comparison, out: Path | None):
    print(comparison.table())
    if out:
        data = {name: [json.loads(r.to_json()) for r in reports] for name, reports in comparison.reports.items()}
        out.write_text(json.dumps(data, indent=2))


def cmd_ablate(args, cfg):
    split = _split(args, cfg)
    names = [ablation.resolve(v) for v in (args.variants or ablation.VARIANTS)]
    if "default" not in names:
        names.insert(0, "default")
    _emit(ablation.compare(lambda seed: split, cfg, names, args.seeds), args.out)


def cmd_sweep(args, cfg):
    split = _split(args, cfg)
    if args.strategy == "neighbor" and any(k % 2 for k in args.ks):
        raise ConfigError("neighbor augmentation needs even k values")
    runs = ablation.k_sweep_configs(cfg, args.strategy, args.ks)
    _emit(ablation.compare(lambda seed: split, cfg, runs, args.seeds), args.out)


COMMANDS = {
    "synth": cmd_synth,
    "prepare": cmd_prepare,
    "train": cmd_train,
    "eval": cmd_eval,
    "link": cmd_link,
    "ablate": cmd_ablate,
    "sweep": cmd_sweep,
}


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(
            level=logging.INFO if args.verbose else logging.WARNING,
            format="%(levelname)s %(name)s: %(message)s",
        )
        cfg = config_mod.load(args.config, args.overrides)
        COMMANDS[args.command](args, cfg)
    except TulError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DataError.exit_code
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
