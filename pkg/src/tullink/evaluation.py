"""Linking trajectories to users, ranking and macro metrics, and the LCSS baseline."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import TYPE_CHECKING, Sequence

import numpy as np
import torch

from tullink.data import SubTrajectory
from tullink.embedding import encode_batch

if TYPE_CHECKING:
    from tullink.training import TrainedModel


@dataclass
class LinkResult:
    rankings: np.ndarray  # (n, U) user indices, best first
    scores: np.ndarray  # (n, U) scores aligned with ``rankings``

    @property
    def num_users(self) -> int:
        return self.rankings.shape[1]

    def __len__(self) -> int:
        return self.rankings.shape[0]

    @property
    def top1(self) -> np.ndarray:
        return self.rankings[:, 0]


@dataclass
class MetricReport:
    acc_at: dict[int, float] = field(default_factory=dict)
    macro_precision: float = 0.0
    macro_recall: float = 0.0
    macro_f1: float = 0.0

    def to_json(self) -> str:
        d = asdict(self)
        d["acc_at"] = {str(k): v for k, v in self.acc_at.items()}
        return json.dumps(d, indent=2, sort_keys=True)

    def to_table(self) -> str:
        rows = [(f"Acc@{k}", v) for k, v in sorted(self.acc_at.items())]
        rows += [
            ("Macro-P", self.macro_precision),
            ("Macro-R", self.macro_recall),
            ("Macro-F1", self.macro_f1),
        ]
        width = max(len(name) for name, _ in rows)
        return "\n".join(f"{name:<{width}}  {value * 100:6.2f}%" for name, value in rows)


def rank_scores(scores: np.ndarray) -> LinkResult:
    """Sort users by descending score; equal scores keep ascending user index."""
    scores = np.asarray(scores)
    order = np.argsort(-scores, axis=1, kind="stable")
    return LinkResult(order, np.take_along_axis(scores, order, axis=1))


@torch.no_grad()
def link(model: TrainedModel, trajs: Sequence[SubTrajectory], batch_size: int = 256) -> LinkResult:
    """Score each trajectory with the recurrent encoder and rank all users."""
    num_users = model.vocab.num_users
    if not trajs:
        return LinkResult(np.empty((0, num_users), dtype=np.int64), np.empty((0, num_users)))
    net = model.network
    was_training = net.training
    net.eval()
    try:
        chunks = []
        for i in range(0, len(trajs), batch_size):
            batch = encode_batch(trajs[i : i + batch_size], model.vocab, net.cfg.time_unit)
            chunks.append(net.score(batch).numpy())
    finally:
        net.train(was_training)
    return rank_scores(np.concatenate(chunks))


def labels_for(model: TrainedModel, trajs: Sequence[SubTrajectory]) -> np.ndarray:
    return np.array([model.vocab.user_index[t.user_id] for t in trajs], dtype=np.int64)


def acc_at_k(result: LinkResult, labels: Sequence[int], k: int) -> float:
    if not 1 <= k <= result.num_users:
        raise ValueError(f"k={k} outside [1, {result.num_users}]")
    labels = np.asarray(labels)
    if not len(labels):
        return 0.0
    hits = (result.rankings[:, :k] == labels[:, None]).any(axis=1)
    return float(hits.mean())


def macro_prf(result: LinkResult, labels: Sequence[int]) -> tuple[float, float, float]:
    """Macro precision, recall and F1 over all users from top-1 predictions.

    Per-user zero divisions count as 0, so users never predicted and never
    observed contribute 0 to every average. F1 is the mean of per-user F1.
    """
    n_users = result.num_users
    labels = np.asarray(labels, dtype=np.int64)
    preds = result.top1
    tp = np.bincount(labels[preds == labels], minlength=n_users).astype(float)
    predicted = np.bincount(preds, minlength=n_users).astype(float)
    actual = np.bincount(labels, minlength=n_users).astype(float)
    precision = np.divide(tp, predicted, out=np.zeros(n_users), where=predicted > 0)
    recall = np.divide(tp, actual, out=np.zeros(n_users), where=actual > 0)
    denom = precision + recall
    f1 = np.divide(2 * precision * recall, denom, out=np.zeros(n_users), where=denom > 0)
    return float(precision.mean()), float(recall.mean()), float(f1.mean())


def evaluate(result: LinkResult, labels: Sequence[int], ks: Sequence[int] = (1, 5, 10)) -> MetricReport:
    ks = sorted({min(k, result.num_users) for k in ks})
    p, r, f1 = macro_prf(result, labels)
    return MetricReport({k: acc_at_k(result, labels, k) for k in ks}, p, r, f1)


def accuracy_curve_csv(result: LinkResult, labels: Sequence[int]) -> str:
    lines = ["k,acc"]
    for k in range(1, result.num_users + 1):
        lines.append(f"{k},{acc_at_k(result, labels, k):.6f}")
    return "\n".join(lines) + "\n"


def lcss_length(a: Sequence, b: Sequence) -> int:
    """Length of the longest common subsequence of ``a`` and ``b``."""
    if len(a) < len(b):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            cur.append(prev[j] + 1 if x == y else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def lcss_link(train: Sequence[tuple[SubTrajectory, int]], test: SubTrajectory) -> int:
    """User of the training trajectory with the longest common POI subsequence.

    Ties go to the earliest training trajectory.
    """
    if not train:
        raise ValueError("LCSS linking needs at least one training trajectory")
    query = [r.poi_id for r in test.records]
    best_user, best = train[0][1], -1
    for traj, user in train:
        score = lcss_length(query, [r.poi_id for r in traj.records])
        if score > best:
            best, best_user = score, user
    return best_user
