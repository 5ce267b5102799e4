"""Shared-task metric suite: MSE, cosine, normalized rank, P@k, reports.

Rank for one item is the fraction of pool vectors strictly closer (by
cosine) to the prediction than the item's own target; ties favor the
target, so a perfect prediction scores 0. Lower is better.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nnet import normalize_rows, row_cosines
from .retrieval import VocabIndex, batch_lookup


@dataclass
class EvalReport:
    mse: float
    cosine: float
    rank: float
    p_at_1: float | None = None
    p_at_10: float | None = None
    n_items: int = 0

    def __post_init__(self):
        if not 0.0 <= self.rank <= 1.0:
            raise ValueError(f"rank {self.rank} outside [0, 1]")
        for name, value in (("p_at_1", self.p_at_1), ("p_at_10", self.p_at_10)):
            if value is not None and not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} {value} outside [0, 1]")
        if (
            self.p_at_1 is not None
            and self.p_at_10 is not None
            and self.p_at_1 > self.p_at_10
        ):
            raise ValueError("p_at_1 cannot exceed p_at_10")


def evaluate(preds, targets, pool, target_pool_indices) -> EvalReport:
    """Mean MSE/cosine plus the normalized strictly-better rank.

    pool must contain each item's target vector at the given index; the
    rank comparison uses the pool row so that exact ties with the target
    are never counted against it.
    """
    preds = np.asarray(preds, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    pool = np.asarray(pool, dtype=np.float64)
    idx = np.asarray(target_pool_indices, dtype=np.int64)
    if preds.ndim != 2 or preds.shape != targets.shape:
        raise ValueError(f"preds {preds.shape} vs targets {targets.shape}")
    if pool.ndim != 2 or pool.shape[1] != preds.shape[1]:
        raise ValueError(f"pool {pool.shape} incompatible with preds {preds.shape}")
    n, m = preds.shape[0], pool.shape[0]
    if n < 1 or m < 1:
        raise ValueError("need at least one item and one pool vector")
    if idx.shape != (n,) or idx.min() < 0 or idx.max() >= m:
        raise ValueError("target_pool_indices out of range")
    diff = preds - targets
    mse = float(np.mean(diff * diff))
    cos = float(np.mean(row_cosines(preds, targets)))
    scores = normalize_rows(preds) @ normalize_rows(pool).T
    target_scores = scores[np.arange(n), idx]
    ranks = np.count_nonzero(scores > target_scores[:, None], axis=1) / m
    return EvalReport(mse=mse, cosine=cos, rank=float(np.mean(ranks)), n_items=n)


def precision_at_k(preds, target_ids, index: VocabIndex, k: int) -> float:
    """Fraction of items whose target id is in the top-k retrieved entries."""
    if k < 1:
        raise ValueError("k must be >= 1")
    preds = np.asarray(preds, dtype=np.float64)
    if preds.ndim != 2 or preds.shape[0] != len(target_ids):
        raise ValueError("one prediction row per target id required")
    known = set(index.ids)
    for tid in target_ids:
        if tid not in known:
            raise ValueError(f"unknown target id {tid!r}")
    hits = 0
    for results, tid in zip(batch_lookup(index, preds, k), target_ids):
        if any(rid == tid for rid, _, _ in results):
            hits += 1
    return hits / len(target_ids)


def report_to_json(report: EvalReport, subtask: str, embedding: str, split: str) -> dict:
    return {
        "subtask": subtask,
        "embedding": embedding,
        "split": split,
        "mse": report.mse,
        "cosine": report.cosine,
        "rank": report.rank,
        "p1": report.p_at_1,
        "p10": report.p_at_10,
        "n": report.n_items,
    }


def _cell(test: float | None, dev: float | None) -> str:
    def fmt(v):
        # Python's format rounds half to even.
        return "N/A" if v is None else f"{v:.3f}"

    return f"{fmt(test)} / {fmt(dev)}"


def format_report(reports) -> str:
    """Render paired test/dev metric rows, 3-decimal cells.

    reports maps (subtask, embedding) to {"test": EvalReport, "dev":
    EvalReport}; either split may be missing.
    """
    header = ["Subtask", "Embedding", "MSE", "Cosine", "Rank", "P@1", "P@10"]
    rows = [header]
    for (subtask, embedding) in sorted(reports):
        by_split = reports[(subtask, embedding)]
        test = by_split.get("test")
        dev = by_split.get("dev")

        def pick(attr):
            return _cell(
                getattr(test, attr) if test is not None else None,
                getattr(dev, attr) if dev is not None else None,
            )

        rows.append(
            [
                subtask,
                embedding,
                pick("mse"),
                pick("cosine"),
                pick("rank"),
                pick("p_at_1"),
                pick("p_at_10"),
            ]
        )
    widths = [max(len(r[c]) for r in rows) for c in range(len(header))]
    lines = []
    for i, row in enumerate(rows):
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"
