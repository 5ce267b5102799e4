"""Prediction averaging across trained heads and exhaustive subset search.

The search evaluates every nonempty subset of the candidate heads on dev
data (bitmask ascending, so member order is stable), selects the subset
with the highest mean dev cosine, and breaks ties by the lexicographically
smallest member-name list.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .metrics import EvalReport, evaluate
from .projection import TrainedHead, predict

MAX_SEARCH_HEADS = 16


@dataclass
class Ensemble:
    """Heads sharing one output space whose predictions are averaged."""

    members: list[TrainedHead]
    names: list[str]

    def __post_init__(self):
        if not self.members:
            raise ValueError("ensemble needs at least one member")
        if len(self.members) != len(self.names):
            raise ValueError("one name per member required")
        d_out = self.members[0].head.d_out
        kind = self.members[0].head.target_kind
        for name, member in zip(self.names, self.members):
            if member.head.d_out != d_out:
                raise ValueError(f"member {name!r}: output dim mismatch")
            if member.head.target_kind != kind:
                raise ValueError(f"member {name!r}: target kind mismatch")


def ensemble_predict(ens: Ensemble, features_by_head) -> np.ndarray:
    """Elementwise mean of member predictions (one feature batch each)."""
    if len(features_by_head) != len(ens.members):
        raise ValueError("one feature batch per member required")
    preds = [predict(m.head, f) for m, f in zip(ens.members, features_by_head)]
    rows = {p.shape[0] for p in preds}
    if len(rows) != 1:
        raise ValueError(f"batch sizes differ across members: {sorted(rows)}")
    return np.mean(preds, axis=0)


@dataclass
class SubsetRow:
    members: tuple[str, ...]
    mse: float
    cosine: float
    rank: float


@dataclass
class SearchResult:
    rows: list[SubsetRow]
    selected: tuple[str, ...]

    def selected_row(self) -> SubsetRow:
        for row in self.rows:
            if row.members == self.selected:
                return row
        raise RuntimeError("selected subset missing from table")


def subset_search(
    heads: list[TrainedHead],
    names: list[str],
    features_by_head,
    targets,
    pool=None,
    target_pool_indices=None,
) -> SearchResult:
    """Evaluate all 2^n - 1 head subsets on dev data; pick by mean cosine.

    pool defaults to the dev targets themselves (each item's target at its
    own index), which is also what the per-subset rank column uses.
    """
    if not heads:
        raise ValueError("no heads to search over")
    if len(heads) > MAX_SEARCH_HEADS:
        raise ValueError(f"exhaustive search capped at {MAX_SEARCH_HEADS} heads")
    if len(heads) != len(names) or len(heads) != len(features_by_head):
        raise ValueError("heads, names and feature batches must align")
    targets = np.asarray(targets, dtype=np.float64)
    if pool is None:
        pool = targets
        target_pool_indices = np.arange(targets.shape[0])
    preds = [predict(h.head, f) for h, f in zip(heads, features_by_head)]
    rows = []
    best = None
    best_key = None
    for mask in range(1, 2 ** len(heads)):
        chosen = [i for i in range(len(heads)) if mask & (1 << i)]
        avg = np.mean([preds[i] for i in chosen], axis=0)
        report: EvalReport = evaluate(avg, targets, pool, target_pool_indices)
        member_names = tuple(names[i] for i in chosen)
        rows.append(
            SubsetRow(
                members=member_names,
                mse=report.mse,
                cosine=report.cosine,
                rank=report.rank,
            )
        )
        key = (-report.cosine, sorted(member_names))
        if best_key is None or key < best_key:
            best_key = key
            best = member_names
    return SearchResult(rows=rows, selected=best)


def search_table_csv(result: SearchResult) -> str:
    """CSV rendering: members, mse, cosine, rank (full float precision)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["members", "mse", "cosine", "rank"])
    for row in result.rows:
        writer.writerow(["+".join(row.members), repr(row.mse), repr(row.cosine), repr(row.rank)])
    return buf.getvalue()
