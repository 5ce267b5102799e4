"""Tests for the metric suite, checked against naive double-loop oracles."""

import numpy as np
import pytest

from revdict.data import DictEntry
from revdict.metrics import (
    EvalReport,
    evaluate,
    format_report,
    precision_at_k,
    report_to_json,
)
from revdict.retrieval import build_index


def oracle_evaluate(preds, targets, pool, idx):
    """Independent double-loop implementation of mse/cosine/rank.

    Per-item values come from explicit pairwise formulas; only the final
    aggregation reuses np.mean so that count-derived metrics stay exact.
    """

    def cos(u, v):
        nu, nv = np.linalg.norm(u), np.linalg.norm(v)
        return 0.0 if nu == 0.0 or nv == 0.0 else float(u @ v / (nu * nv))

    n, d = preds.shape
    m = pool.shape[0]
    mses, coses, ranks = [], [], []
    for i in range(n):
        mses.append(float(np.mean((preds[i] - targets[i]) ** 2)))
        coses.append(cos(preds[i], targets[i]))
        target_score = cos(preds[i], pool[idx[i]])
        better = sum(1 for j in range(m) if cos(preds[i], pool[j]) > target_score)
        ranks.append(better / m)
    return float(np.mean(mses)), float(np.mean(coses)), float(np.mean(np.array(ranks)))


def oracle_precision_at_k(preds, target_ids, ids, raw_matrix, k):
    """Full-sort oracle for P@k with the documented tie order."""

    def cos(u, v):
        nu, nv = np.linalg.norm(u), np.linalg.norm(v)
        return 0.0 if nu == 0.0 or nv == 0.0 else float(u @ v / (nu * nv))

    hits = 0
    for i in range(preds.shape[0]):
        rows = []
        for j in range(len(ids)):
            masked = np.linalg.norm(raw_matrix[j]) == 0.0
            rows.append((masked, -cos(preds[i], raw_matrix[j]), ids[j]))
        rows.sort()
        top = [r[2] for r in rows[: min(k, len(ids))]]
        hits += target_ids[i] in top
    return hits / preds.shape[0]


class TestEvaluate:
    def test_perfect_predictions(self):
        rng = np.random.default_rng(0)
        pool = rng.normal(size=(6, 4))
        preds = pool[:3].copy()
        report = evaluate(preds, pool[:3], pool, [0, 1, 2])
        assert report.mse == 0.0
        assert report.cosine == pytest.approx(1.0, abs=1e-12)
        assert report.rank == 0.0
        assert report.n_items == 3

    def test_rank_counts_strictly_better_pool_vectors(self):
        # Pool of 4 unit vectors arranged so exactly two non-targets are
        # closer to the prediction than the target: rank = 2/4.
        pred = np.array([[1.0, 0.0]])
        target = np.array([[0.0, 1.0]])  # cos 0 to pred
        pool = np.array(
            [
                [0.0, 1.0],  # the target itself
                [1.0, 0.0],  # cos 1, better
                [np.sqrt(0.5), np.sqrt(0.5)],  # cos ~0.707, better
                [-1.0, 0.0],  # cos -1, worse
            ]
        )
        report = evaluate(pred, target, pool, [0])
        assert report.rank == 0.5

    def test_ties_favor_the_target(self):
        pred = np.array([[1.0, 0.0]])
        target = np.array([[1.0, 1.0]])
        pool = np.array([[1.0, 1.0], [2.0, 2.0], [1.0, -1.0]])  # all cos 0.707...
        report = evaluate(pred, target, pool, [0])
        assert report.rank == 0.0

    def test_matches_double_loop_oracle(self):
        rng = np.random.default_rng(1)
        n, m, d = 200, 500, 16
        pool = rng.normal(size=(m, d))
        idx = rng.integers(0, m, size=n)
        targets = pool[idx]
        preds = rng.normal(size=(n, d))
        report = evaluate(preds, targets, pool, idx)
        mse, cos, rank = oracle_evaluate(preds, targets, pool, idx)
        assert report.mse == pytest.approx(mse, abs=1e-12)
        assert report.cosine == pytest.approx(cos, abs=1e-12)
        assert report.rank == rank  # count-derived, exact

    def test_shuffling_items_keeps_aggregates(self):
        rng = np.random.default_rng(2)
        n, m, d = 40, 60, 8
        pool = rng.normal(size=(m, d))
        idx = rng.integers(0, m, size=n)
        preds = rng.normal(size=(n, d))
        base = evaluate(preds, pool[idx], pool, idx)
        perm = rng.permutation(n)
        shuffled = evaluate(preds[perm], pool[idx[perm]], pool, idx[perm])
        assert shuffled.mse == pytest.approx(base.mse, abs=1e-12)
        assert shuffled.cosine == pytest.approx(base.cosine, abs=1e-12)
        assert shuffled.rank == pytest.approx(base.rank, abs=1e-15)

    def test_rank_invariant_under_prediction_rescaling(self):
        rng = np.random.default_rng(3)
        n, m, d = 20, 30, 6
        pool = rng.normal(size=(m, d))
        idx = rng.integers(0, m, size=n)
        preds = rng.normal(size=(n, d))
        a = evaluate(preds, pool[idx], pool, idx)
        b = evaluate(preds * rng.uniform(0.1, 10.0, size=(n, 1)), pool[idx], pool, idx)
        assert a.rank == b.rank

    def test_index_out_of_range_rejected(self):
        with pytest.raises(ValueError, match="out of range"):
            evaluate(np.ones((1, 2)), np.ones((1, 2)), np.ones((3, 2)), [5])

    def test_dim_mismatch_rejected(self):
        with pytest.raises(ValueError):
            evaluate(np.ones((1, 2)), np.ones((1, 3)), np.ones((3, 2)), [0])


class TestPrecisionAtK:
    def make_index(self, rng, v, d):
        entries = [
            DictEntry(f"id{i:04d}", f"w{i}", "g", electra=rng.normal(size=d))
            for i in range(v)
        ]
        return entries, build_index(entries, "electra")

    def test_exact_predictions_hit_at_one(self):
        rng = np.random.default_rng(4)
        entries, index = self.make_index(rng, 20, 6)
        preds = np.vstack([entries[i].electra for i in (3, 7, 11)])
        ids = ["id0003", "id0007", "id0011"]
        assert precision_at_k(preds, ids, index, 1) == 1.0

    def test_k_at_least_vocab_size_is_total(self):
        rng = np.random.default_rng(5)
        entries, index = self.make_index(rng, 10, 5)
        preds = rng.normal(size=(4, 5))
        ids = ["id0000", "id0001", "id0002", "id0003"]
        assert precision_at_k(preds, ids, index, 10) == 1.0
        assert precision_at_k(preds, ids, index, 50) == 1.0

    def test_matches_full_sort_oracle(self):
        rng = np.random.default_rng(6)
        v, d, n = 300, 16, 100
        entries, index = self.make_index(rng, v, d)
        raw = np.vstack([e.electra for e in entries])
        all_ids = [e.id for e in entries]
        preds = rng.normal(size=(n, d))
        target_ids = [all_ids[i] for i in rng.integers(0, v, size=n)]
        for k in (1, 10):
            got = precision_at_k(preds, target_ids, index, k)
            want = oracle_precision_at_k(preds, target_ids, all_ids, raw, k)
            assert got == want

    def test_monotone_in_k(self):
        rng = np.random.default_rng(7)
        entries, index = self.make_index(rng, 50, 8)
        preds = rng.normal(size=(30, 8))
        ids = [entries[i].id for i in rng.integers(0, 50, size=30)]
        values = [precision_at_k(preds, ids, index, k) for k in (1, 5, 10, 25, 50)]
        assert all(a <= b for a, b in zip(values, values[1:]))

    def test_unknown_target_id_rejected(self):
        rng = np.random.default_rng(8)
        _, index = self.make_index(rng, 5, 4)
        with pytest.raises(ValueError, match="ghost"):
            precision_at_k(np.ones((1, 4)), ["ghost"], index, 1)


class TestReportValidation:
    def test_p1_cannot_exceed_p10(self):
        with pytest.raises(ValueError, match="p_at_1"):
            EvalReport(mse=0.1, cosine=0.5, rank=0.2, p_at_1=0.9, p_at_10=0.5)

    def test_rank_bounds(self):
        with pytest.raises(ValueError, match="rank"):
            EvalReport(mse=0.1, cosine=0.5, rank=1.5)

    def test_json_shape(self):
        report = EvalReport(mse=0.1, cosine=0.5, rank=0.2, p_at_1=0.1, p_at_10=0.3, n_items=7)
        doc = report_to_json(report, "subtask1", "electra", "test")
        assert doc == {
            "subtask": "subtask1",
            "embedding": "electra",
            "split": "test",
            "mse": 0.1,
            "cosine": 0.5,
            "rank": 0.2,
            "p1": 0.1,
            "p10": 0.3,
            "n": 7,
        }


class TestFormatReport:
    def test_three_decimal_rounding_is_half_even(self):
        report = EvalReport(mse=0.1, cosine=0.6365, rank=0.2, n_items=1)
        text = format_report({("subtask1", "electra"): {"dev": report}})
        # 0.6365 rounds half-to-even to 0.636 in binary-float formatting.
        assert f"{0.6365:.3f}" in text

    def test_missing_split_renders_na(self):
        report = EvalReport(mse=0.5, cosine=0.5, rank=0.5, n_items=2)
        text = format_report({("subtask1", "sgns"): {"test": report}})
        assert "N/A" in text
        assert "0.500 / N/A" in text

    def test_two_kinds_two_subtasks_make_four_rows(self):
        report = EvalReport(mse=0.1, cosine=0.2, rank=0.3, n_items=1)
        reports = {
            (sub, kind): {"test": report, "dev": report}
            for sub in ("subtask1", "subtask2")
            for kind in ("electra", "sgns")
        }
        lines = [l for l in format_report(reports).splitlines() if l.strip()]
        assert len(lines) == 2 + 4  # header + rule + rows
