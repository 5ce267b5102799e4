"""End-to-end tests for the pipeline commands and the CLI exit codes."""

import json

import numpy as np
import pytest

from revdict.cli import main
from revdict.data import DataFormatError
from revdict.pipeline import (
    ConfigError,
    cmd_ensemble_search,
    cmd_eval,
    cmd_lookup,
    cmd_predict,
    cmd_train,
    cmd_translate_test,
    load_config,
    load_predictions,
)


def train_all(corpus):
    cfg = load_config(corpus["config"])
    return cfg, cmd_train(cfg)


class TestLoadConfig:
    def test_unknown_top_level_key_rejected(self, corpus):
        doc = json.loads(corpus["config"].read_text())
        doc["mystery"] = 1
        corpus["config"].write_text(json.dumps(doc))
        with pytest.raises(ConfigError, match="mystery"):
            load_config(corpus["config"])

    def test_unknown_train_key_rejected(self, corpus):
        doc = json.loads(corpus["config"].read_text())
        doc["train"]["momentum"] = 0.9
        corpus["config"].write_text(json.dumps(doc))
        with pytest.raises(ConfigError, match="momentum"):
            load_config(corpus["config"])

    def test_missing_referenced_path_rejected(self, corpus):
        doc = json.loads(corpus["config"].read_text())
        doc["encoders"]["ext"] = {"type": "features", "path": "no-such.jsonl"}
        corpus["config"].write_text(json.dumps(doc))
        with pytest.raises(ConfigError, match="no-such.jsonl"):
            load_config(corpus["config"])

    def test_relative_paths_resolve_against_config_dir(self, corpus):
        cfg = load_config(corpus["config"])
        assert cfg.dictionary == str(corpus["dictionary"])

    def test_bad_target_kind_rejected(self, corpus):
        doc = json.loads(corpus["config"].read_text())
        doc["targets"] = ["glove"]
        corpus["config"].write_text(json.dumps(doc))
        with pytest.raises(ConfigError, match="glove"):
            load_config(corpus["config"])


class TestCmdTrain:
    def test_one_checkpoint_per_encoder_target_pair(self, corpus):
        _, paths = train_all(corpus)
        names = sorted(p.name for p in paths)
        assert names == [
            "head_hgA_electra.ckpt.json",
            "head_hgA_sgns.ckpt.json",
            "head_hgB_electra.ckpt.json",
            "head_hgB_sgns.ckpt.json",
        ]
        for p in paths:
            assert p.exists()
            history = p.parent / p.name.replace("head_", "history_").replace(
                ".ckpt.json", ".json"
            )
            assert history.exists()

    def test_rerun_is_byte_identical(self, corpus):
        cfg, paths = train_all(corpus)
        first = {p.name: p.read_bytes() for p in paths}
        cfg2 = load_config(corpus["config"])
        cfg2.out_dir = str(corpus["root"] / "again")
        for p in cmd_train(cfg2):
            assert p.read_bytes() == first[p.name]

    def test_different_seed_changes_checkpoints(self, corpus):
        cfg, paths = train_all(corpus)
        first = {p.name: p.read_bytes() for p in paths}
        cfg2 = load_config(corpus["config"])
        cfg2.seed = 99
        cfg2.out_dir = str(corpus["root"] / "seeded")
        changed = cmd_train(cfg2)
        assert any(p.read_bytes() != first[p.name] for p in changed)


class TestEnsembleSearch:
    def test_two_heads_three_rows_and_consistent_winner(self, corpus):
        cfg, paths = train_all(corpus)
        electra = [p for p in paths if "electra" in p.name]
        csv_path, manifest_path = cmd_ensemble_search(cfg, electra)
        lines = csv_path.read_text().splitlines()
        assert len(lines) == 1 + 3
        manifest = json.loads(manifest_path.read_text())
        best_csv = max(float(l.split(",")[2]) for l in lines[1:])
        assert manifest["dev_cosine"] == best_csv
        assert set(manifest["checkpoints"]) == set(manifest["members"])

    def test_single_head_manifest(self, corpus):
        cfg, paths = train_all(corpus)
        one = [p for p in paths if p.name == "head_hgA_electra.ckpt.json"]
        csv_path, manifest_path = cmd_ensemble_search(cfg, one)
        assert len(csv_path.read_text().splitlines()) == 2
        assert json.loads(manifest_path.read_text())["members"] == ["hgA"]

    def test_mixed_target_kinds_rejected(self, corpus):
        cfg, paths = train_all(corpus)
        with pytest.raises(ConfigError, match="mixed"):
            cmd_ensemble_search(cfg, paths)

    def test_rerun_is_byte_identical(self, corpus):
        cfg, paths = train_all(corpus)
        electra = [p for p in paths if "electra" in p.name]
        a_csv, a_manifest = cmd_ensemble_search(cfg, electra)
        a_bytes = (a_csv.read_bytes(), a_manifest.read_bytes())
        cfg.out_dir = str(corpus["root"] / "again")
        b_csv, b_manifest = cmd_ensemble_search(cfg, electra)
        assert (b_csv.read_bytes(), b_manifest.read_bytes()) == a_bytes


@pytest.fixture
def searched(corpus):
    cfg, paths = train_all(corpus)
    electra = [p for p in paths if "electra" in p.name]
    _, manifest_path = cmd_ensemble_search(cfg, electra)
    return cfg, manifest_path


class TestPredictAndTranslateTest:
    def test_translate_test_on_native_glosses_matches_direct_path(
        self, corpus, searched
    ):
        cfg, manifest = searched
        direct = cmd_predict(cfg, manifest, corpus["root"] / "direct.jsonl")
        entries = json.loads(corpus["dictionary"].read_text())
        gloss_file = corpus["root"] / "native.jsonl"
        with open(gloss_file, "w") as fh:
            for e in entries:
                fh.write(json.dumps({"id": e["id"], "gloss": e["gloss"]}) + "\n")
        translated, _, _ = cmd_translate_test(
            cfg, gloss_file, manifest, out_path=corpus["root"] / "via-translate.jsonl"
        )
        assert translated.read_bytes() == direct.read_bytes()

    def test_missing_translations_abort_listing_ids(self, corpus, searched):
        cfg, manifest = searched
        entries = json.loads(corpus["dictionary"].read_text())
        gloss_file = corpus["root"] / "partial.jsonl"
        with open(gloss_file, "w") as fh:
            for e in entries[:-3]:
                fh.write(json.dumps({"id": e["id"], "gloss": e["gloss"]}) + "\n")
        with pytest.raises(DataFormatError, match="3 test ids"):
            cmd_translate_test(cfg, gloss_file, manifest)

    def test_allow_partial_skips_missing(self, corpus, searched):
        cfg, manifest = searched
        entries = json.loads(corpus["dictionary"].read_text())
        gloss_file = corpus["root"] / "partial.jsonl"
        with open(gloss_file, "w") as fh:
            for e in entries[:-3]:
                fh.write(json.dumps({"id": e["id"], "gloss": e["gloss"]}) + "\n")
        pred_path, report, kind = cmd_translate_test(
            cfg, gloss_file, manifest, allow_partial=True
        )
        ids, _ = load_predictions(pred_path)
        assert len(ids) == len(entries) - 3
        assert kind == "electra"
        assert report.n_items == len(entries) - 3

    def test_prediction_count_matches_test_size(self, corpus, searched):
        cfg, manifest = searched
        path = cmd_predict(cfg, manifest)
        ids, embeddings = load_predictions(path)
        assert len(ids) == 30
        assert embeddings.shape == (30, 8)


class TestCmdEval:
    def test_gold_predictions_are_perfect(self, corpus):
        entries = json.loads(corpus["dictionary"].read_text())
        pred_path = corpus["root"] / "gold.jsonl"
        with open(pred_path, "w") as fh:
            for e in entries:
                fh.write(json.dumps({"id": e["id"], "embedding": e["electra"]}) + "\n")
        report, text = cmd_eval(pred_path, corpus["dictionary"], "electra")
        assert report.cosine == pytest.approx(1.0, abs=1e-12)
        assert report.rank == 0.0
        assert report.p_at_1 == 1.0
        assert report.p_at_10 == 1.0
        assert "subtask1" in text

    def test_malformed_line_reports_number(self, corpus):
        pred_path = corpus["root"] / "bad.jsonl"
        pred_path.write_text('{"id": "d0000", "embedding": [1.0]}\n{oops\n')
        with pytest.raises(DataFormatError, match=":2"):
            cmd_eval(pred_path, corpus["dictionary"], "electra")

    def test_unknown_prediction_id_rejected(self, corpus):
        pred_path = corpus["root"] / "ghost.jsonl"
        pred_path.write_text(json.dumps({"id": "ghost", "embedding": [0.0] * 8}) + "\n")
        with pytest.raises(DataFormatError, match="ghost"):
            cmd_eval(pred_path, corpus["dictionary"], "electra")

    def test_report_json_written(self, corpus):
        entries = json.loads(corpus["dictionary"].read_text())
        pred_path = corpus["root"] / "gold.jsonl"
        with open(pred_path, "w") as fh:
            for e in entries:
                fh.write(json.dumps({"id": e["id"], "embedding": e["electra"]}) + "\n")
        out = corpus["root"] / "report.json"
        cmd_eval(pred_path, corpus["dictionary"], "electra", out_path=out)
        doc = json.loads(out.read_text())
        assert doc["p1"] == 1.0
        assert doc["n"] == 30


class TestLookupCommand:
    def test_returns_k_results_with_scores(self, corpus, searched):
        cfg, manifest = searched
        results = cmd_lookup(cfg, manifest, "a river of order 0 described at some length", k=5)
        assert len(results) == 5
        ids = [r[0] for r in results]
        assert len(set(ids)) == 5
        assert all(isinstance(r[2], float) for r in results)


class TestCliExitCodes:
    def test_usage_error_is_one(self, capsys):
        assert main(["train"]) == 1  # missing --config

    def test_bad_config_is_one(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text('{"unknown_key": 1}')
        assert main(["train", "--config", str(bad)]) == 1

    def test_data_error_is_two(self, corpus, capsys):
        pred = corpus["root"] / "bad.jsonl"
        pred.write_text("{oops\n")
        code = main(
            [
                "eval",
                "--predictions",
                str(pred),
                "--dictionary",
                str(corpus["dictionary"]),
                "--kind",
                "electra",
            ]
        )
        assert code == 2

    @pytest.mark.filterwarnings("ignore:overflow encountered")
    def test_numeric_failure_is_three(self, corpus, capsys):
        doc = json.loads(corpus["config"].read_text())
        doc["train"]["max_lr"] = 1e160
        doc["targets"] = ["electra"]
        doc["encoders"] = {"hgA": {"type": "hashgram", "dim": 32, "seed": 1}}
        corpus["config"].write_text(json.dumps(doc))
        assert main(["train", "--config", str(corpus["config"])]) == 3

    def test_train_cli_prints_checkpoints(self, corpus, capsys):
        assert main(["train", "--config", str(corpus["config"])]) == 0
        out = capsys.readouterr().out
        assert "head_hgA_electra.ckpt.json" in out
