"""Shared fixtures: a small dictionary corpus and a hash-gram run config.

BLAS thread pools are pinned to one thread before numpy loads so the
acceptance throughput measurement is a true single-core figure.
"""

import os

os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("OMP_NUM_THREADS", "1")
os.environ.setdefault("MKL_NUM_THREADS", "1")

import json

import numpy as np
import pytest

WORDS = [
    "river",
    "mountain",
    "lantern",
    "whisper",
    "harbor",
    "ember",
    "meadow",
    "compass",
    "thunder",
    "willow",
    "anchor",
    "breeze",
    "canyon",
    "dewdrop",
    "falcon",
    "glacier",
    "horizon",
    "island",
    "juniper",
    "kestrel",
    "lagoon",
    "marble",
    "nectar",
    "orchard",
    "pebble",
    "quarry",
    "raven",
    "saddle",
    "tundra",
    "velvet",
]


def make_dictionary(n=30, d_electra=8, d_sgns=6, seed=0, prefix="d"):
    rng = np.random.default_rng(seed)
    entries = []
    for i in range(n):
        word = WORDS[i % len(WORDS)]
        entries.append(
            {
                "id": f"{prefix}{i:04d}",
                "word": word,
                "gloss": f"a {word} of order {i} described at some length",
                "pos": "noun",
                "electra": rng.normal(size=d_electra).tolist(),
                "sgns": rng.normal(size=d_sgns).tolist(),
            }
        )
    return entries


@pytest.fixture
def corpus(tmp_path):
    """Writes dictionary + config files; returns their paths."""
    dict_path = tmp_path / "dict.json"
    dict_path.write_text(json.dumps(make_dictionary()), encoding="utf-8")
    config = {
        "dictionary": "dict.json",
        "language": "ar",
        "dev_fraction": 0.2,
        "encoders": {
            "hgA": {"type": "hashgram", "dim": 32, "seed": 1},
            "hgB": {"type": "hashgram", "dim": 48, "seed": 2},
        },
        "targets": ["electra", "sgns"],
        "train": {"batch_size": 10, "epochs": 2},
        "seed": 7,
        "out_dir": "artifacts",
    }
    config_path = tmp_path / "run.json"
    config_path.write_text(json.dumps(config), encoding="utf-8")
    return {
        "root": tmp_path,
        "dictionary": dict_path,
        "config": config_path,
        "out_dir": tmp_path / "artifacts",
    }
