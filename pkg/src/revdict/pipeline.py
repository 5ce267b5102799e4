"""Operator pipelines behind the CLI: run configuration, training runs,
ensemble search, aligner training, translate-test, prediction dumps, and
evaluation.

Every command is deterministic given identical inputs and seeds; artifact
files carry no timestamps. Prediction dumps are JSONL
{"id": ..., "embedding": [...]} so evaluation can rerun without models.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .align import save_aligner, train_aligner
from .data import (
    AlignedPair,
    DataFormatError,
    DictionarySet,
    FeatureStore,
    hashgram_encode,
    join,
    load_dictionary,
    load_features,
    load_mapped_dictionary,
    split_set,
)
from .ensemble import Ensemble, ensemble_predict, search_table_csv, subset_search
from .metrics import EvalReport, evaluate, format_report, precision_at_k, report_to_json
from .optim import TrainConfig
from .projection import TrainedHead, load_head, predict, save_head, train_head
from .retrieval import build_index
from .service import LookupService, run_server

log = logging.getLogger(__name__)

TARGET_KINDS = ("electra", "sgns")


class ConfigError(Exception):
    """Invalid run configuration or command usage."""


@dataclass
class EncoderSpec:
    """How to produce features for a gloss: a stored file or the hash-gram
    encoder."""

    name: str
    type: str
    dim: int = 0
    seed: int = 0
    path: str | None = None

    def __post_init__(self):
        if self.type == "hashgram":
            if self.dim < 8:
                raise ConfigError(f"encoder {self.name!r}: hashgram dim must be >= 8")
        elif self.type == "features":
            if not self.path:
                raise ConfigError(f"encoder {self.name!r}: features type needs a path")
        else:
            raise ConfigError(f"encoder {self.name!r}: unknown type {self.type!r}")

    def to_metadata(self) -> dict:
        return {"name": self.name, "type": self.type, "dim": self.dim,
                "seed": self.seed, "path": self.path}

    @classmethod
    def from_metadata(cls, doc: dict) -> "EncoderSpec":
        return cls(
            name=doc["name"],
            type=doc["type"],
            dim=doc.get("dim", 0),
            seed=doc.get("seed", 0),
            path=doc.get("path"),
        )


_TOP_KEYS = {
    "dictionary",
    "language",
    "dev_dictionary",
    "test_dictionary",
    "dev_fraction",
    "encoders",
    "targets",
    "train",
    "d_hidden",
    "seed",
    "out_dir",
    "mapped_dictionary",
    "aligner",
    "serve",
}
_TRAIN_KEYS = {
    "batch_size",
    "epochs",
    "max_lr",
    "weight_decay",
    "pct_start",
    "div_initial",
    "div_final",
    "seed",
}
_ENCODER_KEYS = {"type", "dim", "seed", "path"}
_ALIGNER_KEYS = {
    "width",
    "bottleneck",
    "reconstruction_weight",
    "use_gold_source",
    "source_dictionary",
}
_SERVE_KEYS = {"kind", "k_max", "default_k", "static_dir", "port"}


@dataclass
class RunConfig:
    """Validated file-based configuration for the pipeline commands."""

    dictionary: str | None = None
    language: str = ""
    dev_dictionary: str | None = None
    test_dictionary: str | None = None
    dev_fraction: float = 0.2
    encoders: dict[str, EncoderSpec] = field(default_factory=dict)
    targets: list[str] = field(default_factory=lambda: ["electra"])
    train: dict = field(default_factory=dict)
    d_hidden: int | None = None
    seed: int = 0
    out_dir: str = "out"
    mapped_dictionary: str | None = None
    aligner: dict = field(default_factory=dict)
    serve: dict = field(default_factory=dict)

    def train_config(self) -> TrainConfig:
        overrides = dict(self.train)
        overrides.setdefault("seed", self.seed)
        try:
            return TrainConfig(**overrides)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid train section: {exc}") from exc


def _require_keys(section: dict, allowed: set, where: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown key {sorted(unknown)[0]!r}")


def _require_path(path: str | None, where: str) -> None:
    if path is not None and not os.path.exists(path):
        raise ConfigError(f"{where}: path does not exist: {path}")


def load_config(path) -> RunConfig:
    """Parse and validate a JSON run configuration."""
    base = Path(path).parent
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})")
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    _require_keys(doc, _TOP_KEYS, str(path))
    _require_keys(doc.get("train", {}), _TRAIN_KEYS, f"{path} train")
    _require_keys(doc.get("aligner", {}), _ALIGNER_KEYS, f"{path} aligner")
    _require_keys(doc.get("serve", {}), _SERVE_KEYS, f"{path} serve")

    def resolve(p):
        return p if p is None or os.path.isabs(p) else str(base / p)

    encoder_docs = doc.get("encoders", {})
    if not isinstance(encoder_docs, dict):
        raise ConfigError(f"{path}: 'encoders' must be an object")
    encoders = {}
    for name, spec in encoder_docs.items():
        if not isinstance(spec, dict):
            raise ConfigError(f"{path}: encoder {name!r} must be an object")
        _require_keys(spec, _ENCODER_KEYS, f"{path} encoder {name!r}")
        encoders[name] = EncoderSpec(
            name=name,
            type=spec.get("type", "hashgram"),
            dim=spec.get("dim", 0),
            seed=spec.get("seed", 0),
            path=resolve(spec.get("path")),
        )
    targets = doc.get("targets", ["electra"])
    for kind in targets:
        if kind not in TARGET_KINDS:
            raise ConfigError(f"{path}: unknown target kind {kind!r}")
    aligner = dict(doc.get("aligner", {}))
    if aligner.get("source_dictionary"):
        aligner["source_dictionary"] = resolve(aligner["source_dictionary"])
    cfg = RunConfig(
        dictionary=resolve(doc.get("dictionary")),
        language=doc.get("language", ""),
        dev_dictionary=resolve(doc.get("dev_dictionary")),
        test_dictionary=resolve(doc.get("test_dictionary")),
        dev_fraction=doc.get("dev_fraction", 0.2),
        encoders=encoders,
        targets=targets,
        train=doc.get("train", {}),
        d_hidden=doc.get("d_hidden"),
        seed=doc.get("seed", 0),
        out_dir=resolve(doc.get("out_dir", "out")),
        mapped_dictionary=resolve(doc.get("mapped_dictionary")),
        aligner=aligner,
        serve=doc.get("serve", {}),
    )
    for name, value in (
        ("dictionary", cfg.dictionary),
        ("dev_dictionary", cfg.dev_dictionary),
        ("test_dictionary", cfg.test_dictionary),
        ("mapped_dictionary", cfg.mapped_dictionary),
        ("aligner.source_dictionary", cfg.aligner.get("source_dictionary")),
    ):
        _require_path(value, f"{path} {name}")
    for name, spec in encoders.items():
        if spec.type == "features":
            _require_path(spec.path, f"{path} encoder {name!r}")
    cfg.train_config()  # fail fast on bad overrides
    return cfg


class EncoderRuntime:
    """Turns (entry id, gloss text) into a feature vector.

    A stored feature file is consulted first (by id, then by exact gloss
    text); anything else falls back to the hash-gram encoder so the
    pipeline stays total without external models.
    """

    def __init__(self, spec: EncoderSpec, gloss_to_id: dict[str, str] | None = None):
        self.spec = spec
        self.store: FeatureStore | None = None
        self.gloss_to_id = gloss_to_id or {}
        self.fallbacks = 0
        if spec.type == "features":
            self.store = load_features(spec.path)
            self.d_enc = self.store.d_enc
        else:
            self.d_enc = spec.dim

    def encode(self, entry_id: str | None, gloss: str) -> np.ndarray:
        if self.store is not None:
            if entry_id is not None:
                vec = self.store.get(entry_id)
                if vec is not None:
                    return vec
            hit = self.gloss_to_id.get(gloss)
            if hit is not None:
                vec = self.store.get(hit)
                if vec is not None:
                    return vec
            self.fallbacks += 1
        return hashgram_encode(gloss, self.d_enc, self.spec.seed)

    def encode_many(self, ids, glosses) -> np.ndarray:
        return np.vstack([self.encode(i, g) for i, g in zip(ids, glosses)])


def _feature_store(spec: EncoderSpec, dsets: list[DictionarySet]) -> FeatureStore:
    """Materialize a feature store for joins over the given sets."""
    if spec.type == "features":
        return load_features(spec.path)
    features = {}
    for dset in dsets:
        for e in dset:
            if e.id not in features:
                features[e.id] = hashgram_encode(e.gloss, spec.dim, spec.seed)
    return FeatureStore(features)


def _train_dev_sets(cfg: RunConfig) -> tuple[DictionarySet, DictionarySet]:
    if cfg.dictionary is None:
        raise ConfigError("config needs a 'dictionary' path")
    full = load_dictionary(cfg.dictionary, cfg.language, "train")
    if cfg.dev_dictionary:
        return full, load_dictionary(cfg.dev_dictionary, cfg.language, "dev")
    return split_set(full, cfg.dev_fraction, cfg.seed)


def cmd_train(cfg: RunConfig) -> list[Path]:
    """Train one head per (encoder, target) pair; write checkpoints and
    history files under out_dir."""
    if not cfg.encoders:
        raise ConfigError("config defines no encoders")
    if not cfg.targets:
        raise ConfigError("config defines no targets")
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    train_set, dev_set = _train_dev_sets(cfg)
    train_cfg = cfg.train_config()
    written = []
    for name in sorted(cfg.encoders):
        spec = cfg.encoders[name]
        store = _feature_store(spec, [train_set, dev_set])
        for kind in cfg.targets:
            sup_train = join(train_set, store, kind)
            sup_dev = join(dev_set, store, kind)
            trained = train_head(
                sup_train,
                sup_dev,
                train_cfg,
                d_hidden=cfg.d_hidden,
                target_kind=kind,
                encoder_id=name,
            )
            ckpt_path = out_dir / f"head_{name}_{kind}.ckpt.json"
            save_head(trained, ckpt_path, extra_metadata={"encoder": spec.to_metadata()})
            history_path = out_dir / f"history_{name}_{kind}.json"
            with open(history_path, "w", encoding="utf-8") as fh:
                json.dump(
                    {
                        "encoder": name,
                        "target": kind,
                        "best_epoch": trained.best_epoch,
                        "best_dev_cosine": trained.best_dev_cosine,
                        "epochs": [
                            {"loss": h.loss, "dev_cosine": h.dev_cosine}
                            for h in trained.history
                        ],
                    },
                    fh,
                    sort_keys=True,
                    separators=(",", ":"),
                )
                fh.write("\n")
            log.info(
                "trained %s/%s: best dev cosine %.4f at epoch %d",
                name,
                kind,
                trained.best_dev_cosine,
                trained.best_epoch,
            )
            written.append(ckpt_path)
    return written


@dataclass
class LoadedHead:
    name: str
    trained: TrainedHead
    encoder: EncoderSpec
    path: str


def _load_heads(checkpoint_paths) -> list[LoadedHead]:
    heads = []
    for p in checkpoint_paths:
        trained, metadata = load_head(p)
        enc_doc = metadata.get("encoder")
        if not enc_doc:
            raise DataFormatError(f"{p}: checkpoint lacks encoder metadata")
        spec = EncoderSpec.from_metadata(enc_doc)
        name = trained.head.encoder_id or spec.name
        heads.append(LoadedHead(name=name, trained=trained, encoder=spec, path=str(p)))
    return heads


def _aligned_eval_data(dev_set: DictionarySet, kind: str, heads: list[LoadedHead]):
    """Feature matrix per head plus shared targets over the ids every
    member can encode from its store-backed join (hash-gram covers all)."""
    stores = {h.name: _feature_store(h.encoder, [dev_set]) for h in heads}
    ids = [
        e.id
        for e in dev_set
        if e.vector(kind) is not None and all(e.id in s for s in stores.values())
    ]
    if not ids:
        raise DataFormatError(f"no dev items usable for target {kind!r}")
    targets = np.vstack([dev_set.by_id(i).vector(kind) for i in ids])
    feats = [np.vstack([stores[h.name].get(i) for i in ids]) for h in heads]
    return feats, targets, ids


def cmd_ensemble_search(cfg: RunConfig, checkpoint_paths) -> tuple[Path, Path]:
    """Exhaustive dev-set subset search; writes the CSV table and a winner
    manifest."""
    heads = _load_heads(checkpoint_paths)
    kinds = {h.trained.head.target_kind for h in heads}
    if len(kinds) != 1:
        raise ConfigError(f"mixed target kinds in search: {sorted(kinds)}")
    kind = kinds.pop()
    names = [h.name for h in heads]
    if len(set(names)) != len(names):
        raise ConfigError("duplicate member names across checkpoints")
    _, dev_set = _train_dev_sets(cfg)
    feats, targets, _ = _aligned_eval_data(dev_set, kind, heads)
    result = subset_search(
        [h.trained for h in heads], [h.name for h in heads], feats, targets
    )
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"search_{kind}.csv"
    csv_path.write_text(search_table_csv(result), encoding="utf-8")
    manifest_path = out_dir / f"ensemble_{kind}.json"
    selected = result.selected_row()
    manifest = {
        "target_kind": kind,
        "members": list(result.selected),
        "checkpoints": {h.name: h.path for h in heads if h.name in result.selected},
        "dev_cosine": selected.cosine,
        "dev_mse": selected.mse,
        "dev_rank": selected.rank,
    }
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")
    return csv_path, manifest_path


@dataclass
class EnsembleRuntime:
    """A winning ensemble plus per-member encoders, ready to score text."""

    ensemble: Ensemble
    encoders: list[EncoderRuntime]
    target_kind: str

    def predict_glosses(self, ids, glosses) -> np.ndarray:
        feats = [enc.encode_many(ids, glosses) for enc in self.encoders]
        return ensemble_predict(self.ensemble, feats)


def load_manifest(manifest_path, gloss_to_id: dict[str, str] | None = None) -> EnsembleRuntime:
    try:
        with open(manifest_path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"manifest not found: {manifest_path}")
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{manifest_path}: not valid JSON ({exc})") from exc
    try:
        members = doc["members"]
        checkpoints = doc["checkpoints"]
        kind = doc["target_kind"]
    except KeyError as exc:
        raise DataFormatError(f"{manifest_path}: missing key {exc}") from exc
    base = Path(manifest_path).parent
    trained_list, encoders = [], []
    for name in members:
        ckpt = checkpoints.get(name)
        if ckpt is None:
            raise DataFormatError(f"{manifest_path}: no checkpoint for member {name!r}")
        if not os.path.isabs(ckpt) and not os.path.exists(ckpt):
            ckpt = str(base / ckpt)
        loaded = _load_heads([ckpt])[0]
        trained_list.append(loaded.trained)
        encoders.append(EncoderRuntime(loaded.encoder, gloss_to_id))
    ensemble = Ensemble(trained_list, list(members))
    if ensemble.members[0].head.target_kind != kind:
        raise DataFormatError(f"{manifest_path}: target kind mismatch with checkpoints")
    return EnsembleRuntime(ensemble=ensemble, encoders=encoders, target_kind=kind)


def load_translations(path) -> dict[str, str]:
    """Read an id -> gloss JSONL file."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataFormatError(f"{path}:{lineno}: not valid JSON") from exc
            if not isinstance(obj, dict) or "id" not in obj or "gloss" not in obj:
                raise DataFormatError(
                    f"{path}:{lineno}: expected an object with 'id' and 'gloss'"
                )
            if obj["id"] in out:
                raise DataFormatError(f"{path}:{lineno}: duplicate id {obj['id']!r}")
            out[obj["id"]] = obj["gloss"]
    if not out:
        raise DataFormatError(f"{path}: no translation records")
    return out


def write_predictions(path, ids, embeddings: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for i, entry_id in enumerate(ids):
            fh.write(json.dumps({"id": entry_id, "embedding": embeddings[i].tolist()}))
            fh.write("\n")


def load_predictions(path) -> tuple[list[str], np.ndarray]:
    ids, rows = [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataFormatError(f"{path}:{lineno}: not valid JSON") from exc
            if not isinstance(obj, dict) or "id" not in obj or "embedding" not in obj:
                raise DataFormatError(
                    f"{path}:{lineno}: expected an object with 'id' and 'embedding'"
                )
            ids.append(obj["id"])
            rows.append(np.asarray(obj["embedding"], dtype=np.float64))
    if not ids:
        raise DataFormatError(f"{path}: no prediction records")
    dims = {r.shape for r in rows}
    if len(dims) != 1:
        raise DataFormatError(f"{path}: inconsistent embedding dims")
    return ids, np.vstack(rows)


def _evaluate_predictions(
    ids,
    embeddings: np.ndarray,
    reference: DictionarySet,
    kind: str,
    pool_set: DictionarySet | None = None,
) -> EvalReport:
    pool_set = pool_set or reference
    index = build_index(pool_set, kind)
    pool_pos = {pid: i for i, pid in enumerate(index.ids)}
    keep_ids, keep_rows, pool_idx = [], [], []
    for i, entry_id in enumerate(ids):
        if entry_id not in reference:
            raise DataFormatError(f"prediction id {entry_id!r} not in reference dictionary")
        entry = reference.by_id(entry_id)
        if entry.vector(kind) is None or entry_id not in pool_pos:
            continue
        keep_ids.append(entry_id)
        keep_rows.append(embeddings[i])
        pool_idx.append(pool_pos[entry_id])
    if not keep_ids:
        raise DataFormatError(f"no predictions evaluable against target {kind!r}")
    preds = np.vstack(keep_rows)
    targets = np.vstack([reference.by_id(i).vector(kind) for i in keep_ids])
    pool = np.vstack([pool_set.by_id(pid).vector(kind) for pid in index.ids])
    report = evaluate(preds, targets, pool, np.asarray(pool_idx))
    report.p_at_1 = precision_at_k(preds, keep_ids, index, 1)
    report.p_at_10 = precision_at_k(preds, keep_ids, index, 10)
    return report


def predict_for_glosses(
    runtime: EnsembleRuntime, ids, glosses, out_path
) -> np.ndarray:
    """Shared prediction dump used by both the direct path and
    translate-test, so the two are identical by construction."""
    embeddings = runtime.predict_glosses(ids, glosses)
    write_predictions(out_path, ids, embeddings)
    return embeddings


def cmd_predict(cfg: RunConfig, manifest_path, out_path=None) -> Path:
    """Direct path: run the ensemble on the test set's own glosses."""
    dict_path = cfg.test_dictionary or cfg.dictionary
    if dict_path is None:
        raise ConfigError("config needs 'test_dictionary' or 'dictionary'")
    test_set = load_dictionary(dict_path, cfg.language, "test")
    gloss_map = _gloss_to_id(test_set)
    runtime = load_manifest(manifest_path, gloss_map)
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = Path(out_path) if out_path else out_dir / f"predictions_{runtime.target_kind}.jsonl"
    ids = [e.id for e in test_set]
    glosses = [e.gloss for e in test_set]
    predict_for_glosses(runtime, ids, glosses, out_path)
    return out_path


def _gloss_to_id(dset: DictionarySet) -> dict[str, str]:
    out = {}
    for e in dset:
        out.setdefault(e.gloss, e.id)
    return out


def cmd_translate_test(
    cfg: RunConfig,
    gloss_file,
    manifest_path,
    allow_partial: bool = False,
    out_path=None,
) -> tuple[Path, EvalReport]:
    """Run the existing ensemble on externally translated glosses."""
    dict_path = cfg.test_dictionary or cfg.dictionary
    if dict_path is None:
        raise ConfigError("config needs 'test_dictionary' or 'dictionary'")
    test_set = load_dictionary(dict_path, cfg.language, "test")
    translations = load_translations(gloss_file)
    missing = [e.id for e in test_set if e.id not in translations]
    if missing and not allow_partial:
        shown = ", ".join(missing[:10])
        raise DataFormatError(
            f"{len(missing)} test ids missing translations ({shown}"
            + (", ..." if len(missing) > 10 else "")
            + "); rerun with --allow-partial to skip them"
        )
    if missing:
        log.warning("skipping %d test ids without translations", len(missing))
    ids = [e.id for e in test_set if e.id in translations]
    glosses = [translations[i] for i in ids]
    gloss_map = _gloss_to_id(test_set)
    runtime = load_manifest(manifest_path, gloss_map)
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = (
        Path(out_path)
        if out_path
        else out_dir / f"predictions_translated_{runtime.target_kind}.jsonl"
    )
    embeddings = predict_for_glosses(runtime, ids, glosses, out_path)
    report = _evaluate_predictions(ids, embeddings, test_set, runtime.target_kind)
    report_path = out_path.with_suffix(".report.json")
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(
            report_to_json(report, "subtask2", runtime.target_kind, "test"),
            fh,
            sort_keys=True,
            separators=(",", ":"),
        )
        fh.write("\n")
    return out_path, report, runtime.target_kind


def cmd_eval(
    predictions_file,
    dictionary_file,
    kind: str,
    subtask: str = "subtask1",
    split: str = "test",
    pool_dictionary=None,
    out_path=None,
) -> tuple[EvalReport, str]:
    """Score a predictions dump against a reference dictionary."""
    if kind not in TARGET_KINDS:
        raise ConfigError(f"unknown target kind {kind!r}")
    ids, embeddings = load_predictions(predictions_file)
    reference = load_dictionary(dictionary_file)
    pool_set = load_dictionary(pool_dictionary) if pool_dictionary else None
    report = _evaluate_predictions(ids, embeddings, reference, kind, pool_set)
    text = format_report({(subtask, kind): {split: report}})
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            json.dump(
                report_to_json(report, subtask, kind, split),
                fh,
                sort_keys=True,
                separators=(",", ":"),
            )
            fh.write("\n")
    return report, text


def cmd_align(cfg: RunConfig, head_checkpoint, out_path=None) -> Path:
    """Train the cross-lingual aligner from a mapped dictionary and a
    trained source-language head."""
    if cfg.mapped_dictionary is None:
        raise ConfigError("config needs a 'mapped_dictionary' path")
    mapped = load_mapped_dictionary(cfg.mapped_dictionary)
    loaded = _load_heads([head_checkpoint])[0]
    kind = loaded.trained.head.target_kind
    usable = [m for m in mapped if m.vector(kind) is not None]
    dropped = len(mapped) - len(usable)
    if dropped:
        log.warning("dropped %d mapped entries lacking %s targets", dropped, kind)
    if not usable:
        raise DataFormatError(f"no mapped entries carry a {kind!r} embedding")

    use_gold = bool(cfg.aligner.get("use_gold_source", False))
    if use_gold:
        source_path = cfg.aligner.get("source_dictionary")
        if not source_path:
            raise ConfigError("aligner.use_gold_source needs aligner.source_dictionary")
        source_set = load_dictionary(source_path)
        usable = [
            m
            for m in usable
            if m.src_id in source_set and source_set.by_id(m.src_id).vector(kind) is not None
        ]
        if not usable:
            raise DataFormatError("no mapped entries have gold source embeddings")
        src = np.vstack([source_set.by_id(m.src_id).vector(kind) for m in usable])
    else:
        encoder = EncoderRuntime(loaded.encoder)
        feats = encoder.encode_many([m.src_id for m in usable], [m.src_gloss for m in usable])
        src = predict(loaded.trained.head, feats)
    tgt = np.vstack([m.vector(kind) for m in usable])
    pairs = [
        AlignedPair(m.src_id, m.tgt_id, src[i], tgt[i]) for i, m in enumerate(usable)
    ]
    n_dev = max(1, round(len(pairs) * cfg.dev_fraction))
    if n_dev >= len(pairs):
        raise DataFormatError("too few mapped pairs to split train/dev")
    perm = np.random.default_rng(cfg.seed).permutation(len(pairs))
    pairs_train = [pairs[i] for i in perm[n_dev:]]
    pairs_dev = [pairs[i] for i in perm[:n_dev]]
    trained = train_aligner(
        pairs_train,
        pairs_dev,
        cfg.train_config(),
        width=cfg.aligner.get("width", 128),
        d_bottleneck=cfg.aligner.get("bottleneck", 32),
        reconstruction_weight=cfg.aligner.get("reconstruction_weight", 0.0),
    )
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = Path(out_path) if out_path else out_dir / f"aligner_{kind}.ckpt.json"
    save_aligner(
        trained,
        out_path,
        extra_metadata={"source_head": str(head_checkpoint), "target_kind": kind},
    )
    log.info("aligner best dev cosine %.4f", trained.best_dev_cosine)
    return out_path


def build_service(cfg: RunConfig, manifest_path, static_dir=None) -> LookupService:
    """Assemble the read-only lookup service from pipeline artifacts."""
    if cfg.dictionary is None:
        raise ConfigError("config needs a 'dictionary' path for serving")
    dset = load_dictionary(cfg.dictionary, cfg.language, "all")
    gloss_map = _gloss_to_id(dset)
    runtime = load_manifest(manifest_path, gloss_map)
    kind = cfg.serve.get("kind", runtime.target_kind)
    index = build_index(dset, kind)
    return LookupService(
        encode=lambda text: runtime.predict_glosses([None], [text])[0],
        index=index,
        k_max=int(cfg.serve.get("k_max", 100)),
        default_k=int(cfg.serve.get("default_k", 10)),
        language=cfg.language,
        static_dir=static_dir or cfg.serve.get("static_dir"),
    )


def cmd_lookup(cfg: RunConfig, manifest_path, definition: str, k: int = 10):
    """Offline lookup: encode a definition, ensemble, retrieve top-k."""
    service = build_service(cfg, manifest_path)
    return service.lookup(definition, k)


def cmd_serve(cfg: RunConfig, manifest_path, port: int | None = None, static_dir=None):
    """Run the HTTP lookup service (blocks until interrupted)."""
    service = build_service(cfg, manifest_path, static_dir)
    env_port = os.environ.get("REVDICT_PORT")
    if port is None:
        port = int(env_port) if env_port else int(cfg.serve.get("port", 8080))
    run_server(service, port)
