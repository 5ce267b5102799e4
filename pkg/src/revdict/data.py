"""Dictionary datasets, encoder feature stores, splits, and the built-in
hash-gram gloss encoder.

File formats:
  * dictionary: UTF-8 JSON array of flat objects with keys
    "id", "word", "gloss" (required) and "pos", "electra", "sgns", "enId"
    (optional).
  * feature store: UTF-8 JSONL, one {"id": ..., "features": [...]} per line.
  * mapped bilingual dictionary: JSON array of objects with "arId", "enId",
    glosses/words for both languages and the target-language embeddings
    under "electra"/"sgns" (the source-language embeddings are produced by
    a trained head, never read from this file).
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)


class DataFormatError(ValueError):
    """A data file violates its documented schema."""


def _vector(value, *, where: str) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise DataFormatError(f"{where}: embedding must be a nonempty flat list")
    if not np.isfinite(arr).all():
        raise DataFormatError(f"{where}: embedding contains non-finite values")
    return arr


@dataclass
class DictEntry:
    """One dictionary item: a word, its gloss, and optional target vectors."""

    id: str
    word: str
    gloss: str
    pos: str | None = None
    electra: np.ndarray | None = None
    sgns: np.ndarray | None = None
    link_id: str | None = None

    def vector(self, kind: str) -> np.ndarray | None:
        if kind == "electra":
            return self.electra
        if kind == "sgns":
            return self.sgns
        raise ValueError(f"unknown embedding kind {kind!r}")


class DictionarySet:
    """An ordered, id-unique collection of entries for one language/split."""

    def __init__(self, language: str, split: str, entries):
        self.language = language
        self.split = split
        self.entries = list(entries)
        self._by_id = {}
        dims = {"electra": None, "sgns": None}
        for i, e in enumerate(self.entries):
            if not e.id:
                raise DataFormatError(f"entry {i}: empty id")
            if e.id in self._by_id:
                raise DataFormatError(f"entry {i}: duplicate id {e.id!r}")
            self._by_id[e.id] = i
            for kind in ("electra", "sgns"):
                vec = e.vector(kind)
                if vec is None:
                    continue
                if dims[kind] is None:
                    dims[kind] = vec.shape[0]
                elif dims[kind] != vec.shape[0]:
                    raise DataFormatError(
                        f"entry {i}: {kind} dim {vec.shape[0]} != {dims[kind]}"
                    )
        self.electra_dim = dims["electra"]
        self.sgns_dim = dims["sgns"]

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, i) -> DictEntry:
        return self.entries[i]

    def by_id(self, entry_id: str) -> DictEntry:
        return self.entries[self._by_id[entry_id]]

    def __contains__(self, entry_id: str) -> bool:
        return entry_id in self._by_id

    def dim(self, kind: str) -> int | None:
        return self.electra_dim if kind == "electra" else self.sgns_dim


def load_dictionary(path, language: str = "", split: str = "") -> DictionarySet:
    """Parse a dictionary JSON file, validating schema and embedding dims."""
    with open(path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(raw, list):
        raise DataFormatError(f"{path}: expected a JSON array of entries")
    entries = []
    for i, obj in enumerate(raw):
        if not isinstance(obj, dict):
            raise DataFormatError(f"entry {i}: expected an object")
        for key in ("id", "word", "gloss"):
            if key not in obj:
                raise DataFormatError(f"entry {i}: missing required field {key!r}")
            if not isinstance(obj[key], str):
                raise DataFormatError(f"entry {i}: field {key!r} must be a string")
        entries.append(
            DictEntry(
                id=obj["id"],
                word=obj["word"],
                gloss=obj["gloss"],
                pos=obj.get("pos"),
                electra=_vector(obj["electra"], where=f"entry {i} field 'electra'")
                if obj.get("electra") is not None
                else None,
                sgns=_vector(obj["sgns"], where=f"entry {i} field 'sgns'")
                if obj.get("sgns") is not None
                else None,
                link_id=obj.get("enId"),
            )
        )
    dset = DictionarySet(language, split, entries)
    log.info("loaded %d entries from %s", len(dset), path)
    return dset


def write_dictionary(dset: DictionarySet, path) -> None:
    """Write entries back out with normalized field order."""
    out = []
    for e in dset:
        obj = {"id": e.id, "word": e.word, "gloss": e.gloss}
        if e.pos is not None:
            obj["pos"] = e.pos
        if e.electra is not None:
            obj["electra"] = e.electra.tolist()
        if e.sgns is not None:
            obj["sgns"] = e.sgns.tolist()
        if e.link_id is not None:
            obj["enId"] = e.link_id
        out.append(obj)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(out, fh, ensure_ascii=False, indent=1)
        fh.write("\n")


def split_set(dset: DictionarySet, dev_fraction: float, seed: int):
    """Seeded shuffle-split into (train, dev); dev gets round(N*f) items."""
    if not 0.0 < dev_fraction < 1.0:
        raise ValueError("dev_fraction must be in (0, 1)")
    n = len(dset)
    n_dev = round(n * dev_fraction)
    n_train = n - n_dev
    if n_dev < 1 or n_train < 1:
        raise ValueError(
            f"degenerate split: {n} items at fraction {dev_fraction} "
            f"gives ({n_train}, {n_dev})"
        )
    perm = np.random.default_rng(seed).permutation(n)
    train = DictionarySet(dset.language, "train", [dset[i] for i in perm[:n_train]])
    dev = DictionarySet(dset.language, "dev", [dset[i] for i in perm[n_train:]])
    return train, dev


def _hash64(data: bytes, seed: int) -> int:
    salt = (seed & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "little")
    digest = hashlib.blake2b(data, digest_size=8, salt=salt).digest()
    return int.from_bytes(digest, "little")


def hashgram_encode(gloss: str, d_enc: int, seed: int = 0) -> np.ndarray:
    """Deterministic character n-gram (n = 2..4) signed-hash embedding.

    The gloss is whitespace-collapsed; each n-gram hashes to one slot and a
    sign; the accumulated vector is L2-normalized. An empty gloss (or one
    too short for any bigram) maps to the zero vector.
    """
    if d_enc < 8:
        raise ValueError("d_enc must be >= 8")
    text = " ".join(gloss.split())
    vec = np.zeros(d_enc)
    n_chars = len(text)
    for n in (2, 3, 4):
        for i in range(n_chars - n + 1):
            h = _hash64(text[i : i + n].encode("utf-8"), seed)
            sign = 1.0 if (h >> 63) & 1 == 0 else -1.0
            vec[h % d_enc] += sign
    norm = np.linalg.norm(vec)
    if norm > 0.0:
        vec /= norm
    return vec


class FeatureStore:
    """Precomputed encoder features keyed by entry id, one fixed dimension."""

    def __init__(self, features: dict[str, np.ndarray]):
        if not features:
            raise ValueError("feature store cannot be empty")
        dims = {v.shape[0] for v in features.values()}
        if len(dims) != 1:
            raise DataFormatError(f"inconsistent feature dims: {sorted(dims)}")
        self.features = features
        self.d_enc = dims.pop()

    def __len__(self) -> int:
        return len(self.features)

    def __contains__(self, entry_id: str) -> bool:
        return entry_id in self.features

    def get(self, entry_id: str) -> np.ndarray | None:
        return self.features.get(entry_id)


def load_features(path) -> FeatureStore:
    """Read a JSONL feature file into a store."""
    features = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataFormatError(f"{path}:{lineno}: not valid JSON") from exc
            if not isinstance(obj, dict) or "id" not in obj or "features" not in obj:
                raise DataFormatError(
                    f"{path}:{lineno}: expected an object with 'id' and 'features'"
                )
            if obj["id"] in features:
                raise DataFormatError(f"{path}:{lineno}: duplicate id {obj['id']!r}")
            features[obj["id"]] = _vector(
                obj["features"], where=f"{path}:{lineno} field 'features'"
            )
    if not features:
        raise DataFormatError(f"{path}: no feature records")
    return FeatureStore(features)


def write_features(store: FeatureStore, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for entry_id, vec in store.features.items():
            fh.write(json.dumps({"id": entry_id, "features": vec.tolist()}))
            fh.write("\n")


def hashgram_store(dset: DictionarySet, d_enc: int, seed: int = 0) -> FeatureStore:
    """Encode every gloss of a dictionary with the hash-gram encoder."""
    return FeatureStore(
        {e.id: hashgram_encode(e.gloss, d_enc, seed) for e in dset}
    )


@dataclass
class SupervisedSet:
    """Aligned (features, target) matrices plus the originating entry ids."""

    features: np.ndarray
    targets: np.ndarray
    ids: list[str]
    dropped: int = 0

    def __len__(self) -> int:
        return len(self.ids)


def join(dset: DictionarySet, store: FeatureStore, target: str) -> SupervisedSet:
    """Pair each entry's feature vector with its target embedding.

    Entries lacking either side are dropped (counted and logged).
    """
    if target not in ("electra", "sgns"):
        raise ValueError(f"unknown target kind {target!r}")
    feats, tgts, ids = [], [], []
    dropped = 0
    for e in dset:
        vec = e.vector(target)
        f = store.get(e.id)
        if vec is None or f is None:
            dropped += 1
            continue
        feats.append(f)
        tgts.append(vec)
        ids.append(e.id)
    if dropped:
        log.warning("join dropped %d of %d entries", dropped, len(dset))
    if not ids:
        raise ValueError(f"join produced no items for target {target!r}")
    return SupervisedSet(
        features=np.vstack(feats), targets=np.vstack(tgts), ids=ids, dropped=dropped
    )


@dataclass
class MappedEntry:
    """One bilingual mapped-dictionary item; embeddings are target-language."""

    src_id: str
    tgt_id: str
    src_gloss: str
    tgt_gloss: str | None = None
    src_word: str | None = None
    tgt_word: str | None = None
    electra: np.ndarray | None = None
    sgns: np.ndarray | None = None

    def vector(self, kind: str) -> np.ndarray | None:
        return self.electra if kind == "electra" else self.sgns


def load_mapped_dictionary(path) -> list[MappedEntry]:
    """Parse the bilingual mapped dictionary (English source, Arabic target)."""
    with open(path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(raw, list):
        raise DataFormatError(f"{path}: expected a JSON array")
    out = []
    for i, obj in enumerate(raw):
        if not isinstance(obj, dict):
            raise DataFormatError(f"entry {i}: expected an object")
        for key in ("arId", "enId", "enGloss"):
            if key not in obj or not isinstance(obj[key], str):
                raise DataFormatError(f"entry {i}: missing or non-string field {key!r}")
        out.append(
            MappedEntry(
                src_id=obj["enId"],
                tgt_id=obj["arId"],
                src_gloss=obj["enGloss"],
                tgt_gloss=obj.get("arGloss"),
                src_word=obj.get("enWord"),
                tgt_word=obj.get("arWord"),
                electra=_vector(obj["electra"], where=f"entry {i} field 'electra'")
                if obj.get("electra") is not None
                else None,
                sgns=_vector(obj["sgns"], where=f"entry {i} field 'sgns'")
                if obj.get("sgns") is not None
                else None,
            )
        )
    return out


@dataclass
class AlignedPair:
    """A source-space embedding paired with its target-space counterpart."""

    src_id: str
    tgt_id: str
    src_embedding: np.ndarray
    tgt_embedding: np.ndarray
