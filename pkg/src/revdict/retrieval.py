"""Exact cosine top-k retrieval over a vocabulary of word embeddings.

The index stores L2-pre-normalized rows; zero vectors are masked and rank
after every non-masked entry (their reported score is 0.0, the cosine
convention for zero norms). Ties break by ascending id. batch_lookup is
literally a loop of single lookups so batch and single results are
bit-identical by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nnet import normalize_rows

INDEX_FORMAT_VERSION = 1


@dataclass
class VocabIndex:
    ids: list[str]
    words: list[str]
    matrix: np.ndarray  # V x d, rows unit-norm or zero (masked)
    zero_mask: np.ndarray  # V bools, True where the stored vector was zero
    kind: str = ""

    def __post_init__(self):
        if self.matrix.shape[0] != len(self.ids) or len(self.ids) != len(self.words):
            raise ValueError("vocabulary table and matrix row count disagree")
        # Tie-break order and transposed matrix are derived once per build.
        order = sorted(range(len(self.ids)), key=lambda i: self.ids[i])
        self._id_rank = np.empty(len(self.ids), dtype=np.int64)
        for rank, idx in enumerate(order):
            self._id_rank[idx] = rank
        self._matrix_t = np.ascontiguousarray(self.matrix.T)

    @property
    def size(self) -> int:
        return len(self.ids)

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]


def build_index(entries, kind: str) -> VocabIndex:
    """Index every entry that carries an embedding of the given kind."""
    ids, words, rows = [], [], []
    seen = set()
    for e in entries:
        vec = e.vector(kind)
        if vec is None:
            continue
        if e.id in seen:
            raise ValueError(f"duplicate id {e.id!r} in index build")
        seen.add(e.id)
        ids.append(e.id)
        words.append(e.word)
        rows.append(vec)
    if not rows:
        raise ValueError(f"no entries carry a {kind!r} embedding")
    raw = np.vstack(rows)
    matrix = normalize_rows(raw)
    zero_mask = np.linalg.norm(raw, axis=1) == 0.0
    return VocabIndex(ids=ids, words=words, matrix=matrix, zero_mask=zero_mask, kind=kind)


def lookup(index: VocabIndex, query, k: int):
    """Exact top-k by cosine, descending; ties by ascending id.

    Returns at most min(k, V) tuples (id, word, score). Masked (zero)
    vocabulary rows sort after all live rows and report score 0.0.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    q = np.asarray(query, dtype=np.float64).reshape(1, -1)
    if q.shape[1] != index.dim:
        raise ValueError(f"query dim {q.shape[1]} != index dim {index.dim}")
    norm = np.linalg.norm(q)
    if norm > 0.0:
        q = q / norm
    scores = (q @ index._matrix_t)[0]
    order_scores = scores.copy()
    order_scores[index.zero_mask] = -2.0  # below any real cosine
    v = index.size
    kk = min(k, v)
    if kk < v:
        part = np.argpartition(-order_scores, kk - 1)[:kk]
        threshold = order_scores[part].min()
        cand = np.nonzero(order_scores >= threshold)[0]
    else:
        cand = np.arange(v)
    # Sort by score descending, then id ascending; take the first kk.
    sel = cand[np.lexsort((index._id_rank[cand], -order_scores[cand]))][:kk]
    return [(index.ids[j], index.words[j], float(scores[j])) for j in sel]


def batch_lookup(index: VocabIndex, queries, k: int):
    """Row-wise lookup; identical to mapping lookup over the rows."""
    q = np.asarray(queries, dtype=np.float64)
    if q.ndim != 2:
        raise ValueError("queries must be a 2-D matrix")
    return [lookup(index, q[i], k) for i in range(q.shape[0])]


def save_index(index: VocabIndex, path) -> None:
    np.savez(
        path,
        format_version=np.int64(INDEX_FORMAT_VERSION),
        kind=np.str_(index.kind),
        ids=np.asarray(index.ids, dtype=np.str_),
        words=np.asarray(index.words, dtype=np.str_),
        matrix=index.matrix,
        zero_mask=index.zero_mask,
    )


def load_index(path) -> VocabIndex:
    with np.load(path, allow_pickle=False) as data:
        version = int(data["format_version"])
        if version != INDEX_FORMAT_VERSION:
            raise ValueError(
                f"{path}: index format version {version}, expected {INDEX_FORMAT_VERSION}"
            )
        return VocabIndex(
            ids=[str(s) for s in data["ids"]],
            words=[str(s) for s in data["words"]],
            matrix=np.asarray(data["matrix"], dtype=np.float64),
            zero_mask=np.asarray(data["zero_mask"], dtype=bool),
            kind=str(data["kind"]),
        )
