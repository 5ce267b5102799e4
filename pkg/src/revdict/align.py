"""Cross-lingual embedding alignment.

A small encoder/decoder feed-forward pair maps source-language embedding
space to target-language embedding space. Each half is two linear layers
with a ReLU in between; the encoder narrows to a bottleneck, the decoder
widens back out. Training pairs a source embedding (usually the English
head's prediction for a mapped gloss) with the gold target embedding and
reuses the projection training loop unchanged.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import checkpoint
from .data import AlignedPair
from .nnet import DenseLayer, FeedForwardStack, forward, glorot_uniform
from .optim import TrainConfig
from .projection import EpochStats, ProjectionHead, fit_stack, predict


@dataclass
class AlignerAE:
    """Bottlenecked encoder/decoder stack between two embedding spaces."""

    stack: FeedForwardStack
    seed: int = 0

    def __post_init__(self):
        if len(self.stack.layers) != 4:
            raise ValueError("aligner must have exactly four layers")
        acts = [layer.activation for layer in self.stack.layers]
        if acts != ["relu", "identity", "relu", "identity"]:
            raise ValueError(f"unexpected activation pattern {acts}")

    @property
    def d_in(self) -> int:
        return self.stack.d_in

    @property
    def width(self) -> int:
        return self.stack.layers[0].d_out

    @property
    def d_bottleneck(self) -> int:
        return self.stack.layers[1].d_out

    @property
    def d_out(self) -> int:
        return self.stack.d_out

    @property
    def encoder(self) -> FeedForwardStack:
        """View of the first half (shares the layer arrays)."""
        return FeedForwardStack(self.stack.layers[:2])

    @property
    def decoder(self) -> FeedForwardStack:
        return FeedForwardStack(self.stack.layers[2:])


def init_aligner(
    d_in: int = 256,
    width: int = 128,
    d_bottleneck: int = 32,
    d_out: int = 256,
    seed: int = 0,
) -> AlignerAE:
    """Glorot-uniform init, zero biases, seed-deterministic."""
    if min(d_in, width, d_bottleneck, d_out) < 1:
        raise ValueError("dimensions must be >= 1")
    if d_bottleneck >= width:
        warnings.warn(
            f"bottleneck {d_bottleneck} is not narrower than width {width}",
            stacklevel=2,
        )
    rng = np.random.default_rng(seed)
    dims = [(width, d_in), (d_bottleneck, width), (width, d_bottleneck), (d_out, width)]
    acts = ["relu", "identity", "relu", "identity"]
    layers = [
        DenseLayer(glorot_uniform(rng, do, di), np.zeros(do), act)
        for (do, di), act in zip(dims, acts)
    ]
    return AlignerAE(FeedForwardStack(layers), seed=seed)


def align_forward(ae: AlignerAE, src) -> np.ndarray:
    """Map a batch of source-space embeddings into the target space."""
    return forward(ae.stack, src)


def pairs_to_matrices(pairs: list[AlignedPair]) -> tuple[np.ndarray, np.ndarray]:
    if not pairs:
        raise ValueError("no aligned pairs")
    src = np.vstack([p.src_embedding for p in pairs])
    tgt = np.vstack([p.tgt_embedding for p in pairs])
    return src, tgt


@dataclass
class TrainedAligner:
    aligner: AlignerAE
    best_epoch: int
    best_dev_cosine: float
    history: list[EpochStats] = field(default_factory=list)


def train_aligner(
    pairs_train: list[AlignedPair],
    pairs_dev: list[AlignedPair],
    cfg: TrainConfig,
    width: int = 128,
    d_bottleneck: int = 32,
    reconstruction_weight: float = 0.0,
    aligner: AlignerAE | None = None,
) -> TrainedAligner:
    """MSE training on (src, tgt) pairs; same loop contract as train_head.

    reconstruction_weight > 0 adds that multiple of MSE(output, src) to
    the objective (requires d_in == d_out).
    """
    src_train, tgt_train = pairs_to_matrices(pairs_train)
    src_dev, tgt_dev = pairs_to_matrices(pairs_dev)
    if aligner is None:
        aligner = init_aligner(
            d_in=src_train.shape[1],
            width=width,
            d_bottleneck=d_bottleneck,
            d_out=tgt_train.shape[1],
            seed=cfg.seed,
        )
    aux = None
    if reconstruction_weight != 0.0:
        if aligner.d_in != aligner.d_out:
            raise ValueError("reconstruction term requires d_in == d_out")
        aux = src_train
    result = fit_stack(
        aligner.stack,
        src_train,
        tgt_train,
        src_dev,
        tgt_dev,
        cfg,
        aux_targets=aux,
        aux_weight=reconstruction_weight,
    )
    return TrainedAligner(
        aligner=aligner,
        best_epoch=result.best_epoch,
        best_dev_cosine=result.best_dev_cosine,
        history=result.history,
    )


@dataclass
class AlignmentPipeline:
    """Source-language head composed with the space aligner."""

    source_head: ProjectionHead
    aligner: AlignerAE

    def __post_init__(self):
        if self.source_head.d_out != self.aligner.d_in:
            raise ValueError(
                f"head output dim {self.source_head.d_out} != aligner input "
                f"dim {self.aligner.d_in}"
            )


def crosslingual_predict(pipeline: AlignmentPipeline, src_features) -> np.ndarray:
    """Source features -> source-space embedding -> target-space embedding."""
    return align_forward(pipeline.aligner, predict(pipeline.source_head, src_features))


def save_aligner(trained: TrainedAligner, path, extra_metadata: dict | None = None) -> None:
    ae = trained.aligner
    metadata = {
        "seed": ae.seed,
        "d_in": ae.d_in,
        "width": ae.width,
        "d_bottleneck": ae.d_bottleneck,
        "d_out": ae.d_out,
        "best_epoch": trained.best_epoch,
        "best_dev_cosine": trained.best_dev_cosine,
    }
    if extra_metadata:
        metadata.update(extra_metadata)
    history = [{"loss": h.loss, "dev_cosine": h.dev_cosine} for h in trained.history]
    checkpoint.save_stack(path, ae.stack, "aligner", metadata, history)


def load_aligner(path) -> tuple[TrainedAligner, dict]:
    stack, architecture, metadata, history = checkpoint.load_stack(path)
    if architecture != "aligner":
        raise checkpoint.CheckpointError(
            f"{path}: architecture {architecture!r} is not an aligner"
        )
    try:
        ae = AlignerAE(stack, seed=metadata.get("seed", 0))
    except ValueError as exc:
        raise checkpoint.CheckpointError(f"{path}: {exc}") from exc
    return (
        TrainedAligner(
            aligner=ae,
            best_epoch=metadata.get("best_epoch", -1),
            best_dev_cosine=metadata.get("best_dev_cosine", float("nan")),
            history=[EpochStats(h["loss"], h["dev_cosine"]) for h in history],
        ),
        metadata,
    )
