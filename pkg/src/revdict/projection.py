"""The definition-to-embedding head and its training loop.

A head is a fixed two-layer dense network (Tanh between the layers) from
encoder features to a target embedding space. Training minimizes the
element-mean MSE with AdamW under the one-cycle schedule, evaluates mean
dev cosine after every epoch, and keeps the weights of the epoch with the
strictly highest dev cosine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import checkpoint
from .nnet import (
    DenseLayer,
    FeedForwardStack,
    backward,
    forward,
    glorot_uniform,
    mse_loss,
    mse_loss_grad,
    row_cosines,
)
from .optim import AdamWState, TrainConfig, adamw_step, onecycle_lr


@dataclass
class ProjectionHead:
    """Two dense layers (Tanh, then Identity) over encoder features."""

    stack: FeedForwardStack
    target_kind: str = "electra"
    encoder_id: str = ""
    seed: int = 0

    def __post_init__(self):
        if len(self.stack.layers) != 2:
            raise ValueError("projection head must have exactly two layers")
        if self.stack.layers[0].activation != "tanh":
            raise ValueError("first layer activation must be tanh")
        if self.stack.layers[1].activation != "identity":
            raise ValueError("second layer activation must be identity")

    @property
    def d_enc(self) -> int:
        return self.stack.d_in

    @property
    def d_hidden(self) -> int:
        return self.stack.layers[0].d_out

    @property
    def d_out(self) -> int:
        return self.stack.d_out


def init_head(
    d_enc: int = 768,
    d_hidden: int | None = None,
    d_out: int = 256,
    seed: int = 0,
    target_kind: str = "electra",
    encoder_id: str = "",
) -> ProjectionHead:
    """Glorot-uniform weights, zero biases, fully determined by the seed."""
    if d_enc < 1 or d_out < 1 or (d_hidden is not None and d_hidden < 1):
        raise ValueError("dimensions must be >= 1")
    if d_hidden is None:
        d_hidden = d_enc
    rng = np.random.default_rng(seed)
    stack = FeedForwardStack(
        [
            DenseLayer(glorot_uniform(rng, d_hidden, d_enc), np.zeros(d_hidden), "tanh"),
            DenseLayer(glorot_uniform(rng, d_out, d_hidden), np.zeros(d_out), "identity"),
        ]
    )
    return ProjectionHead(stack, target_kind=target_kind, encoder_id=encoder_id, seed=seed)


def predict(head: ProjectionHead, features) -> np.ndarray:
    """Inference-mode forward pass; rows map to rows."""
    head.stack.training = False
    return forward(head.stack, features)


@dataclass
class EpochStats:
    loss: float
    dev_cosine: float


@dataclass
class FitResult:
    stack: FeedForwardStack
    best_epoch: int
    best_dev_cosine: float
    history: list[EpochStats] = field(default_factory=list)


def fit_stack(
    stack: FeedForwardStack,
    train_x: np.ndarray,
    train_y: np.ndarray,
    dev_x: np.ndarray,
    dev_y: np.ndarray,
    cfg: TrainConfig,
    aux_targets: np.ndarray | None = None,
    aux_weight: float = 0.0,
) -> FitResult:
    """Shared minibatch training loop with per-epoch dev checkpointing.

    aux_targets adds aux_weight * MSE(output, aux_targets) to the
    objective (used for an optional reconstruction term); the loss
    recorded in the history is the combined objective.
    """
    n = train_x.shape[0]
    if n < 1 or dev_x.shape[0] < 1:
        raise ValueError("train and dev sets must be nonempty")
    if train_x.shape[1] != stack.d_in or train_y.shape[1] != stack.d_out:
        raise ValueError("data dims do not match the stack")
    if aux_targets is not None and aux_targets.shape != train_y.shape:
        raise ValueError("aux_targets shape must match train targets")
    sched = cfg.scheduler(n)
    params = stack.parameters()
    state = AdamWState.for_params(params)
    rng = np.random.default_rng(cfg.seed)
    steps_per_epoch = math.ceil(n / cfg.batch_size)
    step = 0
    history: list[EpochStats] = []
    best_cosine = -math.inf
    best_epoch = -1
    best_params = None
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for b in range(steps_per_epoch):
            idx = order[b * cfg.batch_size : (b + 1) * cfg.batch_size]
            xb, yb = train_x[idx], train_y[idx]
            stack.training = True
            out = forward(stack, xb)
            loss = mse_loss(out, yb)
            grad = mse_loss_grad(out, yb)
            if aux_targets is not None and aux_weight != 0.0:
                ab = aux_targets[idx]
                loss += aux_weight * mse_loss(out, ab)
                grad = grad + aux_weight * mse_loss_grad(out, ab)
            if not math.isfinite(loss):
                raise FloatingPointError(
                    f"non-finite loss at epoch {epoch} batch {b}"
                )
            grads = backward(stack, grad)
            lr = onecycle_lr(step, sched)
            try:
                adamw_step(params, grads.flat(), state, lr, cfg.weight_decay)
            except FloatingPointError as exc:
                raise FloatingPointError(
                    f"epoch {epoch} batch {b}: {exc}"
                ) from exc
            step += 1
            epoch_loss += loss
        stack.training = False
        dev_pred = forward(stack, dev_x)
        dev_cosine = float(np.mean(row_cosines(dev_pred, dev_y)))
        history.append(EpochStats(loss=epoch_loss / steps_per_epoch, dev_cosine=dev_cosine))
        if dev_cosine > best_cosine:
            best_cosine = dev_cosine
            best_epoch = epoch
            best_params = [p.copy() for p in params]
    stack.set_parameters(best_params)
    return FitResult(
        stack=stack,
        best_epoch=best_epoch,
        best_dev_cosine=best_cosine,
        history=history,
    )


@dataclass
class TrainedHead:
    """A head at its best-dev-cosine epoch plus the full training history."""

    head: ProjectionHead
    best_epoch: int
    best_dev_cosine: float
    history: list[EpochStats] = field(default_factory=list)


def train_head(
    train,
    dev,
    cfg: TrainConfig,
    d_hidden: int | None = None,
    target_kind: str = "electra",
    encoder_id: str = "",
    head: ProjectionHead | None = None,
) -> TrainedHead:
    """Train a (possibly freshly initialized) head on a supervised set."""
    if head is None:
        head = init_head(
            d_enc=train.features.shape[1],
            d_hidden=d_hidden,
            d_out=train.targets.shape[1],
            seed=cfg.seed,
            target_kind=target_kind,
            encoder_id=encoder_id,
        )
    result = fit_stack(
        head.stack, train.features, train.targets, dev.features, dev.targets, cfg
    )
    return TrainedHead(
        head=head,
        best_epoch=result.best_epoch,
        best_dev_cosine=result.best_dev_cosine,
        history=result.history,
    )


def save_head(trained: TrainedHead, path, extra_metadata: dict | None = None) -> None:
    head = trained.head
    metadata = {
        "target_kind": head.target_kind,
        "encoder_id": head.encoder_id,
        "seed": head.seed,
        "d_enc": head.d_enc,
        "d_hidden": head.d_hidden,
        "d_out": head.d_out,
        "best_epoch": trained.best_epoch,
        "best_dev_cosine": trained.best_dev_cosine,
    }
    if extra_metadata:
        metadata.update(extra_metadata)
    history = [
        {"loss": h.loss, "dev_cosine": h.dev_cosine} for h in trained.history
    ]
    checkpoint.save_stack(path, head.stack, "projection", metadata, history)


def load_head(path) -> tuple[TrainedHead, dict]:
    """Load a head checkpoint; returns (trained head, full metadata)."""
    stack, architecture, metadata, history = checkpoint.load_stack(path)
    if architecture != "projection":
        raise checkpoint.CheckpointError(
            f"{path}: architecture {architecture!r} is not a projection head"
        )
    try:
        head = ProjectionHead(
            stack,
            target_kind=metadata.get("target_kind", "electra"),
            encoder_id=metadata.get("encoder_id", ""),
            seed=metadata.get("seed", 0),
        )
    except ValueError as exc:
        raise checkpoint.CheckpointError(f"{path}: {exc}") from exc
    trained = TrainedHead(
        head=head,
        best_epoch=metadata.get("best_epoch", -1),
        best_dev_cosine=metadata.get("best_dev_cosine", float("nan")),
        history=[EpochStats(h["loss"], h["dev_cosine"]) for h in history],
    )
    return trained, metadata
