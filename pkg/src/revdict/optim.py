"""AdamW updates and the warmup/anneal one-cycle learning-rate schedule."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class OneCycleConfig:
    """One-cycle schedule: half-cosine warm-up to max_lr, half-cosine anneal.

    lr starts at max_lr / div_initial, peaks at max_lr after
    round(pct_start * total_steps) steps, and ends at
    (max_lr / div_initial) / div_final at step total_steps.
    """

    total_steps: int
    max_lr: float = 1.0e-4
    pct_start: float = 0.2
    div_initial: float = 25.0
    div_final: float = 100.0

    def __post_init__(self):
        if not 0.0 < self.pct_start < 1.0:
            raise ValueError("pct_start must be in (0, 1)")
        if self.div_initial <= 1.0 or self.div_final <= 1.0:
            raise ValueError("divisors must be > 1")
        if self.total_steps < 2:
            raise ValueError("total_steps must be >= 2")
        if self.max_lr <= 0.0:
            raise ValueError("max_lr must be positive")

    @property
    def peak_step(self) -> int:
        # Clamped so both phases are non-empty.
        return min(max(1, round(self.pct_start * self.total_steps)), self.total_steps - 1)


def onecycle_lr(step: int, cfg: OneCycleConfig) -> float:
    """Learning rate at an integer step in [0, total_steps].

    Within a phase with endpoint values (a, b) and progress p in [0, 1]:
    lr = b + (a - b) * (1 + cos(pi * p)) / 2.
    """
    if not 0 <= step <= cfg.total_steps:
        raise ValueError(f"step {step} outside [0, {cfg.total_steps}]")
    lr_init = cfg.max_lr / cfg.div_initial
    lr_final = lr_init / cfg.div_final
    peak = cfg.peak_step
    if step <= peak:
        a, b = lr_init, cfg.max_lr
        p = step / peak
    else:
        a, b = cfg.max_lr, lr_final
        p = (step - peak) / (cfg.total_steps - peak)
    return b + (a - b) * (1.0 + math.cos(math.pi * p)) / 2.0


@dataclass
class AdamWState:
    """First/second-moment accumulators mirroring a flat parameter list."""

    m: list
    v: list
    t: int = 0

    @classmethod
    def for_params(cls, params) -> "AdamWState":
        return cls(
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
        )


def adamw_step(params, grads, state: AdamWState, lr: float, weight_decay: float) -> None:
    """One decoupled-weight-decay Adam step, updating params in place.

    m <- b1*m + (1-b1)*g;  v <- b2*v + (1-b2)*g^2; bias-corrected;
    theta <- theta - lr*(m_hat/(sqrt(v_hat)+eps) + weight_decay*theta).
    """
    if lr <= 0.0:
        raise ValueError("lr must be positive")
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("params/grads/state length mismatch")
    for i, (p, g) in enumerate(zip(params, grads)):
        if p.shape != g.shape:
            raise ValueError(f"param {i}: shape {p.shape} vs grad {g.shape}")
        if not np.isfinite(g).all():
            raise FloatingPointError(f"non-finite gradient for parameter {i}")
    state.t += 1
    t = state.t
    bc1 = 1.0 - ADAM_BETA1 ** t
    bc2 = 1.0 - ADAM_BETA2 ** t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= ADAM_BETA1
        m += (1.0 - ADAM_BETA1) * g
        v *= ADAM_BETA2
        v += (1.0 - ADAM_BETA2) * (g * g)
        m_hat = m / bc1
        v_hat = v / bc2
        p -= lr * (m_hat / (np.sqrt(v_hat) + ADAM_EPS) + weight_decay * p)


@dataclass
class TrainConfig:
    """Training hyperparameters; defaults follow the finetuning recipe."""

    batch_size: int = 100
    epochs: int = 20
    max_lr: float = 1.0e-4
    weight_decay: float = 1.0e-4
    pct_start: float = 0.2
    div_initial: float = 25.0
    div_final: float = 100.0
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")

    def total_steps(self, n_train: int) -> int:
        return self.epochs * math.ceil(n_train / self.batch_size)

    def scheduler(self, n_train: int) -> OneCycleConfig:
        return OneCycleConfig(
            total_steps=self.total_steps(n_train),
            max_lr=self.max_lr,
            pct_start=self.pct_start,
            div_initial=self.div_initial,
            div_final=self.div_final,
        )
