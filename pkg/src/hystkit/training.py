"""Min-max normalization, teacher-forced pairs, and Adam training.

Normalization statistics always come from the training (major-loop) trace;
test traces reuse them unchanged because test-time B values are unknown by
construction. Training is one full-sequence batch per optimizer step, the
hidden state reset to zero each epoch, and is deterministic for a fixed
seed.
"""

from __future__ import annotations

import dataclasses
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import cells
from .autodiff import Tape
from .trace import HysteresisTrace, format_header_comments

__all__ = [
    "NormStats",
    "TrainConfig",
    "AdamState",
    "TrainReport",
    "NumericError",
    "fit_norm",
    "normalize",
    "denormalize",
    "build_training_pairs",
    "init_adam",
    "adam_update",
    "train",
    "write_loss_history",
    "read_loss_history",
]


class NumericError(RuntimeError):
    """Raised when a loss or prediction stops being finite."""


@dataclass(frozen=True)
class NormStats:
    """Per-channel min/max of the training trace."""

    h_min: float
    h_max: float
    b_min: float
    b_max: float

    def __post_init__(self):
        if not (self.h_min < self.h_max and self.b_min < self.b_max):
            raise ValueError("normalization needs min < max per channel")


def fit_norm(trace: HysteresisTrace) -> NormStats:
    return NormStats(
        h_min=float(trace.h.min()),
        h_max=float(trace.h.max()),
        b_min=float(trace.b.min()),
        b_max=float(trace.b.max()),
    )


def normalize(x, lo: float, hi: float):
    """Map [lo, hi] onto [-1, 1]."""
    return (x - lo) / (hi - lo) * 2.0 - 1.0


def denormalize(s, lo: float, hi: float):
    """Exact inverse of ``normalize``."""
    return (s + 1.0) / 2.0 * (hi - lo) + lo


def build_training_pairs(
    trace: HysteresisTrace, stats: NormStats | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Teacher-forced pairs: input j is (H_j, B_{j-1}), target is B_j.

    Returns normalized arrays of shape (N, 2) and (N,) with N = len - 1.
    """
    if len(trace) < 2:
        raise ValueError("need at least 2 samples to build training pairs")
    if stats is None:
        stats = fit_norm(trace)
    hn = normalize(trace.h, stats.h_min, stats.h_max)
    bn = normalize(trace.b, stats.b_min, stats.b_max)
    inputs = np.column_stack([hn[1:], bn[:-1]])
    targets = bn[1:].copy()
    return inputs, targets


@dataclass(frozen=True)
class TrainConfig:
    m: int = 32
    lr: float = 0.01
    epochs: int = 10000
    batch: int = 1
    dt: float = 0.05
    seed: int = 0
    clip_norm: float | None = None  # diagnostics only; off by default

    def __post_init__(self):
        if self.m < 1 or self.lr <= 0 or self.epochs < 0:
            raise ValueError("m, lr must be positive and epochs nonnegative")
        if self.batch != 1:
            raise ValueError("only batch = 1 (one full sequence per step) is supported")
        if not 0.0 < self.dt < 1.0:
            raise ValueError("dt must lie in (0, 1)")


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def init_adam(tensors: dict[str, np.ndarray]) -> AdamState:
    return AdamState(
        m={k: np.zeros_like(v) for k, v in tensors.items()},
        v={k: np.zeros_like(v) for k, v in tensors.items()},
    )


def adam_update(
    tensors: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float,
) -> tuple[dict[str, np.ndarray], AdamState]:
    """One bias-corrected Adam step; returns fresh tensors, advances state."""
    state.t += 1
    c1 = 1.0 - state.beta1**state.t
    c2 = 1.0 - state.beta2**state.t
    new = {}
    for k, p in tensors.items():
        g = grads[k]
        state.m[k] = state.beta1 * state.m[k] + (1.0 - state.beta1) * g
        state.v[k] = state.beta2 * state.v[k] + (1.0 - state.beta2) * (g * g)
        m_hat = state.m[k] / c1
        v_hat = state.v[k] / c2
        new[k] = p - lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return new, state


@dataclass
class TrainReport:
    kind: str
    losses: np.ndarray
    params: cells.CellParams
    norm: NormStats
    wall_time: float
    cfg: TrainConfig


def _replace_tensors(params: cells.CellParams, tensors: dict[str, np.ndarray]):
    return dataclasses.replace(params, **tensors)


def _clip_global_norm(grads: dict[str, np.ndarray], max_norm: float) -> dict[str, np.ndarray]:
    total = np.sqrt(sum(float((g * g).sum()) for g in grads.values()))
    if total <= max_norm or total == 0.0:
        return grads
    scale = max_norm / total
    return {k: g * scale for k, g in grads.items()}


def train(kind: str, trace: HysteresisTrace, cfg: TrainConfig) -> TrainReport:
    """Fit one cell on a major loop: full-sequence BPTT, one Adam step per epoch."""
    start = time.perf_counter()
    norm = fit_norm(trace)
    inputs, targets = build_training_pairs(trace, norm)
    params = cells.init_params(kind, cfg.m, cfg.seed, cfg.dt)
    tensors = params.tensors()
    adam = init_adam(tensors)
    losses = np.empty(cfg.epochs)

    for epoch in range(cfg.epochs):
        tape = Tape()
        loss, _, leaves = cells.sequence_loss(tape, params, inputs, targets)
        value = float(loss.value)
        if not np.isfinite(value):
            raise NumericError(
                f"non-finite loss ({value}) for {kind} at epoch {epoch}; "
                f"last finite loss {losses[epoch - 1] if epoch else float('nan')}"
            )
        losses[epoch] = value
        tape.backward(loss)
        grads = {k: tape.adjoint(v) for k, v in leaves.items()}
        if cfg.clip_norm is not None:
            grads = _clip_global_norm(grads, cfg.clip_norm)
        tensors, adam = adam_update(tensors, grads, adam, cfg.lr)
        params = _replace_tensors(params, tensors)

    return TrainReport(
        kind=kind,
        losses=losses,
        params=params,
        norm=norm,
        wall_time=time.perf_counter() - start,
        cfg=cfg,
    )


def write_loss_history(path, losses, meta: dict | None = None) -> None:
    lines = format_header_comments(meta)
    lines.append("epoch,loss")
    for k, v in enumerate(losses):
        lines.append(f"{k},{v:.17g}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_loss_history(path) -> np.ndarray:
    values = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#") or line.startswith("epoch"):
            continue
        values.append(float(line.split(",")[1]))
    return np.asarray(values)
