"""Closed-loop rollout on unseen excitations and the four score metrics.

At test time only the H sequence and the first true B value are available:
the first prediction consumes (H_1, B_0) and every later step feeds the
previous prediction back as the B input. All computation happens in
normalized space with the training statistics; outputs are denormalized,
and metrics are computed on the physical (tesla) values.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import cells
from .trace import HysteresisTrace, format_header_comments
from .training import NormStats, NumericError, build_training_pairs, denormalize, normalize

__all__ = [
    "RolloutResult",
    "MetricsRow",
    "rollout",
    "warm_state",
    "rel_l2",
    "explained_variance",
    "max_error",
    "mean_abs_error",
    "score",
    "evaluate_models",
    "write_metrics",
    "read_metrics",
    "write_rollout",
    "read_rollout",
]

TEST_CURVES = ("forc1", "forc2", "minor1", "minor2")


@dataclass
class RolloutResult:
    h: np.ndarray
    b_pred: np.ndarray
    b_true: np.ndarray | None = None


def warm_state(
    params: cells.CellParams,
    norm: NormStats,
    train_trace: HysteresisTrace,
    seed_pair: tuple[float, float] | None = None,
):
    """Hidden state from a teacher-forced pass over the training loop.

    With ``seed_pair`` given, the pass stops at the major-loop sample nearest
    the rollout seed (in normalized (H, B) distance): the test curves depart
    from the major loop, and that sample is the closest available stand-in
    for the demagnetization history, which is unknown at test time. Without
    it, the full loop is consumed.
    """
    inputs, _ = build_training_pairs(train_trace, norm)
    state = cells.init_state(params)
    if seed_pair is None:
        stop = len(inputs) - 1
    else:
        hn = normalize(train_trace.h, norm.h_min, norm.h_max)
        bn = normalize(train_trace.b, norm.b_min, norm.b_max)
        seed_h = normalize(float(seed_pair[0]), norm.h_min, norm.h_max)
        seed_b = normalize(float(seed_pair[1]), norm.b_min, norm.b_max)
        # state after inputs[k] corresponds to standing at loop sample k+1
        d2 = (hn[1:] - seed_h) ** 2 + (bn[1:] - seed_b) ** 2
        stop = int(np.argmin(d2))
    for u in inputs[: stop + 1]:
        state = cells.step(params, state, u)
    return state


def rollout(
    params: cells.CellParams,
    norm: NormStats,
    h_seq,
    seed_pair: tuple[float, float],
    b_true=None,
    state=None,
) -> RolloutResult:
    """Autoregressive rollout along h_seq, seeded with one true (H, B) pair.

    ``b_pred[0]`` is the seeded true B; prediction k consumes
    (H_k, prediction k-1). ``state`` is the initial hidden state (zeros when
    omitted; pass ``warm_state(...)`` to start from major-loop history).
    """
    h_seq = np.asarray(h_seq, dtype=np.float64)
    h_i, b_i = float(seed_pair[0]), float(seed_pair[1])
    if len(h_seq) < 1:
        raise ValueError("h_seq must contain at least one sample")
    if h_seq[0] != h_i:
        raise ValueError("seed_pair H must equal h_seq[0]")

    hn = normalize(h_seq, norm.h_min, norm.h_max)
    b_prev = float(normalize(b_i, norm.b_min, norm.b_max))
    s = cells.init_state(params) if state is None else state

    b_pred = np.empty(len(h_seq))
    b_pred[0] = b_i
    for k in range(1, len(h_seq)):
        u = np.array([hn[k], b_prev])
        s = cells.step(params, s, u)
        out = cells.output(params, s)
        if not np.isfinite(out):
            raise NumericError(f"non-finite prediction at rollout step {k}")
        b_prev = out
        b_pred[k] = denormalize(out, norm.b_min, norm.b_max)

    truth = None if b_true is None else np.asarray(b_true, dtype=np.float64)
    if truth is not None and len(truth) != len(h_seq):
        raise ValueError("b_true must match h_seq length")
    return RolloutResult(h=h_seq, b_pred=b_pred, b_true=truth)


# ----------------------------------------------------------------- metrics


def _pair(pred, truth) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(pred, dtype=np.float64)
    t = np.asarray(truth, dtype=np.float64)
    if p.shape != t.shape or p.ndim != 1 or len(p) == 0:
        raise ValueError("pred and truth must be equal-length 1-d sequences")
    return p, t


def rel_l2(pred, truth) -> float:
    """||pred - truth||_2 / ||truth||_2."""
    p, t = _pair(pred, truth)
    denom = float(np.linalg.norm(t))
    if denom == 0.0:
        raise ValueError("rel_l2 is undefined for all-zero truth")
    return float(np.linalg.norm(p - t)) / denom


def explained_variance(pred, truth) -> float | None:
    """1 - sum((truth - pred)^2) / sum((truth - mean(truth))^2).

    Returns None when the truth has zero variance (undefined score).
    """
    p, t = _pair(pred, truth)
    centered = t - t.mean()
    denom = float(centered @ centered)
    if denom == 0.0:
        return None
    resid = t - p
    return 1.0 - float(resid @ resid) / denom


def max_error(pred, truth) -> float:
    p, t = _pair(pred, truth)
    return float(np.max(np.abs(t - p)))


def mean_abs_error(pred, truth) -> float:
    p, t = _pair(pred, truth)
    return float(np.mean(np.abs(t - p)))


@dataclass
class MetricsRow:
    curve: str
    cell: str
    rel_l2: float
    explained_variance: float | None
    max_error: float
    mean_abs_error: float


def score(curve: str, cell: str, pred, truth) -> MetricsRow:
    return MetricsRow(
        curve=curve,
        cell=cell,
        rel_l2=rel_l2(pred, truth),
        explained_variance=explained_variance(pred, truth),
        max_error=max_error(pred, truth),
        mean_abs_error=mean_abs_error(pred, truth),
    )


def evaluate_models(
    traces: dict[str, HysteresisTrace],
    models: dict[str, tuple[cells.CellParams, NormStats]],
    state_mode: str = "cold",
) -> tuple[list[MetricsRow], dict[tuple[str, str], RolloutResult]]:
    """Roll every model over every test curve and score on denormalized B.

    Returns one MetricsRow per (curve, cell) plus the rollouts themselves,
    keyed by (curve, cell).
    """
    if state_mode not in ("cold", "warm"):
        raise ValueError(f"state_mode must be 'cold' or 'warm', got {state_mode!r}")
    rows: list[MetricsRow] = []
    results: dict[tuple[str, str], RolloutResult] = {}
    for curve in TEST_CURVES:
        trace = traces[curve]
        for cell_kind, (params, norm) in models.items():
            init = None
            if state_mode == "warm":
                seed = (float(trace.h[0]), float(trace.b[0]))
                init = warm_state(params, norm, traces["major"], seed_pair=seed)
            res = rollout(
                params,
                norm,
                trace.h,
                seed_pair=(float(trace.h[0]), float(trace.b[0])),
                b_true=trace.b,
                state=init,
            )
            results[(curve, cell_kind)] = res
            rows.append(score(curve, cell_kind, res.b_pred, trace.b))
    return rows, results


# ------------------------------------------------------------------- files


def write_metrics(path, rows: list[MetricsRow], meta: dict | None = None) -> None:
    lines = format_header_comments(meta)
    lines.append("curve,cell,rel_l2,explained_variance,max_error,mean_abs_error")
    for r in rows:
        ev = "undefined" if r.explained_variance is None else f"{r.explained_variance:.17g}"
        lines.append(
            f"{r.curve},{r.cell},{r.rel_l2:.17g},{ev},{r.max_error:.17g},{r.mean_abs_error:.17g}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def read_metrics(path) -> list[MetricsRow]:
    rows = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#") or line.startswith("curve,"):
            continue
        curve, cell, l2, ev, mx, mae = line.split(",")
        rows.append(
            MetricsRow(
                curve=curve,
                cell=cell,
                rel_l2=float(l2),
                explained_variance=None if ev == "undefined" else float(ev),
                max_error=float(mx),
                mean_abs_error=float(mae),
            )
        )
    return rows


def write_rollout(path, result: RolloutResult, meta: dict | None = None) -> None:
    """Trajectory dump: trace format plus a third B_pred column."""
    if result.b_true is None:
        raise ValueError("rollout dumps require the ground-truth track")
    lines = format_header_comments(meta)
    lines.append("H,B,B_pred")
    for h, b, bp in zip(result.h, result.b_true, result.b_pred):
        lines.append(f"{h:.17g},{b:.17g},{bp:.17g}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_rollout(path) -> RolloutResult:
    rows = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#") or line.startswith("H,"):
            continue
        rows.append(tuple(float(x) for x in line.split(",")))
    if not rows:
        raise ValueError(f"no samples found in {path}")
    arr = np.asarray(rows)
    return RolloutResult(h=arr[:, 0], b_true=arr[:, 1], b_pred=arr[:, 2])
