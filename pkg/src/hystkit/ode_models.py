"""Differential hysteresis models integrated on the trace index grid.

Both models are driven by an H sequence and integrated with explicit
forward Euler, the H rate approximated by backward differences. Because
the right-hand sides involve H only through dH and |dH|, the index step
cancels and the simulated loops are rate independent, like the Preisach
model they complement.

Duhem:     dB = a * |dH| * (b*H - B) + c * dH
Bouc-Wen:  dB = alpha * dH - beta * |dH| * B * |B|^(n-1) - gamma * dH * |B|^n
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["DuhemParams", "BoucWenParams", "simulate_duhem", "simulate_boucwen"]


@dataclass(frozen=True)
class DuhemParams:
    a: float
    b: float
    c: float

    def __post_init__(self):
        if not np.all(np.isfinite([self.a, self.b, self.c])):
            raise ValueError("Duhem parameters must be finite")


@dataclass(frozen=True)
class BoucWenParams:
    alpha: float
    beta: float
    gamma: float
    n: float = 1.0

    def __post_init__(self):
        if not np.all(np.isfinite([self.alpha, self.beta, self.gamma, self.n])):
            raise ValueError("Bouc-Wen parameters must be finite")
        if self.n < 1:
            raise ValueError(f"Bouc-Wen exponent must satisfy n >= 1, got {self.n}")


def _checked_drive(h_trace, b0: float) -> list[float]:
    h = np.asarray(h_trace, dtype=np.float64)
    if h.ndim != 1 or len(h) < 2:
        raise ValueError("h_trace must be a 1-d sequence with at least 2 samples")
    if not (np.all(np.isfinite(h)) and np.isfinite(b0)):
        raise ValueError("h_trace and b0 must be finite")
    return h.tolist()


def simulate_duhem(p: DuhemParams, h_trace, b0: float = 0.0) -> np.ndarray:
    h = _checked_drive(h_trace, b0)
    out = np.empty(len(h))
    bk = float(b0)
    out[0] = bk
    for k in range(1, len(h)):
        dh = h[k] - h[k - 1]
        bk = bk + p.a * abs(dh) * (p.b * h[k - 1] - bk) + p.c * dh
        out[k] = bk
    return out


def simulate_boucwen(p: BoucWenParams, h_trace, b0: float = 0.0) -> np.ndarray:
    h = _checked_drive(h_trace, b0)
    out = np.empty(len(h))
    bk = float(b0)
    out[0] = bk
    for k in range(1, len(h)):
        dh = h[k] - h[k - 1]
        abs_b = abs(bk)
        bk = (
            bk
            + p.alpha * dh
            - p.beta * abs(dh) * bk * abs_b ** (p.n - 1.0)
            - p.gamma * dh * abs_b**p.n
        )
        out[k] = bk
    return out
