"""Paired H/B sequences on a uniform step index, with CSV persistence.

Trace files are two-column text: optional leading ``#`` comment lines, a
``H,B`` header, then one row per sample with 17 significant digits so that
float64 values round-trip exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = ["HysteresisTrace", "write_trace", "read_trace", "format_header_comments"]


@dataclass
class HysteresisTrace:
    """H (A/m) and B (tesla) sequences of equal length."""

    h: np.ndarray
    b: np.ndarray
    dt_index: float = 1.0

    def __post_init__(self):
        self.h = np.asarray(self.h, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        if self.h.ndim != 1 or self.b.ndim != 1 or len(self.h) != len(self.b):
            raise ValueError("h and b must be 1-d arrays of equal length")
        if len(self.h) < 1:
            raise ValueError("a trace needs at least one sample")
        if not (np.all(np.isfinite(self.h)) and np.all(np.isfinite(self.b))):
            raise ValueError("trace values must be finite")
        if not self.dt_index > 0:
            raise ValueError("dt_index must be positive")

    def __len__(self) -> int:
        return len(self.h)


def format_header_comments(meta: dict | None) -> list[str]:
    if not meta:
        return []
    return [f"# {k}={v}" for k, v in meta.items()]


def write_trace(path, trace: HysteresisTrace, meta: dict | None = None) -> None:
    path = Path(path)
    lines = format_header_comments(meta)
    lines.append("H,B")
    for h, b in zip(trace.h, trace.b):
        lines.append(f"{h:.17g},{b:.17g}")
    path.write_text("\n".join(lines) + "\n")


def read_trace(path) -> HysteresisTrace:
    rows = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if line.upper() == "H,B":
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise ValueError(f"malformed trace row: {line!r}")
        rows.append((float(parts[0]), float(parts[1])))
    if not rows:
        raise ValueError(f"no samples found in {path}")
    arr = np.asarray(rows)
    return HysteresisTrace(h=arr[:, 0], b=arr[:, 1])
