"""Self-describing text checkpoints for trained cells.

Header lines record the cell kind, hidden width, dt, seed, and the four
normalization constants; each tensor follows as a ``tensor <name> <shape>``
line plus its row-major values at full precision (17 significant digits,
exact float64 round-trip).
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from . import cells
from .training import NormStats

__all__ = ["save_checkpoint", "load_checkpoint"]

_MAGIC = "hystkit-checkpoint 1"

_PARAM_CLASSES = {
    "hystrnn": cells.HystRNNParams,
    "rnn": cells.RNNParams,
    "lstm": cells.LSTMParams,
    "gru": cells.GRUParams,
}


def save_checkpoint(path, params: cells.CellParams, norm: NormStats, seed: int) -> None:
    lines = [
        _MAGIC,
        f"cell_kind {params.kind}",
        f"hidden_dim {params.m}",
        f"dt {params.dt:.17g}",
        f"seed {seed}",
        f"h_min {norm.h_min:.17g}",
        f"h_max {norm.h_max:.17g}",
        f"b_min {norm.b_min:.17g}",
        f"b_max {norm.b_max:.17g}",
    ]
    for name, tensor in params.tensors().items():
        shape = " ".join(str(s) for s in tensor.shape)
        lines.append(f"tensor {name} {shape}")
        rows = np.atleast_2d(tensor)
        for row in rows:
            lines.append(" ".join(f"{v:.17g}" for v in row))
    lines.append("end")
    Path(path).write_text("\n".join(lines) + "\n")


def load_checkpoint(path) -> tuple[cells.CellParams, NormStats, dict]:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].strip() != _MAGIC:
        raise ValueError(f"{path} is not a hystkit checkpoint")

    header: dict[str, str] = {}
    tensors: dict[str, np.ndarray] = {}
    i = 1
    while i < len(lines):
        line = lines[i].strip()
        i += 1
        if not line:
            continue
        if line == "end":
            break
        if line.startswith("tensor "):
            _, name, *shape_s = line.split()
            shape = tuple(int(s) for s in shape_s)
            n_rows = shape[0] if len(shape) == 2 else 1
            rows = []
            for _ in range(n_rows):
                rows.append([float(v) for v in lines[i].split()])
                i += 1
            arr = np.asarray(rows, dtype=np.float64).reshape(shape)
            tensors[name] = arr
        else:
            key, value = line.split(maxsplit=1)
            header[key] = value

    kind = header["cell_kind"]
    if kind not in _PARAM_CLASSES:
        raise ValueError(f"unknown cell kind in checkpoint: {kind!r}")
    params = _PARAM_CLASSES[kind](**tensors, dt=float(header["dt"]))
    norm = NormStats(
        h_min=float(header["h_min"]),
        h_max=float(header["h_max"]),
        b_min=float(header["b_min"]),
        b_max=float(header["b_max"]),
    )
    meta = {"seed": int(header["seed"]), "hidden_dim": int(header["hidden_dim"])}
    if params.m != meta["hidden_dim"]:
        raise ValueError("checkpoint hidden_dim does not match tensor shapes")
    return params, norm, meta
