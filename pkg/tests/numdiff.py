"""Finite-difference helpers shared by the test modules.

``central_grad_err`` is the plain two-point scheme; ``stencil_grad_err``
uses the fourth-order five-point stencil, which keeps truncation below the
roundoff floor on long unrolled sequences where individual gradient
coordinates can be very small.
"""

from __future__ import annotations

import numpy as np

from hystkit.autodiff import Tape


def _tape_grads(build, params):
    tape = Tape()
    leaves = {k: tape.leaf(v) for k, v in params.items()}
    loss = build(tape, leaves)
    tape.backward(loss)
    return float(loss.value), {k: tape.adjoint(v) for k, v in leaves.items()}


def _eval(build, params) -> float:
    tape = Tape()
    leaves = {k: tape.leaf(v) for k, v in params.items()}
    return float(build(tape, leaves).value)


def stencil_grad_err(build, params: dict[str, np.ndarray], eps: float = 3e-3) -> float:
    """Worst relative error of tape gradients against a 5-point stencil."""
    _, grads = _tape_grads(build, params)
    work = {k: np.asarray(v, dtype=np.float64).copy() for k, v in params.items()}
    worst = 0.0
    for name in work:
        flat = work[name].ravel()
        gflat = grads[name].ravel()
        for j in range(flat.size):
            orig = flat[j]
            vals = {}
            for s in (eps, -eps, 2 * eps, -2 * eps):
                flat[j] = orig + s
                vals[s] = _eval(build, work)
            flat[j] = orig
            fd = (8.0 * (vals[eps] - vals[-eps]) - (vals[2 * eps] - vals[-2 * eps])) / (12.0 * eps)
            denom = max(abs(fd), abs(gflat[j]), 1e-12)
            worst = max(worst, abs(fd - gflat[j]) / denom)
    return worst
