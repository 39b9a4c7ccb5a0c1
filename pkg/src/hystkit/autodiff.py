"""Reverse-mode automatic differentiation on a flat tape.

Values are float64 numpy arrays (vectors or matrices); a loss is a python
float. Every operation appends one node to the tape as a
``(kind, input_ids, saved)`` record, and ``Tape.backward`` walks the records
once in reverse, accumulating adjoints. Leaves hold parameters; after the
backward pass their adjoints are the gradients.

The op set is small on purpose: dense products, elementwise nonlinearities,
and a few fused update rules (``cell_preact``, ``affine_col``, ``axpy``,
``lerp``) that keep the node count of an unrolled recurrence low. Everything
runs in double precision; gradient checks at 1e-5 tolerances do not survive
float32.

Tapes are single-threaded objects. Distinct tapes may run on distinct
threads; the arrays they reference are never mutated after being recorded.
"""

from __future__ import annotations

import numpy as np

__all__ = ["Tape", "Var", "grad_check"]


class Var:
    """Handle to one tape node: its index and forward value."""

    __slots__ = ("idx", "value")

    def __init__(self, idx: int, value):
        self.idx = idx
        self.value = value

    def __repr__(self) -> str:
        return f"Var(idx={self.idx}, value={self.value!r})"


def _as_array(x) -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    if a.ndim not in (1, 2):
        raise ValueError(f"only rank-1/rank-2 tensors are supported, got shape {a.shape}")
    return a


class Tape:
    """Ordered record of operations with one adjoint slot per node."""

    def __init__(self):
        self._nodes: list[tuple] = []
        self._values: list = []
        self._adj: list | None = None

    def __len__(self) -> int:
        return len(self._nodes)

    def _push(self, kind: str, inputs: tuple, saved, value) -> Var:
        idx = len(self._nodes)
        self._nodes.append((kind, inputs, saved))
        self._values.append(value)
        return Var(idx, value)

    # ------------------------------------------------------------------ leaves

    def leaf(self, value) -> Var:
        """Record an input tensor (parameter or constant)."""
        return self._push("leaf", (), None, _as_array(value))

    # ------------------------------------------------------------- primitives

    def matvec(self, a: Var, x: Var) -> Var:
        """Product A @ x of a matrix with a vector."""
        av, xv = a.value, x.value
        if av.ndim != 2 or xv.ndim != 1 or av.shape[1] != xv.shape[0]:
            raise ValueError(f"matvec shape mismatch: {av.shape} @ {xv.shape}")
        return self._push("matvec", (a.idx, x.idx), (av, xv), av @ xv)

    def matmul(self, a: Var, b: Var) -> Var:
        av, bv = a.value, b.value
        if av.ndim != 2 or bv.ndim != 2 or av.shape[1] != bv.shape[0]:
            raise ValueError(f"matmul shape mismatch: {av.shape} @ {bv.shape}")
        return self._push("matmul", (a.idx, b.idx), (av, bv), av @ bv)

    def add(self, a: Var, b: Var) -> Var:
        if a.value.shape != b.value.shape:
            raise ValueError(f"add shape mismatch: {a.value.shape} vs {b.value.shape}")
        return self._push("add", (a.idx, b.idx), None, a.value + b.value)

    def scale(self, c: float, a: Var) -> Var:
        """c * a for a python-float constant c."""
        c = float(c)
        return self._push("scale", (a.idx,), c, c * a.value)

    def axpy(self, a: Var, c: float, b: Var) -> Var:
        """a + c * b for a python-float constant c."""
        if a.value.shape != b.value.shape:
            raise ValueError(f"axpy shape mismatch: {a.value.shape} vs {b.value.shape}")
        c = float(c)
        return self._push("axpy", (a.idx, b.idx), c, a.value + c * b.value)

    def tanh(self, a: Var) -> Var:
        out = np.tanh(a.value)
        return self._push("tanh", (a.idx,), out, out)

    def sigmoid(self, a: Var) -> Var:
        out = 1.0 / (1.0 + np.exp(-a.value))
        return self._push("sigmoid", (a.idx,), out, out)

    def abs_square(self, a: Var) -> Var:
        """Elementwise |x|^2 (= x^2 on reals); adjoint 2x."""
        av = a.value
        return self._push("abs_square", (a.idx,), av, av * av)

    def mul(self, a: Var, b: Var) -> Var:
        if a.value.shape != b.value.shape:
            raise ValueError(f"mul shape mismatch: {a.value.shape} vs {b.value.shape}")
        return self._push("mul", (a.idx, b.idx), (a.value, b.value), a.value * b.value)

    def lerp(self, gate: Var, a: Var, b: Var) -> Var:
        """gate * a + (1 - gate) * b, elementwise."""
        gv = gate.value
        if not (gv.shape == a.value.shape == b.value.shape):
            raise ValueError("lerp shape mismatch")
        out = gv * a.value + (1.0 - gv) * b.value
        return self._push("lerp", (gate.idx, a.idx, b.idx), (gv, a.value, b.value), out)

    def affine_col(self, w: Var, x: Var, b: Var, p: Var, t: int) -> Var:
        """W @ x + b + P[:, t] -- one fused node per recurrence step."""
        out = w.value @ x.value
        out += b.value
        out += p.value[:, t]
        return self._push(
            "affine_col", (w.idx, x.idx, b.idx, p.idx), (w.value, x.value, p.value, t), out
        )

    def cell_preact(self, w: Var, x: Var, wc: Var, xc: Var, b: Var, p: Var, t: int) -> Var:
        """W @ x + Wc @ xc + b + P[:, t] -- fused two-matrix pre-activation."""
        out = w.value @ x.value
        out += wc.value @ xc.value
        out += b.value
        out += p.value[:, t]
        return self._push(
            "cell_preact",
            (w.idx, x.idx, wc.idx, xc.idx, b.idx, p.idx),
            (w.value, x.value, wc.value, xc.value, p.value, t),
            out,
        )

    def slice1d(self, a: Var, lo: int, hi: int) -> Var:
        av = a.value
        if av.ndim != 1 or not (0 <= lo < hi <= av.shape[0]):
            raise ValueError(f"slice1d bounds [{lo}:{hi}] invalid for shape {av.shape}")
        return self._push("slice1d", (a.idx,), (lo, hi, av), av[lo:hi])

    def stack_rows(self, rows: list[Var]) -> Var:
        """Stack N equal-length vectors into an (N, m) matrix."""
        value = np.stack([r.value for r in rows])
        return self._push("stack_rows", tuple(r.idx for r in rows), None, value)

    def sum(self, a: Var) -> Var:
        return self._push("sum", (a.idx,), a.value, float(a.value.sum()))

    def mse_loss(self, pred: Var, target) -> Var:
        """Mean squared difference against a constant target array."""
        tv = np.asarray(target, dtype=np.float64)
        if pred.value.shape != tv.shape:
            raise ValueError(f"mse_loss shape mismatch: {pred.value.shape} vs {tv.shape}")
        diff = pred.value - tv
        n = diff.size
        return self._push("mse_loss", (pred.idx,), (diff, n), float(diff.ravel() @ diff.ravel()) / n)

    # --------------------------------------------------------------- backward

    def backward(self, loss: Var) -> None:
        """Populate adjoints of every node reachable from the scalar loss."""
        if not np.isscalar(loss.value) and np.size(loss.value) != 1:
            raise ValueError(f"backward requires a scalar loss, got shape {np.shape(loss.value)}")
        adj: list = [None] * len(self._nodes)
        adj[loss.idx] = 1.0
        nodes = self._nodes
        rules = _ADJOINT_RULES
        for i in range(loss.idx, -1, -1):
            g = adj[i]
            if g is None:
                continue
            kind, inputs, saved = nodes[i]
            if kind != "leaf":
                rules[kind](adj, inputs, saved, g)
        self._adj = adj

    def adjoint(self, var: Var) -> np.ndarray:
        """Gradient of the loss w.r.t. ``var`` (zeros if unreachable)."""
        if self._adj is None:
            raise RuntimeError("backward() has not been run on this tape")
        a = self._adj[var.idx]
        if a is None:
            return np.zeros_like(var.value)
        return a


# Accumulation helpers. "_owned" stores a freshly allocated array directly;
# "_shared" copies first because the incoming array may alias another
# adjoint slot, which a later += would corrupt.


def _acc_owned(adj: list, i: int, g: np.ndarray) -> None:
    a = adj[i]
    if a is None:
        adj[i] = g
    else:
        a += g


def _acc_shared(adj: list, i: int, g: np.ndarray) -> None:
    a = adj[i]
    if a is None:
        adj[i] = g.copy()
    else:
        a += g


def _bw_matvec(adj, inputs, saved, g):
    ia, ix = inputs
    a, x = saved
    _acc_owned(adj, ia, g[:, None] * x)
    _acc_owned(adj, ix, a.T @ g)


def _bw_matmul(adj, inputs, saved, g):
    ia, ib = inputs
    a, b = saved
    _acc_owned(adj, ia, g @ b.T)
    _acc_owned(adj, ib, a.T @ g)


def _bw_add(adj, inputs, saved, g):
    _acc_shared(adj, inputs[0], g)
    _acc_shared(adj, inputs[1], g)


def _bw_scale(adj, inputs, saved, g):
    _acc_owned(adj, inputs[0], saved * g)


def _bw_axpy(adj, inputs, saved, g):
    _acc_shared(adj, inputs[0], g)
    _acc_owned(adj, inputs[1], saved * g)


def _bw_tanh(adj, inputs, saved, g):
    out = saved
    _acc_owned(adj, inputs[0], (1.0 - out * out) * g)


def _bw_sigmoid(adj, inputs, saved, g):
    out = saved
    _acc_owned(adj, inputs[0], out * (1.0 - out) * g)


def _bw_abs_square(adj, inputs, saved, g):
    _acc_owned(adj, inputs[0], 2.0 * saved * g)


def _bw_mul(adj, inputs, saved, g):
    a, b = saved
    _acc_owned(adj, inputs[0], g * b)
    _acc_owned(adj, inputs[1], g * a)


def _bw_lerp(adj, inputs, saved, g):
    gate, a, b = saved
    _acc_owned(adj, inputs[0], g * (a - b))
    _acc_owned(adj, inputs[1], g * gate)
    _acc_owned(adj, inputs[2], g * (1.0 - gate))


def _bw_affine_col(adj, inputs, saved, g):
    iw, ix, ib, ip = inputs
    w, x, p, t = saved
    _acc_owned(adj, iw, g[:, None] * x)
    _acc_owned(adj, ix, w.T @ g)
    _acc_shared(adj, ib, g)
    a = adj[ip]
    if a is None:
        a = np.zeros_like(p)
        adj[ip] = a
    a[:, t] += g


def _bw_cell_preact(adj, inputs, saved, g):
    iw, ix, iwc, ixc, ib, ip = inputs
    w, x, wc, xc, p, t = saved
    _acc_owned(adj, iw, g[:, None] * x)
    _acc_owned(adj, ix, w.T @ g)
    _acc_owned(adj, iwc, g[:, None] * xc)
    _acc_owned(adj, ixc, wc.T @ g)
    _acc_shared(adj, ib, g)
    a = adj[ip]
    if a is None:
        a = np.zeros_like(p)
        adj[ip] = a
    a[:, t] += g


def _bw_slice1d(adj, inputs, saved, g):
    lo, hi, parent = saved
    a = adj[inputs[0]]
    if a is None:
        a = np.zeros_like(parent)
        adj[inputs[0]] = a
    a[lo:hi] += g


def _bw_stack_rows(adj, inputs, saved, g):
    for i, idx in enumerate(inputs):
        _acc_shared(adj, idx, g[i])


def _bw_sum(adj, inputs, saved, g):
    _acc_owned(adj, inputs[0], np.full_like(saved, g))


def _bw_mse_loss(adj, inputs, saved, g):
    diff, n = saved
    _acc_owned(adj, inputs[0], (2.0 * g / n) * diff)


_ADJOINT_RULES = {
    "matvec": _bw_matvec,
    "matmul": _bw_matmul,
    "add": _bw_add,
    "scale": _bw_scale,
    "axpy": _bw_axpy,
    "tanh": _bw_tanh,
    "sigmoid": _bw_sigmoid,
    "abs_square": _bw_abs_square,
    "mul": _bw_mul,
    "lerp": _bw_lerp,
    "affine_col": _bw_affine_col,
    "cell_preact": _bw_cell_preact,
    "slice1d": _bw_slice1d,
    "stack_rows": _bw_stack_rows,
    "sum": _bw_sum,
    "mse_loss": _bw_mse_loss,
}


# ------------------------------------------------------------------ checking


def grad_check(build, params: dict[str, np.ndarray], eps: float = 1e-5) -> float:
    """Compare tape gradients against central finite differences.

    ``build(tape, leaves)`` must construct and return a scalar loss Var from
    the dict of leaf Vars (one per entry of ``params``). Returns the worst
    relative error over all coordinates, with denominator
    max(|g_fd|, |g_tape|, 1e-12).
    """
    tape = Tape()
    leaves = {k: tape.leaf(v) for k, v in params.items()}
    loss = build(tape, leaves)
    tape.backward(loss)
    grads = {k: tape.adjoint(v) for k, v in leaves.items()}

    def eval_loss(work: dict[str, np.ndarray]) -> float:
        t = Tape()
        lv = {k: t.leaf(v) for k, v in work.items()}
        return float(build(t, lv).value)

    worst = 0.0
    work = {k: v.astype(np.float64).copy() for k, v in params.items()}
    for name, base in params.items():
        flat = work[name].ravel()
        gflat = grads[name].ravel()
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + eps
            f_plus = eval_loss(work)
            flat[j] = orig - eps
            f_minus = eval_loss(work)
            flat[j] = orig
            g_fd = (f_plus - f_minus) / (2.0 * eps)
            denom = max(abs(g_fd), abs(gflat[j]), 1e-12)
            worst = max(worst, abs(g_fd - gflat[j]) / denom)
    return worst
