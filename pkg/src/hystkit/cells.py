"""Recurrent cells for B-H sequence modeling.

Four cell kinds share the same contract: input is the 2-vector
(H at the current step, B at the previous step), hidden width is m, and a
linear readout q . y produces the scalar B estimate.

``hystrnn`` is a neural oscillator: the hidden pair (y, z) discretizes a
second-order ODE with two tanh branches, the second of which sees the
elementwise squares |y|^2, |z|^2, |u|^2. The squared branch is what lets the
cell represent the even-symmetric curvature of hysteresis branches.
``rnn``/``lstm``/``gru`` are the standard formulations.

Each kind has a pure-numpy step function (used for closed-loop rollout) and
a tape unroll (used for training with backpropagation through time). The
two paths are tested against each other; gradients are checked against
finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tape, Var

__all__ = [
    "CELL_KINDS",
    "HiddenState",
    "HystRNNParams",
    "RNNParams",
    "LSTMParams",
    "GRUParams",
    "init_params",
    "hystrnn_step",
    "rnn_step",
    "lstm_step",
    "gru_step",
    "readout",
    "init_state",
    "step",
    "output",
    "teacher_forced_outputs",
    "sequence_loss",
]

CELL_KINDS = ("hystrnn", "rnn", "lstm", "gru")

INPUT_WIDTH = 2  # (H_j, B_{j-1})


@dataclass
class HiddenState:
    """Oscillator state: position-like y and velocity-like z = y'."""

    y: np.ndarray
    z: np.ndarray


@dataclass
class HystRNNParams:
    """Weights of the oscillator cell.

    z_n = z_{n-1} + dt*tanh(W1 y + Wc1 z + V1 u + b1)
                  + dt*tanh(W2 |y|^2 + Wc2 |z|^2 + V2 |u|^2 + b2)
    y_n = y_{n-1} + dt*z_n

    y0/z0 are the trainable initial state. The state is an integrator, so a
    hard zero start cannot emit the loop's starting flux density for the
    first tens of steps; letting the optimizer place the initial state
    removes that irreducible transient.
    """

    W1: np.ndarray
    Wc1: np.ndarray
    V1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    Wc2: np.ndarray
    V2: np.ndarray
    b2: np.ndarray
    q: np.ndarray
    y0: np.ndarray
    z0: np.ndarray
    dt: float = 0.05
    kind: str = field(default="hystrnn", init=False)

    def __post_init__(self):
        if not 0.0 < self.dt < 1.0:
            raise ValueError(f"dt must lie in (0, 1), got {self.dt}")
        m = self.q.shape[0]
        for name in ("W1", "Wc1", "W2", "Wc2"):
            if getattr(self, name).shape != (m, m):
                raise ValueError(f"{name} must be ({m}, {m})")
        for name in ("V1", "V2"):
            if getattr(self, name).shape != (m, INPUT_WIDTH):
                raise ValueError(f"{name} must be ({m}, {INPUT_WIDTH})")
        for name in ("b1", "b2", "y0", "z0"):
            if getattr(self, name).shape != (m,):
                raise ValueError(f"{name} must be ({m},)")

    @property
    def m(self) -> int:
        return self.q.shape[0]

    def tensors(self) -> dict[str, np.ndarray]:
        return {
            "W1": self.W1, "Wc1": self.Wc1, "V1": self.V1, "b1": self.b1,
            "W2": self.W2, "Wc2": self.Wc2, "V2": self.V2, "b2": self.b2,
            "q": self.q, "y0": self.y0, "z0": self.z0,
        }


@dataclass
class RNNParams:
    Wh: np.ndarray
    Wx: np.ndarray
    b: np.ndarray
    q: np.ndarray
    h0: np.ndarray
    dt: float = 0.05  # unused by the update; kept so all kinds share metadata
    kind: str = field(default="rnn", init=False)

    @property
    def m(self) -> int:
        return self.q.shape[0]

    def tensors(self) -> dict[str, np.ndarray]:
        return {"Wh": self.Wh, "Wx": self.Wx, "b": self.b, "q": self.q, "h0": self.h0}


@dataclass
class LSTMParams:
    """Gates stacked in i, f, g, o order: Wh is (4m, m), Wx is (4m, 2)."""

    Wh: np.ndarray
    Wx: np.ndarray
    b: np.ndarray
    q: np.ndarray
    h0: np.ndarray
    c0: np.ndarray
    dt: float = 0.05
    kind: str = field(default="lstm", init=False)

    @property
    def m(self) -> int:
        return self.q.shape[0]

    def tensors(self) -> dict[str, np.ndarray]:
        return {
            "Wh": self.Wh, "Wx": self.Wx, "b": self.b, "q": self.q,
            "h0": self.h0, "c0": self.c0,
        }


@dataclass
class GRUParams:
    """Reset/update gates stacked (r then u); candidate weights separate."""

    Wh_ru: np.ndarray
    Wx_ru: np.ndarray
    b_ru: np.ndarray
    Wh_n: np.ndarray
    Wx_n: np.ndarray
    b_n: np.ndarray
    q: np.ndarray
    h0: np.ndarray
    dt: float = 0.05
    kind: str = field(default="gru", init=False)

    @property
    def m(self) -> int:
        return self.q.shape[0]

    def tensors(self) -> dict[str, np.ndarray]:
        return {
            "Wh_ru": self.Wh_ru, "Wx_ru": self.Wx_ru, "b_ru": self.b_ru,
            "Wh_n": self.Wh_n, "Wx_n": self.Wx_n, "b_n": self.b_n, "q": self.q,
            "h0": self.h0,
        }


CellParams = HystRNNParams | RNNParams | LSTMParams | GRUParams


def init_params(kind: str, m: int, seed: int, dt: float = 0.05) -> CellParams:
    """Seeded initialization; biases and initial states start at zero.

    Input and gate weights are uniform in [-1/sqrt(m), 1/sqrt(m)]. For the
    oscillator cell the recurrent matrices use the tighter bound 1/m and the
    readout 1/(10 sqrt(m)): the undamped double integrator amplifies state
    over the sequence, and at the wider bound the forward pass saturates
    every tanh before training starts.
    """
    if kind not in CELL_KINDS:
        raise ValueError(f"unknown cell kind {kind!r}; expected one of {CELL_KINDS}")
    rng = np.random.default_rng(seed)
    bound = 1.0 / np.sqrt(m)

    def w(*shape):
        return rng.uniform(-bound, bound, size=shape)

    def w_rec(*shape):
        return rng.uniform(-1.0 / m, 1.0 / m, size=shape)

    if kind == "hystrnn":
        return HystRNNParams(
            W1=w_rec(m, m), Wc1=w_rec(m, m), V1=w(m, INPUT_WIDTH), b1=np.zeros(m),
            W2=w_rec(m, m), Wc2=w_rec(m, m), V2=w(m, INPUT_WIDTH), b2=np.zeros(m),
            q=0.1 * w(m), y0=np.zeros(m), z0=np.zeros(m), dt=dt,
        )
    if kind == "rnn":
        return RNNParams(
            Wh=w(m, m), Wx=w(m, INPUT_WIDTH), b=np.zeros(m), q=w(m), h0=np.zeros(m), dt=dt
        )
    if kind == "lstm":
        return LSTMParams(
            Wh=w(4 * m, m), Wx=w(4 * m, INPUT_WIDTH), b=np.zeros(4 * m), q=w(m),
            h0=np.zeros(m), c0=np.zeros(m), dt=dt,
        )
    return GRUParams(
        Wh_ru=w(2 * m, m), Wx_ru=w(2 * m, INPUT_WIDTH), b_ru=np.zeros(2 * m),
        Wh_n=w(m, m), Wx_n=w(m, INPUT_WIDTH), b_n=np.zeros(m),
        q=w(m), h0=np.zeros(m), dt=dt,
    )


# ------------------------------------------------------------ pure-numpy steps


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-x))


def hystrnn_step(p: HystRNNParams, state: HiddenState, u: np.ndarray) -> HiddenState:
    y, z = state.y, state.z
    pre1 = p.W1 @ y + p.Wc1 @ z + p.V1 @ u + p.b1
    pre2 = p.W2 @ (y * y) + p.Wc2 @ (z * z) + p.V2 @ (u * u) + p.b2
    z_new = z + p.dt * np.tanh(pre1) + p.dt * np.tanh(pre2)
    y_new = y + p.dt * z_new
    return HiddenState(y=y_new, z=z_new)


def rnn_step(p: RNNParams, h: np.ndarray, u: np.ndarray) -> np.ndarray:
    return np.tanh(p.Wh @ h + p.Wx @ u + p.b)


def lstm_step(p: LSTMParams, state: tuple[np.ndarray, np.ndarray], u: np.ndarray):
    h, c = state
    m = p.m
    pre = p.Wh @ h + p.Wx @ u + p.b
    i = _sigmoid(pre[:m])
    f = _sigmoid(pre[m:2 * m])
    g = np.tanh(pre[2 * m:3 * m])
    o = _sigmoid(pre[3 * m:])
    c_new = f * c + i * g
    h_new = o * np.tanh(c_new)
    return h_new, c_new


def gru_step(p: GRUParams, h: np.ndarray, u: np.ndarray) -> np.ndarray:
    m = p.m
    pre = p.Wh_ru @ h + p.Wx_ru @ u + p.b_ru
    r = _sigmoid(pre[:m])
    upd = _sigmoid(pre[m:])
    n = np.tanh(p.Wh_n @ (r * h) + p.Wx_n @ u + p.b_n)
    return upd * h + (1.0 - upd) * n


def readout(q: np.ndarray, y: np.ndarray) -> float:
    """Linear readout q . y."""
    return float(q @ y)


def init_state(p: CellParams):
    """The cell's trained initial state (zeros until trained)."""
    if p.kind == "hystrnn":
        return HiddenState(y=p.y0.copy(), z=p.z0.copy())
    if p.kind == "lstm":
        return p.h0.copy(), p.c0.copy()
    return p.h0.copy()


def step(p: CellParams, state, u: np.ndarray):
    """Kind-dispatched single step."""
    if p.kind == "hystrnn":
        return hystrnn_step(p, state, u)
    if p.kind == "rnn":
        return rnn_step(p, state, u)
    if p.kind == "lstm":
        return lstm_step(p, state, u)
    return gru_step(p, state, u)


def output(p: CellParams, state) -> float:
    """Readout from the current state."""
    if p.kind == "hystrnn":
        return readout(p.q, state.y)
    if p.kind == "lstm":
        return readout(p.q, state[0])
    return readout(p.q, state)


def teacher_forced_outputs(p: CellParams, inputs: np.ndarray, state=None) -> np.ndarray:
    """Run the cell over an (N, 2) input sequence and return the N readouts."""
    s = init_state(p) if state is None else state
    preds = np.empty(len(inputs))
    for t, u in enumerate(inputs):
        s = step(p, s, u)
        preds[t] = output(p, s)
    return preds


# ----------------------------------------------------------------- tape unroll


def sequence_loss(
    tape: Tape, p: CellParams, inputs: np.ndarray, targets: np.ndarray, leaves: dict | None = None
):
    """Unroll the cell on the tape, returning (loss, preds, leaves).

    ``leaves`` maps tensor names to their leaf Vars; after
    ``tape.backward(loss)`` the gradients are ``tape.adjoint(leaves[name])``.
    Pass pre-made leaves (e.g. from ``grad_check``) to differentiate through
    caller-owned values; their forward values take precedence over the
    arrays in ``p``. Inputs are teacher-forced, so the input projections for
    the whole sequence are precomputed as single matmuls.
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if inputs.ndim != 2 or inputs.shape[1] != INPUT_WIDTH:
        raise ValueError(f"inputs must be (N, {INPUT_WIDTH}), got {inputs.shape}")
    if len(targets) != len(inputs):
        raise ValueError("inputs and targets must have equal length")

    if leaves is None:
        leaves = {name: tape.leaf(t) for name, t in p.tensors().items()}
    elif set(leaves) != set(p.tensors()):
        raise ValueError("supplied leaves must cover exactly the cell's tensors")
    builders = {
        "hystrnn": _unroll_hystrnn,
        "rnn": _unroll_rnn,
        "lstm": _unroll_lstm,
        "gru": _unroll_gru,
    }
    ys = builders[p.kind](tape, p, leaves, inputs)
    Y = tape.stack_rows(ys)
    preds = tape.matvec(Y, leaves["q"])
    loss = tape.mse_loss(preds, targets)
    return loss, preds, leaves


def _unroll_hystrnn(tape: Tape, p: HystRNNParams, lv: dict, inputs: np.ndarray) -> list[Var]:
    n, dt = len(inputs), p.dt
    u_t = tape.leaf(inputs.T)
    usq_t = tape.leaf(inputs.T ** 2)
    P1 = tape.matmul(lv["V1"], u_t)
    P2 = tape.matmul(lv["V2"], usq_t)
    y = lv["y0"]
    z = lv["z0"]
    ys = []
    for t in range(n):
        ysq = tape.abs_square(y)
        zsq = tape.abs_square(z)
        pre1 = tape.cell_preact(lv["W1"], y, lv["Wc1"], z, lv["b1"], P1, t)
        pre2 = tape.cell_preact(lv["W2"], ysq, lv["Wc2"], zsq, lv["b2"], P2, t)
        z = tape.axpy(tape.axpy(z, dt, tape.tanh(pre1)), dt, tape.tanh(pre2))
        y = tape.axpy(y, dt, z)
        ys.append(y)
    return ys


def _unroll_rnn(tape: Tape, p: RNNParams, lv: dict, inputs: np.ndarray) -> list[Var]:
    n = len(inputs)
    P = tape.matmul(lv["Wx"], tape.leaf(inputs.T))
    h = lv["h0"]
    hs = []
    for t in range(n):
        h = tape.tanh(tape.affine_col(lv["Wh"], h, lv["b"], P, t))
        hs.append(h)
    return hs


def _unroll_lstm(tape: Tape, p: LSTMParams, lv: dict, inputs: np.ndarray) -> list[Var]:
    n, m = len(inputs), p.m
    P = tape.matmul(lv["Wx"], tape.leaf(inputs.T))
    h = lv["h0"]
    c = lv["c0"]
    hs = []
    for t in range(n):
        pre = tape.affine_col(lv["Wh"], h, lv["b"], P, t)
        i = tape.sigmoid(tape.slice1d(pre, 0, m))
        f = tape.sigmoid(tape.slice1d(pre, m, 2 * m))
        g = tape.tanh(tape.slice1d(pre, 2 * m, 3 * m))
        o = tape.sigmoid(tape.slice1d(pre, 3 * m, 4 * m))
        c = tape.add(tape.mul(f, c), tape.mul(i, g))
        h = tape.mul(o, tape.tanh(c))
        hs.append(h)
    return hs


def _unroll_gru(tape: Tape, p: GRUParams, lv: dict, inputs: np.ndarray) -> list[Var]:
    n, m = len(inputs), p.m
    u_t = tape.leaf(inputs.T)
    P_ru = tape.matmul(lv["Wx_ru"], u_t)
    P_n = tape.matmul(lv["Wx_n"], u_t)
    h = lv["h0"]
    hs = []
    for t in range(n):
        pre = tape.affine_col(lv["Wh_ru"], h, lv["b_ru"], P_ru, t)
        r = tape.sigmoid(tape.slice1d(pre, 0, m))
        upd = tape.sigmoid(tape.slice1d(pre, m, 2 * m))
        nns = tape.tanh(tape.affine_col(lv["Wh_n"], tape.mul(r, h), lv["b_n"], P_n, t))
        h = tape.lerp(upd, h, nns)
        hs.append(h)
    return hs
