import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from hystkit import cells
from hystkit.autodiff import Tape
from numdiff import stencil_grad_err


def zeroed(kind, m, dt=0.5):
    p = cells.init_params(kind, m, seed=0, dt=dt)
    return type(p)(**{k: np.zeros_like(v) for k, v in p.tensors().items()}, dt=dt)


# ------------------------------------------------------------- oscillator cell


def test_hystrnn_zero_params_fixed_point():
    p = zeroed("hystrnn", 3)
    s = cells.hystrnn_step(p, cells.HiddenState(np.zeros(3), np.zeros(3)), np.array([0.4, -0.9]))
    assert_array_equal(s.y, np.zeros(3))
    assert_array_equal(s.z, np.zeros(3))


def test_hystrnn_first_branch_hand_value():
    # m=1, only V1 = [1, 0], dt = 0.5, u = (1, 0):
    # z1 = 0.5*tanh(1), y1 = 0.5*z1
    p = zeroed("hystrnn", 1, dt=0.5)
    p.V1[:] = [[1.0, 0.0]]
    s = cells.hystrnn_step(p, cells.HiddenState(np.zeros(1), np.zeros(1)), np.array([1.0, 0.0]))
    assert_allclose(s.z, [0.5 * math.tanh(1.0)], rtol=1e-15)
    assert_allclose(s.y, [0.25 * math.tanh(1.0)], rtol=1e-15)
    assert s.z[0] == pytest.approx(0.3807970780, abs=1e-10)
    assert s.y[0] == pytest.approx(0.1903985390, abs=1e-10)


def test_hystrnn_squared_branch_kills_input_sign():
    # only V2 nonzero: u = (-1, 0) passes through |u|^2, so z1 = 0.5*tanh(1)
    p = zeroed("hystrnn", 1, dt=0.5)
    p.V2[:] = [[1.0, 0.0]]
    s = cells.hystrnn_step(p, cells.HiddenState(np.zeros(1), np.zeros(1)), np.array([-1.0, 0.0]))
    assert_allclose(s.z, [0.5 * math.tanh(1.0)], rtol=1e-15)


def test_hystrnn_velocity_feeds_position_update():
    # y update uses the *new* z: y1 = y0 + dt*z1
    rng = np.random.default_rng(0)
    p = cells.init_params("hystrnn", 4, seed=1, dt=0.3)
    s0 = cells.HiddenState(rng.uniform(-1, 1, 4), rng.uniform(-1, 1, 4))
    s1 = cells.hystrnn_step(p, s0, rng.uniform(-1, 1, 2))
    assert_allclose(s1.y, s0.y + 0.3 * s1.z, rtol=1e-15)


def test_hystrnn_branch2_off_reduces_to_first_branch_update():
    rng = np.random.default_rng(3)
    for trial in range(100):
        m = int(rng.integers(1, 6))
        p = cells.init_params("hystrnn", m, seed=trial, dt=0.1)
        for name in ("W2", "Wc2", "V2", "b2"):
            getattr(p, name)[:] = 0.0
        y0 = rng.uniform(-1, 1, m)
        z0 = rng.uniform(-1, 1, m)
        u = rng.uniform(-1, 1, 2)
        s1 = cells.hystrnn_step(p, cells.HiddenState(y0, z0), u)
        z_expect = z0 + 0.1 * np.tanh(p.W1 @ y0 + p.Wc1 @ z0 + p.V1 @ u + p.b1)
        assert_allclose(s1.z, z_expect, rtol=1e-14)
        assert_allclose(s1.y, y0 + 0.1 * z_expect, rtol=1e-14)


def test_hystrnn_sign_symmetry_of_squared_branch():
    # with branch-1 weights zero the trajectory is invariant under u -> -u
    rng = np.random.default_rng(4)
    for trial in range(100):
        m = int(rng.integers(1, 6))
        p = cells.init_params("hystrnn", m, seed=1000 + trial, dt=0.1)
        for name in ("W1", "Wc1", "V1", "b1"):
            getattr(p, name)[:] = 0.0
        us = rng.uniform(-1, 1, (8, 2))
        s_pos = cells.HiddenState(np.zeros(m), np.zeros(m))
        s_neg = cells.HiddenState(np.zeros(m), np.zeros(m))
        for u in us:
            s_pos = cells.hystrnn_step(p, s_pos, u)
            s_neg = cells.hystrnn_step(p, s_neg, -u)
        assert_array_equal(s_pos.y, s_neg.y)
        assert_array_equal(s_pos.z, s_neg.z)


def test_hystrnn_explicit_scheme_first_order_convergence():
    # halving dt against a smooth drive: global error halves (ratio 2 +- 20%)
    m = 4
    p1 = cells.init_params("hystrnn", m, seed=5, dt=0.2)

    def integrate(dt, n_steps):
        p = type(p1)(**{k: v.copy() for k, v in p1.tensors().items()}, dt=dt)
        s = cells.HiddenState(np.zeros(m), np.zeros(m))
        for k in range(n_steps):
            t = (k + 1) * dt
            u = np.array([math.sin(t), math.cos(t)])
            s = cells.hystrnn_step(p, s, u)
        return s.y

    horizon = 4.0
    ref = integrate(0.2 / 64, int(horizon / 0.2 * 64))
    e1 = np.linalg.norm(integrate(0.2, 20) - ref)
    e2 = np.linalg.norm(integrate(0.1, 40) - ref)
    assert 1.6 <= e1 / e2 <= 2.4


# ------------------------------------------------------------------- readout


def test_readout_zero_q():
    assert cells.readout(np.zeros(4), np.random.default_rng(0).uniform(-1, 1, 4)) == 0.0


def test_readout_coordinate_projection():
    y = np.array([0.3, -0.8, 2.5])
    for i in range(3):
        e = np.zeros(3)
        e[i] = 1.0
        assert cells.readout(e, y) == y[i]


def test_readout_hand_dot():
    assert cells.readout(np.array([1.0, 1.0]), np.array([0.25, -0.75])) == pytest.approx(-0.5)


# ------------------------------------------------------------------ baselines


def test_zero_weights_zero_state_stays_zero():
    u = np.array([0.7, -0.2])
    for kind in ("rnn", "gru"):
        p = zeroed(kind, 3)
        h = cells.step(p, np.zeros(3), u)
        assert_array_equal(h, np.zeros(3))
    p = zeroed("lstm", 3)
    h, c = cells.step(p, (np.zeros(3), np.zeros(3)), u)
    assert_array_equal(c, np.zeros(3))
    assert_array_equal(h, np.zeros(3))


def test_rnn_single_unit_hand_value():
    p = zeroed("rnn", 1)
    p.Wx[:] = [[1.0, 0.0]]
    h = cells.rnn_step(p, np.zeros(1), np.array([1.0, 0.0]))
    assert_allclose(h, [math.tanh(1.0)], rtol=1e-15)


def _sig(x):
    return 1.0 / (1.0 + np.exp(-x))


def _rnn_oracle(p, h, u):
    return np.tanh(p.Wh @ h + p.Wx @ u + p.b)


def _lstm_oracle(p, state, u):
    h, c = state
    m = p.m
    pre = p.Wh @ h + p.Wx @ u + p.b
    i, f, g, o = pre[:m], pre[m : 2 * m], pre[2 * m : 3 * m], pre[3 * m :]
    c_new = _sig(f) * c + _sig(i) * np.tanh(g)
    return _sig(o) * np.tanh(c_new), c_new


def _gru_oracle(p, h, u):
    m = p.m
    pre = p.Wh_ru @ h + p.Wx_ru @ u + p.b_ru
    r, upd = _sig(pre[:m]), _sig(pre[m:])
    n = np.tanh(p.Wh_n @ (r * h) + p.Wx_n @ u + p.b_n)
    return upd * h + (1 - upd) * n


@pytest.mark.parametrize("kind", ["rnn", "lstm", "gru"])
def test_baseline_steps_match_independent_reimplementation(kind):
    oracles = {"rnn": _rnn_oracle, "lstm": _lstm_oracle, "gru": _gru_oracle}
    rng = np.random.default_rng(11)
    for trial in range(50):
        m = int(rng.integers(1, 7))
        p = cells.init_params(kind, m, seed=trial)
        for t in p.tensors().values():
            t += rng.uniform(-0.3, 0.3, t.shape)  # nonzero biases too
        u = rng.uniform(-1.5, 1.5, 2)
        if kind == "lstm":
            state = (rng.uniform(-1, 1, m), rng.uniform(-1, 1, m))
            got_h, got_c = cells.step(p, state, u)
            exp_h, exp_c = _lstm_oracle(p, state, u)
            assert_allclose(got_h, exp_h, rtol=1e-14)
            assert_allclose(got_c, exp_c, rtol=1e-14)
        else:
            h = rng.uniform(-1, 1, m)
            assert_allclose(cells.step(p, h, u), oracles[kind](p, h, u), rtol=1e-14)


# -------------------------------------------------------------- init_params


def test_init_deterministic_for_fixed_seed():
    a = cells.init_params("lstm", 8, seed=42)
    b = cells.init_params("lstm", 8, seed=42)
    for k in a.tensors():
        assert_array_equal(a.tensors()[k], b.tensors()[k])


def test_init_distinct_seeds_differ():
    a = cells.init_params("gru", 8, seed=1)
    b = cells.init_params("gru", 8, seed=2)
    assert any(not np.array_equal(a.tensors()[k], b.tensors()[k]) for k in a.tensors())


def test_init_weight_bound_m32():
    p = cells.init_params("hystrnn", 32, seed=3)
    bound = 1.0 / math.sqrt(32)
    assert bound == pytest.approx(0.1768, abs=5e-5)
    for name, t in p.tensors().items():
        assert np.all(np.abs(t) <= bound), name


def test_init_biases_zero():
    for kind, bias_names in {
        "hystrnn": ("b1", "b2"),
        "rnn": ("b",),
        "lstm": ("b",),
        "gru": ("b_ru", "b_n"),
    }.items():
        p = cells.init_params(kind, 6, seed=9)
        for name in bias_names:
            assert_array_equal(getattr(p, name), np.zeros_like(getattr(p, name)))


def test_init_rejects_unknown_kind():
    with pytest.raises(ValueError, match="unknown cell kind"):
        cells.init_params("transformer", 4, seed=0)


def test_hystrnn_params_validate_dt():
    with pytest.raises(ValueError, match="dt"):
        cells.init_params("hystrnn", 4, seed=0, dt=1.5)


# ----------------------------------------------------- tape/pure consistency


@pytest.mark.parametrize("kind", cells.CELL_KINDS)
def test_tape_forward_matches_pure_steps(kind):
    rng = np.random.default_rng(21)
    p = cells.init_params(kind, 5, seed=13)
    inputs = rng.uniform(-1, 1, (40, 2))
    targets = rng.uniform(-1, 1, 40)
    tape = Tape()
    _, preds, _ = cells.sequence_loss(tape, p, inputs, targets)
    # input projections are batched on the tape, so summation order differs
    # from the per-step path by a few ulps
    assert_allclose(preds.value, cells.teacher_forced_outputs(p, inputs), rtol=1e-12, atol=1e-15)


# ------------------------------------------------------------ BPTT gradients


def _random_full_params(kind, m, seed):
    """All tensors random (biases included): keeps every gradient coordinate
    large enough for finite differences to resolve."""
    rng = np.random.default_rng(seed)
    p = cells.init_params(kind, m, seed)
    tensors = {k: rng.uniform(-0.5, 0.5, v.shape) for k, v in p.tensors().items()}
    return type(p)(**tensors, dt=p.dt)


@pytest.mark.parametrize("kind", cells.CELL_KINDS)
def test_bptt_gradients_match_finite_differences(kind):
    rng = np.random.default_rng(31)
    inputs = rng.uniform(-1, 1, (20, 2))
    targets = rng.uniform(-1, 1, 20)
    worst = 0.0
    for seed in range(5):
        p = _random_full_params(kind, 4, seed)

        def build(tape, leaves, p=p):
            loss, _, _ = cells.sequence_loss(tape, p, inputs, targets, leaves=leaves)
            return loss

        worst = max(worst, stencil_grad_err(build, p.tensors()))
    assert worst <= 1e-5, f"{kind}: worst rel err {worst:.3e}"


def test_bptt_gradient_full_595_step_sequence():
    # long-horizon check on a 4-unit instance, as a guard against error
    # accumulation over the full training sequence length. dt is small so the
    # undamped oscillator stays out of tanh saturation for 595 steps: a
    # saturated trajectory has gradients below what finite differences can
    # resolve, which would make the comparison vacuous.
    rng = np.random.default_rng(41)
    inputs = rng.uniform(-1, 1, (595, 2))
    targets = rng.uniform(-1, 1, 595)
    rng2 = np.random.default_rng(7)
    base = cells.init_params("hystrnn", 4, 7, dt=0.005)
    tensors = {k: rng2.uniform(-0.3, 0.3, v.shape) for k, v in base.tensors().items()}
    p = type(base)(**tensors, dt=0.005)

    state = cells.init_state(p)
    peak = 0.0
    for u in inputs:
        state = cells.hystrnn_step(p, state, u)
        peak = max(peak, float(np.abs(state.y).max()))
    assert peak < 10.0, "trajectory saturated; gradient check would be vacuous"

    def build(tape, leaves):
        loss, _, _ = cells.sequence_loss(tape, p, inputs, targets, leaves=leaves)
        return loss

    err = stencil_grad_err(build, p.tensors())
    assert err <= 1e-5, f"595-step BPTT worst rel err {err:.3e}"
