import numpy as np
import pytest
from numpy.testing import assert_allclose

from hystkit.ode_models import BoucWenParams, DuhemParams, simulate_boucwen, simulate_duhem


def sine_drive(cycles, steps_per_cycle, amplitude=1.0):
    t = np.linspace(0.0, 2 * np.pi * cycles, cycles * steps_per_cycle + 1)
    return amplitude * np.sin(t)


# -------------------------------------------------------------------- Duhem


def test_duhem_a_zero_is_exactly_linear():
    h = np.array([0.0, 0.3, -1.2, 2.5, 0.7])
    b = simulate_duhem(DuhemParams(a=0.0, b=5.0, c=0.25), h, b0=0.1)
    # sequential accumulation vs the telescoped closed form: machine precision
    assert_allclose(b, 0.1 + 0.25 * (h - h[0]), rtol=0, atol=1e-15)


def test_duhem_constant_drive_is_constant():
    b = simulate_duhem(DuhemParams(a=1.0, b=1.0, c=0.1), np.full(50, 0.8), b0=-0.3)
    assert_allclose(b, -0.3, rtol=0, atol=0)


def test_duhem_loop_closes_and_matches_fine_reference():
    p = DuhemParams(a=1.0, b=1.0, c=0.1)
    h = sine_drive(cycles=3, steps_per_cycle=2000)
    b = simulate_duhem(p, h, b0=0.0)
    n = 2000
    closure = abs(b[2 * n] - b[3 * n])
    assert closure <= 1e-3 * np.abs(b).max()
    # reference: same scheme on a 10x finer sampling of the same drive
    h_fine = sine_drive(cycles=3, steps_per_cycle=20000)
    b_fine = simulate_duhem(p, h_fine, b0=0.0)
    assert_allclose(b[::100], b_fine[::1000][: len(b[::100])], atol=5e-3)


# ------------------------------------------------------------------ Bouc-Wen


def test_boucwen_beta_gamma_zero_is_exactly_linear():
    h = np.array([0.0, 1.0, -0.5, 2.0])
    b = simulate_boucwen(BoucWenParams(alpha=0.7, beta=0.0, gamma=0.0, n=2.0), h, b0=0.2)
    assert_allclose(b, 0.2 + 0.7 * (h - h[0]), rtol=0, atol=1e-15)


def test_boucwen_constant_drive_is_constant():
    b = simulate_boucwen(BoucWenParams(1.0, 0.5, 0.5, 1.0), np.full(30, -0.4), b0=0.9)
    assert_allclose(b, 0.9, rtol=0, atol=0)


def test_boucwen_loop_closes():
    # the transient from b0=0 decays ~13x per cycle; for these parameters the
    # first cycle pair inside the 1e-3 closure bound is 3 -> 4 (one cycle
    # later than Duhem)
    p = BoucWenParams(alpha=1.0, beta=0.5, gamma=0.5, n=1.0)
    h = sine_drive(cycles=4, steps_per_cycle=2000)
    b = simulate_boucwen(p, h, b0=0.0)
    n = 2000
    assert abs(b[3 * n] - b[4 * n]) <= 1e-3 * np.abs(b).max()
    h_fine = sine_drive(cycles=4, steps_per_cycle=20000)
    b_fine = simulate_boucwen(p, h_fine, b0=0.0)
    assert_allclose(b[::100], b_fine[::1000][: len(b[::100])], atol=5e-3)


# ------------------------------------------------------ convergence behavior


@pytest.mark.parametrize(
    "simulate,params",
    [
        (simulate_duhem, DuhemParams(a=1.0, b=1.0, c=0.1)),
        (simulate_boucwen, BoucWenParams(alpha=1.0, beta=0.5, gamma=0.5, n=1.0)),
    ],
    ids=["duhem", "boucwen"],
)
def test_step_halving_first_order_convergence(simulate, params):
    # sample the same smooth sinusoidal drive at N, 2N, and 16N points;
    # the error against the fine reference halves when the step halves
    ref = simulate(params, sine_drive(cycles=1, steps_per_cycle=32000), b0=0.0)
    coarse = simulate(params, sine_drive(cycles=1, steps_per_cycle=1000), b0=0.0)
    finer = simulate(params, sine_drive(cycles=1, steps_per_cycle=2000), b0=0.0)
    e1 = abs(coarse[-1] - ref[-1]) + np.abs(coarse[250] - ref[8000])
    e2 = abs(finer[-1] - ref[-1]) + np.abs(finer[500] - ref[8000])
    ratio = e1 / e2
    assert 1.6 <= ratio <= 2.4, f"step-halving error ratio {ratio:.3f}"


# ----------------------------------------------------------------- validation


def test_rejects_short_and_nonfinite_drives():
    p = DuhemParams(1.0, 1.0, 0.1)
    with pytest.raises(ValueError):
        simulate_duhem(p, [1.0])
    with pytest.raises(ValueError):
        simulate_duhem(p, [0.0, np.nan, 1.0])
    with pytest.raises(ValueError):
        simulate_duhem(p, [0.0, 1.0], b0=np.inf)


def test_boucwen_exponent_validation():
    with pytest.raises(ValueError, match="n >= 1"):
        BoucWenParams(1.0, 0.5, 0.5, n=0.5)


def test_params_reject_nonfinite():
    with pytest.raises(ValueError):
        DuhemParams(np.nan, 1.0, 0.0)
    with pytest.raises(ValueError):
        BoucWenParams(np.inf, 0.0, 0.0, 1.0)
