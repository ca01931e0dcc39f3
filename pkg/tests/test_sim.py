import math

import numpy as np
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from t2stc.controller import NoControl, SlidingSpec
from t2stc.it2fls import NonFiringInputError
from t2stc.plant import (
    NoiseSpec, PlantBounds, PlantModel, duffing_preset, reference_preset, unforced, zero_reference,
)
from t2stc.sim import (
    Metrics, SimConfig, SimulationDiverged, Trajectory, compute_metrics, free_run, rk4_step,
    run_closed_loop, sliding_consistency_check, total_variation, window_envelope,
)


def _traj(t, e1=None, u=None, s=None):
    t = np.asarray(t, float)
    n = t.size
    z = np.zeros(n)
    e = np.zeros((n, 2))
    if e1 is not None:
        e[:, 0] = e1
    return Trajectory(t, np.zeros((n, 2)), np.zeros((n, 2)), z, z, e,
                      z if s is None else np.asarray(s, float), z,
                      z if u is None else np.asarray(u, float), np.zeros((n, 3)))


def _linear_plant(a1=0.0, a2=0.0, forcing=0.0):
    # x'' = a1 x + a2 x' + forcing
    return PlantModel(2, lambda x, t: a1 * x[0] + a2 * x[1], lambda x, t: 0.0,
                      lambda t: forcing, PlantBounds(10.0, 0.0, abs(forcing)), "linear")


# integrator

def test_rk4_zero_field():
    x = np.array([1.5, -2.0])
    np.testing.assert_array_equal(rk4_step(lambda x, t: np.zeros(2), x, 0.0, 0.1), x)


@given(st.floats(-3, 3), st.floats(1e-3, 0.1))
def test_rk4_exponential_local_error(a, h):
    x1 = rk4_step(lambda x, t: a * x, np.array([1.0]), 0.0, h)[0]
    # Taylor remainder of exp after the quartic term
    z = abs(a) * h
    assert abs(x1 - math.exp(a * h)) <= z ** 5 / 120 * math.exp(z) + 1e-15


def test_rk4_fifth_order_local_error():
    errs = [abs(rk4_step(lambda x, t: -x, np.array([1.0]), 0.0, h)[0] - math.exp(-h))
            for h in (0.2, 0.1)]
    assert errs[0] / errs[1] == pytest.approx(32, rel=0.1)


def test_rk4_harmonic_energy_drift():
    x = np.array([1.0, 0.0])
    e0 = 0.5 * (x @ x)
    for k in range(10_000):
        x = rk4_step(lambda y, t: np.array([y[1], -y[0]]), x, k * 1e-3, 1e-3)
    assert abs(0.5 * (x @ x) - e0) / e0 < 1e-8


def test_rk4_rejects_bad_input():
    with pytest.raises(ValueError):
        rk4_step(lambda x, t: x, np.ones(1), 0.0, 0.0)
    with pytest.raises(FloatingPointError):
        rk4_step(lambda x, t: np.array([math.nan]), np.ones(1), 0.0, 0.1)


def test_plant_rk4_matches_numpy_rk4():
    from t2stc.plant import plant_derivative
    from t2stc.sim import _plant_rk4
    p = duffing_preset()
    x = [0.7, -0.4]
    for k in range(50):
        t = 0.37 + k * 1e-2
        fast = _plant_rk4(p, x, t, 1e-2, 0.3)
        ref = rk4_step(lambda y, tt: plant_derivative(p, y, tt, 0.3), np.array(x), t, 1e-2)
        np.testing.assert_allclose(fast, ref, rtol=1e-14, atol=1e-14)
        x = fast


# config

@pytest.mark.parametrize("kw", [dict(h=0.0), dict(h=0.02), dict(t_end=0.0), dict(decimate=0),
                                dict(controller_kind="pid")])
def test_sim_config_invariants(kw):
    with pytest.raises(ValueError):
        SimConfig(**kw)


def test_sim_config_steps():
    assert SimConfig(t_end=20.0, h=1e-3).n_steps == 20_000


# metrics

def test_metrics_zero_error():
    m = compute_metrics(_traj(np.linspace(0, 20, 201)), (10, 20))
    assert m.rmse_e1 == 0.0 and m.rmse_e2 == 0.0 and m.settle_time == 0.0
    assert m.tv_u == 0.0


def test_metrics_constant_u():
    assert compute_metrics(_traj(np.linspace(0, 20, 201), u=np.full(201, 3.3))).tv_u == 0.0


def test_total_variation_alternating():
    k, n = 2.5, 101
    u = k * (-1.0) ** np.arange(n)
    assert total_variation(u) == pytest.approx(2 * k * (n - 1))


def test_settle_time_and_unsettled():
    t = np.linspace(0, 10, 11)
    e1 = np.array([1, 0.5, 0.2, 0.01, 0.2, 0.04, 0.03, 0.0, 0.0, 0.0, 0.0])
    m = compute_metrics(_traj(t, e1=e1), (0, 10))
    assert m.settle_time == 5.0
    assert m.settled
    e1[-1] = 1.0
    m = compute_metrics(_traj(t, e1=e1), (0, 10))
    assert math.isinf(m.settle_time) and not m.settled


def test_rmse_window():
    t = np.linspace(0, 4, 5)
    m = compute_metrics(_traj(t, e1=[9.0, 9.0, 3.0, 4.0, 0.0]), (2, 3))
    assert m.rmse_e1 == pytest.approx(math.sqrt(12.5))


def test_empty_window():
    with pytest.raises(ValueError):
        compute_metrics(_traj(np.linspace(0, 1, 11)), (5, 6))
    with pytest.raises(ValueError):
        compute_metrics(_traj(np.linspace(0, 1, 11)), (1, 0))


def test_window_envelope():
    t = np.linspace(0, 3, 301)
    v = np.where(t < 1, 3.0, np.where(t < 2, -2.0, 1.0))
    np.testing.assert_allclose(window_envelope(t, v, 1.0, 0.0, 3.0), [3.0, 2.0, 1.0])


# closed loop

def test_free_run_bounded():
    cfg = SimConfig(t_end=100.0, x0=(0.1, 0.0), controller_kind="none")
    traj, _ = run_closed_loop(cfg, duffing_preset(), NoControl(), reference_preset(),
                              metrics_window=None, )
    assert np.abs(traj.x).max() < 5
    t, x = free_run(duffing_preset(), (0.1, 0.0), 100.0)
    np.testing.assert_array_equal(x, traj.x)


def test_trajectory_invariants():
    cfg = SimConfig(t_end=1.0, decimate=7, controller_kind="none")
    traj, m = run_closed_loop(cfg, duffing_preset(), NoControl(), reference_preset(),
                              metrics_window=(0.0, 1.0))
    assert np.all(np.diff(traj.t) > 0)
    assert len({len(traj.t), len(traj.x), len(traj.e), len(traj.s), len(traj.u),
                len(traj.theta_norms), len(traj.yd)}) == 1
    assert len(traj) == 1000 // 7 + 1
    assert isinstance(m, Metrics)


def test_true_and_measured_signals():
    cfg = SimConfig(t_end=0.5, controller_kind="none", noise=NoiseSpec(20.0, 3))
    traj, _ = run_closed_loop(cfg, duffing_preset(), NoControl(), reference_preset())
    np.testing.assert_allclose(traj.e[:, 0], traj.x[:, 0] - traj.yd, atol=1e-15)
    np.testing.assert_allclose(traj.s, traj.e[:, 1] + 10 * traj.e[:, 0], atol=1e-12)
    assert np.any(traj.x_meas != traj.x)


def test_simulation_is_deterministic():
    from t2stc.controller import build_adaptive_controller
    cfg = SimConfig(t_end=1.0, noise=NoiseSpec(20.0, 5))
    a, _ = run_closed_loop(cfg, duffing_preset(), build_adaptive_controller(), reference_preset())
    b, _ = run_closed_loop(cfg, duffing_preset(), build_adaptive_controller(), reference_preset())
    for f in ("t", "x", "x_meas", "e", "s", "u", "theta_norms"):
        np.testing.assert_array_equal(getattr(a, f), getattr(b, f))


def test_divergence_reports_step():
    blowup = PlantModel(2, lambda x, t: x[1] ** 3, lambda x, t: 0.0, lambda t: 0.0,
                        PlantBounds(1.0, 0.0, 0.0), "blowup")
    with pytest.raises(SimulationDiverged) as info:
        run_closed_loop(SimConfig(t_end=10.0, h=0.01, x0=(0.0, 5.0), controller_kind="none"),
                        blowup, NoControl(), zero_reference())
    assert info.value.step > 0
    assert "step" in str(info.value)


def test_non_firing_input_reports_step():
    from t2stc.controller import build_adaptive_controller, make_sets
    narrow = make_sets([(-0.01, 0.01)], 0.001)
    ctrl = build_adaptive_controller(surface_sets=narrow, surface2_sets=narrow)
    with pytest.raises(NonFiringInputError, match="step 0"):
        run_closed_loop(SimConfig(t_end=1.0), duffing_preset(), ctrl, reference_preset())


def test_order_mismatch():
    with pytest.raises(ValueError):
        run_closed_loop(SimConfig(x0=(0.0, 0.0, 0.0)), duffing_preset(), NoControl(),
                        reference_preset())


def test_step_halving_is_converged():
    from t2stc.controller import build_adaptive_controller
    out = []
    for h in (1e-3, 5e-4):
        traj, _ = run_closed_loop(SimConfig(t_end=20.0, h=h), duffing_preset(),
                                  build_adaptive_controller(), reference_preset(),
                                  metrics_window=None)
        out.append(traj.e1[-1])
    assert abs(out[0] - out[1]) < 1e-3


# sliding identity

def test_consistency_zero_input_free_run():
    cfg = SimConfig(t_end=5.0, x0=(0.1, 0.0), controller_kind="none")
    p = duffing_preset()
    traj, _ = run_closed_loop(cfg, p, NoControl(), reference_preset(), metrics_window=None)
    assert sliding_consistency_check(traj, SlidingSpec(2, 10.0), p, reference_preset()) < 1e-3


def test_consistency_constant_error_segment():
    # x'' = 0 from rest with a zero reference keeps e constant
    p = _linear_plant()
    traj, _ = run_closed_loop(SimConfig(t_end=0.5, x0=(0.3, 0.0), controller_kind="none"),
                              p, NoControl(), zero_reference(), metrics_window=None)
    assert sliding_consistency_check(traj, SlidingSpec(2, 10.0), p, zero_reference()) == 0.0


def test_consistency_needs_samples():
    with pytest.raises(ValueError):
        sliding_consistency_check(_traj([0.0]), SlidingSpec(2, 1.0), _linear_plant(),
                                  zero_reference())


def test_consistency_detects_a_wrong_model():
    p = _linear_plant(-1.0)
    traj, _ = run_closed_loop(SimConfig(t_end=2.0, x0=(1.0, 0.0), controller_kind="none"),
                              p, NoControl(), zero_reference(), metrics_window=None)
    wrong = _linear_plant(-1.5)
    assert sliding_consistency_check(traj, SlidingSpec(2, 10.0), wrong, zero_reference()) > 0.1
