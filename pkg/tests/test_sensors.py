import numpy as np
import pytest

from drilltwin.geometry import RigidTransform, Wrench
from drilltwin.sensors import (SensorModel, SensorSim, default_drill_sensor,
                               default_wrist_sensor, estimate_tip_force)


def test_sensor_model_validation():
    with pytest.raises(ValueError):
        SensorModel("x", "drill", rate_hz=0.0)
    with pytest.raises(ValueError):
        SensorModel("x", "drill", noise_std_n=-0.1)
    assert SensorModel("x", "drill", rate_hz=200.0).period_s == pytest.approx(0.005)


def test_zero_order_hold_and_sample_index():
    sim = SensorSim(default_drill_sensor(0.0), np.random.default_rng(0))
    assert sim.held() is None
    w = Wrench([1.0, 0.0, 0.0], np.zeros(3), "tip")
    r0 = sim.sample(0.0, w)
    assert sim.held() is r0
    assert r0.sample_index == 0
    r1 = sim.sample(0.005, w)
    assert sim.held() is r1
    assert r1.sample_index == 1


def test_mounting_transform_hand_computed():
    # drill sensor sits 40 mm up the shaft: f=(1,0,0) at the tip shows up with
    # lever torque (0,0,-40) x (1,0,0) = (0,-40,0)
    sim = SensorSim(default_drill_sensor(0.0), np.random.default_rng(0))
    r = sim.sample(0.0, Wrench([1.0, 0.0, 0.0], np.zeros(3), "tip"))
    assert r.wrench.frame == "drill"
    assert np.allclose(r.wrench.force, [1.0, 0.0, 0.0], atol=1e-12)
    assert np.allclose(r.wrench.torque, [0.0, -40.0, 0.0], atol=1e-12)


def test_estimate_inverts_mounting():
    model = default_drill_sensor(0.0)
    sim = SensorSim(model, np.random.default_rng(0))
    true = Wrench([0.3, -0.2, 0.9], [5.0, -1.0, 2.0], "tip")
    r = sim.sample(0.0, true)
    est = estimate_tip_force(r, model, 0.001)
    assert np.allclose(est.wrench.force, true.force, atol=1e-12)
    assert np.allclose(est.wrench.torque, true.torque, atol=1e-12)
    assert est.magnitude == pytest.approx(np.linalg.norm(true.force), abs=1e-12)


def test_staleness_window_is_two_periods():
    model = default_drill_sensor(0.0)           # 200 Hz, period 5 ms
    sim = SensorSim(model, np.random.default_rng(0))
    r = sim.sample(1.0, Wrench.zero("tip"))
    assert not estimate_tip_force(r, model, 1.0).stale
    assert not estimate_tip_force(r, model, 1.0 + 2 * model.period_s).stale
    assert estimate_tip_force(r, model, 1.0 + 2 * model.period_s + 1e-6).stale


def test_noise_statistics():
    sigma = 0.02
    model = default_wrist_sensor(sigma)
    sim = SensorSim(model, np.random.default_rng(99))
    true = Wrench([0.5, -1.0, 2.0], np.zeros(3), "tip")
    errs = []
    for k in range(4000):
        r = sim.sample(k * model.period_s, true)
        w = r.wrench
        # undo the mounting rotation-free lever arm: force is unchanged
        errs.append(w.force - true.force)
    errs = np.array(errs)
    assert np.allclose(errs.mean(axis=0), 0.0, atol=0.002)
    assert np.allclose(errs.std(axis=0), sigma, rtol=0.1)


def test_zero_noise_is_exact():
    model = default_wrist_sensor(0.0)
    sim = SensorSim(model, np.random.default_rng(1))
    r = sim.sample(0.0, Wrench([1.0, 2.0, 3.0], np.zeros(3), "tip"))
    assert np.array_equal(r.wrench.force, [1.0, 2.0, 3.0])


def test_bias_walk_off_by_default_and_grows_when_enabled():
    quiet = SensorSim(default_drill_sensor(0.0), np.random.default_rng(3))
    for k in range(50):
        quiet.sample(k * 0.005, Wrench.zero("tip"))
    assert np.array_equal(quiet.bias, np.zeros(3))

    from dataclasses import replace
    model = replace(default_drill_sensor(0.0), bias_walk_n_per_sqrt_s=0.05)
    walk = SensorSim(model, np.random.default_rng(3))
    for k in range(200):
        walk.sample(k * 0.005, Wrench.zero("tip"))
    assert np.linalg.norm(walk.bias) > 0.0
    r = walk.sample(1.0, Wrench([1.0, 0.0, 0.0], np.zeros(3), "tip"))
    assert not np.allclose(r.wrench.force, [1.0, 0.0, 0.0])


def test_estimate_error_bounded_by_noise():
    # the magnitude error of the tip estimate stays within a few noise stds
    sigma = 0.005
    model = default_drill_sensor(sigma)
    sim = SensorSim(model, np.random.default_rng(17))
    worst = 0.0
    for k in range(200):
        true = Wrench([0.1 + 0.01 * k, 0.05, -0.3], np.zeros(3), "tip")
        r = sim.sample(k * model.period_s, true)
        est = estimate_tip_force(r, model, k * model.period_s)
        worst = max(worst, abs(est.magnitude - np.linalg.norm(true.force)))
    assert worst <= 3.0 * sigma * np.sqrt(3.0)


def test_reset_clears_state():
    sim = SensorSim(default_drill_sensor(0.01), np.random.default_rng(0))
    sim.sample(0.0, Wrench.zero("tip"))
    sim.reset()
    assert sim.held() is None
    assert sim.sample(1.0, Wrench.zero("tip")).sample_index == 0
