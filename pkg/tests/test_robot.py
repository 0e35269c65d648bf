import numpy as np
import pytest
from importlib import resources

from drilltwin.geometry import RigidTransform, axis_angle_matrix, rpy_matrix
from drilltwin.robot import (AdmittanceGains, Joint, KinematicChain, RobotState,
                             default_chain, forward_kinematics, integrate_step,
                             jacobian, solve_admittance)
from drilltwin.simulate import FastChain


def test_fk_home_pose_hand_composed():
    # default gantry at q=0: 300 up, then -80 -40 -20 wrist stack, -60 tip
    pose = forward_kinematics(default_chain(), np.zeros(6))
    assert np.allclose(pose.rotation, np.eye(3), atol=1e-12)
    assert np.allclose(pose.translation, [0.0, 0.0, 100.0], atol=1e-12)


def test_fk_prismatic_offsets_add():
    pose = forward_kinematics(default_chain(), np.array([10.0, 5.0, -3.0, 0, 0, 0]))
    assert np.allclose(pose.translation, [5.0, -3.0, 110.0], atol=1e-12)
    assert np.allclose(pose.rotation, np.eye(3), atol=1e-12)


def test_fk_wrist_pitch_quarter_turn():
    # pitch joint sits at z=180; the distal 80 mm fold forward along -x
    q = np.zeros(6)
    q[4] = np.pi / 2
    pose = forward_kinematics(default_chain(), q)
    assert np.allclose(pose.translation, [-80.0, 0.0, 180.0], atol=1e-9)
    assert np.allclose(pose.rotation, rpy_matrix(0, np.pi / 2, 0), atol=1e-12)


def test_fk_rejects_wrong_dof():
    with pytest.raises(ValueError):
        forward_kinematics(default_chain(), np.zeros(5))
    with pytest.raises(ValueError):
        jacobian(default_chain(), np.zeros(7))


def _random_q(rng):
    lo, hi = default_chain().limits
    span = np.minimum(hi, 100) - np.maximum(lo, -100)
    return np.maximum(lo, -100) + rng.random(6) * span


def test_jacobian_linear_part_matches_finite_differences():
    chain = default_chain()
    rng = np.random.default_rng(17)
    eps = 1e-6
    for _ in range(20):
        q = _random_q(rng)
        jac = jacobian(chain, q)
        for i in range(chain.dof):
            dq = np.zeros(6)
            dq[i] = eps
            p_plus = forward_kinematics(chain, q + dq).translation
            p_minus = forward_kinematics(chain, q - dq).translation
            fd = (p_plus - p_minus) / (2 * eps)
            assert np.allclose(jac[0:3, i], fd, atol=1e-5)


def test_jacobian_angular_part_matches_rotation_derivative():
    chain = default_chain()
    rng = np.random.default_rng(29)
    eps = 1e-6
    for _ in range(10):
        q = _random_q(rng)
        jac = jacobian(chain, q)
        r0 = forward_kinematics(chain, q).rotation
        for i in range(chain.dof):
            dq = np.zeros(6)
            dq[i] = eps
            r1 = forward_kinematics(chain, q + dq).rotation
            skew = (r1 - r0) @ r0.T / eps
            omega = np.array([skew[2, 1], skew[0, 2], skew[1, 0]])
            assert np.allclose(jac[3:6, i], omega, atol=1e-5)


def test_fast_chain_agrees_with_reference():
    chain = default_chain()
    fast = FastChain(chain)
    rng = np.random.default_rng(101)
    for _ in range(50):
        q = _random_q(rng)
        ref = forward_kinematics(chain, q)
        r, p = fast.tip_pose(q)
        assert np.allclose(r, ref.rotation, atol=1e-12)
        assert np.allclose(p, ref.translation, atol=1e-12)
        r2, p2, jac = fast.tip_and_jacobian(q)
        assert np.allclose(r2, ref.rotation, atol=1e-12)
        assert np.allclose(p2, ref.translation, atol=1e-12)
        assert np.allclose(jac, jacobian(chain, q), atol=1e-12)


def _damped_pinv_oracle(jac, mu):
    """Independent damped least squares via SVD: V diag(s/(s^2+mu^2)) U^T."""
    u, s, vt = np.linalg.svd(jac, full_matrices=False)
    return vt.T @ np.diag(s / (s * s + mu * mu)) @ u.T


def test_admittance_undamped_matches_pinv():
    chain = default_chain()
    gains = AdmittanceGains()
    rng = np.random.default_rng(41)
    for _ in range(50):
        jac = jacobian(chain, _random_q(rng))
        w = rng.normal(size=6) * 4
        dq = solve_admittance(jac, gains, 0.7, w, damping=0.0)
        expect = np.linalg.pinv(jac) @ (0.7 * gains.diagonal() * w)
        assert np.allclose(dq, expect, atol=1e-9)


def test_admittance_damped_matches_svd_oracle():
    chain = default_chain()
    gains = AdmittanceGains()
    rng = np.random.default_rng(43)
    for _ in range(50):
        jac = jacobian(chain, _random_q(rng))
        w = rng.normal(size=6) * 4
        mu = 10 ** rng.uniform(-4, -1)
        dq = solve_admittance(jac, gains, 1.2, w, damping=mu)
        v = 1.2 * gains.diagonal() * w
        assert np.allclose(dq, _damped_pinv_oracle(jac, mu) @ v, atol=1e-9)


def test_admittance_damped_objective_local_minimum():
    chain = default_chain()
    gains = AdmittanceGains()
    rng = np.random.default_rng(47)
    for _ in range(10):
        jac = jacobian(chain, _random_q(rng))
        w = rng.normal(size=6) * 4
        mu = 1e-2
        v = 0.9 * gains.diagonal() * w
        dq = solve_admittance(jac, gains, 0.9, w, damping=mu)

        def objective(x):
            r = jac @ x - v
            return float(r @ r + mu * mu * (x @ x))

        base = objective(dq)
        for _ in range(100):
            delta = rng.normal(size=6)
            delta *= 1e-4 / np.linalg.norm(delta)
            assert objective(dq + delta) >= base - 1e-12


def test_admittance_negative_damping_rejected():
    jac = jacobian(default_chain(), np.zeros(6))
    with pytest.raises(ValueError):
        solve_admittance(jac, AdmittanceGains(), 1.0, np.zeros(6), damping=-1.0)


def test_admittance_gain_validation():
    with pytest.raises(ValueError):
        AdmittanceGains(translational=0.0)
    with pytest.raises(ValueError):
        AdmittanceGains(rotational=-1e-4)
    assert np.array_equal(AdmittanceGains(0.25, 1e-4).diagonal(),
                          [0.25, 0.25, 0.25, 1e-4, 1e-4, 1e-4])


def test_integrate_step_linearity():
    chain = default_chain()
    state = RobotState(np.zeros(6))
    dq = np.array([1.0, -2.0, 0.5, 0.01, -0.02, 0.03])
    dt = 1e-3
    for _ in range(1000):
        state = integrate_step(chain, state, dq, dt)
    assert np.allclose(state.q, dq * 1.0, atol=1e-9)
    assert not state.at_limit.any()


def test_integrate_step_clamps_at_limits():
    chain = default_chain()
    state = RobotState(np.array([149.9, 0, 0, 0, 0, 0]))
    state = integrate_step(chain, state, np.array([1000.0, 0, 0, 0, 0, 0]), 0.01)
    assert state.q[0] == 150.0
    assert state.at_limit[0]
    assert not state.at_limit[1:].any()


def test_integrate_step_validation():
    chain = default_chain()
    state = RobotState(np.zeros(6))
    with pytest.raises(ValueError):
        integrate_step(chain, state, np.zeros(6), 0.0)
    with pytest.raises(ValueError):
        integrate_step(chain, state, np.zeros(5), 0.001)


def test_joint_validation():
    with pytest.raises(ValueError):
        Joint("bad", "helical", (0, 0, 1))
    with pytest.raises(ValueError):
        Joint("bad", "revolute", (0, 0, 2))
    with pytest.raises(ValueError):
        Joint("bad", "revolute", (0, 0, 1), limit_lo=1.0, limit_hi=1.0)


def test_chain_needs_three_joints():
    j = Joint("a", "prismatic", (0, 0, 1))
    with pytest.raises(ValueError):
        KinematicChain((j, j))


def test_chain_json_roundtrip(tmp_path):
    chain = default_chain()
    back = KinematicChain.from_dict(chain.to_dict())
    assert back == chain
    path = tmp_path / "chain.json"
    chain.save(path)
    assert KinematicChain.load(path) == chain


def test_packaged_chain_matches_default():
    path = resources.files("drilltwin").joinpath("chains/gantry6.json")
    with resources.as_file(path) as p:
        assert KinematicChain.load(p) == default_chain()
