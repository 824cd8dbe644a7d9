import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from symgait import quadsim
from symgait.quadsim import (
    DomainRandomization,
    Morphology,
    SimulationFault,
    angular_momentum,
    contact_force,
    foot_kinematics,
    observation_noise,
    pd_torque,
    randomize_domain,
    stack_morphologies,
    standing_state,
    step,
)

M = Morphology()


def airborne(n=1, height=1.0):
    return standing_state(M, n, height=height)


def test_pd_examples():
    assert pd_torque(0.3, 0.3, 0.0) == 0.0
    assert pd_torque(0.5, 0.0, 0.0) == pytest.approx(0.5)
    assert pd_torque(0.0, 0.0, 1.0) == pytest.approx(-0.01)
    assert pd_torque(10.0, 0.0, 0.0) == M.torque_limit


def test_feet_at_zero_pose():
    s = airborne()
    s.q[:] = 0.0
    pos, vel = foot_kinematics(s, M)
    c = M.head_mass * M.head_offset / M.total_mass
    sx = np.array([-1, 1, 1, -1])
    sy = np.array([1, 1, -1, -1])
    expected = np.stack([sx * M.hip_x - c, sy * M.hip_y, np.full(4, M.hip_z - M.upper_len - M.lower_len)], -1)
    assert np.allclose(pos[0] - s.pos[0], expected, atol=1e-15)
    assert np.allclose(vel, 0.0)


def test_foot_velocity_rigid_translation_and_knee():
    s = airborne()
    s.lin_vel[:] = [0.3, -0.2, 0.1]
    _, vel = foot_kinematics(s, M)
    assert np.allclose(vel[0], [0.3, -0.2, 0.1])
    s = airborne()
    s.qd[0, quadsim.KNEES] = 1.0
    _, vel = foot_kinematics(s, M)
    assert np.allclose(np.linalg.norm(vel[0], axis=-1), M.lower_len)


def test_contact_examples():
    m = dataclasses.replace(M, contact_stiffness=1000.0)
    f = contact_force(np.array([[0, 0, 0.01]]), np.zeros((1, 3)), m)
    assert np.all(f == 0.0)
    f = contact_force(np.array([[0, 0, -0.001]]), np.zeros((1, 3)), m)
    assert f[0, 2] == pytest.approx(1.0)
    f = contact_force(np.array([[0, 0, -0.001]]), np.array([[5.0, 0, 0]]), m)
    assert np.hypot(*f[0, :2]) == pytest.approx(m.friction * f[0, 2])


@settings(max_examples=100)
@given(st.floats(-0.01, 0.01), st.floats(-2, 2), st.floats(-2, 2))
def test_normal_force_nonnegative(z, zd, vx):
    f = contact_force(np.array([[0, 0, z]]), np.array([[vx, 0, zd]]), M)
    assert f[0, 2] >= 0
    if z >= 0:
        assert np.all(f == 0)
    assert np.hypot(*f[0, :2]) <= M.friction * f[0, 2] + 1e-12


def test_free_fall():
    s = airborne()
    for _ in range(100):
        s = step(s, None, M, 1e-3)
    assert s.lin_vel[0, 2] == pytest.approx(-0.981, abs=1e-3)


def test_momentum_conserved_without_forces():
    m = dataclasses.replace(M, gravity=0.0)
    s = airborne(height=5.0)
    s.lin_vel[:] = [0.2, -0.1, 0.05]
    s.ang_vel[:] = [1.0, -2.0, 3.0]
    p0 = s.lin_vel[0] * m.total_mass
    L0 = angular_momentum(s, m)[0]
    drift = 0.0
    for _ in range(1000):
        prev = s.quat.copy()
        s = step(s, None, m, 1e-3)
        drift = max(drift, abs(np.linalg.norm(s.quat) - 1.0))
    assert np.linalg.norm(s.lin_vel[0] * m.total_mass - p0) <= 1e-6 * np.linalg.norm(p0)
    assert np.linalg.norm(angular_momentum(s, m)[0] - L0) <= 1e-6 * np.linalg.norm(L0)
    assert drift < 1e-12


def test_standing_grf_matches_weight():
    s = standing_state(M, 1)
    for _ in range(1500):
        s = step(s, M.standing_pose, M, 1e-3)
    total = s.foot_force[0, :, 2].sum()
    weight = M.total_mass * M.gravity
    assert abs(total - weight) <= 0.02 * weight


def test_joint_limits_respected():
    s = standing_state(M, 2)
    for _ in range(300):
        s = step(s, np.full(9, 10.0), M, 1e-3)
    lo, hi = M.joint_limits
    assert np.all(s.q >= lo) and np.all(s.q <= hi)


def test_bad_dt_and_fault():
    s = airborne()
    with pytest.raises(ValueError):
        step(s, None, M, 3e-3)
    s.lin_vel[0, 0] = np.nan
    with pytest.raises(SimulationFault):
        step(s, None, M, 1e-3)
    assert not step(s, None, M, 1e-3, check=False).is_finite()[0]


def test_deterministic_trajectories():
    rng = np.random.default_rng(5)
    actions = rng.uniform(-1, 1, (200, 9))
    runs = []
    for _ in range(2):
        s = standing_state(M, 1)
        for a in actions:
            s = step(s, M.standing_pose + 0.3 * a, M, 1e-3)
        runs.append(np.concatenate([s.pos.ravel(), s.quat.ravel(), s.q.ravel()]))
    assert np.array_equal(runs[0], runs[1])


def test_stable_energy_under_random_actuation():
    rng = np.random.default_rng(6)
    s = standing_state(M, 8)
    for k in range(2000):
        if k % 10 == 0:
            target = M.standing_pose + rng.uniform(-0.5, 0.5, (8, 9))
        s = step(s, target, M, 1e-3)
    assert np.all(s.is_finite())
    assert np.all(np.linalg.norm(s.lin_vel, axis=-1) < 5.0)


def test_randomization_bounds_and_mean():
    rng = np.random.default_rng(0)
    scales, frictions = [], []
    for _ in range(10_000):
        m = randomize_domain(M, rng)
        scales.append(m.torso_mass / M.torso_mass)
        frictions.append(m.friction / M.friction)
    scales, frictions = np.array(scales), np.array(frictions)
    assert scales.min() >= 0.8 and scales.max() <= 1.2
    assert frictions.min() >= 0.5 and frictions.max() <= 1.5
    assert randomize_domain(M, 42) == randomize_domain(M, 42)


def test_mass_scale_mean_over_1e5_samples():
    rng = np.random.default_rng(11)
    base = DomainRandomization()
    vals = np.array([randomize_domain(M, rng, base).head_mass for _ in range(100_000)]) / M.head_mass
    assert abs(vals.mean() - 1.0) <= 0.01


def test_observation_noise():
    values = {"lin_vel": np.zeros((1000, 3)), "q": np.zeros((1000, 9)), "gravity": np.ones((1000, 3))}
    out = observation_noise(values, 3)
    assert np.all(np.abs(out["q"]) <= 0.0175)
    assert np.all(np.abs(out["lin_vel"]) <= 0.02)
    assert np.array_equal(out["gravity"], values["gravity"])
    again = observation_noise(values, 3)
    assert all(np.array_equal(out[k], again[k]) for k in out)
    same = observation_noise(values, 3, DomainRandomization.disabled())
    assert all(np.array_equal(same[k], values[k]) for k in values)


def test_stack_morphologies():
    ms = [randomize_domain(M, i) for i in range(3)]
    stacked = stack_morphologies(ms)
    assert stacked.torso_mass.shape == (3,)
    with pytest.raises(ValueError):
        stack_morphologies([M, dataclasses.replace(M, upper_len=0.06)])


def test_morphology_validation():
    with pytest.raises(ValueError):
        Morphology(torso_mass=0.0)
    with pytest.raises(ValueError):
        Morphology(friction=-1.0)
