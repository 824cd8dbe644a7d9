import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import reward_terms_mp
from symgait.gait import named_gait
from symgait.reward import (
    DEFAULT_WEIGHTS,
    CommandSet,
    RewardWeights,
    RobotSnapshot,
    command_reward,
    compute_reward,
    morphological_reward,
    smoothness_reward,
    temporal_reward,
    total_reward,
)
from symgait.symmetry import PhaseIndicatorConfig, morphological_pairs

TROT = morphological_pairs(named_gait("trot"))


def snapshot(**kw):
    base = dict(lin_vel=np.zeros(3), yaw_rate=0.0, torque=np.zeros(9), prev_torque=np.zeros(9),
                grf=np.zeros(4), foot_speed=np.zeros(4), q=np.zeros(9), phase=np.zeros(4))
    base.update(kw)
    return RobotSnapshot(**base)


def random_snapshot(rng):
    return dict(
        lin_vel=rng.uniform(-1, 1, 3), yaw_rate=rng.uniform(-2, 2),
        torque=rng.uniform(-0.75, 0.75, 9), prev_torque=rng.uniform(-0.75, 0.75, 9),
        grf=rng.uniform(0, 5, 4), foot_speed=rng.uniform(0, 1, 4),
        q=rng.uniform(-1.5, 1.5, 9), phase=rng.uniform(0, 1, 4),
    )


def test_command_examples():
    assert command_reward(snapshot(), CommandSet()) == 0.0
    # 40-digit evaluation of the command penalty at a 0.1 m/s forward error
    err = command_reward(snapshot(lin_vel=np.array([0.3, 0, 0])), CommandSet(vx=0.2))
    assert err == pytest.approx(-0.18963616764856730, abs=1e-12)
    assert command_reward(snapshot(lin_vel=np.array([1e3, 1e3, 0]), yaw_rate=1e3), CommandSet()) \
        == pytest.approx(-0.75)


def test_smoothness_examples():
    assert smoothness_reward(snapshot()) == 0.0
    assert smoothness_reward(snapshot(lin_vel=np.array([0, 0, 0.1]))) == pytest.approx(
        -0.055067103588277841, abs=1e-12)
    worst = smoothness_reward(snapshot(lin_vel=np.array([0, 0, 1e3]), torque=np.full(9, 1e3)))
    assert worst == pytest.approx(-0.15)
    with pytest.raises(ValueError):
        smoothness_reward(snapshot(prev_torque=np.zeros(8)))


def test_smoothness_uses_euclidean_norm():
    prev = np.zeros(9)
    tau = np.zeros(9)
    tau[:2] = [3.0, 4.0]
    expected = -0.05 * (1 - np.exp(-0.4 * 5.0))
    assert smoothness_reward(snapshot(torque=tau, prev_torque=prev)) == pytest.approx(expected, rel=1e-14)


def test_temporal_examples():
    cfg = PhaseIndicatorConfig(0.56, 500.0)
    # leg 0 deep in swing carrying 1 N, everything else conforming
    phase = np.array([0.22, 0.7, 0.7, 0.7])
    r = temporal_reward(snapshot(phase=phase, grf=np.array([1.0, 5, 5, 5])), cfg)
    assert r == pytest.approx(-0.094818083824283652, abs=1e-6)
    # stance-weighted legs ignore GRF
    doubled = temporal_reward(snapshot(phase=phase, grf=np.array([1.0, 10, 10, 10])), cfg)
    assert doubled == pytest.approx(r, abs=1e-12)
    assert temporal_reward(snapshot(phase=phase, grf=np.array([0.0, 3, 3, 3])), cfg) == pytest.approx(0, abs=1e-6)


def test_morphological_examples():
    assert morphological_reward(snapshot(), TROT) == 0.0
    q = np.zeros(9)
    q[4 + 1] = 0.1   # LF knee; LF pairs with RH in a trot
    assert morphological_reward(snapshot(q=q), TROT) == pytest.approx(-0.11653047597773553, abs=1e-12)
    q[4 + 1] = 1e3
    assert morphological_reward(snapshot(q=q), TROT) == pytest.approx(-0.15)


def test_total_examples():
    assert total_reward(0.0, 0.0, 0.0, 0.0).total == 1.0
    assert total_reward(-0.5, -0.5, -0.4, -0.1).total == 0.0
    assert total_reward(-0.1, -0.1, -0.05, -0.05).total == pytest.approx(0.7)


def test_matches_high_precision_reference():
    rng = np.random.default_rng(7)
    pairs = [(int(p.first), int(p.second)) for p in TROT.active_pairs]
    for _ in range(50):
        s = random_snapshot(rng)
        cmd = dict(vx=rng.uniform(-0.5, 0.5), vy=0.0, yaw_rate=0.0)
        parts = compute_reward(RobotSnapshot(**s), CommandSet(**cmd), PhaseIndicatorConfig(0.5, 32.0), TROT)
        ref = reward_terms_mp(s, cmd, 0.5, 32.0, pairs)
        got = [parts.r_cmd, parts.r_smooth, parts.r_tem, parts.r_mor, parts.total]
        for a, b in zip(got, ref):
            assert a == pytest.approx(b, rel=1e-9, abs=1e-15)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_bounds(seed):
    s = RobotSnapshot(**random_snapshot(np.random.default_rng(seed)))
    parts = compute_reward(s, CommandSet(vx=0.2), PhaseIndicatorConfig(0.56, 32.0),
                           morphological_pairs(named_gait("pronk")))
    # open bounds in exact arithmetic; saturation can reach them in floating point
    assert -0.75 <= parts.r_cmd <= 0 and -0.15 <= parts.r_smooth <= 0
    assert -1.2 <= parts.r_tem <= 0 and -0.15 <= parts.r_mor <= 0
    assert 0.0 <= parts.total <= 1.0


@given(st.floats(0, 10), st.floats(0, 10))
def test_monotone_in_penalty_magnitude(a, b):
    lo, hi = sorted((a, b))
    r = lambda e: compute_reward(  # noqa: E731
        snapshot(lin_vel=np.array([e, 0, 0])), CommandSet(), PhaseIndicatorConfig(0.5), TROT).total
    assert r(hi) <= r(lo)


def test_temporal_periodic_and_continuous():
    rng = np.random.default_rng(3)
    s = random_snapshot(rng)
    cfg = PhaseIndicatorConfig(0.56, 32.0)
    base = temporal_reward(RobotSnapshot(**s), cfg)
    shifted = dict(s, phase=np.mod(s["phase"] + 1.0, 1.0))
    assert temporal_reward(RobotSnapshot(**shifted), cfg) == pytest.approx(base, abs=1e-12)
    eps = dict(s, phase=np.mod(s["phase"] + 1e-7, 1.0))
    assert abs(temporal_reward(RobotSnapshot(**eps), cfg) - base) < 1e-4


def test_morph_pair_exchange_invariance():
    rng = np.random.default_rng(4)
    q = rng.normal(size=9)
    swapped = q.copy()
    swapped[[1, 3]] = q[[3, 1]]
    swapped[[5, 7]] = q[[7, 5]]
    assert morphological_reward(snapshot(q=swapped), TROT) == pytest.approx(
        morphological_reward(snapshot(q=q), TROT), abs=1e-15)


def test_batched_commands():
    snap = snapshot(lin_vel=np.zeros((3, 3)), yaw_rate=np.zeros(3))
    out = command_reward(snap, CommandSet(vx=np.array([0.0, 0.1, -0.1])))
    assert out.shape == (3,) and out[0] == 0 and out[1] == pytest.approx(out[2])


def test_custom_weights():
    w = RewardWeights(vx=0.6)
    assert command_reward(snapshot(lin_vel=np.array([1e3, 0, 0])), CommandSet(), w) == pytest.approx(-0.6)
    assert "morph_rate" in RewardWeights.field_names()
    assert DEFAULT_WEIGHTS.morph == 0.15
