"""Reward terms for symmetry-guided gait learning.

Every term is a weighted saturating penalty ``-w * (1 - exp(-k * error))`` so
each lies in ``(-w, 0]``.  All functions broadcast over leading batch axes.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .symmetry import (
    PhaseIndicatorConfig,
    SymmetryGroup,
    expected_indicators,
    leg_joints,
    morphological_distance,
)


@dataclass(frozen=True)
class RewardWeights:
    """Coefficient and rate of each saturating penalty."""

    vx: float = 0.3
    vx_rate: float = 10.0
    vy: float = 0.3
    vy_rate: float = 10.0
    yaw: float = 0.15
    yaw_rate: float = 5.0
    vz: float = 0.1
    vz_rate: float = 8.0
    torque: float = 0.05
    torque_rate: float = 0.4
    swing_grf: float = 0.15
    swing_grf_rate: float = 1.0
    stance_speed: float = 0.15
    stance_speed_rate: float = 5.0
    morph: float = 0.15
    morph_rate: float = 15.0

    @classmethod
    def field_names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))


DEFAULT_WEIGHTS = RewardWeights()


@dataclass(frozen=True, eq=False)
class RobotSnapshot:
    """What the reward reads from the simulator after one control step.

    Per-leg arrays are in canonical leg order; joint arrays hold 9 joints
    (4 shoulders, 4 knees, neck).
    """

    lin_vel: np.ndarray        # (..., 3) torso velocity, m/s
    yaw_rate: np.ndarray       # (...,) rad/s
    torque: np.ndarray         # (..., 9) N*m at this step
    prev_torque: np.ndarray    # (..., 9) N*m at the previous step
    grf: np.ndarray            # (..., 4) contact force magnitude, N
    foot_speed: np.ndarray     # (..., 4) m/s
    q: np.ndarray              # (..., 9) rad
    phase: np.ndarray          # (..., 4) leg phases with offsets folded in


@dataclass(frozen=True, eq=False)
class CommandSet:
    """Commanded velocities; ``vx`` may hold one value per environment."""

    vx: float = 0.0
    vy: float = 0.0
    yaw_rate: float = 0.0


@dataclass(frozen=True, eq=False)
class RewardBreakdown:
    r_cmd: np.ndarray
    r_smooth: np.ndarray
    r_tem: np.ndarray
    r_mor: np.ndarray
    total: np.ndarray

    def as_dict(self) -> dict[str, np.ndarray]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _penalty(weight: float, rate: float, error):
    return -weight * -np.expm1(-rate * np.asarray(error))


def command_reward(snap: RobotSnapshot, cmd: CommandSet, w: RewardWeights = DEFAULT_WEIGHTS):
    v = np.asarray(snap.lin_vel)
    return (
        _penalty(w.vx, w.vx_rate, np.abs(v[..., 0] - np.asarray(cmd.vx)))
        + _penalty(w.vy, w.vy_rate, np.abs(v[..., 1] - cmd.vy))
        + _penalty(w.yaw, w.yaw_rate, np.abs(np.asarray(snap.yaw_rate) - cmd.yaw_rate))
    )


def smoothness_reward(snap: RobotSnapshot, w: RewardWeights = DEFAULT_WEIGHTS):
    tau, prev = np.asarray(snap.torque), np.asarray(snap.prev_torque)
    if tau.shape != prev.shape:
        raise ValueError("torque vectors must have matching shapes")
    v_z = np.asarray(snap.lin_vel)[..., 2]
    jerk = np.linalg.norm(prev - tau, axis=-1)
    return _penalty(w.vz, w.vz_rate, np.abs(v_z)) + _penalty(w.torque, w.torque_rate, jerk)


def temporal_reward(snap: RobotSnapshot, cfg: PhaseIndicatorConfig, w: RewardWeights = DEFAULT_WEIGHTS):
    """Penalize contact force while swing-weighted and foot motion while stance-weighted."""
    duty = np.asarray(cfg.duty, dtype=float)[..., None]
    c_swing, c_stance = expected_indicators(snap.phase, duty, cfg.kappa)
    per_leg = (
        c_swing * _penalty(w.swing_grf, w.swing_grf_rate, snap.grf)
        + c_stance * _penalty(w.stance_speed, w.stance_speed_rate, snap.foot_speed)
    )
    return per_leg.sum(axis=-1)


def morphological_reward(snap: RobotSnapshot, group: SymmetryGroup, w: RewardWeights = DEFAULT_WEIGHTS):
    d = morphological_distance(leg_joints(snap.q), group)
    return _penalty(w.morph, w.morph_rate, d)


def total_reward(r_cmd, r_smooth, r_tem, r_mor) -> RewardBreakdown:
    total = np.maximum(0.0, 1.0 + r_cmd + r_smooth + r_tem + r_mor)
    return RewardBreakdown(r_cmd, r_smooth, r_tem, r_mor, total)


def compute_reward(
    snap: RobotSnapshot,
    cmd: CommandSet,
    indicator: PhaseIndicatorConfig,
    group: SymmetryGroup,
    w: RewardWeights = DEFAULT_WEIGHTS,
) -> RewardBreakdown:
    return total_reward(
        command_reward(snap, cmd, w),
        smoothness_reward(snap, w),
        temporal_reward(snap, indicator, w),
        morphological_reward(snap, group, w),
    )
