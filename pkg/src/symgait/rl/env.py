"""Vectorized gait-learning environment on top of the reduced-order simulator."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .. import quadsim
from ..gait import GaitSpec, clock_encoding, cycle_phase, duty_factor, named_gait, stride_period
from ..quadsim import DomainRandomization, Morphology, SimState
from ..reward import (
    DEFAULT_WEIGHTS,
    CommandSet,
    RewardBreakdown,
    RewardWeights,
    RobotSnapshot,
    compute_reward,
)
from ..symmetry import (
    DEFAULT_KAPPA,
    PAIR_TOLERANCE,
    PhaseIndicatorConfig,
    expected_indicators,
    morphological_pairs,
)

OBS_LAYOUT: tuple[tuple[str, int], ...] = (
    ("lin_vel", 3),
    ("ang_vel", 3),
    ("q", 9),
    ("qd", 9),
    ("gravity", 3),
    ("v_cmd", 2),
    ("yaw_cmd", 1),
    ("prev_action", 9),
    ("clock", 4),
    ("ratio", 2),
)
OBS_DIM = sum(size for _, size in OBS_LAYOUT)
assert OBS_DIM == 3 + 3 + 9 + 9 + 3 + 2 + 1 + 9 + 4 + 2 == 45


def _layout_slices() -> dict[str, slice]:
    out, start = {}, 0
    for name, size in OBS_LAYOUT:
        out[name] = slice(start, start + size)
        start += size
    return out


OBS_SLICES = _layout_slices()
HISTORY = 4
ACTION_DIM = quadsim.N_JOINTS


@dataclass(frozen=True)
class EpisodeConfig:
    """Everything that defines how episodes are drawn and stepped."""

    gait: GaitSpec = field(default_factory=lambda: named_gait("trot"))
    v_cmd_range: tuple[float, float] = (-0.5, 0.5)
    fixed_v_cmd: float | None = None
    fixed_delta: float | None = None
    max_duration: float = 10.0
    control_dt: float = 0.01
    substeps: int = 10
    action_scale: float = 0.5
    kappa: float = DEFAULT_KAPPA
    pair_tolerance: float = PAIR_TOLERANCE
    pose_jitter: float = 0.05
    observation_noise: bool = True
    randomization: DomainRandomization = field(default_factory=DomainRandomization)
    morphology: Morphology = field(default_factory=Morphology)
    weights: RewardWeights = DEFAULT_WEIGHTS
    min_height_ratio: float = 0.4
    max_tilt: float = 1.0

    def __post_init__(self) -> None:
        lo, hi = self.v_cmd_range
        if lo > hi:
            raise ValueError("v_cmd_range must be ordered")
        if self.substeps < 1 or not self.control_dt > 0.0:
            raise ValueError("control step must be positive")
        if self.control_dt / self.substeps > 2e-3:
            raise ValueError("physics step exceeds 2 ms")

    @property
    def physics_dt(self) -> float:
        return self.control_dt / self.substeps

    @property
    def max_steps(self) -> int:
        return int(round(self.max_duration / self.control_dt))


def build_observation(state: SimState, v_cmd, phases, duty, prev_action, rng=None,
                      noise: DomainRandomization | None = None) -> np.ndarray:
    """Assemble the (N, 45) observation; noise touches only v, ω, q and q̇."""
    if not np.all(state.is_finite()):
        raise ValueError("cannot observe a non-finite simulator state")
    n = state.n
    rot = quadsim.quat_to_matrix(state.quat)
    parts = {
        "lin_vel": np.einsum("nji,nj->ni", rot, state.lin_vel),
        "ang_vel": np.einsum("nji,nj->ni", rot, state.ang_vel),
        "q": state.q,
        "qd": state.qd,
    }
    if noise is not None:
        parts = quadsim.observation_noise(parts, rng, noise)
    duty = np.broadcast_to(np.asarray(duty, dtype=float), (n,))
    obs = np.empty((n, OBS_DIM))
    for key, value in parts.items():
        obs[:, OBS_SLICES[key]] = value
    obs[:, OBS_SLICES["gravity"]] = rot[:, 2, :] * -1.0
    obs[:, OBS_SLICES["v_cmd"]] = np.stack([np.broadcast_to(v_cmd, (n,)), np.zeros(n)], -1)
    obs[:, OBS_SLICES["yaw_cmd"]] = 0.0
    obs[:, OBS_SLICES["prev_action"]] = prev_action
    obs[:, OBS_SLICES["clock"]] = clock_encoding(phases)
    obs[:, OBS_SLICES["ratio"]] = np.stack([duty, 1.0 - duty], -1)
    return obs


@dataclass
class StepResult:
    obs: np.ndarray                 # (N, HISTORY, OBS_DIM) after auto-reset
    reward: np.ndarray              # (N,)
    done: np.ndarray                # (N,) episode ended at this step
    timeout: np.ndarray             # (N,) ended by the time limit only
    fault: np.ndarray               # (N,) non-finite physics
    breakdown: RewardBreakdown
    terminal_obs: np.ndarray        # (N, HISTORY, OBS_DIM) before auto-reset
    contact: np.ndarray             # (N, 4) bool
    stance_weight: np.ndarray       # (N, 4) E[I_stance]
    v_x: np.ndarray
    v_cmd: np.ndarray
    lin_vel: np.ndarray             # (N, 3) body frame
    yaw_rate: np.ndarray            # (N,)
    grf: np.ndarray                 # (N, 4) substep-averaged |f|
    foot_speed: np.ndarray          # (N, 4) substep-averaged |v_foot|
    phase: np.ndarray               # (N, 4) clock after this step
    finished: list = field(default_factory=list)  # per-episode summaries


class GaitEnv:
    """``n`` independent episodes advanced in lock-step.

    Finished environments are reset automatically; per-episode summaries of
    tracking error and contact/clock agreement are reported on the step that
    ends them.
    """

    def __init__(self, cfg: EpisodeConfig, n: int = 1, seed: int = 0):
        self.cfg = cfg
        self.n = n
        self.rng = np.random.default_rng(seed)
        self.group = morphological_pairs(cfg.gait, cfg.pair_tolerance)
        self.offsets = cfg.gait.offsets
        self._morphs = [cfg.morphology] * n
        self.morph = quadsim.stack_morphologies(self._morphs)
        self.state = quadsim.standing_state(cfg.morphology, n)
        self.v_cmd = np.zeros(n)
        self.delta = np.zeros(n)
        self.period = np.ones(n)
        self.duty = np.full(n, 0.5)
        self.cycles = np.zeros(n)
        self.steps = np.zeros(n, dtype=int)
        self.prev_action = np.zeros((n, ACTION_DIM))
        self.prev_torque = np.zeros((n, ACTION_DIM))
        self.history = np.zeros((n, HISTORY, OBS_DIM))
        self._ep_track = np.zeros(n)
        self._ep_agree = np.zeros(n)
        self._ep_reward = np.zeros(n)
        self.standing_height = cfg.morphology.standing_height

    # -- episode control ----------------------------------------------------

    @property
    def forward(self) -> np.ndarray:
        return self.v_cmd >= 0.0

    @property
    def phases(self) -> np.ndarray:
        return cycle_phase(self.cycles[:, None], self.offsets[None, :], self.forward[:, None])

    def set_command(self, idx, v_cmd) -> None:
        """Change the command mid-episode; period and duty follow the new speed."""
        self.v_cmd[idx] = v_cmd
        self.period[idx] = stride_period(self.v_cmd[idx], self.delta[idx])
        self.duty[idx] = duty_factor(self.v_cmd[idx], self.delta[idx])

    def reset(self, idx=None) -> np.ndarray:
        """Reset the given environments (all by default); returns the full history stack."""
        cfg = self.cfg
        idx = np.arange(self.n) if idx is None else np.asarray(idx, dtype=int)
        if idx.size == 0:
            return self.history.copy()
        for i in idx:
            self._morphs[i] = quadsim.randomize_domain(cfg.morphology, self.rng, cfg.randomization)
        self.morph = quadsim.stack_morphologies(self._morphs)
        k = idx.size
        if cfg.fixed_v_cmd is None:
            v = self.rng.uniform(*cfg.v_cmd_range, size=k)
        else:
            v = np.full(k, float(cfg.fixed_v_cmd))
        self.delta[idx] = self.rng.uniform(-1.0, 1.0, size=k) if cfg.fixed_delta is None else cfg.fixed_delta
        self.set_command(idx, v)
        fresh = quadsim.standing_state(cfg.morphology, k)
        fresh.q[:, :8] += self.rng.uniform(-cfg.pose_jitter, cfg.pose_jitter, size=(k, 8))
        self.state.assign(idx, fresh)
        self.cycles[idx] = 0.0
        self.steps[idx] = 0
        self.prev_action[idx] = 0.0
        self.prev_torque[idx] = 0.0
        self._ep_track[idx] = 0.0
        self._ep_agree[idx] = 0.0
        self._ep_reward[idx] = 0.0
        obs = self._observe(idx)
        self.history[idx] = obs[:, None, :]
        return self.history.copy()

    def _observe(self, idx) -> np.ndarray:
        noise = self.cfg.randomization if self.cfg.observation_noise else None
        return build_observation(
            self.state.select(idx), self.v_cmd[idx], self.phases[idx], self.duty[idx],
            self.prev_action[idx], self.rng, noise,
        )

    # -- stepping -------------------------------------------------------------

    def targets(self, action: np.ndarray) -> np.ndarray:
        lo, hi = self.cfg.morphology.joint_limits
        pose = self.cfg.morphology.standing_pose
        return np.clip(pose + self.cfg.action_scale * action, lo, hi)

    def step(self, action: np.ndarray) -> StepResult:
        cfg = self.cfg
        action = np.asarray(action, dtype=float).reshape(self.n, ACTION_DIM)
        action = np.where(np.isfinite(action), action, 0.0)
        targets = self.targets(action)

        grf = np.zeros((self.n, 4))
        speed = np.zeros((self.n, 4))
        touching = np.zeros((self.n, 4))
        torque = np.zeros((self.n, ACTION_DIM))
        state = self.state
        for _ in range(cfg.substeps):
            state = quadsim.step(state, targets, self.morph, cfg.physics_dt, check=False)
            _, foot_vel = quadsim.foot_kinematics(state, self.morph)
            grf += np.linalg.norm(state.foot_force, axis=-1)
            speed += np.linalg.norm(foot_vel, axis=-1)
            touching += state.foot_force[..., 2] > 0.0
            torque += state.torque
        inv = 1.0 / cfg.substeps
        grf *= inv
        speed *= inv
        torque *= inv
        contact = touching * inv >= 0.5

        fault = ~state.is_finite()
        if np.any(fault):
            fresh = quadsim.standing_state(cfg.morphology, int(fault.sum()))
            state.assign(fault, fresh)
            grf[fault] = speed[fault] = torque[fault] = 0.0
        self.state = state
        self.cycles += cfg.control_dt / self.period
        self.steps += 1

        rot = quadsim.quat_to_matrix(state.quat)
        v_body = np.einsum("nji,nj->ni", rot, state.lin_vel)
        w_body = np.einsum("nji,nj->ni", rot, state.ang_vel)
        phases = self.phases
        snap = RobotSnapshot(
            lin_vel=v_body, yaw_rate=w_body[:, 2], torque=torque, prev_torque=self.prev_torque,
            grf=grf, foot_speed=speed, q=state.q, phase=phases,
        )
        indicator = PhaseIndicatorConfig(self.duty, cfg.kappa)
        parts = compute_reward(snap, CommandSet(vx=self.v_cmd), indicator, self.group, cfg.weights)
        reward = np.where(fault, 0.0, parts.total)
        stance_weight = 1.0 - _swing_weight(phases, self.duty, cfg.kappa)

        rpy = quadsim.roll_pitch_yaw(state.quat)
        fallen = (state.pos[:, 2] < cfg.min_height_ratio * self.standing_height) | \
            (np.abs(rpy[:, 0]) > cfg.max_tilt) | (np.abs(rpy[:, 1]) > cfg.max_tilt)
        timeout = self.steps >= cfg.max_steps
        done = fallen | timeout | fault
        timeout = timeout & ~fallen & ~fault

        self.prev_torque = torque
        self.prev_action = np.clip(action, -10.0, 10.0)
        agree = np.mean(contact == (stance_weight > 0.5), axis=1)
        track = np.abs(v_body[:, 0] - self.v_cmd)
        self._ep_track += track
        self._ep_agree += agree
        self._ep_reward += reward

        obs = self._observe(np.arange(self.n))
        self.history = np.concatenate([self.history[:, 1:], obs[:, None, :]], axis=1)
        terminal = self.history.copy()
        finished = []
        for i in np.nonzero(done)[0]:
            steps = max(int(self.steps[i]), 1)
            finished.append({
                "steps": steps,
                "v_cmd": float(self.v_cmd[i]),
                "tracking_error": self._ep_track[i] / steps,
                "contact_agreement": self._ep_agree[i] / steps,
                "reward": self._ep_reward[i] / steps,
                "fell": bool(fallen[i]),
                "fault": bool(fault[i]),
            })
        v_cmd = self.v_cmd.copy()
        if np.any(done):
            self.reset(np.nonzero(done)[0])
        return StepResult(
            obs=self.history.copy(), reward=reward, done=done, timeout=timeout, fault=fault,
            breakdown=parts, terminal_obs=terminal, contact=contact, stance_weight=stance_weight,
            v_x=v_body[:, 0], v_cmd=v_cmd, lin_vel=v_body, yaw_rate=w_body[:, 2], grf=grf,
            foot_speed=speed, phase=phases, finished=finished,
        )


def _swing_weight(phases, duty, kappa):
    swing, _ = expected_indicators(phases, np.asarray(duty)[:, None], kappa)
    return swing


def with_overrides(cfg: EpisodeConfig, **changes) -> EpisodeConfig:
    return dataclasses.replace(cfg, **changes)
