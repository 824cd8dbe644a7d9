"""Reduced-order quadruped simulator.

A single rigid torso (with the head folded in as a point mass ahead of the
shoulders) carries four massless two-segment legs.  Each leg moves in the
torso's sagittal plane, driven by PD-controlled shoulder and knee joints that
have a small virtual inertia.  Feet touch a flat ground through a linear
spring-damper normal force and a viscous tangential force capped by the
Coulomb cone.  Contact forces reach the torso through the massless chain and
load the joints through the leg Jacobian.

Everything is batched: state arrays carry a leading environment axis and one
``step`` call advances all environments at once.

Joint order is ``(shoulder LH, LF, RF, RH, knee LH, LF, RF, RH, neck)``; the
body frame is x forward, y left, z up.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

N_JOINTS = 9
N_LEGS = 4
SHOULDERS = slice(0, 4)
KNEES = slice(4, 8)
NECK = 8

# hip sign pattern in canonical leg order (LH, LF, RF, RH)
_HIP_SIGN_X = np.array([-1.0, 1.0, 1.0, -1.0])
_HIP_SIGN_Y = np.array([1.0, 1.0, -1.0, -1.0])


class SimulationFault(RuntimeError):
    """Raised when the physics state stops being finite."""


@dataclass(frozen=True)
class Morphology:
    """Physical parameters of the robot and its contact with the ground.

    Defaults approximate a 0.3 kg, 0.2 m long servo-driven quadruped.  The
    mass-like fields and ``friction`` may be arrays (one entry per
    environment) after ``stack_morphologies``.
    """

    torso_mass: float = 0.24
    torso_half_extents: tuple[float, float, float] = (0.1, 0.045, 0.02)
    torso_inertia: tuple[float, float, float] = (1.94e-4, 8.32e-4, 9.62e-4)
    head_mass: float = 0.05
    head_offset: float = 0.12
    hip_x: float = 0.075
    hip_y: float = 0.045
    hip_z: float = -0.015
    upper_len: float = 0.05
    lower_len: float = 0.055
    shoulder_limits: tuple[float, float] = (-1.5, 1.5)
    knee_limits: tuple[float, float] = (-2.6, 0.4)
    neck_limits: tuple[float, float] = (-0.8, 0.8)
    torque_limit: float = 0.75
    kp: float = 1.0
    kd: float = 0.01
    joint_inertia: float = 2e-4
    contact_stiffness: float = 1500.0
    contact_damping: float = 5.0
    tangential_damping: float = 20.0
    friction: float = 1.0
    gravity: float = 9.81
    stand_shoulder: float = 0.55
    stand_knee: float = -1.1

    def __post_init__(self) -> None:
        positive = ("torso_mass", "head_mass", "upper_len", "lower_len", "joint_inertia",
                    "contact_stiffness", "torque_limit")
        for name in positive:
            if not np.all(np.asarray(getattr(self, name)) > 0.0):
                raise ValueError(f"{name} must be positive")
        if np.any(np.asarray(self.friction) < 0.0):
            raise ValueError("friction must be non-negative")
        if np.min(self.torso_inertia) <= 0.0 or min(self.torso_half_extents) <= 0.0:
            raise ValueError("torso inertia and extents must be positive")

    @property
    def total_mass(self):
        return self.torso_mass + self.head_mass

    @property
    def com_offset(self) -> float:
        """Longitudinal shift of the centre of mass from the torso centre."""
        return float(np.mean(np.asarray(self.head_mass * self.head_offset / self.total_mass)))

    @property
    def inertia(self) -> np.ndarray:
        """Principal inertia about the combined centre of mass, shape (..., 3)."""
        base = np.asarray(self.torso_inertia, dtype=float)
        c = self.com_offset
        m_t = np.asarray(self.torso_mass)[..., None]
        m_h = np.asarray(self.head_mass)[..., None]
        shift = m_t * c**2 + m_h * (self.head_offset - c) ** 2
        return base + shift * np.array([0.0, 1.0, 1.0])

    @property
    def hips(self) -> np.ndarray:
        """Hip attachment points relative to the centre of mass, shape (4, 3)."""
        return np.stack([
            self.hip_x * _HIP_SIGN_X - self.com_offset,
            self.hip_y * _HIP_SIGN_Y,
            np.full(4, self.hip_z),
        ], axis=-1)

    @property
    def joint_limits(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.array([self.shoulder_limits[0]] * 4 + [self.knee_limits[0]] * 4 + [self.neck_limits[0]])
        hi = np.array([self.shoulder_limits[1]] * 4 + [self.knee_limits[1]] * 4 + [self.neck_limits[1]])
        return lo, hi

    @property
    def standing_pose(self) -> np.ndarray:
        return np.array([self.stand_shoulder] * 4 + [self.stand_knee] * 4 + [0.0])

    @property
    def standing_height(self) -> float:
        """Centre-of-mass height with the standing pose and an unloaded contact."""
        foot = leg_positions(self.standing_pose[None], self)[0]
        return float(-foot[:, 2].mean())


def stack_morphologies(morphs) -> Morphology:
    """Merge per-environment morphologies that differ only in mass and friction."""
    morphs = list(morphs)
    first = morphs[0]
    varying = ("torso_mass", "head_mass", "torso_inertia", "friction")
    for m in morphs[1:]:
        for f in dataclasses.fields(Morphology):
            if f.name not in varying and getattr(m, f.name) != getattr(first, f.name):
                raise ValueError(f"stacked morphologies disagree on {f.name}")
    return dataclasses.replace(first, **{
        name: np.array([np.asarray(getattr(m, name), dtype=float) for m in morphs]) for name in varying
    })


@dataclass
class SimState:
    """Batched simulator state; every array has a leading environment axis."""

    pos: np.ndarray           # (N, 3) centre of mass, world, m
    quat: np.ndarray          # (N, 4) orientation (w, x, y, z)
    lin_vel: np.ndarray       # (N, 3) world, m/s
    ang_vel: np.ndarray       # (N, 3) world, rad/s
    q: np.ndarray             # (N, 9) rad
    qd: np.ndarray            # (N, 9) rad/s
    foot_force: np.ndarray    # (N, 4, 3) world, N
    time: np.ndarray          # (N,) s
    torque: np.ndarray = field(default=None)  # (N, 9) last applied joint torque

    def __post_init__(self) -> None:
        if self.torque is None:
            self.torque = np.zeros_like(self.q)

    @property
    def n(self) -> int:
        return self.pos.shape[0]

    def copy(self) -> SimState:
        return SimState(**{f.name: np.array(getattr(self, f.name)) for f in dataclasses.fields(self)})

    def select(self, idx) -> SimState:
        return SimState(**{f.name: np.array(getattr(self, f.name)[idx]) for f in dataclasses.fields(self)})

    def assign(self, idx, other: SimState) -> None:
        for f in dataclasses.fields(self):
            getattr(self, f.name)[idx] = getattr(other, f.name)

    def is_finite(self) -> np.ndarray:
        parts = [self.pos, self.quat, self.lin_vel, self.ang_vel, self.q, self.qd]
        flat = np.concatenate([p.reshape(self.n, -1) for p in parts], axis=1)
        return np.all(np.isfinite(flat), axis=1)


def standing_state(morph: Morphology, n: int = 1, height: float | None = None) -> SimState:
    """Robot upright at rest in the standing pose, feet just touching the ground."""
    z = morph.standing_height if height is None else height
    q = np.tile(morph.standing_pose, (n, 1))
    return SimState(
        pos=np.tile([0.0, 0.0, z], (n, 1)),
        quat=np.tile([1.0, 0.0, 0.0, 0.0], (n, 1)),
        lin_vel=np.zeros((n, 3)),
        ang_vel=np.zeros((n, 3)),
        q=q,
        qd=np.zeros((n, N_JOINTS)),
        foot_force=np.zeros((n, N_LEGS, 3)),
        time=np.zeros(n),
    )


# -- rotations ---------------------------------------------------------------

def quat_to_matrix(quat: np.ndarray) -> np.ndarray:
    w, x, y, z = np.moveaxis(quat, -1, 0)
    return np.stack([
        np.stack([1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)], -1),
        np.stack([2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)], -1),
        np.stack([2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)], -1),
    ], -2)


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = np.moveaxis(a, -1, 0)
    bw, bx, by, bz = np.moveaxis(b, -1, 0)
    return np.stack([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ], -1)


def quat_from_rotvec(rv: np.ndarray) -> np.ndarray:
    angle = np.linalg.norm(rv, axis=-1, keepdims=True)
    half = 0.5 * angle
    # sin(x/2)/x with its series near zero
    k = np.where(angle > 1e-8, np.sin(half) / np.where(angle > 1e-8, angle, 1.0), 0.5 - angle**2 / 48.0)
    return np.concatenate([np.cos(half), rv * k], axis=-1)


def roll_pitch_yaw(quat: np.ndarray) -> np.ndarray:
    w, x, y, z = np.moveaxis(quat, -1, 0)
    roll = np.arctan2(2 * (w * x + y * z), 1 - 2 * (x * x + y * y))
    pitch = np.arcsin(np.clip(2 * (w * y - z * x), -1.0, 1.0))
    yaw = np.arctan2(2 * (w * z + x * y), 1 - 2 * (y * y + z * z))
    return np.stack([roll, pitch, yaw], -1)


# -- legs --------------------------------------------------------------------

def leg_positions(q: np.ndarray, morph: Morphology) -> np.ndarray:
    """Foot positions in the body frame relative to the centre of mass, (N, 4, 3)."""
    qs, qk = q[:, SHOULDERS], q[:, KNEES]
    a = qs + qk
    l1, l2 = morph.upper_len, morph.lower_len
    dx = l1 * np.sin(qs) + l2 * np.sin(a)
    dz = -l1 * np.cos(qs) - l2 * np.cos(a)
    rel = np.stack([dx, np.zeros_like(dx), dz], axis=-1)
    return morph.hips[None] + rel


def leg_jacobians(q: np.ndarray, morph: Morphology) -> np.ndarray:
    """d(foot)/d(shoulder, knee) in the body frame, shape (N, 4, 3, 2)."""
    qs, qk = q[:, SHOULDERS], q[:, KNEES]
    a = qs + qk
    l1, l2 = morph.upper_len, morph.lower_len
    zero = np.zeros_like(qs)
    d_shoulder = np.stack([l1 * np.cos(qs) + l2 * np.cos(a), zero, l1 * np.sin(qs) + l2 * np.sin(a)], -1)
    d_knee = np.stack([l2 * np.cos(a), zero, l2 * np.sin(a)], -1)
    return np.stack([d_shoulder, d_knee], axis=-1)


def foot_kinematics(state: SimState, morph: Morphology) -> tuple[np.ndarray, np.ndarray]:
    """World positions and velocities of the four feet, each (N, 4, 3)."""
    rot = quat_to_matrix(state.quat)
    body = leg_positions(state.q, morph)
    jac = leg_jacobians(state.q, morph)
    qd_legs = np.stack([state.qd[:, SHOULDERS], state.qd[:, KNEES]], axis=-1)
    rel = np.einsum("nij,nlj->nli", rot, body)
    rel_vel = np.einsum("nij,nlj->nli", rot, np.einsum("nlij,nlj->nli", jac, qd_legs))
    pos = state.pos[:, None, :] + rel
    vel = state.lin_vel[:, None, :] + np.cross(state.ang_vel[:, None, :], rel) + rel_vel
    return pos, vel


def contact_force(foot_pos: np.ndarray, foot_vel: np.ndarray, morph: Morphology) -> np.ndarray:
    """Ground reaction on each foot: spring-damper normal, capped viscous tangential."""
    z, zd = foot_pos[..., 2], foot_vel[..., 2]
    pen = z < 0.0
    normal = np.where(pen, np.maximum(0.0, -morph.contact_stiffness * z - morph.contact_damping * zd), 0.0)
    tangential = -morph.tangential_damping * foot_vel[..., :2] * pen[..., None]
    mag = np.linalg.norm(tangential, axis=-1)
    mu = np.asarray(morph.friction)
    cap = (mu[..., None] if mu.ndim else mu) * normal
    scale = np.where(mag > cap, cap / np.where(mag > 0.0, mag, 1.0), 1.0)
    return np.concatenate([tangential * scale[..., None], normal[..., None]], axis=-1)


def pd_torque(q_target, q, qd, morph: Morphology = Morphology()):
    """PD joint torque ``kp (q* - q) - kd q̇`` clamped to the torque limit."""
    tau = morph.kp * (np.asarray(q_target) - np.asarray(q)) - morph.kd * np.asarray(qd)
    out = np.clip(tau, -morph.torque_limit, morph.torque_limit)
    return float(out) if np.ndim(out) == 0 else out


def step(state: SimState, joint_targets, morph: Morphology, dt: float = 1e-3,
         check: bool = True) -> SimState:
    """Advance every environment by ``dt`` with semi-implicit Euler.

    ``joint_targets`` of ``None`` leaves the joints unactuated.  Angular motion
    is integrated through the world-frame angular momentum, so torque-free
    rotation conserves it to round-off.  With ``check`` set, a non-finite
    result raises ``SimulationFault``; callers that handle faults per
    environment pass ``check=False`` and inspect ``SimState.is_finite``.
    """
    if not 0.0 < dt <= 2e-3:
        raise ValueError("dt must lie in (0, 2 ms]")
    n = state.n
    rot = quat_to_matrix(state.quat)
    foot_pos, foot_vel = foot_kinematics(state, morph)
    force = contact_force(foot_pos, foot_vel, morph)

    if joint_targets is None:
        tau = np.zeros((n, N_JOINTS))
    else:
        tau = pd_torque(np.broadcast_to(joint_targets, (n, N_JOINTS)), state.q, state.qd, morph)

    # contact loads the leg joints through the Jacobian transpose
    force_body = np.einsum("nji,nlj->nli", rot, force)
    jac = leg_jacobians(state.q, morph)
    load = np.einsum("nlij,nli->nlj", jac, force_body)
    gen_force = tau.copy()
    gen_force[:, SHOULDERS] += load[..., 0]
    gen_force[:, KNEES] += load[..., 1]
    qd = state.qd + gen_force / morph.joint_inertia * dt
    q = state.q + qd * dt
    lo, hi = morph.joint_limits
    clipped = np.clip(q, lo, hi)
    qd = np.where(clipped != q, 0.0, qd)
    q = clipped

    mass = np.asarray(morph.total_mass, dtype=float) * np.ones(n)
    net_force = force.sum(axis=1)
    net_force[:, 2] -= mass * morph.gravity
    lin_vel = state.lin_vel + net_force / mass[:, None] * dt
    pos = state.pos + lin_vel * dt

    inertia = np.broadcast_to(morph.inertia, (n, 3))
    moment = np.cross(foot_pos - state.pos[:, None, :], force).sum(axis=1)
    momentum = _world_inertia_apply(rot, inertia, state.ang_vel) + moment * dt
    ang_vel = _world_inertia_solve(rot, inertia, momentum)
    quat = quat_multiply(quat_from_rotvec(ang_vel * dt), state.quat)
    quat /= np.linalg.norm(quat, axis=-1, keepdims=True)
    ang_vel = _world_inertia_solve(quat_to_matrix(quat), inertia, momentum)

    new = SimState(pos=pos, quat=quat, lin_vel=lin_vel, ang_vel=ang_vel, q=q, qd=qd,
                   foot_force=force, time=state.time + dt, torque=tau)
    if check and not np.all(new.is_finite()):
        raise SimulationFault("non-finite simulator state")
    return new


def _world_inertia_apply(rot, inertia, omega):
    body = np.einsum("nji,nj->ni", rot, omega) * inertia
    return np.einsum("nij,nj->ni", rot, body)


def _world_inertia_solve(rot, inertia, momentum):
    body = np.einsum("nji,nj->ni", rot, momentum) / inertia
    return np.einsum("nij,nj->ni", rot, body)


def angular_momentum(state: SimState, morph: Morphology) -> np.ndarray:
    rot = quat_to_matrix(state.quat)
    return _world_inertia_apply(rot, np.broadcast_to(morph.inertia, (state.n, 3)), state.ang_vel)


# -- domain randomization ------------------------------------------------------

@dataclass(frozen=True)
class DomainRandomization:
    """Uniform randomization ranges for dynamics and observation noise."""

    mass_scale: tuple[float, float] = (0.8, 1.2)
    friction_scale: tuple[float, float] = (0.5, 1.5)
    lin_vel_noise: float = 0.02
    ang_vel_noise: float = 0.1
    joint_pos_noise: float = 0.0175
    joint_vel_noise: float = 0.1

    @classmethod
    def disabled(cls) -> DomainRandomization:
        return cls((1.0, 1.0), (1.0, 1.0), 0.0, 0.0, 0.0, 0.0)

    @property
    def noise_ranges(self) -> dict[str, float]:
        return {"lin_vel": self.lin_vel_noise, "ang_vel": self.ang_vel_noise,
                "q": self.joint_pos_noise, "qd": self.joint_vel_noise}


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def randomize_domain(base: Morphology, seed, ranges: DomainRandomization = DomainRandomization()) -> Morphology:
    """Scale body masses (and inertia with them) and friction by uniform draws.

    Deterministic for a fixed seed.
    """
    rng = _rng(seed)
    mass_scale = float(rng.uniform(*ranges.mass_scale))
    friction_scale = float(rng.uniform(*ranges.friction_scale))
    return dataclasses.replace(
        base,
        torso_mass=base.torso_mass * mass_scale,
        head_mass=base.head_mass * mass_scale,
        torso_inertia=tuple(float(i) * mass_scale for i in base.torso_inertia),
        friction=base.friction * friction_scale,
    )


def observation_noise(values: dict[str, np.ndarray], seed,
                      ranges: DomainRandomization = DomainRandomization()) -> dict[str, np.ndarray]:
    """Add uniform noise to the velocity and joint entries; other keys pass through."""
    rng = _rng(seed)
    bounds = ranges.noise_ranges
    out = {}
    for key, value in values.items():
        value = np.asarray(value, dtype=float)
        width = bounds.get(key, 0.0)
        out[key] = value + rng.uniform(-width, width, size=value.shape) if width > 0.0 else value.copy()
    return out
