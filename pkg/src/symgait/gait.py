"""Gait parameterization: phase offsets, stride timing curves and leg clocks.

Per-leg arrays everywhere in the package use the canonical order
``(LH, LF, RF, RH)``.  The right-hind offset is pinned to zero, so a gait is
fully described by three offsets plus the commanded forward speed.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

PERIOD_SCALE = 0.26
PERIOD_DECAY = 0.98
DUTY_SCALE = 0.56
DUTY_DECAY = 0.69
NOISE_GAIN = 0.25
DUTY_BOUNDS = (0.01, 0.99)


class LegId(enum.IntEnum):
    LH = 0
    LF = 1
    RF = 2
    RH = 3


LEGS: tuple[LegId, ...] = tuple(LegId)
LEG_NAMES: tuple[str, ...] = tuple(leg.name for leg in LEGS)


class GaitFamily(str, enum.Enum):
    PRONK = "Pronk"
    TROT = "Trot"
    BOUND = "Bound"
    HALF_BOUND = "HalfBound"
    GALLOP = "Gallop"
    OTHER = "Other"


@dataclass(frozen=True)
class GaitSpec:
    """Three free phase offsets and a commanded forward velocity.

    ``theta_rh`` is always zero: every gait starts from the right-hind stance.
    """

    theta_lh: float
    theta_lf: float
    theta_rf: float
    v_cmd: float = 0.0

    def __post_init__(self) -> None:
        for name in ("theta_lh", "theta_lf", "theta_rf"):
            value = getattr(self, name)
            if not (0.0 <= value < 1.0) or not math.isfinite(value):
                raise ValueError(f"{name} must lie in [0, 1), got {value!r}")
        if not math.isfinite(self.v_cmd):
            raise ValueError("v_cmd must be finite")

    @property
    def theta_rh(self) -> float:
        return 0.0

    @property
    def offsets(self) -> np.ndarray:
        """Offsets in canonical leg order, right-hind included."""
        return np.array([self.theta_lh, self.theta_lf, self.theta_rf, 0.0])

    def with_command(self, v_cmd: float) -> GaitSpec:
        return GaitSpec(self.theta_lh, self.theta_lf, self.theta_rf, v_cmd)

    @classmethod
    def from_offsets(cls, offsets, v_cmd: float = 0.0) -> GaitSpec:
        """Build from ``[θ_LH, θ_LF, θ_RF]`` (a trailing ``θ_RH = 0`` is allowed)."""
        values = [float(x) for x in offsets]
        if len(values) == 4:
            if values[3] != 0.0:
                raise ValueError("the right-hind offset is fixed at 0")
            values = values[:3]
        if len(values) != 3:
            raise ValueError(f"expected 3 offsets, got {len(values)}")
        return cls(values[0], values[1], values[2], v_cmd)


_NAMED_OFFSETS = {
    GaitFamily.TROT: (0.50, 0.0, 0.50),
    GaitFamily.BOUND: (0.0, 0.50, 0.50),
    GaitFamily.HALF_BOUND: (0.0, 0.40, 0.60),
    GaitFamily.GALLOP: (0.20, 0.50, 0.70),
    GaitFamily.PRONK: (0.0, 0.0, 0.0),
}


def _family_from_name(name: str | GaitFamily) -> GaitFamily:
    if isinstance(name, GaitFamily):
        return name
    key = name.strip().lower().replace("-", "").replace("_", "").replace(" ", "")
    for family in GaitFamily:
        if family.value.lower() == key:
            return family
    raise ValueError(f"unknown gait name {name!r}")


def named_gait(name: str | GaitFamily, v_cmd: float = 0.0) -> GaitSpec:
    """Phase set of a named gait family (trot, bound, half-bound, gallop, pronk)."""
    family = _family_from_name(name)
    if family not in _NAMED_OFFSETS:
        raise ValueError(f"no phase set for gait family {family.value!r}")
    return GaitSpec(*_NAMED_OFFSETS[family], v_cmd=v_cmd)


def _check_noise(delta) -> None:
    d = np.asarray(delta, dtype=float)
    if not np.all(np.isfinite(d)) or np.any(np.abs(d) > 1.0):
        raise ValueError(f"stride noise must lie in [-1, 1], got {delta!r}")


def stride_period(v_cmd, delta=0.0):
    """Stride period in seconds for a commanded speed and stride noise."""
    _check_noise(delta)
    speed = np.abs(v_cmd)
    out = PERIOD_SCALE * (1.0 + NOISE_GAIN * np.asarray(delta) * speed) * np.exp(-PERIOD_DECAY * speed)
    return float(out) if np.ndim(out) == 0 else out


def duty_factor(v_cmd, delta=0.0):
    """Stance fraction of the stride, clamped to ``DUTY_BOUNDS``."""
    _check_noise(delta)
    speed = np.abs(v_cmd)
    out = DUTY_SCALE * (1.0 + NOISE_GAIN * np.asarray(delta) * speed) * np.exp(-DUTY_DECAY * speed)
    out = np.clip(out, *DUTY_BOUNDS)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class StrideTiming:
    period: float
    duty: float
    delta: float = 0.0

    def __post_init__(self) -> None:
        if not self.period > 0.0:
            raise ValueError("stride period must be positive")
        if not 0.0 < self.duty < 1.0:
            raise ValueError("duty factor must lie in (0, 1)")
        _check_noise(self.delta)

    @classmethod
    def from_command(cls, v_cmd: float, delta: float = 0.0) -> StrideTiming:
        return cls(stride_period(v_cmd, delta), duty_factor(v_cmd, delta), delta)


def wrap_phase(x):
    """``x mod 1`` mapped into [0, 1), guarding the round-up of tiny negatives."""
    out = np.mod(x, 1.0)
    out = np.where(out >= 1.0, 0.0, out)
    return float(out) if np.ndim(out) == 0 else out


def cycle_phase(cycles, theta, forward=True):
    """Leg phase from an accumulated cycle count (``t / T``) and an offset.

    Backward clocks run the forward clock in reverse: ``mod(-(t/T + θ), 1)``.
    ``forward`` may be an array to evaluate mixed directions at once.
    """
    raw = np.asarray(cycles) + np.asarray(theta)
    sign = np.where(np.asarray(forward, dtype=bool), 1.0, -1.0)
    return wrap_phase(sign * raw)


def leg_phase(t, period, theta, forward=True):
    """Phase of one leg at time ``t`` for stride period ``period``."""
    if np.any(np.asarray(period) <= 0.0):
        raise ValueError("stride period must be positive")
    return cycle_phase(np.asarray(t) / np.asarray(period), theta, forward)


@dataclass(frozen=True)
class PhaseClock:
    phases: np.ndarray
    forward: bool = True

    def __post_init__(self) -> None:
        phases = np.asarray(self.phases, dtype=float)
        if phases.shape != (4,):
            raise ValueError("a phase clock holds one phase per leg")
        if np.any(phases < 0.0) or np.any(phases >= 1.0):
            raise ValueError("phases must lie in [0, 1)")
        object.__setattr__(self, "phases", phases)

    @classmethod
    def at(cls, t: float, period: float, spec: GaitSpec) -> PhaseClock:
        forward = spec.v_cmd >= 0.0
        return cls(leg_phase(t, period, spec.offsets, forward), forward)

    def __getitem__(self, leg: LegId) -> float:
        return float(self.phases[int(leg)])


def clock_encoding(clock) -> np.ndarray:
    """``sin(2πφ)`` per leg; accepts a ``PhaseClock`` or raw phase arrays."""
    phases = clock.phases if isinstance(clock, PhaseClock) else np.asarray(clock, dtype=float)
    return np.sin(2.0 * np.pi * phases)


def circular_distance(a, b):
    d = np.abs(np.mod(np.asarray(a) - np.asarray(b), 1.0))
    return np.minimum(d, 1.0 - d)


def classify_gait(spec: GaitSpec, tol: float = 0.01) -> GaitFamily:
    """Name the gait family from which leg pairs share a phase offset."""
    if not tol > 0.0:
        raise ValueError("tolerance must be positive")
    th = spec.offsets

    def sync(i: LegId, j: LegId) -> bool:
        return bool(circular_distance(th[i], th[j]) <= tol)

    L = LegId
    if all(sync(L.RH, leg) for leg in (L.LH, L.LF, L.RF)) and sync(L.LH, L.LF) and sync(L.LF, L.RF):
        return GaitFamily.PRONK
    if sync(L.LF, L.RH) and sync(L.RF, L.LH) and not sync(L.LF, L.RF):
        return GaitFamily.TROT
    front, hind = sync(L.LF, L.RF), sync(L.LH, L.RH)
    if front and hind and not sync(L.LF, L.LH):
        return GaitFamily.BOUND
    if front != hind:
        return GaitFamily.HALF_BOUND
    any_pair = any(sync(LEGS[i], LEGS[j]) for i in range(4) for j in range(i + 1, 4))
    if not any_pair:
        return GaitFamily.GALLOP
    return GaitFamily.OTHER
