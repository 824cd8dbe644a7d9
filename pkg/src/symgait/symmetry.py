"""Temporal and morphological symmetry machinery.

Stance/swing indicators are smoothed by treating each window boundary as a
Von Mises distributed event on the phase circle.  The morphological part
finds leg pairs sharing an offset and measures how far their joints drift
apart.
"""

from __future__ import annotations

import enum
import functools
import itertools
from dataclasses import dataclass

import numpy as np

from .gait import LEGS, GaitSpec, LegId, circular_distance

DEFAULT_KAPPA = 32.0
PAIR_TOLERANCE = 0.01

TWO_PI = 2.0 * np.pi


class Phase(str, enum.Enum):
    SWING = "swing"
    STANCE = "stance"


def _phase_kind(kind) -> Phase:
    try:
        return Phase(kind)
    except ValueError:
        raise ValueError(f"kind must be 'swing' or 'stance', got {kind!r}") from None


@dataclass(frozen=True, eq=False)
class PhaseIndicatorConfig:
    """Duty factor (scalar, or one per environment) and Von Mises concentration."""

    duty: float
    kappa: float = DEFAULT_KAPPA

    def __post_init__(self) -> None:
        duty = np.asarray(self.duty, dtype=float)
        if not np.all((duty > 0.0) & (duty < 1.0)):
            raise ValueError("duty factor must lie in (0, 1)")
        if not self.kappa > 0.0:
            raise ValueError("kappa must be positive")


def _check_phase(phi) -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    if np.any(~np.isfinite(phi)) or np.any(phi < 0.0) or np.any(phi >= 1.0):
        raise ValueError("phase must lie in [0, 1)")
    return phi


def indicator_exact(phi, duty, kind="swing"):
    """Hard 0/1 indicator: swing on ``[0, 1 - β)``, stance on ``[1 - β, 1)``."""
    phi = _check_phase(phi)
    swing = (phi < 1.0 - np.asarray(duty)).astype(int)
    out = swing if _phase_kind(kind) is Phase.SWING else 1 - swing
    return int(out) if out.ndim == 0 else out


@functools.lru_cache(maxsize=64)
def _bessel_ratios(kappa: float) -> np.ndarray:
    """``I_n(κ) / I_0(κ)`` for n = 1, 2, ... until the terms drop below 1e-18.

    Miller's backward recurrence on ``r_n = I_n / I_{n-1}``; stable for any κ.
    """
    n_terms = int(np.ceil(np.sqrt(80.0 * kappa))) + 40
    start = 2 * n_terms + 50
    ratios = np.empty(start)
    r = 0.0
    for n in range(start, 0, -1):
        r = 1.0 / (2.0 * n / kappa + r)
        ratios[n - 1] = r
    rho = np.cumprod(ratios[:n_terms])
    keep = np.nonzero(rho > 1e-18)[0]
    return rho[: keep[-1] + 1] if keep.size else rho[:1]


def _centered_cdf(u, kappa: float) -> np.ndarray:
    """Von Mises CDF of a centered variable, ``u`` in phase units within [-0.5, 0.5]."""
    rho = _bessel_ratios(float(kappa))
    n = np.arange(1, rho.size + 1, dtype=float)
    y = TWO_PI * np.asarray(u, dtype=float)
    series = np.sin(y[..., None] * n) @ (rho / n)
    return np.clip((y + np.pi) / TWO_PI + series / np.pi, 0.0, 1.0)


def von_mises_cdf(x, mu, kappa: float):
    """Probability mass of a Von Mises variable between ``mu - π`` and ``x``.

    Positions live on the unit phase circle ``[0, 1)`` and are mapped to
    ``[0, 2π)`` internally.  The density's Fourier series is integrated term
    by term with Bessel ratios from ``_bessel_ratios``.
    """
    if not kappa > 0.0:
        raise ValueError("kappa must be positive")
    u = np.mod(np.asarray(x, dtype=float) - np.asarray(mu, dtype=float) + 0.5, 1.0) - 0.5
    out = _centered_cdf(u, kappa)
    return float(out) if out.ndim == 0 else out


def _line_cdf(u, kappa: float) -> np.ndarray:
    # Von Mises CDF extended to the real line: 0 left of the antipode, 1 right of it.
    u = np.asarray(u, dtype=float)
    inside = _centered_cdf(np.clip(u, -0.5, 0.5), kappa)
    return np.where(u < -0.5, 0.0, np.where(u >= 0.5, 1.0, inside))


def window_probability(phi, start, width, kappa: float):
    """``P(start' <= φ < start' + width)`` with Von Mises jitter on both boundaries.

    The phase is unrolled around the window so the seam sits in the middle of
    the complementary gap, which keeps the result continuous on the circle.
    """
    phi = np.asarray(phi, dtype=float)
    width = np.asarray(width, dtype=float)
    gap = 0.5 * (1.0 - width)
    d = np.mod(phi - start + gap, 1.0) - gap
    return _line_cdf(d, kappa) * (1.0 - _line_cdf(d - width, kappa))


def expected_indicator(phi, cfg: PhaseIndicatorConfig, kind="swing"):
    """Smoothed stance/swing coefficient ``E[I_kind(φ)]`` in [0, 1]."""
    phi = _check_phase(phi)
    swing = window_probability(phi, 0.0, 1.0 - np.asarray(cfg.duty), cfg.kappa)
    out = swing if _phase_kind(kind) is Phase.SWING else 1.0 - swing
    return float(out) if out.ndim == 0 else out


def expected_indicators(phi, duty, kappa: float = DEFAULT_KAPPA) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized ``(E[I_swing], E[I_stance])`` with per-element duty factors."""
    if not kappa > 0.0:
        raise ValueError("kappa must be positive")
    phi = np.asarray(phi, dtype=float)
    swing = window_probability(phi, 0.0, 1.0 - np.asarray(duty, dtype=float), kappa)
    return swing, 1.0 - swing


@dataclass(frozen=True, order=True)
class PermutationPair:
    first: LegId
    second: LegId

    def __post_init__(self) -> None:
        a, b = LegId(self.first), LegId(self.second)
        if a == b:
            raise ValueError("a permutation pair needs two distinct legs")
        if a > b:
            a, b = b, a
        object.__setattr__(self, "first", a)
        object.__setattr__(self, "second", b)

    def __str__(self) -> str:
        return f"({self.first.name},{self.second.name})"


ALL_PAIRS: tuple[PermutationPair, ...] = tuple(
    PermutationPair(a, b) for a, b in itertools.combinations(LEGS, 2)
)


@dataclass(frozen=True)
class SymmetryGroup:
    """All six leg pairs with their activation flags."""

    active: tuple[bool, ...]

    def __post_init__(self) -> None:
        if len(self.active) != len(ALL_PAIRS):
            raise ValueError("a symmetry group flags exactly six pairs")

    @property
    def pairs(self) -> tuple[PermutationPair, ...]:
        return ALL_PAIRS

    @property
    def active_pairs(self) -> frozenset[PermutationPair]:
        return frozenset(p for p, on in zip(ALL_PAIRS, self.active) if on)

    def is_active(self, i: LegId, j: LegId) -> bool:
        return PermutationPair(i, j) in self.active_pairs

    @functools.cached_property
    def index_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        on = [p for p, flag in zip(ALL_PAIRS, self.active) if flag]
        return (np.array([int(p.first) for p in on], dtype=int),
                np.array([int(p.second) for p in on], dtype=int))


def morphological_pairs(spec: GaitSpec, tol: float = PAIR_TOLERANCE) -> SymmetryGroup:
    """Flag each leg pair whose offsets agree within ``tol`` on the circle."""
    if not tol > 0.0:
        raise ValueError("pair tolerance must be positive")
    th = spec.offsets
    return SymmetryGroup(tuple(
        bool(circular_distance(th[p.first], th[p.second]) <= tol) for p in ALL_PAIRS
    ))


def leg_joints(q) -> np.ndarray:
    """Reshape a 9-joint vector (4 shoulders, 4 knees, neck) into (..., 4, 2)."""
    q = np.asarray(q, dtype=float)
    return np.stack([q[..., 0:4], q[..., 4:8]], axis=-1)


def morphological_distance(q_legs, group: SymmetryGroup):
    """Summed |Δshoulder| + |Δknee| over the active pairs of ``group``.

    ``q_legs`` has shape ``(..., 4, 2)``: one (shoulder, knee) row per leg.
    """
    q_legs = np.asarray(q_legs, dtype=float)
    if q_legs.shape[-2:] != (4, 2):
        raise ValueError("expected one (shoulder, knee) row per leg")
    i, j = group.index_arrays
    if i.size == 0:
        out = np.zeros(q_legs.shape[:-2])
    else:
        out = np.abs(q_legs[..., i, :] - q_legs[..., j, :]).sum(axis=(-2, -1))
    return float(out) if out.ndim == 0 else out
