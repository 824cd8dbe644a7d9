"""Deterministic policy rollouts with command schedules and per-step traces."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np
import torch

from ..gait import LEG_NAMES, GaitSpec
from ..quadsim import DomainRandomization
from .env import EpisodeConfig, GaitEnv
from .networks import ActorCritic
from .train import write_rows

TRACE_COLUMNS = (
    "time", "v_cmd", "v_x", "v_y", "v_z", "yaw_rate",
    *(f"phi_{leg}" for leg in LEG_NAMES),
    *(f"contact_{leg}" for leg in LEG_NAMES),
    *(f"grf_{leg}" for leg in LEG_NAMES),
    *(f"foot_speed_{leg}" for leg in LEG_NAMES),
    *(f"stance_weight_{leg}" for leg in LEG_NAMES),
    "r_cmd", "r_smooth", "r_tem", "r_mor", "total",
    "direction", "period", "duty", "fault",
)


@dataclass(frozen=True)
class VelocitySchedule:
    """Commanded forward speed as a function of time.

    ``kind`` is ``constant`` (one value), ``ramp`` (linear from the first to
    the second value over ``duration``) or ``steps`` (``values[i]`` from
    ``times[i]`` on).
    """

    kind: str
    values: tuple[float, ...]
    times: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in ("constant", "ramp", "steps"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        need = {"constant": 1, "ramp": 2}.get(self.kind)
        if need is not None and len(self.values) != need:
            raise ValueError(f"{self.kind} schedule takes {need} value(s)")
        if self.kind == "steps":
            if not self.values or len(self.times) != len(self.values):
                raise ValueError("steps schedule needs one start time per value")
            if list(self.times) != sorted(self.times) or self.times[0] != 0.0:
                raise ValueError("step times must start at 0 and increase")

    @classmethod
    def parse(cls, text: str) -> VelocitySchedule:
        """``0.3``, ``ramp:0.2:0.45`` or ``steps:0.2@0,0.4@2.5``."""
        text = text.strip()
        try:
            if text.startswith("ramp:"):
                a, b = text[5:].split(":")
                return cls("ramp", (float(a), float(b)))
            if text.startswith("steps:"):
                pairs = [p.split("@") for p in text[6:].split(",")]
                return cls("steps", tuple(float(v) for v, _ in pairs), tuple(float(t) for _, t in pairs))
            return cls("constant", (float(text),))
        except ValueError as exc:
            raise ValueError(f"cannot parse velocity schedule {text!r}: {exc}") from None

    def __call__(self, t: float, duration: float) -> float:
        if self.kind == "constant":
            return self.values[0]
        if self.kind == "ramp":
            frac = min(max(t / duration, 0.0), 1.0) if duration > 0 else 1.0
            return self.values[0] + (self.values[1] - self.values[0]) * frac
        i = int(np.searchsorted(self.times, t, side="right")) - 1
        return self.values[max(i, 0)]


@dataclass
class EvalResult:
    rows: list[dict]
    fault: bool
    terminated: bool

    def summary(self) -> dict[str, float]:
        if not self.rows:
            return {"steps": 0}
        get = lambda key: np.array([r[key] for r in self.rows], dtype=float)  # noqa: E731
        contact = np.stack([get(f"contact_{leg}") for leg in LEG_NAMES], -1) > 0.5
        stance = np.stack([get(f"stance_weight_{leg}") for leg in LEG_NAMES], -1) > 0.5
        out = {
            "steps": len(self.rows),
            "tracking_error": float(np.mean(np.abs(get("v_x") - get("v_cmd")))),
            "contact_agreement": float(np.mean(contact == stance)),
            "fault": int(self.fault),
            "terminated": int(self.terminated),
        }
        for key in ("r_cmd", "r_smooth", "r_tem", "r_mor", "total"):
            out[f"mean_{key}"] = float(get(key).mean())
        return out

    def write(self, path) -> None:
        write_rows(path, TRACE_COLUMNS, self.rows)


def evaluation_config(base: EpisodeConfig, gait: GaitSpec | None = None, duration: float = 10.0,
                      delta: float = 0.0) -> EpisodeConfig:
    """Nominal robot, no noise, no jitter, and a time limit past ``duration``."""
    return dataclasses.replace(
        base, gait=gait or base.gait, fixed_delta=delta, observation_noise=False,
        randomization=DomainRandomization.disabled(), pose_jitter=0.0,
        max_duration=duration + 10.0 * base.control_dt,
    )


def evaluate(model: ActorCritic, cfg: EpisodeConfig, schedule: VelocitySchedule,
             duration: float, seed: int = 0) -> EvalResult:
    """Roll the mean action of ``model`` for ``duration`` seconds.

    The trace stops early if the robot falls or the physics faults; a fault
    is flagged in the last row.
    """
    cfg = evaluation_config(cfg, duration=duration, delta=0.0 if cfg.fixed_delta is None else cfg.fixed_delta)
    env = GaitEnv(dataclasses.replace(cfg, fixed_v_cmd=schedule(0.0, duration)), n=1, seed=seed)
    obs = env.reset()
    n_steps = int(round(duration / cfg.control_dt))
    rows: list[dict] = []
    fault = terminated = False
    model.eval()
    for k in range(n_steps):
        t = k * cfg.control_dt
        v = schedule(t, duration)
        if v != env.v_cmd[0]:
            env.set_command([0], v)
        period, duty, direction = float(env.period[0]), float(env.duty[0]), 1 if env.forward[0] else -1
        with torch.no_grad():
            action, _, _ = model.act(torch.as_tensor(obs, dtype=torch.float32), deterministic=True)
        res = env.step(action.numpy().astype(float))
        row = {
            "time": t + cfg.control_dt, "v_cmd": v,
            "v_x": res.lin_vel[0, 0], "v_y": res.lin_vel[0, 1], "v_z": res.lin_vel[0, 2],
            "yaw_rate": res.yaw_rate[0],
            "r_cmd": res.breakdown.r_cmd[0], "r_smooth": res.breakdown.r_smooth[0],
            "r_tem": res.breakdown.r_tem[0], "r_mor": res.breakdown.r_mor[0], "total": res.reward[0],
            "direction": direction, "period": period, "duty": duty, "fault": int(res.fault[0]),
        }
        for j, leg in enumerate(LEG_NAMES):
            row[f"phi_{leg}"] = res.phase[0, j]
            row[f"contact_{leg}"] = int(res.contact[0, j])
            row[f"grf_{leg}"] = res.grf[0, j]
            row[f"foot_speed_{leg}"] = res.foot_speed[0, j]
            row[f"stance_weight_{leg}"] = res.stance_weight[0, j]
        rows.append(row)
        obs = res.obs
        if res.done[0]:
            fault = bool(res.fault[0])
            terminated = not res.timeout[0]
            break
    return EvalResult(rows, fault, terminated)
