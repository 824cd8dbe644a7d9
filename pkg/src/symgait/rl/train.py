"""Rollout collection and the PPO training loop."""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .checkpoint import save_checkpoint
from .env import ACTION_DIM, HISTORY, OBS_DIM, EpisodeConfig, GaitEnv
from .networks import ActorCritic, NetworkConfig
from .ppo import PpoConfig, TrajectoryBatch, gae_advantages, make_optimizer, ppo_update

log = logging.getLogger(__name__)

METRIC_COLUMNS = (
    "update", "env_steps", "mean_reward", "r_cmd", "r_smooth", "r_tem", "r_mor",
    "tracking_error", "contact_agreement", "episodes", "mean_episode_length", "falls", "faults",
    "policy_loss", "value_loss", "entropy", "approx_kl", "clip_fraction", "aborted",
)
EPISODE_COLUMNS = ("index", "update", "steps", "v_cmd", "tracking_error", "contact_agreement",
                   "reward", "fell", "fault")


@dataclass(frozen=True)
class TrainConfig:
    episode: EpisodeConfig = field(default_factory=EpisodeConfig)
    ppo: PpoConfig = field(default_factory=PpoConfig)
    network: NetworkConfig = field(default_factory=NetworkConfig)
    n_envs: int = 64
    total_steps: int = 5_000_000
    seed: int = 0
    checkpoint_every: int = 0

    def __post_init__(self) -> None:
        if self.ppo.batch_size % self.n_envs:
            raise ValueError("batch size must be a multiple of the environment count")

    @property
    def rollout_length(self) -> int:
        return self.ppo.batch_size // self.n_envs

    @property
    def n_updates(self) -> int:
        return max(1, self.total_steps // self.ppo.batch_size)


@dataclass
class TrainResult:
    model: ActorCritic
    metrics: list[dict]
    episodes: list[dict]

    def final_episodes(self, count: int = 100) -> dict[str, float]:
        """Mean tracking error and contact agreement over the last ``count`` episodes."""
        tail = self.episodes[-count:]
        if not tail:
            return {"episodes": 0, "tracking_error": float("nan"), "contact_agreement": float("nan")}
        return {
            "episodes": len(tail),
            "tracking_error": float(np.mean([e["tracking_error"] for e in tail])),
            "contact_agreement": float(np.mean([e["contact_agreement"] for e in tail])),
        }


def _as_tensor(x: np.ndarray) -> torch.Tensor:
    return torch.as_tensor(x, dtype=torch.float32)


def collect_rollout(env: GaitEnv, model: ActorCritic, obs: np.ndarray, length: int,
                    gamma: float, generator: torch.Generator):
    """Step ``env`` for ``length`` control steps with the stochastic policy.

    Time-limit truncations fold ``gamma * V(terminal)`` into the reward so the
    episode boundary does not read as a failure.
    """
    n = env.n
    buf = {
        "obs": np.zeros((length, n, HISTORY, OBS_DIM), dtype=np.float32),
        "actions": np.zeros((length, n, ACTION_DIM), dtype=np.float32),
        "log_probs": np.zeros((length, n)),
        "rewards": np.zeros((length, n)),
        "values": np.zeros((length, n)),
        "dones": np.zeros((length, n)),
    }
    terms = np.zeros(4)
    track = agree = total = 0.0
    finished = []
    for t in range(length):
        action, logp, value = model.act(_as_tensor(obs), generator=generator)
        result = env.step(action.numpy().astype(float))
        reward = result.reward.copy()
        total += float(reward.mean())
        if np.any(result.timeout):
            with torch.no_grad():
                boot = model.value(_as_tensor(result.terminal_obs[result.timeout])).numpy()
            reward[result.timeout] += gamma * boot
        buf["obs"][t] = obs
        buf["actions"][t] = action.numpy()
        buf["log_probs"][t] = logp.numpy()
        buf["rewards"][t] = reward
        buf["values"][t] = value.numpy()
        buf["dones"][t] = result.done
        b = result.breakdown
        terms += [b.r_cmd.mean(), b.r_smooth.mean(), b.r_tem.mean(), b.r_mor.mean()]
        track += float(np.mean(np.abs(result.v_x - result.v_cmd)))
        agree += float(np.mean(result.contact == (result.stance_weight > 0.5)))
        finished.extend(result.finished)
        obs = result.obs
    with torch.no_grad():
        last_values = model.value(_as_tensor(obs)).numpy().astype(float)
    batch = TrajectoryBatch(last_values=last_values, **buf)
    stats = {
        "mean_reward": total / length,
        "r_cmd": terms[0] / length, "r_smooth": terms[1] / length,
        "r_tem": terms[2] / length, "r_mor": terms[3] / length,
        "tracking_error": track / length, "contact_agreement": agree / length,
    }
    return batch, obs, finished, stats


def train(cfg: TrainConfig, output_dir=None, progress: bool = False) -> TrainResult:
    """Train one policy for one fixed phase set.

    Everything runs in this process on a single torch thread, so a fixed
    ``cfg.seed`` reproduces the metrics bit for bit.
    """
    torch.set_num_threads(1)
    torch.manual_seed(cfg.seed)
    generator = torch.Generator().manual_seed(cfg.seed)
    out = Path(output_dir) if output_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    env = GaitEnv(cfg.episode, cfg.n_envs, seed=cfg.seed)
    model = ActorCritic(cfg.network)
    optimizer = make_optimizer(model, cfg.ppo)
    obs = env.reset()
    model.norm.update(_as_tensor(obs[:, -1]))

    metrics: list[dict] = []
    episodes: list[dict] = []
    env_steps = 0
    started = time.time()
    for update in range(1, cfg.n_updates + 1):
        batch, obs, finished, stats = collect_rollout(
            env, model, obs, cfg.rollout_length, cfg.ppo.gamma, generator)
        env_steps += len(batch)
        batch.advantages, batch.returns = gae_advantages(
            batch.rewards, batch.values, batch.dones, batch.last_values, cfg.ppo.gamma, cfg.ppo.lam)
        losses = ppo_update(model, optimizer, batch, cfg.ppo, generator)
        model.norm.update(_as_tensor(batch.obs[:, :, -1]))

        for ep in finished:
            episodes.append({"index": len(episodes), "update": update, **ep})
        row = {
            "update": update,
            "env_steps": env_steps,
            "episodes": len(finished),
            "mean_episode_length": float(np.mean([e["steps"] for e in finished])) if finished else 0.0,
            "falls": sum(e["fell"] for e in finished),
            "faults": sum(e["fault"] for e in finished),
            **{k: stats[k] for k in ("mean_reward", "r_cmd", "r_smooth", "r_tem", "r_mor", "tracking_error",
                                     "contact_agreement")},
            **{k: losses.get(k, float("nan")) for k in ("policy_loss", "value_loss", "entropy",
                                                        "approx_kl", "clip_fraction", "aborted")},
        }
        metrics.append(row)
        if progress or log.isEnabledFor(logging.INFO):
            msg = (f"update {update}/{cfg.n_updates} steps {env_steps} reward {row['mean_reward']:.3f} "
                   f"track {row['tracking_error']:.3f} agree {row['contact_agreement']:.3f} "
                   f"len {row['mean_episode_length']:.0f} kl {row['approx_kl']:.4f} "
                   f"std {float(model.log_std.exp().mean()):.3f} t {time.time() - started:.0f}s")
            if progress:
                print(msg, flush=True)
            log.info(msg)
        if out is not None:
            write_metrics(out / "metrics.csv", metrics)
            if cfg.checkpoint_every and update % cfg.checkpoint_every == 0:
                save_checkpoint(out / f"checkpoint_{update:05d}.bin", model, _ckpt_meta(cfg, update))
    if out is not None:
        save_checkpoint(out / "checkpoint_final.bin", model, _ckpt_meta(cfg, cfg.n_updates))
        write_metrics(out / "metrics.csv", metrics)
        write_rows(out / "episodes.csv", EPISODE_COLUMNS, episodes)
    return TrainResult(model, metrics, episodes)


def _ckpt_meta(cfg: TrainConfig, update: int) -> dict:
    ep = cfg.episode
    return {
        "update": update,
        "offsets": [ep.gait.theta_lh, ep.gait.theta_lf, ep.gait.theta_rf],
        "action_scale": ep.action_scale,
        "kappa": ep.kappa,
        "control_dt": ep.control_dt,
        "substeps": ep.substeps,
        "seed": cfg.seed,
    }


def format_number(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.17g}"


def write_rows(path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_number(row[c]) for c in columns])


def write_metrics(path, metrics) -> None:
    write_rows(path, METRIC_COLUMNS, metrics)
