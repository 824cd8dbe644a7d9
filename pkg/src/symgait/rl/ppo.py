"""Clipped-surrogate PPO with generalized advantage estimation."""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass

import numpy as np
import torch

from .networks import ActorCritic


@dataclass(frozen=True)
class PpoConfig:
    learning_rate: float = 3e-4
    batch_size: int = 8192
    gamma: float = 0.99
    lam: float = 0.95
    clip_ratio: float = 0.2
    epochs: int = 5
    minibatch_size: int = 2048
    entropy_coef: float = 0.005
    value_coef: float = 0.5
    max_grad_norm: float = 1.0

    def __post_init__(self) -> None:
        if not (0.0 < self.gamma <= 1.0 and 0.0 < self.lam <= 1.0):
            raise ValueError("gamma and lambda must lie in (0, 1]")
        if not self.clip_ratio > 0.0:
            raise ValueError("clip ratio must be positive")
        if self.minibatch_size > self.batch_size or self.epochs < 1:
            raise ValueError("minibatch must fit in the batch and epochs must be >= 1")


@dataclass
class TrajectoryBatch:
    """Rollout storage, time-major: arrays are (T, N, ...)."""

    obs: np.ndarray
    actions: np.ndarray
    log_probs: np.ndarray
    rewards: np.ndarray
    values: np.ndarray
    dones: np.ndarray
    last_values: np.ndarray
    advantages: np.ndarray | None = None
    returns: np.ndarray | None = None

    def __len__(self) -> int:
        return int(np.prod(self.rewards.shape))

    def flat(self) -> dict[str, torch.Tensor]:
        if self.advantages is None:
            raise ValueError("compute advantages before flattening the batch")
        n = len(self)
        return {
            "obs": torch.as_tensor(self.obs.reshape(n, *self.obs.shape[2:]), dtype=torch.float32),
            "actions": torch.as_tensor(self.actions.reshape(n, -1), dtype=torch.float32),
            "log_probs": torch.as_tensor(self.log_probs.reshape(n), dtype=torch.float32),
            "advantages": torch.as_tensor(self.advantages.reshape(n), dtype=torch.float32),
            "returns": torch.as_tensor(self.returns.reshape(n), dtype=torch.float32),
        }


def gae_advantages(rewards, values, dones, last_values, gamma: float, lam: float,
                   normalize: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Generalized advantage estimates and value targets.

    ``dones[t]`` marks that the episode ended after step ``t``; the recursion
    restarts there.  Arrays are time-major, (T,) or (T, N).  Returns are
    ``advantages + values`` computed before any normalization.
    """
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    not_done = 1.0 - np.asarray(dones, dtype=float)
    adv = np.zeros_like(rewards)
    running = np.zeros_like(rewards[0])
    next_value = np.asarray(last_values, dtype=float)
    for t in range(rewards.shape[0] - 1, -1, -1):
        delta = rewards[t] + gamma * next_value * not_done[t] - values[t]
        running = delta + gamma * lam * not_done[t] * running
        adv[t] = running
        next_value = values[t]
    returns = adv + values
    if normalize:
        adv = (adv - adv.mean()) / (adv.std() + 1e-8)
    return adv, returns


def surrogate_terms(log_probs, old_log_probs, advantages, clip_ratio: float):
    """Per-sample clipped surrogate (to maximize) and the probability ratio."""
    ratio = torch.exp(log_probs - old_log_probs)
    clipped = torch.clamp(ratio, 1.0 - clip_ratio, 1.0 + clip_ratio)
    return torch.min(ratio * advantages, clipped * advantages), ratio


def ppo_loss(model: ActorCritic, mb: dict[str, torch.Tensor], cfg: PpoConfig):
    log_probs, entropy, values = model.evaluate(mb["obs"], mb["actions"])
    surrogate, ratio = surrogate_terms(log_probs, mb["log_probs"], mb["advantages"], cfg.clip_ratio)
    policy_loss = -surrogate.mean()
    value_loss = 0.5 * (values - mb["returns"]).pow(2).mean()
    entropy_mean = entropy.mean()
    loss = policy_loss + cfg.value_coef * value_loss - cfg.entropy_coef * entropy_mean
    with torch.no_grad():
        stats = {
            "policy_loss": float(policy_loss),
            "value_loss": float(value_loss),
            "entropy": float(entropy_mean),
            "approx_kl": float(((ratio - 1.0) - torch.log(ratio)).mean()),
            "clip_fraction": float(((ratio - 1.0).abs() > cfg.clip_ratio).float().mean()),
        }
    return loss, stats


def make_optimizer(model: ActorCritic, cfg: PpoConfig) -> torch.optim.Adam:
    return torch.optim.Adam(model.parameters(), lr=cfg.learning_rate)


def ppo_update(model: ActorCritic, optimizer: torch.optim.Optimizer, batch: TrajectoryBatch,
               cfg: PpoConfig, generator: torch.Generator | None = None) -> dict[str, float]:
    """Run ``cfg.epochs`` passes of shuffled minibatch steps over ``batch``.

    Advantages are normalized over the whole batch.  A non-finite loss
    restores the parameters and optimizer state from before the update and
    reports ``aborted = 1``.
    """
    data = batch.flat()
    adv = data["advantages"]
    data["advantages"] = (adv - adv.mean()) / (adv.std() + 1e-8)
    n = len(batch)
    size = min(cfg.minibatch_size, n)
    saved_model = copy.deepcopy(model.state_dict())
    saved_opt = copy.deepcopy(optimizer.state_dict())
    totals: dict[str, float] = {}
    count = 0
    for _ in range(cfg.epochs):
        order = torch.randperm(n, generator=generator)
        for start in range(0, n - size + 1, size):
            idx = order[start:start + size]
            mb = {k: v[idx] for k, v in data.items()}
            loss, stats = ppo_loss(model, mb, cfg)
            if not math.isfinite(float(loss.detach())):
                model.load_state_dict(saved_model)
                optimizer.load_state_dict(saved_opt)
                return {"aborted": 1.0}
            optimizer.zero_grad()
            loss.backward()
            torch.nn.utils.clip_grad_norm_(model.parameters(), cfg.max_grad_norm)
            optimizer.step()
            for k, v in stats.items():
                totals[k] = totals.get(k, 0.0) + v
            count += 1
    out = {k: v / max(count, 1) for k, v in totals.items()}
    out["aborted"] = 0.0
    return out
