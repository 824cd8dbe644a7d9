"""Gaussian actor and value critic over a short observation history."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import torch
import torch.nn as nn
from torch.distributions import Normal


@dataclass(frozen=True)
class NetworkConfig:
    obs_dim: int = 45
    history: int = 4
    action_dim: int = 9
    encoder_hidden: tuple[int, ...] = (400, 400)
    head: str = "mlp"            # "mlp" or "lstm"
    lstm_hidden: int = 256
    value_hidden: tuple[int, ...] = (256, 256)
    init_log_std: float = -1.0

    def __post_init__(self) -> None:
        if self.head not in ("mlp", "lstm"):
            raise ValueError(f"unknown policy head {self.head!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> NetworkConfig:
        d = dict(d)
        for key in ("encoder_hidden", "value_hidden"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


def mlp(sizes, activate_last: bool = True) -> nn.Sequential:
    layers: list[nn.Module] = []
    for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
        layers.append(nn.Linear(a, b))
        if activate_last or i < len(sizes) - 2:
            layers.append(nn.ELU())
    return nn.Sequential(*layers)


class RunningNorm(nn.Module):
    """Per-feature running mean/variance, frozen unless ``update`` is called."""

    def __init__(self, dim: int, clip: float = 10.0):
        super().__init__()
        self.register_buffer("mean", torch.zeros(dim))
        self.register_buffer("var", torch.ones(dim))
        self.register_buffer("count", torch.tensor(1e-4))
        self.clip = clip

    @torch.no_grad()
    def update(self, x: torch.Tensor) -> None:
        x = x.reshape(-1, x.shape[-1])
        b_mean, b_var, b_count = x.mean(0), x.var(0, unbiased=False), x.shape[0]
        total = self.count + b_count
        delta = b_mean - self.mean
        self.mean += delta * b_count / total
        m2 = self.var * self.count + b_var * b_count + delta.pow(2) * self.count * b_count / total
        self.var.copy_(m2 / total)
        self.count.copy_(total)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return ((x - self.mean) / torch.sqrt(self.var + 1e-8)).clamp(-self.clip, self.clip)


class ActorCritic(nn.Module):
    """Policy over a stack of ``history`` observations plus a separate critic.

    With the ``mlp`` head the encoder sees the flattened stack.  With the
    ``lstm`` head each frame is encoded separately and an LSTM reads the
    sequence of latents; no hidden state crosses control steps.
    """

    def __init__(self, cfg: NetworkConfig = NetworkConfig()):
        super().__init__()
        self.cfg = cfg
        self.norm = RunningNorm(cfg.obs_dim)
        if cfg.head == "mlp":
            self.encoder = mlp((cfg.obs_dim * cfg.history, *cfg.encoder_hidden))
            self.lstm = None
            self.mu = nn.Linear(cfg.encoder_hidden[-1], cfg.action_dim)
        else:
            self.encoder = mlp((cfg.obs_dim, *cfg.encoder_hidden))
            self.lstm = nn.LSTM(cfg.encoder_hidden[-1], cfg.lstm_hidden, batch_first=True)
            self.mu = nn.Linear(cfg.lstm_hidden, cfg.action_dim)
        self.log_std = nn.Parameter(torch.full((cfg.action_dim,), cfg.init_log_std))
        self.critic = mlp((cfg.obs_dim * cfg.history, *cfg.value_hidden, 1), activate_last=False)
        with torch.no_grad():
            self.mu.weight.mul_(0.01)
            self.mu.bias.zero_()

    def _flat(self, obs: torch.Tensor) -> torch.Tensor:
        return self.norm(obs).reshape(*obs.shape[:-2], -1)

    def action_mean(self, obs: torch.Tensor) -> torch.Tensor:
        if self.lstm is None:
            return self.mu(self.encoder(self._flat(obs)))
        x = self.norm(obs)
        lead = x.shape[:-2]
        z = self.encoder(x.reshape(-1, *x.shape[-2:]))
        out, _ = self.lstm(z)
        return self.mu(out[:, -1]).reshape(*lead, -1)

    def distribution(self, obs: torch.Tensor) -> Normal:
        mean = self.action_mean(obs)
        return Normal(mean, self.log_std.exp().expand_as(mean))

    def value(self, obs: torch.Tensor) -> torch.Tensor:
        return self.critic(self._flat(obs)).squeeze(-1)

    def evaluate(self, obs: torch.Tensor, actions: torch.Tensor):
        """Log-probability, entropy and value for stored actions."""
        dist = self.distribution(obs)
        return dist.log_prob(actions).sum(-1), dist.entropy().sum(-1), self.value(obs)

    @torch.no_grad()
    def act(self, obs: torch.Tensor, deterministic: bool = False, generator=None):
        dist = self.distribution(obs)
        if deterministic:
            action = dist.mean
        else:
            noise = torch.randn(dist.mean.shape, generator=generator, dtype=dist.mean.dtype)
            action = dist.mean + dist.stddev * noise
        return action, dist.log_prob(action).sum(-1), self.value(obs)
