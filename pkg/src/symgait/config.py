"""Sectioned ``key = value`` run configuration.

Every key has a default; unknown sections or keys are rejected with the
offending line number.  ``RunConfig.to_text`` emits every key, and parsing
that text gives back an equal ``RunConfig``.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .gait import GaitSpec, named_gait
from .quadsim import DomainRandomization, Morphology
from .reward import RewardWeights
from .rl.env import EpisodeConfig
from .rl.networks import NetworkConfig
from .rl.ppo import PpoConfig
from .rl.train import TrainConfig
from .symmetry import DEFAULT_KAPPA, PAIR_TOLERANCE


class ConfigError(ValueError):
    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}" if lineno else message)


@dataclass(frozen=True)
class RunSection:
    seed: int = 0
    output_dir: str = "runs/default"
    n_envs: int = 64
    total_steps: int = 5_000_000
    checkpoint_every: int = 0


@dataclass(frozen=True)
class GaitSection:
    name: str = "trot"
    offsets: tuple[float, float, float] | None = None   # overrides ``name`` when set
    kappa: float = DEFAULT_KAPPA
    pair_tolerance: float = PAIR_TOLERANCE
    v_cmd_range: tuple[float, float] = (-0.5, 0.5)
    fixed_v_cmd: float | None = None
    fixed_delta: float | None = None

    def spec(self) -> GaitSpec:
        if self.offsets is not None:
            return GaitSpec.from_offsets(self.offsets)
        return named_gait(self.name)


@dataclass(frozen=True)
class EnvSection:
    max_duration: float = 10.0
    control_dt: float = 0.01
    substeps: int = 10
    action_scale: float = 0.5
    pose_jitter: float = 0.05
    observation_noise: bool = True
    min_height_ratio: float = 0.4
    max_tilt: float = 1.0


CONTACT_KEYS = ("contact_stiffness", "contact_damping", "tangential_damping", "friction")
NETWORK_KEYS = ("head", "encoder_hidden", "lstm_hidden", "value_hidden", "init_log_std")
# value kinds for keys whose default is None
_OPTIONAL_KINDS = {"offsets": float, "fixed_v_cmd": float, "fixed_delta": float}


@dataclass(frozen=True)
class RunConfig:
    run: RunSection = field(default_factory=RunSection)
    gait: GaitSection = field(default_factory=GaitSection)
    morphology: Morphology = field(default_factory=Morphology)
    reward: RewardWeights = field(default_factory=RewardWeights)
    ppo: PpoConfig = field(default_factory=PpoConfig)
    randomization: DomainRandomization = field(default_factory=DomainRandomization)
    env: EnvSection = field(default_factory=EnvSection)
    network: NetworkConfig = field(default_factory=NetworkConfig)

    # -- conversion -----------------------------------------------------------

    def episode_config(self) -> EpisodeConfig:
        g, e = self.gait, self.env
        return EpisodeConfig(
            gait=g.spec(), v_cmd_range=g.v_cmd_range, fixed_v_cmd=g.fixed_v_cmd,
            fixed_delta=g.fixed_delta, kappa=g.kappa, pair_tolerance=g.pair_tolerance,
            randomization=self.randomization, morphology=self.morphology, weights=self.reward,
            **dataclasses.asdict(e),
        )

    def train_config(self) -> TrainConfig:
        r = self.run
        return TrainConfig(episode=self.episode_config(), ppo=self.ppo, network=self.network,
                           n_envs=r.n_envs, total_steps=r.total_steps, seed=r.seed,
                           checkpoint_every=r.checkpoint_every)

    # -- text form ------------------------------------------------------------

    def to_text(self) -> str:
        lines: list[str] = []
        for section, attr, keys in _schema():
            obj = getattr(self, attr)
            lines.append(f"[{section}]")
            lines.extend(f"{key} = {_format(getattr(obj, key))}" for key in keys)
            lines.append("")
        return "\n".join(lines)

    @classmethod
    def from_text(cls, text: str) -> RunConfig:
        parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"),
                                           default_section="\x00unused")
        parser.optionxform = str
        try:
            parser.read_string(text)
        except configparser.MissingSectionHeaderError as exc:
            raise ConfigError("key outside of any [section]", exc.lineno) from None
        except configparser.ParsingError as exc:
            lineno = exc.errors[0][0] if exc.errors else None
            raise ConfigError(f"cannot parse {exc.errors[0][1].strip()!r}" if exc.errors else str(exc),
                              lineno) from None
        except configparser.DuplicateOptionError as exc:
            raise ConfigError(f"duplicate key {exc.option!r} in [{exc.section}]", exc.lineno) from None
        except configparser.DuplicateSectionError as exc:
            raise ConfigError(f"duplicate section [{exc.section}]", exc.lineno) from None

        where = _line_index(text)
        schema = {section: (attr, keys) for section, attr, keys in _schema()}
        changes: dict[str, dict] = {}
        for section in parser.sections():
            if section not in schema:
                raise ConfigError(f"unknown section [{section}]", where.get((section, None)))
            attr, keys = schema[section]
            default_obj = getattr(cls(), attr)
            for key, raw in parser.items(section):
                lineno = where.get((section, key))
                if key not in keys:
                    raise ConfigError(f"unknown key {key!r} in [{section}]", lineno)
                try:
                    value = _parse(key, raw, getattr(default_obj, key))
                except ValueError as exc:
                    raise ConfigError(f"bad value for {key!r}: {exc}", lineno) from None
                changes.setdefault(attr, {})[key] = value
        kwargs = {}
        for attr, values in changes.items():
            try:
                kwargs[attr] = dataclasses.replace(getattr(cls(), attr), **values)
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"invalid [{attr}] settings: {exc}") from None
        cfg = cls(**kwargs)
        try:
            cfg.train_config()
        except ValueError as exc:
            raise ConfigError(f"inconsistent configuration: {exc}") from None
        return cfg

    @classmethod
    def load(cls, path) -> RunConfig:
        return cls.from_text(Path(path).read_text())

    def save(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_text())
        return path


def _schema():
    morph_keys = tuple(f.name for f in dataclasses.fields(Morphology) if f.name not in CONTACT_KEYS)
    names = lambda c: tuple(f.name for f in dataclasses.fields(c))  # noqa: E731
    return (
        ("run", "run", names(RunSection)),
        ("gait", "gait", names(GaitSection)),
        ("morphology", "morphology", morph_keys),
        ("contact", "morphology", CONTACT_KEYS),
        ("reward", "reward", names(RewardWeights)),
        ("ppo", "ppo", names(PpoConfig)),
        ("randomization", "randomization", names(DomainRandomization)),
        ("env", "env", names(EnvSection)),
        ("network", "network", NETWORK_KEYS),
    )


def _line_index(text: str) -> dict:
    out: dict = {}
    section = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if not s or s[0] in "#;":
            continue
        if s.startswith("[") and s.endswith("]"):
            section = s[1:-1].strip()
            out.setdefault((section, None), lineno)
            continue
        for sep in ("=", ":"):
            if sep in s:
                out.setdefault((section, s.split(sep, 1)[0].strip()), lineno)
                break
    return out


def _format(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (tuple, list)):
        return ", ".join(_format(v) for v in value)
    return str(value)


def _scalar(raw: str, kind):
    if kind is bool:
        low = raw.lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    if kind is int:
        return int(raw)
    if kind is float:
        return float(raw)
    return raw


def _parse(key: str, raw: str, default):
    raw = raw.strip()
    if default is None or key in _OPTIONAL_KINDS:
        if raw.lower() == "none":
            return None
        kind = _OPTIONAL_KINDS[key]
        if key == "offsets":
            return tuple(kind(p) for p in raw.split(","))
        return kind(raw)
    if isinstance(default, tuple):
        parts = [p.strip() for p in raw.split(",") if p.strip()]
        kind = type(default[0]) if default else float
        return tuple(_scalar(p, kind) for p in parts)
    return _scalar(raw, type(default))
