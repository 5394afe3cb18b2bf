"""Experiment configuration: nested sections, strict YAML parsing, overrides.

Grammar: a YAML mapping whose top-level keys are the section names below
(``topology``, ``phy``, ``rendering``, ``mobility``, ``predictor``,
``agent``, ``harness``) plus the scalars ``scheme``, ``prediction`` and
``seed``.  Every key is optional and defaults to the value in the
dataclass; any key not listed here is an error.  Numbers may be written in
any form YAML or Python's ``float()`` accepts (``1e9`` and ``1.0e+9`` both
work).
"""

from __future__ import annotations

import dataclasses
import typing
from dataclasses import dataclass, field

import yaml

from .agents import ALGORITHMS, AgentSettings
from .latency import Scheme
from .model import PhyParams, RenderingParams


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class TopologyConfig:
    n_mecs: int = 8
    n_users: int = 8
    arena_side: float = 100.0  # m
    mec_compute_min: float = 4e9  # cycles/s
    mec_compute_max: float = 5e9
    mec_cycles_per_bit: float = 1000.0
    antennas: int = 4
    vr_compute: float = 2e9
    vr_cycles_per_bit: float = 1000.0
    fiber_rate: float = 10e9  # bit/s


@dataclass(frozen=True)
class MobilityConfig:
    n_fov: int = 8
    cols: int = 0  # 0: default shape for n_fov
    rows: int = 0
    tile_side: float = 90.0
    diffusion: float = 3.0


@dataclass(frozen=True)
class PredictorConfig:
    kind: str = "gru"  # gru | last-value
    memory: int = 20
    learning_rate: float = 0.005
    batch_size: int = 64
    hidden: int = 64
    epochs: int = 10
    batches_per_epoch: int = 50
    trace_slots: int = 10_000
    holdout: float = 0.2
    shared: bool = True


@dataclass(frozen=True)
class AgentConfig:
    algorithm: str = "cdqn"
    hidden: tuple[int, ...] = (128, 128)
    gamma: float = 0.9
    dqn_lr: float = 0.05
    actor_lr: float = 0.005
    critic_lr: float = 0.05
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_fraction: float = 0.6
    replay_capacity: int = 10_000
    target_period: int = 100
    batch_size: int = 64
    reward_scale: float = 0.0  # 0: divide rewards by the per-slot maximum
    episodes: int = 300
    slots: int = 200

    def settings(self) -> AgentSettings:
        return AgentSettings(
            hidden=tuple(self.hidden), gamma=self.gamma, dqn_lr=self.dqn_lr,
            actor_lr=self.actor_lr, critic_lr=self.critic_lr,
            epsilon_start=self.epsilon_start, epsilon_end=self.epsilon_end,
            epsilon_fraction=self.epsilon_fraction, replay_capacity=self.replay_capacity,
            target_period=self.target_period, batch_size=self.batch_size,
            reward_scale=self.reward_scale or None)


@dataclass(frozen=True)
class HarnessConfig:
    record_wall_time: bool = False  # wall time breaks byte-identical reruns
    episode_log: str = "last"  # none | last | all
    final_window: int = 50  # episodes averaged for "final" reward
    eval_episodes: int = 0  # greedy evaluation episodes after training


@dataclass(frozen=True)
class ExperimentConfig:
    topology: TopologyConfig = field(default_factory=TopologyConfig)
    phy: PhyParams = field(default_factory=PhyParams)
    rendering: RenderingParams = field(default_factory=RenderingParams)
    mobility: MobilityConfig = field(default_factory=MobilityConfig)
    predictor: PredictorConfig = field(default_factory=PredictorConfig)
    agent: AgentConfig = field(default_factory=AgentConfig)
    harness: HarnessConfig = field(default_factory=HarnessConfig)
    scheme: str = Scheme.MEC_MIGRATION.value
    prediction: bool = True
    seed: int = 0

    def __post_init__(self):
        validate(self)


def validate(cfg: ExperimentConfig) -> None:
    try:
        Scheme(cfg.scheme)
    except ValueError:
        raise ConfigError(f"scheme must be one of {[s.value for s in Scheme]}, "
                          f"got {cfg.scheme!r}") from None
    if cfg.agent.algorithm not in ALGORITHMS:
        raise ConfigError(f"agent.algorithm must be one of {list(ALGORITHMS)}")
    if cfg.predictor.kind not in ("gru", "last-value"):
        raise ConfigError("predictor.kind must be 'gru' or 'last-value'")
    if cfg.harness.episode_log not in ("none", "last", "all"):
        raise ConfigError("harness.episode_log must be none, last or all")
    if cfg.seed < 0:
        raise ConfigError("seed must be non-negative")
    t, m, a, p = cfg.topology, cfg.mobility, cfg.agent, cfg.predictor
    if t.n_mecs < 1 or t.n_users < 1:
        raise ConfigError("need at least one MEC and one user")
    if not 0 < t.mec_compute_min <= t.mec_compute_max:
        raise ConfigError("need 0 < mec_compute_min <= mec_compute_max")
    if (m.cols or m.rows) and m.cols * m.rows != m.n_fov:
        raise ConfigError(f"mobility grid {m.cols}x{m.rows} does not hold {m.n_fov} FoVs")
    if m.n_fov < 1 or m.diffusion < 0:
        raise ConfigError("need n_fov >= 1 and diffusion >= 0")
    if a.episodes < 1 or a.slots < 1:
        raise ConfigError("agent.episodes and agent.slots must be >= 1")
    if a.batch_size > a.replay_capacity:
        raise ConfigError("agent.batch_size exceeds agent.replay_capacity")
    if not 0.0 <= a.gamma <= 1.0:
        raise ConfigError("agent.gamma must lie in [0, 1]")
    if p.memory < 1 or p.trace_slots <= p.memory + 1:
        raise ConfigError("predictor.trace_slots must exceed predictor.memory + 1")


# ------------------------------------------------------------------ parsing

def _coerce(value, hint, where: str):
    origin = typing.get_origin(hint)
    if origin is typing.Union:
        args = [h for h in typing.get_args(hint) if h is not type(None)]
        if value is None:
            return None
        return _coerce(value, args[0], where)
    if hint is bool:
        if isinstance(value, bool):
            return value
        if isinstance(value, str) and value.lower() in ("true", "false", "yes", "no", "1", "0"):
            return value.lower() in ("true", "yes", "1")
        raise ConfigError(f"{where}: expected a boolean, got {value!r}")
    if hint is int:
        if isinstance(value, bool):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        try:
            f = float(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{where}: expected an integer, got {value!r}") from None
        if f != int(f):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return int(f)
    if hint is float:
        if isinstance(value, bool):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        try:
            return float(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{where}: expected a number, got {value!r}") from None
    if hint is str:
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string, got {value!r}")
        return value
    if origin is tuple:
        if isinstance(value, str):
            value = [v for v in value.replace(",", " ").split() if v]
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{where}: expected a list, got {value!r}")
        inner = typing.get_args(hint)[0]
        return tuple(_coerce(v, inner, f"{where}[{i}]") for i, v in enumerate(value))
    if dataclasses.is_dataclass(hint):
        return _build(hint, value, where)
    raise ConfigError(f"{where}: unsupported field type {hint}")


def _build(cls, data, where: str):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{where or 'config'}: expected a mapping")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        prefix = f"{where}." if where else ""
        raise ConfigError(f"unknown key(s): {', '.join(prefix + str(u) for u in unknown)}")
    kwargs = {}
    for name, value in data.items():
        path = f"{where}.{name}" if where else name
        kwargs[name] = _coerce(value, hints[name], path)
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"{where or 'config'}: {exc}") from None


def from_dict(data: dict) -> ExperimentConfig:
    return _build(ExperimentConfig, data, "")


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    return from_dict(data or {})


def to_dict(cfg) -> dict:
    out = {}
    for f in dataclasses.fields(cfg):
        v = getattr(cfg, f.name)
        if dataclasses.is_dataclass(v):
            out[f.name] = to_dict(v)
        elif isinstance(v, tuple):
            out[f.name] = list(v)
        else:
            out[f.name] = v
    return out


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(to_dict(cfg), sort_keys=False, default_flow_style=False)


def override(cfg: ExperimentConfig, path: str, value) -> ExperimentConfig:
    """Return a copy with the dotted ``path`` replaced, re-validated strictly."""
    data = to_dict(cfg)
    keys = path.split(".")
    node = data
    for key in keys[:-1]:
        if key not in node or not isinstance(node[key], dict):
            raise ConfigError(f"unknown key: {path}")
        node = node[key]
    if keys[-1] not in node:
        raise ConfigError(f"unknown key: {path}")
    node[keys[-1]] = value
    return from_dict(data)
