"""Run configuration: line-oriented ``section.key = value`` files.

Resolution is layered: built-in defaults, then the file, then ``--set``
overrides. Every problem is reported with the dotted key and its source line.

    # comment
    reward.t_max = 20
    scenario.speed_range = 10, 40
    stochastic.ignore_ego = true
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path

from .behavior import AEBParams, IDMParams
from .env import RewardConfig
from .learner.td3 import TD3Config
from .vehicle_sim import SimConfig


class ConfigError(ValueError):
    """Unknown key, type mismatch or violated invariant in a run config."""


@dataclass(frozen=True)
class MapConfig:
    lane_width: float = 3.5
    approach_length: float = 80.0
    junction_half_width: float = 10.0

    def __post_init__(self):
        if self.lane_width <= 0 or self.approach_length <= 0:
            raise ValueError("lane_width and approach_length must be positive")
        if self.junction_half_width < self.lane_width:
            raise ValueError("junction_half_width must be at least one lane width")


@dataclass(frozen=True)
class ScenarioConfig:
    speed_range: tuple[float, float] = (10.0, 40.0)
    gap_range: tuple[float, float] = (16.0, 50.0)
    step: float = 2.0
    warmup: float = 5.0

    def __post_init__(self):
        for name in ("speed_range", "gap_range"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ValueError(f"{name} needs lower < upper, got {lo}, {hi}")
        if self.step <= 0 or self.warmup < 0:
            raise ValueError("step must be positive and warmup non-negative")


@dataclass(frozen=True)
class StochasticSection:
    n_social_flows: int = 3
    ignore_ego: bool = True
    episodes: int = 1000

    def __post_init__(self):
        if not 1 <= self.n_social_flows <= 3:
            raise ValueError("n_social_flows must be 1..3")
        if self.episodes < 1:
            raise ValueError("episodes must be >= 1")


@dataclass(frozen=True)
class TrainingSection:
    theta: float = 0.5
    gap_n: float = 4.0
    episodes: int = 20_000

    def __post_init__(self):
        if self.theta <= 0 or self.gap_n <= 0 or self.episodes < 1:
            raise ValueError("theta and gap_n must be positive, episodes >= 1")


@dataclass(frozen=True)
class RunSection:
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


SECTIONS = {
    "map": MapConfig,
    "sim": SimConfig,
    "reward": RewardConfig,
    "idm": IDMParams,
    "aeb": AEBParams,
    "scenario": ScenarioConfig,
    "stochastic": StochasticSection,
    "training": TrainingSection,
    "td3": TD3Config,
    "run": RunSection,
}


@dataclass(frozen=True)
class RunConfig:
    map: MapConfig = field(default_factory=MapConfig)
    sim: SimConfig = field(default_factory=SimConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    idm: IDMParams = field(default_factory=IDMParams)
    aeb: AEBParams = field(default_factory=AEBParams)
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    stochastic: StochasticSection = field(default_factory=StochasticSection)
    training: TrainingSection = field(default_factory=TrainingSection)
    td3: TD3Config = field(default_factory=TD3Config)
    run: RunSection = field(default_factory=RunSection)

    def flat(self) -> dict:
        out = {}
        for section in SECTIONS:
            obj = getattr(self, section)
            for f in fields(obj):
                out[f"{section}.{f.name}"] = getattr(obj, f.name)
        return out


def _field_kind(section: str, name: str):
    """Annotation string of a section field (all modules postpone annotations)."""
    for f in fields(SECTIONS[section]):
        if f.name == name:
            return str(f.type)
    return None


def _convert(raw: str, kind: str, key: str, where: str):
    text = raw.strip()
    try:
        if kind == "bool":
            low = text.lower()
            if low in ("true", "yes", "1"):
                return True
            if low in ("false", "no", "0"):
                return False
            raise ValueError
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
        if kind.startswith("tuple"):
            parts = [p for p in text.replace("(", "").replace(")", "").split(",") if p.strip()]
            if len(parts) != 2:
                raise ValueError
            return (float(parts[0]), float(parts[1]))
        if kind == "str":
            return text.strip("\"'")
    except ValueError:
        raise ConfigError(f"{key} ({where}): expected {kind}, got {raw.strip()!r}") from None
    raise ConfigError(f"{key} ({where}): unsupported field type {kind}")


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(_format(float(v)) for v in value)
    return str(value)


def _parse_lines(lines, source: str, into: dict, origins: dict):
    for lineno, line in enumerate(lines, 1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        where = f"{source} line {lineno}" if source != "--set" else "--set"
        if "=" not in text:
            raise ConfigError(f"{where}: expected 'section.key = value', got {line.strip()!r}")
        key, raw = (p.strip() for p in text.split("=", 1))
        section, _, name = key.partition(".")
        if section not in SECTIONS or not name:
            raise ConfigError(f"{key} ({where}): unknown key")
        kind = _field_kind(section, name)
        if kind is None:
            raise ConfigError(f"{key} ({where}): unknown key")
        into.setdefault(section, {})[name] = _convert(raw, kind, key, where)
        origins[key] = where


def resolve(text: str = "", overrides=(), source: str = "<config>") -> RunConfig:
    """Defaults, then the ``text`` of a config file, then ``key=value`` overrides."""
    values: dict = {}
    origins: dict = {}
    _parse_lines(text.splitlines(), source, values, origins)
    _parse_lines(list(overrides), "--set", values, origins)
    base = RunConfig()
    built = {}
    for section, cls in SECTIONS.items():
        current = getattr(base, section)
        changes = values.get(section, {})
        if not changes:
            built[section] = current
            continue
        try:
            built[section] = dataclasses.replace(current, **changes)
        except (ValueError, TypeError) as exc:
            keys = ", ".join(f"{section}.{k} ({origins[f'{section}.{k}']})" for k in changes)
            raise ConfigError(f"invalid {section} settings [{keys}]: {exc}") from None
    return RunConfig(**built)


def parse_config(path=None, overrides=()) -> RunConfig:
    """Load ``path`` (None for pure defaults) and apply ``overrides``."""
    if path is None:
        return resolve("", overrides)
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {p}: {exc}") from None
    return resolve(text, overrides, source=str(p))


def dump_config(cfg: RunConfig) -> str:
    """Resolved config in the same format, every key spelled out."""
    lines = [f"{k} = {_format(v)}" for k, v in cfg.flat().items()]
    return "\n".join(lines) + "\n"


def echo_config(cfg: RunConfig, out_dir, name: str = "resolved_config.txt") -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(dump_config(cfg))
    return path
