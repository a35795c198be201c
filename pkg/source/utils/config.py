"""Run configuration: flat INI sections mapped onto dataclasses.

Every key of every section has a default; a config file only lists what it
changes. Unknown sections or keys are rejected. Values are coerced from the
dataclass field types; tuples are written comma-separated and optional
values accept `none`.
"""

import configparser
import math
import typing
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Dict, Iterable, Optional

from core.errors import ConfigError
from pipeline.config import StageConfig, coarse_defaults, pixelwise_defaults, viewwise_defaults
from priors.schedule import NoiseSchedule
from scenegen.cameras import CameraRig
from scenegen.scene import SceneSpec

STAGES = ("coarse", "viewwise", "pixelwise")


@dataclass(frozen=True)
class RunSection:
    seed: int = 0
    name: str = "run"


@dataclass(frozen=True)
class IOSection:
    resolution: int = 512
    out_dir: str = "output/run"
    res_dir: str = "res"
    views: int = 180
    view_mode: str = "random"
    held_out_views: int = 20

    def __post_init__(self):
        if self.resolution < 8:
            raise ConfigError("resolution must be >= 8")
        if self.views < 1 or self.held_out_views < 0:
            raise ConfigError("views must be >= 1 and held_out_views >= 0")
        if self.view_mode not in ("random", "ring"):
            raise ConfigError("view_mode must be random or ring")


@dataclass(frozen=True)
class CameraSection:
    focal_mm: float = 50.0
    radius: float = 1.05
    min_elevation: float = 0.0
    max_elevation: float = 0.5 * math.pi
    ring_elevation: float = 0.0


@dataclass(frozen=True)
class InitSection:
    points: int = 5000
    box_half_extent: float = 0.3

    def __post_init__(self):
        if self.points < 1 or self.box_half_extent <= 0:
            raise ConfigError("init needs points >= 1 and a positive box_half_extent")


@dataclass(frozen=True)
class PriorSection:
    kind: str = "gt"
    blur_sigma: float = 0.0
    jitter_sigma: float = 0.0
    seed: int = 0
    blind_sigma: float = 2.0
    unsharp_amount: float = 1.0
    unsharp_sigma: float = 1.5
    timesteps: int = 1000
    beta_start: float = 1e-4
    beta_end: float = 0.02

    def __post_init__(self):
        if self.kind not in ("gt", "blind"):
            raise ConfigError(f"prior kind must be gt or blind, got {self.kind!r}")
        if self.blur_sigma < 0 or self.jitter_sigma < 0:
            raise ConfigError("prior corruption strengths must be non-negative")
        if self.timesteps < 1 or not 0.0 < self.beta_start <= self.beta_end < 1.0:
            raise ConfigError("prior schedule needs timesteps >= 1 and 0 < beta_start <= beta_end < 1")

    def schedule(self) -> NoiseSchedule:
        return NoiseSchedule(self.timesteps, self.beta_start, self.beta_end)


# keys a section's dataclass has but the INI may not set
_RESERVED = {"scene": {"seed"}, "coarse": {"name"}, "viewwise": {"name"}, "pixelwise": {"name"}}


@dataclass(frozen=True)
class RunConfig:
    run: RunSection = field(default_factory=RunSection)
    io: IOSection = field(default_factory=IOSection)
    camera: CameraSection = field(default_factory=CameraSection)
    scene: SceneSpec = field(default_factory=SceneSpec)
    init: InitSection = field(default_factory=InitSection)
    prior: PriorSection = field(default_factory=PriorSection)
    coarse: StageConfig = field(default_factory=coarse_defaults)
    viewwise: StageConfig = field(default_factory=viewwise_defaults)
    pixelwise: StageConfig = field(default_factory=pixelwise_defaults)

    @property
    def seed(self) -> int:
        return self.run.seed

    def rig(self) -> CameraRig:
        c = self.camera
        return CameraRig(width=self.io.resolution, height=self.io.resolution, focal_mm=c.focal_mm,
                         radius=c.radius, min_elevation=c.min_elevation, max_elevation=c.max_elevation,
                         ring_elevation=c.ring_elevation, ring_views=self.io.views)

    def scene_spec(self) -> SceneSpec:
        return replace(self.scene, seed=self.run.seed)

    def stage(self, name: str) -> StageConfig:
        if name not in STAGES:
            raise ConfigError(f"unknown stage {name!r}")
        return getattr(self, name)

    def with_values(self, section: str, **values) -> "RunConfig":
        return replace(self, **{section: replace(getattr(self, section), **values)})

    def to_ini(self) -> str:
        parser = configparser.ConfigParser()
        for f in fields(self):
            section = getattr(self, f.name)
            parser[f.name] = {}
            for sf in fields(section):
                if sf.name in _RESERVED.get(f.name, ()) or not sf.init:
                    continue
                parser[f.name][sf.name] = _format(getattr(section, sf.name))
        lines = []
        for name in parser.sections():
            lines.append(f"[{name}]")
            lines.extend(f"{k} = {v}" for k, v in parser[name].items())
            lines.append("")
        return "\n".join(lines)


def _format(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, tuple):
        return ", ".join(_format(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value).lower() if isinstance(value, bool) else str(value)


def _coerce(section: str, key: str, raw: str, kind):
    raw = raw.strip()
    origin = typing.get_origin(kind)
    args = typing.get_args(kind)
    try:
        if origin is typing.Union and type(None) in args:
            if raw.lower() in ("none", ""):
                return None
            inner = next(a for a in args if a is not type(None))
            return _coerce(section, key, raw, inner)
        if origin is tuple:
            inner = args[0] if args else float
            return tuple(_coerce(section, key, part, inner) for part in raw.split(","))
        if kind is bool:
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        return raw
    except (ValueError, StopIteration) as exc:
        raise ConfigError(f"[{section}] {key}: cannot read {raw!r} as {getattr(kind, '__name__', kind)}") from exc


def _apply(cfg: RunConfig, section: str, values: Dict[str, str]) -> RunConfig:
    section_names = [f.name for f in fields(RunConfig)]
    if section not in section_names:
        raise ConfigError(f"unknown config section [{section}]")
    current = getattr(cfg, section)
    hints = typing.get_type_hints(type(current))
    allowed = {f.name for f in fields(current) if f.init} - _RESERVED.get(section, set())
    changes = {}
    for key, raw in values.items():
        if key not in allowed:
            raise ConfigError(f"unknown key '{key}' in section [{section}]")
        changes[key] = _coerce(section, key, raw, hints[key])
    try:
        updated = replace(current, **changes)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}] {exc}") from exc
    return replace(cfg, **{section: updated})


def parse_overrides(overrides: Iterable[str]) -> Dict[str, Dict[str, str]]:
    """`section.key=value` strings grouped by section."""
    grouped: Dict[str, Dict[str, str]] = {}
    for item in overrides:
        target, sep, value = item.partition("=")
        section, dot, key = target.strip().partition(".")
        if not sep or not dot or not section or not key:
            raise ConfigError(f"override {item!r} is not section.key=value")
        grouped.setdefault(section, {})[key] = value
    return grouped


def load_config(path: Optional[str] = None, overrides: Iterable[str] = (), seed: Optional[int] = None) -> RunConfig:
    cfg = RunConfig()
    if path is not None:
        parser = configparser.ConfigParser(interpolation=None)
        try:
            with open(path, "r") as handle:
                parser.read_file(handle)
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        for section in parser.sections():
            cfg = _apply(cfg, section, dict(parser[section]))
    for section, values in parse_overrides(overrides).items():
        cfg = _apply(cfg, section, values)
    if seed is not None:
        cfg = cfg.with_values("run", seed=int(seed))
    return cfg


def write_config(cfg: RunConfig, path) -> None:
    Path(path).write_text(cfg.to_ini())


def add_config_arguments(parser) -> None:
    """--config/--set/--seed, shared by main.py and the standalone runners."""
    parser.add_argument("--config", default=None, help="INI run configuration (defaults when omitted).")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="Override one config value; repeatable.")
    parser.add_argument("--seed", type=int, default=None, help="Overrides [run] seed.")


def config_from_args(args) -> RunConfig:
    return load_config(args.config, args.overrides, args.seed)
