# -*- coding: utf-8 -*-
# -*- mode: python -*-
"""
Structured run configuration.

Every section is a dataclass with documented defaults. Configurations are
loaded from JSON, adjusted with dotted ``key=value`` overrides (``-k`` on the
command line), validated, and written back out as ``config.json`` next to the
outputs of each run.
"""
import dataclasses
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple, Union, get_type_hints

log = logging.getLogger("camsynth.config")

BACKGROUNDS = ("sky", "far_mountains", "closer_mountains", "both_mountains")
FLOORS = (
    "brick_stone",
    "black_sand",
    "green_grass",
    "brown_ground",
    "yellow_grass",
    "light_green_grass",
)
# push_in/pull_out x truck_left/truck_right
COMPOSED_MOTIONS = (
    "push_in+truck_left",
    "push_in+truck_right",
    "pull_out+truck_left",
    "pull_out+truck_right",
)


class ConfigError(ValueError):
    """A configuration value is missing, unknown, or out of range"""


def _check_range(name: str, lo, hi):
    if lo > hi:
        raise ConfigError(f"{name}: minimum {lo} exceeds maximum {hi}")


@dataclass
class SceneConfig:
    arena_size: float = 40.0
    interior_size: float = 30.0
    min_static: int = 6
    max_static: int = 14
    min_moving: int = 1
    max_moving: int = 1
    static_scale: Tuple[float, float] = (0.6, 1.6)
    moving_scale: Tuple[float, float] = (0.6, 1.2)
    moving_speed: Tuple[float, float] = (0.5, 1.5)
    circular_radius: Tuple[float, float] = (1.5, 4.0)
    min_separation: float = 0.5
    backgrounds: Tuple[str, ...] = BACKGROUNDS
    floors: Tuple[str, ...] = FLOORS

    def validate(self):
        if not 0 < self.interior_size <= self.arena_size:
            raise ConfigError("scene.interior_size must be in (0, arena_size]")
        if self.min_static < 0 or self.min_moving < 0:
            raise ConfigError("scene object counts must be non-negative")
        _check_range("scene.static", self.min_static, self.max_static)
        _check_range("scene.moving", self.min_moving, self.max_moving)
        for name in ("static_scale", "moving_scale", "moving_speed", "circular_radius"):
            lo, hi = getattr(self, name)
            _check_range(f"scene.{name}", lo, hi)
            if lo <= 0:
                raise ConfigError(f"scene.{name} must be positive")
        if self.min_separation < 0:
            raise ConfigError("scene.min_separation must be non-negative")
        if not self.backgrounds or not set(self.backgrounds) <= set(BACKGROUNDS):
            raise ConfigError(
                f"scene.backgrounds must be a non-empty subset of {BACKGROUNDS}"
            )
        if not self.floors or not set(self.floors) <= set(FLOORS):
            raise ConfigError(f"scene.floors must be a non-empty subset of {FLOORS}")


@dataclass
class RenderConfig:
    width: int = 128
    height: int = 96
    frames: int = 49
    fps: float = 8.0
    hfov_deg: float = 60.0
    with_depth: bool = False
    workers: int = 1

    @property
    def focal_px(self) -> float:
        return (self.width / 2.0) / math.tan(math.radians(self.hfov_deg) / 2.0)

    def validate(self):
        if self.width <= 0 or self.height <= 0:
            raise ConfigError("render.width and render.height must be positive")
        if self.frames < 1:
            raise ConfigError("render.frames must be at least 1")
        if self.fps <= 0:
            raise ConfigError("render.fps must be positive")
        if not 0 < self.hfov_deg < 180:
            raise ConfigError("render.hfov_deg must be in (0, 180)")
        if self.workers < 1:
            raise ConfigError("render.workers must be at least 1")


@dataclass
class MotionConfig:
    """Parameters of the camera motion families. Angles are in degrees."""

    speed: float = 1.0
    angular_speed: float = 12.0
    camera_height: Tuple[float, float] = (1.2, 2.5)
    camera_distance: Tuple[float, float] = (6.0, 10.0)
    orbit_radius: float = 6.0
    orbit_height: float = 2.0
    orbit_degrees: float = 90.0
    dolly_start: float = 4.0
    dolly_end: float = 2.0
    shake_rot: float = 1.5
    shake_trans: float = 0.05
    shake_smoothness: float = 0.8
    explosive_amplitude: float = 4.0
    explosive_omega: float = 1.2
    explosive_decay: float = 0.15
    explosive_onset: float = 0.3
    sweep_amplitude: float = 30.0
    n_sweeps: int = 1
    lock_fraction: float = 0.6
    push_ratio: float = 0.7

    def validate(self):
        if self.speed < 0 or self.angular_speed < 0:
            raise ConfigError("motion speeds must be non-negative")
        for name in ("camera_height", "camera_distance"):
            lo, hi = getattr(self, name)
            _check_range(f"motion.{name}", lo, hi)
        if self.camera_distance[0] <= 0:
            raise ConfigError("motion.camera_distance must be positive")
        if self.orbit_radius <= 0:
            raise ConfigError("motion.orbit_radius must be positive")
        if self.dolly_start <= 0 or self.dolly_end <= 0:
            raise ConfigError("motion.dolly distances must be positive")
        if self.shake_rot < 0 or self.shake_trans < 0:
            raise ConfigError("motion.shake amplitudes must be non-negative")
        if not 0 < self.shake_smoothness < 1:
            raise ConfigError("motion.shake_smoothness must be in (0, 1)")
        if not 0 <= self.explosive_onset < 1:
            raise ConfigError("motion.explosive_onset must be in [0, 1)")
        if not 0 < self.lock_fraction < 1:
            raise ConfigError("motion.lock_fraction must be in (0, 1)")
        if self.push_ratio <= 0:
            raise ConfigError("motion.push_ratio must be positive")
        if self.n_sweeps < 1:
            raise ConfigError("motion.n_sweeps must be at least 1")


@dataclass
class DatasetConfig:
    scene: SceneConfig = field(default_factory=SceneConfig)
    render: RenderConfig = field(default_factory=RenderConfig)
    motion: MotionConfig = field(default_factory=MotionConfig)
    motions: Tuple[str, ...] = COMPOSED_MOTIONS
    n_per_motion: int = 10
    base_seed: int = 0
    virtual_indicator: bool = True

    @classmethod
    def full_scale(cls) -> "DatasetConfig":
        """49 frames at 720x480, 500 videos per motion"""
        render = RenderConfig(width=720, height=480, frames=49)
        return cls(render=render, n_per_motion=500)

    def validate(self):
        from .trajectory import parse_motion

        self.scene.validate()
        self.render.validate()
        self.motion.validate()
        if self.n_per_motion < 1:
            raise ConfigError("dataset.n_per_motion must be at least 1")
        if not self.motions:
            raise ConfigError("dataset.motions must not be empty")
        for name in self.motions:
            try:
                parse_motion(name)
            except ValueError as err:
                raise ConfigError(f"dataset.motions: {err}") from err
        if not 0 <= self.base_seed < 2**64:
            raise ConfigError("dataset.base_seed must be a 64-bit unsigned integer")


@dataclass
class TrainConfig:
    paradigm: str = "text"
    lam: float = 0.1
    steps: int = 500
    base_steps: int = 500
    batch_size: int = 8
    lr_base: float = 0.02
    lr_appearance: float = 0.02
    lr_camera: float = 0.02
    optimizer: str = "gd"
    warmup_fraction: float = 0.05
    lr_decay: bool = False
    weight_decay: float = 0.0
    hidden: int = 256
    nonlinearity: str = "tanh"
    rank_appearance: int = 4
    rank_camera: int = 8
    alpha_appearance: float = 4.0
    alpha_camera: float = 8.0
    time_embedding: int = 16
    timesteps: int = 100
    beta_start: float = 1e-4
    beta_end: float = 0.02
    virtual_indicator: bool = True
    seed: int = 0

    def validate(self):
        if self.paradigm not in ("text", "trajectory"):
            raise ConfigError("train.paradigm must be 'text' or 'trajectory'")
        if self.lam < 0:
            raise ConfigError("train.lam must be non-negative")
        for name in ("lr_base", "lr_appearance", "lr_camera"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"train.{name} must be positive")
        if self.steps < 1 or self.base_steps < 0 or self.batch_size < 1:
            raise ConfigError("train.steps and train.batch_size must be positive")
        if self.optimizer not in ("gd", "adamw"):
            raise ConfigError("train.optimizer must be 'gd' or 'adamw'")
        if not 0 <= self.warmup_fraction < 1:
            raise ConfigError("train.warmup_fraction must be in [0, 1)")
        if self.hidden < 1 or self.time_embedding < 2 or self.time_embedding % 2:
            raise ConfigError(
                "train.hidden must be positive and train.time_embedding even"
            )
        if self.nonlinearity not in ("tanh", "linear"):
            raise ConfigError("train.nonlinearity must be 'tanh' or 'linear'")
        if self.rank_appearance < 1 or self.rank_camera < 1:
            raise ConfigError("adapter ranks must be at least 1")
        if self.timesteps < 1:
            raise ConfigError("train.timesteps must be positive")
        if not 0 < self.beta_start <= self.beta_end < 1:
            raise ConfigError("train betas must satisfy 0 < beta_start <= beta_end < 1")


@dataclass
class SampleConfig:
    seed: int = 0
    motion: str = "truck_left"
    content: int = 0
    drop_appearance: bool = True
    virtual_indicator: bool = False

    def validate(self):
        if self.content < 0:
            raise ConfigError("sample.content must be non-negative")


@dataclass
class ToyWorldConfig:
    size: int = 16
    frames: int = 8
    channels: int = 3
    n_contents: int = 4
    n_per_set: int = 40
    # contents stay within ±0.5, so |tint| + amplitude <= 0.5 avoids clipping
    tint: Tuple[float, float, float] = (0.3, -0.3, 0.2)
    checker_amplitude: float = 0.15
    checker_period: int = 1
    seed: int = 0

    def validate(self):
        if self.size < 8 or self.frames < 3:
            raise ConfigError("toyworld.size must be >= 8 and toyworld.frames >= 3")
        if self.channels != 3 or len(self.tint) != 3:
            raise ConfigError("toyworld videos are RGB")
        if self.n_contents < 1 or self.n_per_set < 1:
            raise ConfigError(
                "toyworld.n_contents and toyworld.n_per_set must be positive"
            )
        if self.checker_period < 1:
            raise ConfigError("toyworld.checker_period must be positive")


@dataclass
class RunConfig:
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    sample: SampleConfig = field(default_factory=SampleConfig)
    toyworld: ToyWorldConfig = field(default_factory=ToyWorldConfig)

    def validate(self) -> "RunConfig":
        self.dataset.validate()
        self.train.validate()
        self.sample.validate()
        self.toyworld.validate()
        return self

    def to_dict(self) -> Dict[str, Any]:
        return to_dict(self)


def to_dict(obj) -> Dict[str, Any]:
    """Converts a config dataclass to JSON-ready nested dicts"""
    out = {}
    for f in dataclasses.fields(obj):
        value = getattr(obj, f.name)
        if dataclasses.is_dataclass(value):
            out[f.name] = to_dict(value)
        elif isinstance(value, tuple):
            out[f.name] = list(value)
        else:
            out[f.name] = value
    return out


def _coerce(key: str, hint, value):
    """Converts a JSON value to the type declared for a field"""
    origin = getattr(hint, "__origin__", None)
    if origin is tuple:
        if isinstance(value, str):
            value = [v for v in value.split(",") if v]
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{key}: expected a list, got {value!r}")
        args = hint.__args__
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(_coerce(key, args[0], v) for v in value)
        if len(args) != len(value):
            raise ConfigError(f"{key}: expected {len(args)} values, got {len(value)}")
        return tuple(_coerce(key, a, v) for a, v in zip(args, value))
    if hint is bool:
        if isinstance(value, bool):
            return value
        if isinstance(value, str) and value.lower() in ("true", "false", "1", "0"):
            return value.lower() in ("true", "1")
        raise ConfigError(f"{key}: expected a boolean, got {value!r}")
    if hint in (int, float):
        if isinstance(value, bool):
            raise ConfigError(f"{key}: expected a number, got {value!r}")
        try:
            number = hint(value)
        except (TypeError, ValueError) as err:
            raise ConfigError(
                f"{key}: expected {hint.__name__}, got {value!r}"
            ) from err
        if hint is int and isinstance(value, float) and value != number:
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
        return number
    if hint is str:
        if not isinstance(value, str):
            raise ConfigError(f"{key}: expected a string, got {value!r}")
        return value
    return value


def from_dict(cls, data: Mapping[str, Any], prefix: str = ""):
    """Builds a config dataclass from nested dicts, rejecting unknown keys"""
    if not isinstance(data, Mapping):
        raise ConfigError(f"{prefix or 'config'}: expected an object")
    hints = get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        dotted = prefix + key
        if key not in names:
            raise ConfigError(f"unknown configuration key '{dotted}'")
        hint = hints[key]
        if dataclasses.is_dataclass(hint):
            kwargs[key] = from_dict(hint, value, dotted + ".")
        else:
            kwargs[key] = _coerce(dotted, hint, value)
    return cls(**kwargs)


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(
    data: Dict[str, Any], overrides: Mapping[str, str]
) -> Dict[str, Any]:
    """Sets dotted keys in nested dicts; values are parsed as JSON when possible"""
    for dotted, text in overrides.items():
        node = data
        parts = dotted.split(".")
        for part in parts[:-1]:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigError(f"unknown configuration key '{dotted}'")
            node = child
        node[parts[-1]] = _parse_value(text)
    return data


def load_config(
    path: Union[str, Path, None] = None, overrides: Optional[Mapping[str, str]] = None
) -> RunConfig:
    """Loads a RunConfig from an optional JSON file plus dotted overrides"""
    data: Dict[str, Any] = {}
    if path is not None:
        try:
            with open(path) as fp:
                data = json.load(fp)
        except json.JSONDecodeError as err:
            raise ConfigError(f"{path}: invalid JSON ({err})") from err
        log.debug("loaded configuration from %s", path)
    apply_overrides(data, overrides or {})
    return from_dict(RunConfig, data).validate()


def write_config(cfg: RunConfig, directory: Union[str, Path]) -> Path:
    """Writes the resolved configuration as config.json in directory"""
    path = Path(directory) / "config.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
    return path


def config_reference(cls=RunConfig, prefix: str = "") -> str:
    """Every configuration key with its default value, one per line"""
    lines = []
    instance = cls()
    hints = get_type_hints(cls)
    for f in dataclasses.fields(cls):
        key = prefix + f.name
        if dataclasses.is_dataclass(hints[f.name]):
            lines.append(config_reference(hints[f.name], key + "."))
        else:
            value = getattr(instance, f.name)
            if isinstance(value, tuple):
                value = list(value)
            lines.append(f"{key} = {json.dumps(value)}")
    return "\n".join(lines)


# Variables:
# End:
