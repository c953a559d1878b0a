# -*- coding: utf-8 -*-
# -*- mode: python -*-
"""
Seeded procedural low-poly scenes and their content descriptions.

A scene has a background (sky or mountain ridgelines), a floor texture,
static vegetation (trees, bushes, grass) and a few moving geometric
primitives. Objects stand on the floor plane y = 0 and are placed inside a
square interior of the arena centered on the origin.
"""
import enum
import json
import logging
import math
from dataclasses import asdict, dataclass
from functools import lru_cache
from importlib import resources
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np

from .config import ConfigError, SceneConfig

log = logging.getLogger("camsynth.scene")

MAX_PLACEMENT_ATTEMPTS = 100
VIRTUAL_TOKEN = "<VIRTUAL>"
VIRTUAL_PREFIX = f"In this low-poly 3D {VIRTUAL_TOKEN} scene,"

Vec3 = Tuple[float, float, float]


class Background(str, enum.Enum):
    SKY = "sky"
    FAR_MOUNTAINS = "far_mountains"
    CLOSER_MOUNTAINS = "closer_mountains"
    BOTH_MOUNTAINS = "both_mountains"


class Floor(str, enum.Enum):
    BRICK_STONE = "brick_stone"
    BLACK_SAND = "black_sand"
    GREEN_GRASS = "green_grass"
    BROWN_GROUND = "brown_ground"
    YELLOW_GRASS = "yellow_grass"
    LIGHT_GREEN_GRASS = "light_green_grass"

    @property
    def phrase(self) -> str:
        return FLOOR_PHRASES[self]


FLOOR_PHRASES = {
    Floor.BRICK_STONE: "brick and stone floor",
    Floor.BLACK_SAND: "black sand ground",
    Floor.GREEN_GRASS: "green grassland",
    Floor.BROWN_GROUND: "brown ground",
    Floor.YELLOW_GRASS: "yellow grassland",
    Floor.LIGHT_GREEN_GRASS: "light green grassland",
}

STATIC_KINDS = ("tree", "bush", "grass")
MOVING_KINDS = ("sphere", "cube", "polygon", "cylinder")

# footprint radius per unit scale
_FOOTPRINT = {"tree": 0.45, "bush": 0.5, "grass": 0.3}
_MOVING_RADIUS = 0.5

_PALETTE = (
    (0.85, 0.20, 0.20),
    (0.20, 0.45, 0.85),
    (0.95, 0.75, 0.15),
    (0.60, 0.25, 0.75),
    (0.95, 0.50, 0.15),
    (0.90, 0.90, 0.90),
)


class PlacementFailure(RuntimeError):
    """Rejection sampling could not place an object without overlap"""


@dataclass(frozen=True)
class StaticObject:
    kind: str
    position: Vec3
    scale: float
    yaw: float = 0.0

    @property
    def radius(self) -> float:
        return _FOOTPRINT[self.kind] * self.scale


@dataclass(frozen=True)
class MovingObject:
    """A primitive moving on the floor.

    Linear motion travels at ``velocity`` (m/s) and reflects elastically off
    the interior bounds. Circular motion runs around ``center`` at
    ``angular_speed`` (rad/s) starting from angle ``phase``.
    """

    kind: str
    start: Vec3
    scale: float
    motion: str
    color: Vec3
    velocity: Vec3 = (0.0, 0.0, 0.0)
    center: Vec3 = (0.0, 0.0, 0.0)
    path_radius: float = 0.0
    angular_speed: float = 0.0
    phase: float = 0.0

    @property
    def radius(self) -> float:
        return _MOVING_RADIUS * self.scale


@dataclass(frozen=True)
class SceneSpec:
    background: Background
    floor: Floor
    static_objects: Tuple[StaticObject, ...]
    moving_objects: Tuple[MovingObject, ...]
    seed: int
    bounds: float = 15.0

    def object_ids(self) -> Tuple[str, ...]:
        return tuple(f"static_{i}" for i in range(len(self.static_objects))) + tuple(
            f"moving_{i}" for i in range(len(self.moving_objects))
        )

    def find(self, object_id: str):
        """Returns the object named like 'moving_0' or 'static_3', or None"""
        prefix, _, index = object_id.partition("_")
        pools = {"static": self.static_objects, "moving": self.moving_objects}
        pool = pools.get(prefix)
        if pool is None or not index.isdigit() or int(index) >= len(pool):
            return None
        return pool[int(index)]


def _fold(x: float, lo: float, hi: float) -> float:
    """Reflects x into [lo, hi] as a bouncing point would travel"""
    span = hi - lo
    if span <= 0:
        return (lo + hi) / 2.0
    y = math.fmod(x - lo, 2.0 * span)
    if y < 0:
        y += 2.0 * span
    if y > span:
        y = 2.0 * span - y
    return lo + y


def object_position(
    obj: MovingObject, frame_index: int, fps: float, bounds: float
) -> np.ndarray:
    """World position of a moving object's center at a frame"""
    t = frame_index / fps
    if obj.motion == "circular":
        a = obj.phase + obj.angular_speed * t
        cx, cy, cz = obj.center
        return np.array(
            [cx + obj.path_radius * math.sin(a), cy, cz + obj.path_radius * math.cos(a)]
        )
    lim = bounds - obj.radius
    x0, y0, z0 = obj.start
    vx, _, vz = obj.velocity
    return np.array([_fold(x0 + vx * t, -lim, lim), y0, _fold(z0 + vz * t, -lim, lim)])


def object_center(
    scene: SceneSpec, object_id: str, frame_index: int = 0, fps: float = 8.0
) -> np.ndarray:
    """World-space point a camera aims at when it focuses on an object"""
    obj = scene.find(object_id)
    if obj is None:
        raise KeyError(object_id)
    if isinstance(obj, MovingObject):
        return object_position(obj, frame_index, fps, scene.bounds)
    x, _, z = obj.position
    height = {"tree": 1.6, "bush": 0.5, "grass": 0.2}[obj.kind] * obj.scale
    return np.array([x, height / 2.0, z])


def focus_object(spec: SceneSpec) -> Optional[str]:
    """Id of the object a camera instruction names, or None"""
    if spec.moving_objects:
        return "moving_0"
    return None


def sample_scene(seed: int, config: Optional[SceneConfig] = None) -> SceneSpec:
    """Samples a scene; a pure function of (seed, config)"""
    cfg = config or SceneConfig()
    cfg.validate()
    rng = np.random.default_rng(seed)
    bounds = cfg.interior_size / 2.0

    background = Background(cfg.backgrounds[rng.integers(len(cfg.backgrounds))])
    floor = Floor(cfg.floors[rng.integers(len(cfg.floors))])
    n_static = int(rng.integers(cfg.min_static, cfg.max_static + 1))
    n_moving = int(rng.integers(cfg.min_moving, cfg.max_moving + 1))

    placed = []

    def place(radius: float, margin: float):
        lim = bounds - margin
        if lim < 0:
            raise PlacementFailure("object does not fit inside the arena interior")
        for _ in range(MAX_PLACEMENT_ATTEMPTS):
            x, z = rng.uniform(-lim, lim, size=2)
            if all(
                math.hypot(x - px, z - pz) >= radius + pr + cfg.min_separation
                for px, pz, pr in placed
            ):
                placed.append((x, z, radius))
                return float(x), float(z)
        raise PlacementFailure(
            f"could not place object after {MAX_PLACEMENT_ATTEMPTS} attempts"
        )

    moving = []
    for _ in range(n_moving):
        kind = MOVING_KINDS[rng.integers(len(MOVING_KINDS))]
        scale = float(rng.uniform(*cfg.moving_scale))
        radius = _MOVING_RADIUS * scale
        color = _PALETTE[rng.integers(len(_PALETTE))]
        speed = float(rng.uniform(*cfg.moving_speed))
        if rng.random() < 0.5:
            heading = float(rng.uniform(0.0, 2.0 * math.pi))
            x, z = place(radius, radius)
            moving.append(
                MovingObject(
                    kind=kind,
                    start=(x, radius, z),
                    scale=scale,
                    motion="linear",
                    color=color,
                    velocity=(
                        speed * math.cos(heading),
                        0.0,
                        speed * math.sin(heading),
                    ),
                )
            )
        else:
            path_radius = float(rng.uniform(*cfg.circular_radius))
            phase = float(rng.uniform(0.0, 2.0 * math.pi))
            direction = 1.0 if rng.random() < 0.5 else -1.0
            cx, cz = place(radius + path_radius, radius + path_radius)
            start = (
                cx + path_radius * math.sin(phase),
                radius,
                cz + path_radius * math.cos(phase),
            )
            moving.append(
                MovingObject(
                    kind=kind,
                    start=start,
                    scale=scale,
                    motion="circular",
                    color=color,
                    center=(cx, radius, cz),
                    path_radius=path_radius,
                    angular_speed=direction * speed / path_radius,
                    phase=phase,
                )
            )

    static = []
    for _ in range(n_static):
        kind = STATIC_KINDS[rng.integers(len(STATIC_KINDS))]
        scale = float(rng.uniform(*cfg.static_scale))
        radius = _FOOTPRINT[kind] * scale
        x, z = place(radius, radius)
        yaw = float(rng.uniform(0.0, 2.0 * math.pi))
        static.append(
            StaticObject(kind=kind, position=(x, 0.0, z), scale=scale, yaw=yaw)
        )

    spec = SceneSpec(
        background=background,
        floor=floor,
        static_objects=tuple(static),
        moving_objects=tuple(moving),
        seed=int(seed),
        bounds=bounds,
    )
    log.debug(
        "scene %d: %s, %s, %d static, %d moving",
        seed,
        background.value,
        floor.value,
        n_static,
        n_moving,
    )
    return spec


def _an(word: str) -> str:
    return ("an " if word[0] in "aeiou" else "a ") + word


def _enumerate(words: Sequence[str]) -> str:
    if len(words) == 1:
        return words[0]
    return ", ".join(words[:-1]) + " and " + words[-1]


def content_text(spec: SceneSpec, virtual_indicator: bool = True) -> str:
    """The content description c, without the 'Content:' label"""
    ground = spec.floor.phrase
    prefix = VIRTUAL_PREFIX + " " if virtual_indicator else ""
    if not spec.moving_objects:
        body = f"there are small plants and geometries on the {ground}."
    else:
        names = [_an(f"moving {o.kind}") for o in spec.moving_objects]
        verb = "is" if len(names) == 1 else "are"
        body = (
            f"there {verb} {_enumerate(names)}. "
            f"There are also small plants and geometries on the {ground}."
        )
    if not prefix:
        body = body[0].upper() + body[1:]
    return prefix + body


def scene_description(spec: SceneSpec, virtual_indicator: bool = True) -> str:
    return "Content: " + content_text(spec, virtual_indicator)


def object_phrase(spec: SceneSpec, object_id: str) -> str:
    """Noun phrase for an object, e.g. 'a moving sphere' or 'a static tree'"""
    obj = spec.find(object_id)
    if obj is None:
        raise KeyError(object_id)
    state = "moving" if isinstance(obj, MovingObject) else "static"
    return _an(f"{state} {obj.kind}")


@lru_cache(maxsize=1)
def _schema() -> Dict[str, Any]:
    text = resources.files("camsynth").joinpath("schema/scene.schema.json").read_text()
    return json.loads(text)


def _check(value, schema: Dict[str, Any], defs: Dict[str, Any], path: str):
    if "$ref" in schema:
        schema = defs[schema["$ref"].rsplit("/", 1)[-1]]
    kind = schema.get("type")
    if kind == "object":
        if not isinstance(value, dict):
            raise ValueError(f"{path}: expected an object")
        props = schema.get("properties", {})
        for key in schema.get("required", ()):
            if key not in value:
                raise ValueError(f"{path}: missing field '{key}'")
        for key, item in value.items():
            if key not in props:
                raise ValueError(f"{path}: unexpected field '{key}'")
            _check(item, props[key], defs, f"{path}.{key}")
    elif kind == "array":
        if not isinstance(value, list):
            raise ValueError(f"{path}: expected an array")
        lo, hi = schema.get("minItems"), schema.get("maxItems")
        if (lo is not None and len(value) < lo) or (hi is not None and len(value) > hi):
            raise ValueError(f"{path}: wrong number of items")
        for i, item in enumerate(value):
            _check(item, schema["items"], defs, f"{path}[{i}]")
    elif kind == "number":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValueError(f"{path}: expected a number")
    elif kind == "integer":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ValueError(f"{path}: expected an integer")
    elif kind == "string":
        if not isinstance(value, str):
            raise ValueError(f"{path}: expected a string")
    if "enum" in schema and value not in schema["enum"]:
        raise ValueError(f"{path}: {value!r} is not one of {schema['enum']}")


def validate_scene_dict(data: Dict[str, Any]):
    """Checks a decoded scene document against the packaged schema"""
    schema = _schema()
    _check(data, schema, schema.get("$defs", {}), "scene")


def scene_to_dict(spec: SceneSpec) -> Dict[str, Any]:
    data = asdict(spec)
    data["background"] = spec.background.value
    data["floor"] = spec.floor.value
    return json.loads(json.dumps(data))


def scene_to_json(spec: SceneSpec) -> str:
    return json.dumps(scene_to_dict(spec), indent=2, sort_keys=True)


def scene_from_dict(data: Dict[str, Any]) -> SceneSpec:
    validate_scene_dict(data)
    return SceneSpec(
        background=Background(data["background"]),
        floor=Floor(data["floor"]),
        static_objects=tuple(
            StaticObject(
                kind=o["kind"],
                position=tuple(o["position"]),
                scale=o["scale"],
                yaw=o.get("yaw", 0.0),
            )
            for o in data["static_objects"]
        ),
        moving_objects=tuple(
            MovingObject(
                **{
                    k: tuple(v) if isinstance(v, list) else v
                    for k, v in o.items()
                }
            )
            for o in data["moving_objects"]
        ),
        seed=data["seed"],
        bounds=data.get("bounds", 15.0),
    )


def scene_from_json(text: str) -> SceneSpec:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise ValueError(f"scene document is not valid JSON: {err}") from err
    return scene_from_dict(data)


def check_scene(spec: SceneSpec, config: Optional[SceneConfig] = None):
    """Raises ConfigError if a scene violates its invariants"""
    cfg = config or SceneConfig()
    if not cfg.min_static <= len(spec.static_objects) <= cfg.max_static:
        raise ConfigError("static object count outside the configured range")
    if not cfg.min_moving <= len(spec.moving_objects) <= cfg.max_moving:
        raise ConfigError("moving object count outside the configured range")
    for obj in spec.static_objects:
        x, y, z = obj.position
        if max(abs(x), abs(z)) > spec.bounds or y < 0:
            raise ConfigError(f"static {obj.kind} lies outside the arena")
    for obj in spec.moving_objects:
        x, y, z = obj.start
        if max(abs(x), abs(z)) > spec.bounds or y - obj.radius < -1e-12:
            raise ConfigError(f"moving {obj.kind} lies outside the arena")


# Variables:
# End:
