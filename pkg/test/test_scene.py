# -*- coding: utf-8 -*-
# -*- mode: python -*-
import json
from collections import Counter
from dataclasses import MISSING, fields
from pathlib import Path

import numpy as np
import pytest

from camsynth import scene as s
from camsynth.config import BACKGROUNDS, ConfigError, SceneConfig


def sphere_scene(n_moving=1):
    moving = tuple(
        s.MovingObject(
            kind="sphere",
            start=(0.0, 0.5, 0.0),
            scale=1.0,
            motion="linear",
            color=(1.0, 0.0, 0.0),
            velocity=(1.0, 0.0, 0.0),
        )
        for _ in range(n_moving)
    )
    return s.SceneSpec(
        background=s.Background.SKY,
        floor=s.Floor.BLACK_SAND,
        static_objects=(s.StaticObject("tree", (3.0, 0.0, 3.0), 1.0),),
        moving_objects=moving,
        seed=0,
    )


def test_sample_scene_is_deterministic():
    assert s.sample_scene(7) == s.sample_scene(7)
    assert s.scene_to_json(s.sample_scene(7)) == s.scene_to_json(s.sample_scene(7))


def test_sample_scene_fields():
    spec = s.sample_scene(7)
    assert spec.background.value in BACKGROUNDS
    assert 6 <= len(spec.static_objects) <= 14
    assert len(spec.moving_objects) == 1
    s.check_scene(spec)


def test_sample_scene_without_moving_objects():
    cfg = SceneConfig(min_moving=0, max_moving=0)
    spec = s.sample_scene(3, cfg)
    assert spec.moving_objects == ()
    assert s.focus_object(spec) is None
    assert s.content_text(spec).endswith("there are small plants and geometries on the "
                                         + spec.floor.phrase + ".")


def test_objects_do_not_overlap():
    for seed in range(10):
        spec = s.sample_scene(seed)
        objs = [(o.position[0], o.position[2], o.radius) for o in spec.static_objects]
        for i, (x1, z1, r1) in enumerate(objs):
            for x2, z2, r2 in objs[i + 1:]:
                assert np.hypot(x1 - x2, z1 - z2) >= r1 + r2


@pytest.mark.slow
def test_background_frequencies():
    n = 10000
    counts = Counter(s.sample_scene(seed).background.value for seed in range(n))
    assert set(counts) == set(BACKGROUNDS)
    for name in BACKGROUNDS:
        assert 0.22 <= counts[name] / n <= 0.28


def test_inverted_range_is_rejected():
    with pytest.raises(ConfigError):
        s.sample_scene(1, SceneConfig(min_static=5, max_static=2))
    with pytest.raises(ConfigError):
        s.sample_scene(1, SceneConfig(backgrounds=("ocean",)))


def test_impossible_placement():
    cfg = SceneConfig(interior_size=2.0, min_static=30, max_static=30)
    with pytest.raises(s.PlacementFailure):
        s.sample_scene(0, cfg)


def test_scene_description_single_object():
    text = s.scene_description(sphere_scene())
    assert text == (
        "Content: In this low-poly 3D <VIRTUAL> scene, there is a moving sphere. "
        "There are also small plants and geometries on the black sand ground."
    )


def test_scene_description_without_indicator():
    text = s.content_text(sphere_scene(2), virtual_indicator=False)
    assert text.startswith("There are a moving sphere and a moving sphere.")
    assert s.VIRTUAL_TOKEN not in text


def test_object_lookup():
    spec = sphere_scene()
    assert spec.object_ids() == ("static_0", "moving_0")
    assert s.object_phrase(spec, "static_0") == "a static tree"
    assert s.object_phrase(spec, "moving_0") == "a moving sphere"
    assert spec.find("moving_3") is None
    with pytest.raises(KeyError):
        s.object_phrase(spec, "cloud_0")


def test_object_center_height():
    spec = sphere_scene()
    assert np.allclose(s.object_center(spec, "static_0"), [3.0, 0.8, 3.0])
    center = s.object_center(spec, "moving_0", frame_index=8, fps=8.0)
    assert np.allclose(center, [1.0, 0.5, 0.0])


def test_linear_motion_reflects_off_bounds():
    obj = sphere_scene().moving_objects[0]
    lim = 15.0 - obj.radius
    pos = s.object_position(obj, 8 * 20, 8.0, 15.0)
    # 20 m of travel from x = 0 goes out to the wall and comes back
    assert pos[0] == pytest.approx(2 * lim - 20.0)


def test_circular_motion_keeps_radius():
    for seed in range(30):
        spec = s.sample_scene(seed)
        obj = spec.moving_objects[0]
        if obj.motion != "circular":
            continue
        for k in (0, 5, 17):
            p = s.object_position(obj, k, 8.0, spec.bounds)
            dist = np.hypot(p[0] - obj.center[0], p[2] - obj.center[2])
            assert dist == pytest.approx(obj.path_radius)
        break


# keywords and types the hand-written checker in camsynth.scene understands
CHECKED_KEYWORDS = {
    "$schema", "title", "$defs", "$ref", "type", "required", "properties",
    "additionalProperties", "items", "minItems", "maxItems", "enum",
}
CHECKED_TYPES = {"object", "array", "number", "integer", "string"}


def schema_nodes(node):
    yield node
    for key in ("properties", "$defs"):
        for child in node.get(key, {}).values():
            yield from schema_nodes(child)
    if "items" in node:
        yield from schema_nodes(node["items"])


def load_schema_file():
    path = Path(s.__file__).parent / "schema" / "scene.schema.json"
    return json.loads(path.read_text())


def test_schema_file_uses_only_checked_keywords():
    schema = load_schema_file()
    for node in schema_nodes(schema):
        assert set(node) <= CHECKED_KEYWORDS
        if "type" in node:
            assert node["type"] in CHECKED_TYPES
        if node.get("type") == "object":
            # the checker always rejects unknown fields
            assert node["additionalProperties"] is False


def test_schema_file_matches_scene_types():
    schema = load_schema_file()
    defs = schema["$defs"]
    for node, cls in (
        (schema, s.SceneSpec),
        (defs["static_object"], s.StaticObject),
        (defs["moving_object"], s.MovingObject),
    ):
        names = {f.name for f in fields(cls)}
        assert set(node["properties"]) == names
        assert set(node["required"]) <= names
        without_default = {f.name for f in fields(cls) if f.default is MISSING}
        assert without_default <= set(node["required"])
    props = schema["properties"]
    assert props["background"]["enum"] == [b.value for b in s.Background]
    assert props["floor"]["enum"] == [f.value for f in s.Floor]
    assert tuple(defs["static_object"]["properties"]["kind"]["enum"]) == s.STATIC_KINDS
    assert tuple(defs["moving_object"]["properties"]["kind"]["enum"]) == s.MOVING_KINDS


def test_checker_enforces_every_schema_constraint():
    schema = load_schema_file()
    good = s.scene_to_dict(sphere_scene())
    s.validate_scene_dict(good)
    for key in schema["required"]:
        bad = {k: v for k, v in good.items() if k != key}
        with pytest.raises(ValueError, match=key):
            s.validate_scene_dict(bad)
    for key, node in schema["properties"].items():
        if "enum" in node:
            with pytest.raises(ValueError):
                s.validate_scene_dict(dict(good, **{key: "not-" + node["enum"][0]}))
    with pytest.raises(ValueError, match="unexpected"):
        s.validate_scene_dict(dict(good, extra=1))
    with pytest.raises(ValueError, match="integer"):
        s.validate_scene_dict(dict(good, seed=1.5))
    moving = dict(good["moving_objects"][0], color=[1.0, 0.0])
    with pytest.raises(ValueError, match="number of items"):
        s.validate_scene_dict(dict(good, moving_objects=[moving]))


def test_json_roundtrip():
    spec = s.sample_scene(21)
    text = s.scene_to_json(spec)
    assert s.scene_from_json(text) == spec


def test_json_rejects_bad_documents():
    data = s.scene_to_dict(s.sample_scene(21))
    data["floor"] = "lava"
    with pytest.raises(ValueError):
        s.scene_from_dict(data)
    del data["floor"]
    with pytest.raises(ValueError):
        s.scene_from_json(json.dumps(data))
    with pytest.raises(ValueError):
        s.scene_from_json("{not json")


def test_check_scene_out_of_arena():
    spec = sphere_scene()
    bad = s.SceneSpec(
        background=spec.background,
        floor=spec.floor,
        static_objects=(s.StaticObject("bush", (40.0, 0.0, 0.0), 1.0),),
        moving_objects=spec.moving_objects,
        seed=0,
    )
    with pytest.raises(ConfigError):
        s.check_scene(bad, SceneConfig(min_static=1))
