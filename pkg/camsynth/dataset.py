# -*- coding: utf-8 -*-
# -*- mode: python -*-
"""
Paired training corpora.

For every scene seed two videos are rendered from the same scene: an
appearance sample (set X_a) whose camera is fixed in place, and a camera
sample (set X_c) that performs the requested motion. Both carry prompts
with the <VIRTUAL> style indicator when it is enabled.

Layout on disk::

    root/manifest.json
    root/X_a/<motion>/<index>/frame_0000.ppm ...
        poses.jsonl prompt.txt meta.json scene.json
    root/X_c/<motion>/<index>/...
    root/neutral/<motion>/<index>/...    unstyled reference clips (toy worlds)
"""
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .config import DatasetConfig, MotionConfig, to_dict
from .geometry import CameraPose, Intrinsics, look_at
from .render import VideoTensor, render_video, write_video
from .scene import (
    VIRTUAL_PREFIX,
    VIRTUAL_TOKEN,
    SceneSpec,
    content_text,
    focus_object,
    object_center,
    sample_scene,
    scene_from_json,
    scene_to_json,
)
from .trajectory import (
    TimedTrajectory,
    camera_text,
    make_motion,
    read_trajectory,
    static_trajectory,
)

log = logging.getLogger("camsynth.dataset")

APPEARANCE_SET = "X_a"
CAMERA_SET = "X_c"
NEUTRAL_SET = "neutral"
SET_NAMES = (APPEARANCE_SET, CAMERA_SET, NEUTRAL_SET)
MANIFEST_NAME = "manifest.json"
MANIFEST_VERSION = 1

_MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


class ParseError(ValueError):
    """A manifest could not be decoded"""


class MissingAsset(FileNotFoundError):
    """A manifest references a file or directory that does not exist"""


def splitmix64(x: int) -> int:
    """One step of the splitmix64 output function"""
    z = (x + GOLDEN_GAMMA) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(base_seed: int, motion_index: int, sample_index: int) -> int:
    """Per-sample scene seed mixed from the base seed and a 64-bit counter"""
    counter = ((motion_index & 0xFFFFFFFF) << 32) | (sample_index & 0xFFFFFFFF)
    return splitmix64((base_seed + counter * GOLDEN_GAMMA) & _MASK64)


def strip_virtual(text: str) -> str:
    """Content text with the style indicator removed"""
    if text.startswith(VIRTUAL_PREFIX):
        rest = text[len(VIRTUAL_PREFIX) :].lstrip()
        return rest[:1].upper() + rest[1:]
    return text


@dataclass(frozen=True)
class PromptPair:
    camera_text: str
    content_text: str
    virtual_indicator: bool

    def __post_init__(self):
        if (VIRTUAL_TOKEN in self.content_text) != self.virtual_indicator:
            raise ValueError("virtual indicator flag does not match the content text")

    @classmethod
    def for_sample(
        cls, scene: SceneSpec, traj: TimedTrajectory, virtual_indicator: bool
    ) -> "PromptPair":
        content = content_text(scene, virtual_indicator)
        return cls(camera_text(traj, scene), content, virtual_indicator)

    def composite(self) -> str:
        if self.camera_text:
            return f"Camera: {self.camera_text} | Content: {self.content_text}"
        return f"Content: {self.content_text}"

    def for_inference(self) -> "PromptPair":
        """The same prompt with the virtual style indicator dropped"""
        return PromptPair(self.camera_text, strip_virtual(self.content_text), False)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "camera": self.camera_text,
            "content": self.content_text,
            "virtual_indicator": self.virtual_indicator,
        }


def composite_prompt(pair: PromptPair) -> str:
    return pair.composite()


@dataclass(frozen=True, eq=False)
class VideoSample:
    set_name: str
    motion: str
    index: int
    seed: int
    scene: SceneSpec
    trajectory: TimedTrajectory
    prompt: PromptPair
    video: Optional[VideoTensor] = None


def render_intrinsics(cfg: DatasetConfig) -> Intrinsics:
    r = cfg.render
    return Intrinsics.centered(r.width, r.height, r.focal_px)


def random_camera(
    scene: SceneSpec, seed: int, stream: int, cfg: MotionConfig
) -> CameraPose:
    """A seeded viewpoint looking at the scene's focus object (or the origin)"""
    rng = np.random.default_rng([seed, stream])
    focus = focus_object(scene)
    aim = object_center(scene, focus, 0) if focus else np.array([0.0, 1.0, 0.0])
    dist = rng.uniform(*cfg.camera_distance)
    height = rng.uniform(*cfg.camera_height)
    azimuth = rng.uniform(0.0, 2.0 * math.pi)
    eye = np.array(
        [aim[0] + dist * math.sin(azimuth), height, aim[2] + dist * math.cos(azimuth)]
    )
    return look_at(eye, aim)


def build_pair(
    scene_seed: int,
    motion: str,
    cfg: DatasetConfig,
    index: int = 0,
    render: bool = True,
) -> Tuple[VideoSample, VideoSample]:
    """Appearance and camera samples of one scene"""
    scene = sample_scene(scene_seed, cfg.scene)
    intr = render_intrinsics(cfg)
    K, fps = cfg.render.frames, cfg.render.fps
    still_start = random_camera(scene, scene_seed, 1, cfg.motion)
    static = static_trajectory(still_start, intr, K, fps)
    start = random_camera(scene, scene_seed, 2, cfg.motion)
    moving = make_motion(motion, scene, start, intr, K, fps, scene_seed, cfg.motion)
    samples = []
    for set_name, traj in ((APPEARANCE_SET, static), (CAMERA_SET, moving)):
        video = None
        if render:
            rcfg = cfg.render
            video, _ = render_video(
                scene, traj, workers=rcfg.workers, with_depth=rcfg.with_depth
            )
        prompt = PromptPair.for_sample(scene, traj, cfg.virtual_indicator)
        samples.append(
            VideoSample(
                set_name, motion, index, scene_seed, scene, traj, prompt, video
            )
        )
    return samples[0], samples[1]


def sample_dir(set_name: str, motion: str, index: int) -> Path:
    return Path(set_name) / motion / f"{index:04d}"


def write_sample(root: Union[str, Path], sample: VideoSample) -> Dict[str, Any]:
    """Writes one rendered sample; returns its manifest entry"""
    if sample.video is None:
        raise ValueError("sample has not been rendered")
    rel = sample_dir(sample.set_name, sample.motion, sample.index)
    out = Path(root) / rel
    meta = {
        "set": sample.set_name,
        "motion": sample.motion,
        "scene_seed": sample.seed,
        "virtual_indicator": sample.prompt.virtual_indicator,
    }
    write_video(out, sample.video, sample.trajectory, meta)
    (out / "scene.json").write_text(scene_to_json(sample.scene) + "\n")
    (out / "prompt.txt").write_text(sample.prompt.composite() + "\n")
    return {
        "video_dir": rel.as_posix(),
        "set": sample.set_name,
        "motion": sample.motion,
        "index": sample.index,
        "seed": sample.seed,
        "prompt": sample.prompt.to_dict(),
        "trajectory": (rel / "poses.jsonl").as_posix(),
    }


def write_pair(
    root: Union[str, Path], pair: Tuple[VideoSample, VideoSample]
) -> List[Dict[str, Any]]:
    return [write_sample(root, s) for s in pair]


@dataclass(frozen=True, eq=False)
class DatasetManifest:
    entries: Tuple[Dict[str, Any], ...]
    config: Dict[str, Any]
    root: Optional[Path] = None

    def __eq__(self, other):
        if not isinstance(other, DatasetManifest):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __len__(self) -> int:
        return len(self.entries)

    def select(
        self, set_name: Optional[str] = None, motion: Optional[str] = None
    ) -> List[Dict[str, Any]]:
        return [
            e
            for e in self.entries
            if (set_name is None or e["set"] == set_name)
            and (motion is None or e["motion"] == motion)
        ]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "version": MANIFEST_VERSION,
            "config": self.config,
            "entries": list(self.entries),
        }

    def write(self, root: Union[str, Path]) -> Path:
        path = Path(root) / MANIFEST_NAME
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        return path


def build_corpus(
    cfg: DatasetConfig,
    root: Union[str, Path],
    n_per_motion: Optional[int] = None,
    motions: Optional[Sequence[str]] = None,
    base_seed: Optional[int] = None,
    progress: bool = False,
) -> DatasetManifest:
    """Renders n_per_motion pairs per motion kind and writes the manifest"""
    from tqdm import tqdm

    n = cfg.n_per_motion if n_per_motion is None else n_per_motion
    motions = list(cfg.motions if motions is None else motions)
    base = cfg.base_seed if base_seed is None else base_seed
    if n < 1:
        raise ValueError("n_per_motion must be at least 1")
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    jobs = [(mi, motion, si) for mi, motion in enumerate(motions) for si in range(n)]
    log.info(
        "building %d pairs (%d motions x %d) in %s", len(jobs), len(motions), n, root
    )
    entries = []
    for mi, motion, si in tqdm(jobs, unit="pair", disable=not progress):
        seed = derive_seed(base, mi, si)
        log.debug("%s #%d: scene seed %d", motion, si, seed)
        entries.extend(write_pair(root, build_pair(seed, motion, cfg, si)))
    snapshot = to_dict(cfg)
    snapshot.update(n_per_motion=n, motions=motions, base_seed=base)
    manifest = DatasetManifest(tuple(entries), snapshot, root)
    path = manifest.write(root)
    log.info("wrote %s", path)
    return manifest


_ENTRY_FIELDS = ("video_dir", "set", "motion", "index", "seed", "prompt", "trajectory")


def load_manifest(path: Union[str, Path]) -> DatasetManifest:
    """Reads and validates a manifest file (or the manifest in a dataset root)"""
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    root = path.parent
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError as err:
        raise MissingAsset(f"{path}: no such manifest") from err
    except (json.JSONDecodeError, UnicodeDecodeError) as err:
        raise ParseError(f"{path}: malformed manifest ({err})") from err
    if not isinstance(data, dict) or "entries" not in data or "config" not in data:
        raise ParseError(f"{path}: manifest needs 'entries' and 'config'")
    entries = data["entries"]
    if not isinstance(entries, list):
        raise ParseError(f"{path}: 'entries' must be a list")
    for e in entries:
        missing = [k for k in _ENTRY_FIELDS if not isinstance(e, dict) or k not in e]
        if missing:
            raise ParseError(f"{path}: entry is missing {missing}")
        if e["set"] not in SET_NAMES:
            raise ParseError(f"{path}: unknown set '{e['set']}'")
        for key in ("video_dir", "trajectory"):
            if not (root / e[key]).exists():
                raise MissingAsset(
                    f"{root / e[key]}: referenced by manifest but missing"
                )
    appearance = {
        (e["motion"], e["seed"]) for e in entries if e["set"] == APPEARANCE_SET
    }
    for e in entries:
        if e["set"] == CAMERA_SET and (e["motion"], e["seed"]) not in appearance:
            raise ParseError(
                f"{path}: {e['video_dir']} has no paired appearance sample"
            )
    return DatasetManifest(tuple(entries), data["config"], root)


def regenerate_prompt(sample_path: Union[str, Path]) -> PromptPair:
    """Rebuilds a sample's prompt from its scene.json, poses.jsonl and meta.json"""
    sample_path = Path(sample_path)
    scene = scene_from_json((sample_path / "scene.json").read_text())
    traj = read_trajectory(sample_path / "poses.jsonl")
    meta = json.loads((sample_path / "meta.json").read_text())
    return PromptPair.for_sample(scene, traj, meta["virtual_indicator"])


def iter_samples(
    manifest: DatasetManifest, set_name: str
) -> Iterable[Tuple[Dict[str, Any], Path]]:
    """(entry, absolute directory) for every entry of one set, in manifest order"""
    if manifest.root is None:
        raise ValueError("manifest has no root directory")
    for e in manifest.select(set_name):
        yield e, manifest.root / e["video_dir"]


# Variables:
# End:
