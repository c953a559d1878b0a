# -*- coding: utf-8 -*-
# -*- mode: python -*-
"""
A toy world where appearance and camera motion can be told apart.

Each content is a smooth pattern that tiles the image, with wavenumbers of at
most MAX_WAVENUMBER. Camera motion is a global shift of the content by one
pixel per frame (a truck or pedestal move of a camera looking at a plane one
unit away). The virtual style adds a fixed color tint and a checkerboard
texture that moves with the content; the neutral reference set shows the
same contents without either. With the default one-pixel checker period the
texture sits at the Nyquist frequency, orthogonal to every content, so it
never pulls the shift estimate of a clip toward zero.

Every content appears at the same position in every set, so a (content,
motion) pair determines its clip exactly.

Sets:

    X_a      styled, static, with the <VIRTUAL> indicator
    X_c      styled, moving, with the <VIRTUAL> indicator
    neutral  unstyled, static; pretrains the base model and provides the
             reference color statistics

``run_disentanglement`` trains the full two-stage scheme on a world,
samples with and without the appearance adapter, and repeats camera
learning without the appearance stage as an ablation.
"""
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from .config import (
    ConfigError,
    ToyWorldConfig,
    TrainConfig,
    load_config,
    to_dict,
    write_config,
)
from .dataset import (
    APPEARANCE_SET,
    CAMERA_SET,
    NEUTRAL_SET,
    DatasetManifest,
    PromptPair,
    derive_seed,
    sample_dir,
)
from .geometry import CameraPose, Intrinsics
from .metrics import ChannelStats, motion_correlation, style_score
from .render import VideoTensor, write_video
from .scene import VIRTUAL_PREFIX
from .toytrain import (
    APPEARANCE,
    Adapter,
    Denoiser,
    EncoderDelta,
    History,
    TrainingSet,
    condition_vector,
    init_model,
    pretrain_base,
    sample,
    train_appearance,
    train_camera,
    trajectory_features,
)
from .trajectory import TimedTrajectory, camera_text, make_simple, static_trajectory

log = logging.getLogger("camsynth.toyworld")

# image displacement (dx, dy) of the content per frame
TOY_MOTIONS: Dict[str, Tuple[int, int]] = {
    "truck_left": (1, 0),
    "truck_right": (-1, 0),
    "pedestal_up": (0, 1),
    "pedestal_down": (0, -1),
}
STATIC = "static"
MAX_WAVENUMBER = 3
N_WAVES = 5

# settings under which the two-stage run fits in a few minutes on a desktop CPU.
# the camera adapter must store one clip per (content, motion) pair, so its
# rank is at least n_contents x len(TOY_MOTIONS)
TOY_TRAIN_DEFAULTS: Dict[str, Any] = {
    "optimizer": "adamw",
    "lr_base": 1e-3,
    "lr_appearance": 1e-3,
    "lr_camera": 1e-3,
    "lr_decay": True,
    "base_steps": 1500,
    "steps": 1200,
    "batch_size": 16,
    "rank_camera": 32,
    "alpha_camera": 32.0,
    "beta_start": 0.005,
    "beta_end": 0.1,
}


def toy_train_config(**overrides) -> TrainConfig:
    values = dict(TOY_TRAIN_DEFAULTS)
    values.update(overrides)
    cfg = TrainConfig(**values)
    cfg.validate()
    return cfg


def make_content(rng: np.random.Generator, size: int) -> np.ndarray:
    """A smooth RGB pattern that tiles a size x size image, values within ±0.5"""
    y, x = np.mgrid[0:size, 0:size] / size
    img = np.zeros((size, size, 3))
    for _ in range(N_WAVES):
        kx, ky = 0, 0
        while kx == 0 and ky == 0:
            kx, ky = rng.integers(-MAX_WAVENUMBER, MAX_WAVENUMBER + 1, 2)
        phase = rng.uniform(0.0, 2.0 * math.pi)
        color = rng.uniform(-1.0, 1.0, 3)
        img += np.cos(2.0 * math.pi * (kx * x + ky * y) + phase)[..., None] * color
    return 0.5 * img / np.max(np.abs(img))


def checkerboard(size: int, period: int, amplitude: float) -> np.ndarray:
    y, x = np.mgrid[0:size, 0:size]
    signs = np.where((x // period + y // period) % 2 == 0, 1.0, -1.0)
    return amplitude * signs[..., None]


@dataclass(frozen=True, eq=False)
class ToySample:
    set_name: str
    motion: str
    index: int
    seed: int
    content: int
    virtual: bool
    trajectory: TimedTrajectory
    video: VideoTensor

    def prompt(self) -> PromptPair:
        if self.virtual:
            text = f"{VIRTUAL_PREFIX} pattern {self.content}."
        else:
            text = f"Pattern {self.content}."
        return PromptPair(camera_text(self.trajectory), text, self.virtual)


@dataclass(eq=False)
class ToyWorld:
    config: ToyWorldConfig
    contents: np.ndarray
    motions: Tuple[str, ...]
    samples: Dict[str, List[ToySample]] = field(default_factory=dict)

    @property
    def video_shape(self) -> Tuple[int, int, int, int]:
        c = self.config
        return (c.frames, c.size, c.size, c.channels)

    @property
    def intrinsics(self) -> Intrinsics:
        size = self.config.size
        return Intrinsics.centered(size, size, float(size))

    def style(self, content: np.ndarray, virtual: bool) -> np.ndarray:
        """Applies the virtual style (tint + checkerboard) to a content image"""
        if not virtual:
            return content
        c = self.config
        checker = checkerboard(c.size, c.checker_period, c.checker_amplitude)
        return content + checker + np.asarray(c.tint)

    def video(self, content: int, motion: str, virtual: bool) -> np.ndarray:
        dx, dy = TOY_MOTIONS.get(motion, (0, 0))
        base = self.style(self.contents[content], virtual)
        frames = [
            np.roll(base, (dy * k, dx * k), axis=(0, 1))
            for k in range(self.config.frames)
        ]
        return np.clip(np.stack(frames), -1.0, 1.0)

    def trajectory(self, motion: str) -> TimedTrajectory:
        """Camera path moving a plane at unit depth by TOY_MOTIONS[motion] per frame"""
        c = self.config
        if motion == STATIC:
            return static_trajectory(CameraPose.identity(), self.intrinsics, c.frames)
        # one pixel per frame at unit depth
        speed = 8.0 / self.intrinsics.focal_px
        start = CameraPose.identity()
        return make_simple(motion, start, speed, c.frames, 8.0, self.intrinsics)

    def target_displacement(self, motion: str) -> np.ndarray:
        step = np.asarray(TOY_MOTIONS[motion], dtype=float)
        return np.tile(step, (self.config.frames - 1, 1))

    def reference_stats(self) -> ChannelStats:
        return ChannelStats.from_videos([s.video for s in self.samples[NEUTRAL_SET]])

    def training_set(self, set_name: str) -> TrainingSet:
        samples = self.samples[set_name]
        return TrainingSet(
            videos=np.stack([s.video.frames for s in samples]),
            motion_ids=[
                self.motions.index(s.motion) if set_name == CAMERA_SET else -1
                for s in samples
            ],
            content_ids=[s.content for s in samples],
            virtual=[s.virtual for s in samples],
            features=np.stack([trajectory_features(s.trajectory) for s in samples]),
        )

    def write(self, root: Union[str, Path]) -> DatasetManifest:
        """Writes every sample in the dataset layout and returns the manifest"""
        root = Path(root)
        entries = []
        for set_name in (APPEARANCE_SET, CAMERA_SET, NEUTRAL_SET):
            for s in self.samples.get(set_name, []):
                rel = sample_dir(s.set_name, s.motion, s.index)
                meta = {
                    "set": s.set_name,
                    "motion": s.motion,
                    "scene_seed": s.seed,
                    "content": s.content,
                    "virtual_indicator": s.virtual,
                }
                out = write_video(root / rel, s.video, s.trajectory, meta)
                prompt = s.prompt()
                (out / "prompt.txt").write_text(prompt.composite() + "\n")
                entries.append(
                    {
                        "video_dir": rel.as_posix(),
                        "set": s.set_name,
                        "motion": s.motion,
                        "index": s.index,
                        "seed": s.seed,
                        "prompt": prompt.to_dict(),
                        "trajectory": (rel / "poses.jsonl").as_posix(),
                    }
                )
        snapshot = {"toyworld": to_dict(self.config), "motions": list(self.motions)}
        manifest = DatasetManifest(tuple(entries), snapshot, root)
        manifest.write(root)
        log.info("wrote toy world with %d samples to %s", len(entries), root)
        return manifest


def make_toy_world(
    cfg: Optional[ToyWorldConfig] = None, seed: Optional[int] = None
) -> ToyWorld:
    """Builds the contents and the X_a, X_c and neutral sets"""
    cfg = cfg or ToyWorldConfig()
    cfg.validate()
    seed = cfg.seed if seed is None else seed
    rng = np.random.default_rng([seed, 0])
    contents = np.stack([make_content(rng, cfg.size) for _ in range(cfg.n_contents)])
    motions = tuple(TOY_MOTIONS)
    world = ToyWorld(cfg, contents, motions)
    appearance, camera, neutral = [], [], []
    for i in range(cfg.n_per_set):
        mi = i % len(motions)
        motion = motions[mi]
        sample_seed = derive_seed(seed, mi, i)
        # cycles through every (content, motion) pair
        content = (i // len(motions)) % cfg.n_contents
        for set_name, moving in ((APPEARANCE_SET, False), (CAMERA_SET, True)):
            shown = motion if moving else STATIC
            frames = world.video(content, shown, True)
            target = camera if moving else appearance
            traj = world.trajectory(shown)
            target.append(
                ToySample(
                    set_name,
                    motion,
                    i,
                    sample_seed,
                    content,
                    True,
                    traj,
                    VideoTensor(frames),
                )
            )
        frames = world.video(content, STATIC, False)
        traj = world.trajectory(STATIC)
        neutral.append(
            ToySample(
                NEUTRAL_SET,
                STATIC,
                i,
                sample_seed,
                content,
                False,
                traj,
                VideoTensor(frames),
            )
        )
    world.samples = {
        APPEARANCE_SET: appearance,
        CAMERA_SET: camera,
        NEUTRAL_SET: neutral,
    }
    log.debug(
        "toy world: %d contents, %d samples per set", cfg.n_contents, cfg.n_per_set
    )
    return world


@dataclass(frozen=True)
class DisentanglementReport:
    """Mean scores over the evaluation samples.

    motion_correlation is measured with the appearance adapter dropped and
    the virtual bit cleared. The three style scores are distances to the
    neutral reference statistics for the dropped variant, the kept variant
    (appearance adapter active under the virtual bit it was trained with)
    and the variant whose camera adapter was learned without the appearance
    stage, sampled like the dropped one.
    """

    motion_correlation: float
    style_dropped: float
    style_kept: float
    style_ablation: float
    final_losses: Dict[str, float]
    histories: Dict[str, History] = field(
        default_factory=dict, repr=False, compare=False
    )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "motion_correlation": self.motion_correlation,
            "style_dropped": self.style_dropped,
            "style_kept": self.style_kept,
            "style_ablation": self.style_ablation,
            "final_losses": dict(self.final_losses),
        }


def inference_inputs(
    model: Denoiser,
    camera: Union[Adapter, EncoderDelta],
    appearance: Optional[Adapter],
    motion_id: int,
    content: int,
    features: np.ndarray,
    virtual: bool = False,
) -> Tuple[List[Adapter], np.ndarray]:
    """Active adapters and condition for sampling a motion.

    The virtual bit stays cleared unless asked for.
    """
    adapters = [appearance] if appearance is not None else []
    delta = None
    if isinstance(camera, EncoderDelta):
        delta = camera
    else:
        adapters.append(camera)
    cond = condition_vector(
        model.paradigm,
        motion_id,
        content,
        virtual,
        len(model.motions),
        model.n_contents,
        model.encoder,
        features,
        delta,
    )
    return adapters, cond


def window_mean(
    history: History, key: str = "loss", start: int = 0, n: int = 50
) -> float:
    """Mean of one history column over n steps from start (negative: from the end)"""
    values = [h[key] for h in history]
    if start < 0:
        start = max(0, len(values) + start)
    chunk = values[start:start + n]
    return float(np.mean(chunk)) if chunk else float("nan")


def run_disentanglement(
    world: ToyWorld,
    cfg: Optional[TrainConfig] = None,
    n_eval: int = 2,
    progress: bool = False,
) -> DisentanglementReport:
    """Two-stage training on the toy world, then adapter-dropping evaluation"""
    cfg = cfg or toy_train_config()
    model = init_model(world.video_shape, world.motions, world.config.n_contents, cfg)
    base_hist = pretrain_base(world.training_set(NEUTRAL_SET), model, cfg, progress)
    appearance, app_hist = train_appearance(
        world.training_set(APPEARANCE_SET), model, cfg, progress
    )
    camera_data = world.training_set(CAMERA_SET)
    camera, cam_hist = train_camera(
        camera_data, model, appearance, cfg, progress=progress
    )
    ablation, abl_hist = train_camera(
        camera_data, model, None, cfg, require_appearance=False, progress=progress
    )
    ref = world.reference_stats()
    corr, dropped, kept, ablated = [], [], [], []
    for mi, motion in enumerate(world.motions):
        features = trajectory_features(world.trajectory(motion))
        for j in range(n_eval):
            content = (mi + j) % world.config.n_contents
            seed = [cfg.seed, 100 + mi, j]
            args = (mi, content, features)
            adapters, cond = inference_inputs(model, camera, None, *args)
            video = sample(model, adapters, cond, seed)
            corr.append(motion_correlation(video, world.target_displacement(motion)))
            dropped.append(style_score(video, ref))
            adapters, cond = inference_inputs(
                model, camera, appearance, *args, virtual=True
            )
            kept.append(style_score(sample(model, adapters, cond, seed), ref))
            adapters, cond = inference_inputs(model, ablation, None, *args)
            ablated.append(style_score(sample(model, adapters, cond, seed), ref))
    histories = {
        "base": base_hist,
        APPEARANCE: app_hist,
        "camera": cam_hist,
        "camera_without_appearance": abl_hist,
    }
    report = DisentanglementReport(
        float(np.mean(corr)),
        float(np.mean(dropped)),
        float(np.mean(kept)),
        float(np.mean(ablated)),
        {name: window_mean(h, start=-20, n=20) for name, h in histories.items()},
        histories,
    )
    log.info(
        "motion correlation %.3f; style dropped %.3f, kept %.3f, ablation %.3f",
        report.motion_correlation,
        report.style_dropped,
        report.style_kept,
        report.style_ablation,
    )
    return report


def main(argv=None):
    """Writes a toy world as a dataset root, optionally running the experiment on it"""
    import argparse

    from .core import ParseKeyVal, __version__, setup_log

    p = argparse.ArgumentParser(prog="camsynth-toyworld", description=main.__doc__)
    p.add_argument("--version", action="version", version="%(prog)s " + __version__)
    p.add_argument("-v", help="verbose output", action="store_true", dest="verbose")
    p.add_argument("-c", "--config", type=Path, help="JSON configuration file")
    p.add_argument(
        "-k",
        help="override a configuration value (e.g. toyworld.n_per_set=10)",
        action=ParseKeyVal,
        metavar="KEY=VALUE",
        dest="overrides",
    )
    p.add_argument(
        "--run",
        action="store_true",
        help="train the two-stage scheme on the world and write report.json",
    )
    p.add_argument("out", type=Path, help="dataset root to create")
    args = p.parse_args(argv)
    setup_log(log, args.verbose)

    overrides = {}
    if args.config is None:
        overrides = {f"train.{k}": json.dumps(v) for k, v in TOY_TRAIN_DEFAULTS.items()}
    overrides.update(args.overrides or {})
    try:
        cfg = load_config(args.config, overrides)
    except (ConfigError, OSError) as err:
        p.error(str(err))
    try:
        world = make_toy_world(cfg.toyworld)
        world.write(args.out)
        write_config(cfg, args.out)
        if args.run:
            report = run_disentanglement(world, cfg.train, progress=args.verbose)
            text = json.dumps(report.to_dict(), indent=2, sort_keys=True)
            (args.out / "report.json").write_text(text + "\n")
            print(text)
    except (ValueError, OSError) as err:
        log.error("error: %s", err)
        return 1
    print(args.out)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

# Variables:
# End:
