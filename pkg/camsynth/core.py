# -*- coding: utf-8 -*-
# -*- mode: python -*-
"""
Command-line access to the camsynth pipeline.

Commands
=====================
scene gen:       sample a scene specification and write it as JSON
render:          render one scene along one camera motion
dataset build:   render a paired X_a / X_c corpus with its manifest
metrics traj:    trajectory errors between two pose files
metrics flow:    flow loss between two videos
train:           run one stage of the toy trainer (base, appearance, camera)
sample:          sample a video from trained checkpoints

Every command that writes outputs also writes the resolved configuration as
config.json next to them. Exit status is 0 on success, 1 on a runtime
failure, and 2 on a usage or configuration error.
"""
import argparse
import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np

from . import __version__, io
from .config import (
    FLOORS,
    ConfigError,
    RunConfig,
    config_reference,
    load_config,
    write_config,
)
from .dataset import (
    APPEARANCE_SET,
    CAMERA_SET,
    NEUTRAL_SET,
    PromptPair,
    build_corpus,
    iter_samples,
    load_manifest,
    random_camera,
    render_intrinsics,
)
from .geometry import CameraPose, Intrinsics
from .metrics import (
    ChannelStats,
    flow_report,
    motion_correlation,
    style_score,
    trajectory_report,
)
from .render import VideoTensor, read_video, render_video, write_video
from .scene import sample_scene, scene_from_json, scene_to_json
from .trajectory import (
    SIMPLE_KINDS,
    TimedTrajectory,
    make_motion,
    make_simple,
    read_trajectory,
    static_trajectory,
)

log = logging.getLogger("camsynth")  # root logger

BASE_CKPT = "base.ckpt"
APPEARANCE_CKPT = "appearance.ckpt"
CAMERA_CKPT = "camera.ckpt"


class ParseKeyVal(argparse.Action):
    def __call__(self, parser, namespace, arg, option_string=None):
        kv = getattr(namespace, self.dest)
        if kv is None:
            kv = dict()
        if not arg.count("=") == 1:
            parser.error("-k %s argument badly formed; needs key=value" % arg)
        key, val = arg.split("=")
        kv[key] = val
        setattr(namespace, self.dest, kv)


def setup_log(log, debug=False):
    loglevel = logging.DEBUG if debug else logging.INFO
    log.setLevel(loglevel)
    if log.handlers:
        return
    ch = logging.StreamHandler()
    formatter = logging.Formatter("[%(name)s] %(message)s")
    ch.setLevel(logging.DEBUG)
    ch.setFormatter(formatter)
    log.addHandler(ch)


def format_list():
    fmts = io.list_plugins()
    return f"Supported file formats: {' '.join(fmts)}"


def _dump(report: Dict[str, Any]) -> str:
    return json.dumps(report, indent=2, sort_keys=True)


def load_video(path: Path) -> VideoTensor:
    """A video from a sample directory or from a single K x H x W x C file"""
    path = Path(path)
    if path.is_dir():
        return read_video(path)[0]
    with io.open(path, mode="r") as fp:
        frames = np.asarray(fp.read())
    if frames.dtype == np.uint8:
        return VideoTensor.from_uint8(frames)
    return VideoTensor(frames)


def cmd_scene_gen(args, cfg: RunConfig) -> int:
    scene = sample_scene(args.seed, cfg.dataset.scene)
    text = scene_to_json(scene)
    if args.out is None:
        print(text)
    else:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(text + "\n")
        log.info("wrote scene %d to %s", args.seed, args.out)
    return 0


def cmd_render(args, cfg: RunConfig) -> int:
    dcfg = cfg.dataset
    scene = scene_from_json(args.scene.read_text())
    seed = scene.seed if args.seed is None else args.seed
    intr = render_intrinsics(dcfg)
    start = random_camera(scene, seed, 2, dcfg.motion)
    rcfg = dcfg.render
    traj = make_motion(
        args.motion, scene, start, intr, rcfg.frames, rcfg.fps, seed, dcfg.motion
    )
    video, _ = render_video(
        scene, traj, workers=rcfg.workers, with_depth=rcfg.with_depth
    )
    prompt = PromptPair.for_sample(scene, traj, dcfg.virtual_indicator)
    meta = {"motion": args.motion, "scene_seed": scene.seed}
    write_video(args.out, video, traj, meta)
    (args.out / "scene.json").write_text(scene_to_json(scene) + "\n")
    (args.out / "prompt.txt").write_text(prompt.composite() + "\n")
    if args.npy:
        with io.open(args.out / "video.npy", mode="w", fps=video.fps) as fp:
            for frame in video.to_uint8():
                fp.write(frame)
    write_config(cfg, args.out)
    log.info("rendered %d frames to %s", len(video), args.out)
    return 0


def cmd_dataset_build(args, cfg: RunConfig) -> int:
    build_corpus(cfg.dataset, args.out, progress=args.verbose)
    write_config(cfg, args.out)
    print(args.out / "manifest.json")
    return 0


def cmd_metrics_traj(args, cfg: RunConfig) -> int:
    report = trajectory_report(read_trajectory(args.gt), read_trajectory(args.est))
    print(_dump(report))
    return 0


def cmd_metrics_flow(args, cfg: RunConfig) -> int:
    report = flow_report(load_video(args.pred), load_video(args.gt))
    print(_dump(report))
    return 0


def _vocabulary(manifest, cfg: RunConfig) -> Tuple[Tuple[str, ...], int]:
    """Motion names and number of contents of a dataset root"""
    motions = tuple(manifest.config.get("motions", cfg.dataset.motions))
    if "toyworld" in manifest.config:
        return motions, int(manifest.config["toyworld"]["n_contents"])
    return motions, len(FLOORS)


def _video_shape(cfg: RunConfig) -> Tuple[int, int, int, int]:
    tw = cfg.toyworld
    return (tw.frames, tw.size, tw.size, tw.channels)


def cmd_train(args, cfg: RunConfig) -> int:
    from . import toytrain as tt

    tcfg = cfg.train
    manifest = load_manifest(args.data)
    motions, n_contents = _vocabulary(manifest, cfg)
    shape = _video_shape(cfg)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    base_path = out / BASE_CKPT
    app_path = out / APPEARANCE_CKPT
    if args.stage == "camera" and not args.without_appearance and not app_path.exists():
        raise tt.MissingAppearanceAdapter(
            f"{app_path}: train the appearance stage first"
        )

    def dataset(set_name):
        return tt.TrainingSet.from_manifest(
            manifest, set_name, motions, shape, n_contents
        )

    if args.stage == "base" or not base_path.exists():
        model = tt.init_model(shape, motions, n_contents, tcfg)
        if args.stage == "base" and manifest.select(NEUTRAL_SET):
            history = tt.pretrain_base(
                dataset(NEUTRAL_SET), model, tcfg, progress=args.verbose
            )
            tt.write_curve(out / "base_curve.csv", history)
        else:
            log.info("no pretrained base in %s; writing the seeded initialization", out)
        tt.save_model(base_path, model)
    else:
        model = tt.load_model(base_path)
        if model.paradigm != tcfg.paradigm:
            raise ConfigError(
                f"{base_path} was trained for the {model.paradigm} paradigm, "
                f"not {tcfg.paradigm}"
            )

    if args.stage == "appearance":
        adapter, history = tt.train_appearance(
            dataset(APPEARANCE_SET), model, tcfg, progress=args.verbose
        )
        tt.save_adapter(out / APPEARANCE_CKPT, adapter)
        tt.write_curve(out / "appearance_curve.csv", history)
    elif args.stage == "camera":
        appearance = None
        if not args.without_appearance:
            appearance = tt.load_adapter(app_path)
        camera, history = tt.train_camera(
            dataset(CAMERA_SET),
            model,
            appearance,
            tcfg,
            require_appearance=not args.without_appearance,
            progress=args.verbose,
        )
        tt.save_adapter(out / CAMERA_CKPT, camera)
        tt.write_curve(out / "camera_curve.csv", history)
    write_config(cfg, out)
    log.info("%s stage written to %s", args.stage, out)
    return 0


def _target_trajectory(args, model, manifest, motion: str):
    """The trajectory a sample should follow (file, dataset sample or simple motion)"""
    if args.trajectory is not None:
        return read_trajectory(args.trajectory)
    if manifest is not None:
        for entry in manifest.select(CAMERA_SET, motion):
            return read_trajectory(manifest.root / entry["trajectory"])
    K, H, W, _ = model.video_shape
    intr = Intrinsics.centered(W, H, float(W))
    if motion in SIMPLE_KINDS:
        return make_simple(motion, CameraPose.identity(), 1.0, K, 8.0, intr)
    return static_trajectory(CameraPose.identity(), intr, K)


def _reference_stats(manifest) -> Optional[ChannelStats]:
    for set_name in (NEUTRAL_SET, APPEARANCE_SET):
        videos = [read_video(path)[0] for _, path in iter_samples(manifest, set_name)]
        if videos:
            return ChannelStats.from_videos(videos)
    return None


def cmd_sample(args, cfg: RunConfig) -> int:
    from . import toytrain as tt
    from .toyworld import TOY_MOTIONS

    scfg = cfg.sample
    model = tt.load_model(args.checkpoints / BASE_CKPT)
    camera = tt.load_adapter(args.checkpoints / CAMERA_CKPT)
    appearance = None
    if not scfg.drop_appearance:
        appearance = tt.load_adapter(args.checkpoints / APPEARANCE_CKPT)
    if scfg.motion not in model.motions:
        raise ConfigError(
            f"sample.motion '{scfg.motion}' is not one of {list(model.motions)}"
        )
    if scfg.content >= model.n_contents:
        raise ConfigError(f"sample.content must be below {model.n_contents}")
    manifest = load_manifest(args.data) if args.data is not None else None
    traj = _target_trajectory(args, model, manifest, scfg.motion)
    features = tt.trajectory_features(traj, model.video_shape[0])

    adapters = [appearance] if appearance is not None else []
    delta = None
    if isinstance(camera, tt.EncoderDelta):
        delta = camera
    else:
        adapters.append(camera)
    cond = tt.condition_vector(
        model.paradigm,
        model.motions.index(scfg.motion),
        scfg.content,
        scfg.virtual_indicator,
        len(model.motions),
        model.n_contents,
        model.encoder,
        features,
        delta,
    )
    video = tt.sample(model, adapters, cond, scfg.seed)

    report: Dict[str, Any] = {
        "motion": scfg.motion,
        "content": scfg.content,
        "seed": scfg.seed,
        "appearance_adapter": appearance is not None,
        "style_score": None,
        "motion_correlation": None,
    }
    if manifest is not None:
        ref = _reference_stats(manifest)
        if ref is not None:
            report["style_score"] = style_score(video, ref)
    if scfg.motion in TOY_MOTIONS:
        step = np.asarray(TOY_MOTIONS[scfg.motion], dtype=float)
        disp = np.tile(step, (len(video) - 1, 1))
        report["motion_correlation"] = motion_correlation(video, disp)
    K = model.video_shape[0]
    if len(traj) != K:
        idx = np.round(np.linspace(0, len(traj) - 1, K)).astype(int)
        frames = tuple(traj.frames[i] for i in idx)
        traj = TimedTrajectory(frames, traj.kind, traj.params, traj.seed, traj.fps)
    write_video(args.out, video, traj, {"motion": scfg.motion, "content": scfg.content})
    (args.out / "report.json").write_text(_dump(report) + "\n")
    write_config(cfg, args.out)
    print(_dump(report))
    return 0


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("-v", help="verbose output", action="store_true", dest="verbose")
    p.add_argument(
        "-c", "--config", type=Path, help="JSON configuration file (see --help-config)"
    )
    p.add_argument(
        "-k",
        help="override a configuration value, e.g. dataset.render.frames=8",
        action=ParseKeyVal,
        metavar="KEY=VALUE",
        dest="overrides",
    )


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="camsynth",
        description=(
            "render camera-motion training videos and run the toy adapter trainer"
        ),
    )
    p.add_argument("--version", action="version", version="%(prog)s " + __version__)
    p.add_argument(
        "--help-config",
        help="print every configuration key with its default and exit",
        action="version",
        version=config_reference(),
    )
    p.add_argument(
        "--help-formats",
        help="list supported file types and exit",
        action="version",
        version=format_list(),
    )
    sub = p.add_subparsers(dest="command", required=True)

    scene = sub.add_parser("scene", help="scene specifications")
    scene_sub = scene.add_subparsers(dest="action", required=True)
    g = scene_sub.add_parser("gen", help="sample a scene and write it as JSON")
    _add_common(g)
    g.add_argument(
        "--seed", type=int, default=0, help="scene seed (default: %(default)s)"
    )
    g.add_argument("--out", type=Path, help="output file (default: stdout)")
    g.set_defaults(func=cmd_scene_gen)

    g = sub.add_parser("render", help="render a scene along a camera motion")
    _add_common(g)
    g.add_argument("--scene", type=Path, required=True, help="scene JSON file")
    g.add_argument(
        "--motion",
        required=True,
        help="motion name, e.g. push_in or push_in+truck_left",
    )
    g.add_argument("--seed", type=int, help="camera seed (default: the scene seed)")
    g.add_argument(
        "--npy", action="store_true", help="also write the frames as video.npy"
    )
    g.add_argument("--out", type=Path, required=True, help="output directory")
    g.set_defaults(func=cmd_render)

    dataset = sub.add_parser("dataset", help="paired corpora")
    dataset_sub = dataset.add_subparsers(dest="action", required=True)
    g = dataset_sub.add_parser(
        "build", help="render X_a / X_c pairs and write the manifest"
    )
    _add_common(g)
    g.add_argument("--out", type=Path, required=True, help="dataset root")
    g.set_defaults(func=cmd_dataset_build)

    metrics = sub.add_parser("metrics", help="evaluation reports (JSON on stdout)")
    metrics_sub = metrics.add_subparsers(dest="action", required=True)
    g = metrics_sub.add_parser(
        "traj", help="translation and rotation errors of two pose files"
    )
    _add_common(g)
    g.add_argument("gt", type=Path, help="ground-truth poses.jsonl")
    g.add_argument("est", type=Path, help="estimated poses.jsonl")
    g.set_defaults(func=cmd_metrics_traj)
    g = metrics_sub.add_parser("flow", help="flow loss between two videos")
    _add_common(g)
    g.add_argument("pred", type=Path, help="predicted video (sample directory or .npy)")
    g.add_argument(
        "gt", type=Path, help="ground-truth video (sample directory or .npy)"
    )
    g.set_defaults(func=cmd_metrics_flow)

    g = sub.add_parser("train", help="run one stage of the toy trainer")
    _add_common(g)
    g.add_argument("--stage", choices=("base", "appearance", "camera"), required=True)
    g.add_argument(
        "--paradigm",
        choices=("text", "trajectory"),
        help="overrides train.paradigm",
    )
    g.add_argument(
        "--without-appearance",
        action="store_true",
        help="camera stage only: train without an appearance adapter (ablation)",
    )
    g.add_argument("--data", type=Path, required=True, help="dataset root")
    g.add_argument("--out", type=Path, required=True, help="checkpoint directory")
    g.set_defaults(func=cmd_train)

    g = sub.add_parser("sample", help="sample a video from trained checkpoints")
    _add_common(g)
    g.add_argument(
        "--checkpoints", type=Path, required=True, help="checkpoint directory"
    )
    drop = g.add_mutually_exclusive_group()
    drop.add_argument(
        "--drop-appearance",
        action="store_const",
        const=True,
        dest="drop_appearance",
        help="leave the appearance adapter out (never reads its file)",
    )
    drop.add_argument(
        "--keep-appearance",
        action="store_const",
        const=False,
        dest="drop_appearance",
        help="sample with the appearance adapter active",
    )
    g.add_argument("--motion", help="overrides sample.motion")
    g.add_argument("--content", type=int, help="overrides sample.content")
    g.add_argument("--seed", type=int, help="overrides sample.seed")
    g.add_argument(
        "--trajectory", type=Path, help="target poses.jsonl (trajectory paradigm)"
    )
    g.add_argument(
        "--data", type=Path, help="dataset root providing reference statistics"
    )
    g.add_argument("--out", type=Path, required=True, help="output directory")
    g.set_defaults(func=cmd_sample)
    return p


def _flag_overrides(args) -> Dict[str, str]:
    """Config overrides given as dedicated flags"""
    out = {}
    if getattr(args, "paradigm", None) is not None:
        out["train.paradigm"] = args.paradigm
    if getattr(args, "drop_appearance", None) is not None:
        out["sample.drop_appearance"] = json.dumps(args.drop_appearance)
    for name in ("content", "seed"):
        if args.command == "sample" and getattr(args, name, None) is not None:
            out[f"sample.{name}"] = str(getattr(args, name))
    if args.command == "sample" and args.motion is not None:
        out["sample.motion"] = args.motion
    return out


def main(argv=None) -> int:
    p = build_parser()
    args = p.parse_args(argv)
    setup_log(log, args.verbose)

    overrides = dict(args.overrides or {})
    overrides.update(_flag_overrides(args))
    try:
        cfg = load_config(args.config, overrides)
    except (ConfigError, OSError) as err:
        p.error(str(err))
    try:
        return args.func(args, cfg)
    except ConfigError as err:
        p.error(str(err))
    except (ValueError, OSError, RuntimeError) as err:
        log.error("error: %s", err)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())

# Variables:
# End:
