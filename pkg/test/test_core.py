# -*- coding: utf-8 -*-
# -*- mode: python -*-
import csv
import json

import numpy as np
import pytest

from camsynth import core, io
from camsynth.config import ToyWorldConfig
from camsynth.dataset import MANIFEST_NAME, load_manifest
from camsynth.geometry import Intrinsics, look_at
from camsynth.render import VideoTensor, write_video
from camsynth import toyworld as tw
from camsynth.toyworld import make_toy_world
from camsynth.trajectory import make_simple, write_trajectory

INTR = Intrinsics.centered(16, 16, 16.0)

# a tiny trainer on a tiny toy world
TRAIN_ARGS = [
    "-k", "toyworld.size=8",
    "-k", "toyworld.frames=4",
    "-k", "train.hidden=8",
    "-k", "train.steps=2",
    "-k", "train.base_steps=2",
    "-k", "train.batch_size=2",
    "-k", "train.time_embedding=4",
    "-k", "train.timesteps=5",
]


@pytest.fixture(scope="module")
def toy_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("toy")
    make_toy_world(ToyWorldConfig(size=8, frames=4, n_per_set=4)).write(root)
    return root


def exit_code(argv):
    with pytest.raises(SystemExit) as info:
        core.main(argv)
    return info.value.code


def test_unknown_key_is_usage_error(tmp_path):
    assert exit_code(["scene", "gen", "-k", "dataset.colour=1"]) == 2
    assert exit_code(["scene", "gen", "-k", "badly-formed"]) == 2
    assert exit_code(["scene", "gen", "-c", str(tmp_path / "missing.json")]) == 2


def test_help_formats(capsys):
    assert exit_code(["--help-formats"]) == 0
    assert ".ckpt" in capsys.readouterr().out


def test_scene_gen(tmp_path, capsys):
    assert core.main(["scene", "gen", "--seed", "3"]) == 0
    scene = json.loads(capsys.readouterr().out)
    assert scene["seed"] == 3
    out = tmp_path / "scenes" / "s3.json"
    assert core.main(["scene", "gen", "--seed", "3", "--out", str(out)]) == 0
    assert json.loads(out.read_text()) == scene


def test_render(tmp_path):
    scene_path = tmp_path / "scene.json"
    assert core.main(["scene", "gen", "--seed", "1", "--out", str(scene_path)]) == 0
    out = tmp_path / "clip"
    argv = ["render", "--scene", str(scene_path), "--motion", "truck_left", "--npy"]
    argv += ["--out", str(out)]
    argv += ["-k", "dataset.render.width=16", "-k", "dataset.render.height=12"]
    argv += ["-k", "dataset.render.frames=3"]
    assert core.main(argv) == 0
    assert len(list(out.glob("frame_*.ppm"))) == 3
    assert (out / "prompt.txt").read_text().startswith("Camera: The camera trucks left")
    with io.open(out / "video.npy", mode="r") as fp:
        assert fp.nframes == 3
    config = json.loads((out / "config.json").read_text())
    assert config["dataset"]["render"]["width"] == 16


def test_dataset_build(tmp_path):
    out = tmp_path / "corpus"
    argv = ["dataset", "build", "--out", str(out)]
    argv += ["-k", "dataset.motions=push_in", "-k", "dataset.n_per_motion=2"]
    argv += ["-k", "dataset.render.width=32", "-k", "dataset.render.height=24"]
    argv += ["-k", "dataset.render.frames=8"]
    assert core.main(argv) == 0
    manifest = load_manifest(out)
    assert len(manifest) == 4
    assert (out / MANIFEST_NAME).exists()
    assert (out / "config.json").exists()


def write_poses(path, K):
    start = look_at((0.0, 1.0, 5.0), (0.0, 0.0, 0.0))
    traj = make_simple("push_in", start, 1.0, K, intr=INTR)
    write_trajectory(path, traj)
    return path


def test_metrics_traj(tmp_path, capsys):
    gt = write_poses(tmp_path / "gt.jsonl", 9)
    assert core.main(["metrics", "traj", str(gt), str(gt)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["trans_err"] == 0.0
    assert report["rot_err"] == 0.0
    assert len(report["per_frame"]) == 8
    short = write_poses(tmp_path / "short.jsonl", 5)
    assert core.main(["metrics", "traj", str(gt), str(short)]) == 1


def write_clip(path, frames):
    start = look_at((0.0, 1.0, 5.0), (0.0, 0.0, 0.0))
    traj = make_simple("truck_left", start, 1.0, len(frames), intr=INTR)
    return write_video(path, VideoTensor(frames), traj, {})


def test_metrics_flow(tmp_path, capsys):
    rng = np.random.default_rng(0)
    frames = rng.uniform(-1.0, 1.0, (4, 16, 16, 3))
    a = write_clip(tmp_path / "a", frames)
    assert core.main(["metrics", "flow", str(a), str(a)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["flow_loss"] == 0.0
    assert len(report["per_frame"]) == 3
    b = write_clip(tmp_path / "b", frames[:3])
    assert core.main(["metrics", "flow", str(a), str(b)]) == 1


def test_camera_stage_needs_appearance_checkpoint(toy_root, tmp_path):
    argv = ["train", "--stage", "camera", "--data", str(toy_root)]
    argv += ["--out", str(tmp_path / "ckpt")]
    assert core.main(argv + TRAIN_ARGS) == 1


def test_train_and_sample(toy_root, tmp_path, monkeypatch, capsys):
    ckpt = tmp_path / "ckpt"
    for stage in ("base", "appearance", "camera"):
        argv = ["train", "--stage", stage, "--data", str(toy_root), "--out", str(ckpt)]
        assert core.main(argv + TRAIN_ARGS) == 0
    written = (core.BASE_CKPT, core.APPEARANCE_CKPT, core.CAMERA_CKPT)
    for name in written + ("camera_curve.csv", "config.json"):
        assert (ckpt / name).exists()
    capsys.readouterr()

    opened = []
    real_open = io.open

    def recording_open(filename, *args, **kwargs):
        opened.append(str(filename))
        return real_open(filename, *args, **kwargs)

    monkeypatch.setattr(io, "open", recording_open)
    out = tmp_path / "sample"
    argv = ["sample", "--checkpoints", str(ckpt), "--data", str(toy_root)]
    argv += ["--drop-appearance", "--out", str(out)]
    assert core.main(argv + TRAIN_ARGS) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["appearance_adapter"] is False
    assert report["style_score"] is not None
    assert report["motion_correlation"] is not None
    assert not any(p.endswith(core.APPEARANCE_CKPT) for p in opened)
    assert len(list(out.glob("frame_*.ppm"))) == 4

    opened.clear()
    argv = ["sample", "--checkpoints", str(ckpt), "--keep-appearance"]
    argv += ["--out", str(tmp_path / "kept")]
    assert core.main(argv + TRAIN_ARGS) == 0
    assert any(p.endswith(core.APPEARANCE_CKPT) for p in opened)


def test_paradigm_mismatch_is_usage_error(toy_root, tmp_path):
    ckpt = tmp_path / "ckpt"
    argv = ["train", "--stage", "base", "--data", str(toy_root), "--out", str(ckpt)]
    assert core.main(argv + TRAIN_ARGS) == 0
    argv = ["train", "--stage", "appearance", "--paradigm", "trajectory"]
    argv += ["--data", str(toy_root)]
    assert exit_code(argv + ["--out", str(ckpt)] + TRAIN_ARGS) == 2


def read_losses(path):
    with open(path, newline="") as fp:
        return [float(row["loss"]) for row in csv.DictReader(fp)]


def test_appearance_training_lowers_loss(tmp_path):
    root = tmp_path / "toy"
    argv = ["-k", "toyworld.size=8", "-k", "toyworld.frames=4"]
    argv += ["-k", "toyworld.n_per_set=10", str(root)]
    assert tw.main(argv) == 0
    ckpt = tmp_path / "ckpt"
    # the corpus config carries the toy training defaults
    args = ["-c", str(root / "config.json"), "-k", "train.hidden=32"]
    args += ["-k", "train.base_steps=300", "-k", "train.steps=400"]
    for stage in ("base", "appearance"):
        argv = ["train", "--stage", stage, "--data", str(root), "--out", str(ckpt)]
        assert core.main(argv + args) == 0
    losses = read_losses(ckpt / "appearance_curve.csv")
    assert len(losses) == 400
    assert np.mean(losses[-50:]) < np.mean(losses[:20])
