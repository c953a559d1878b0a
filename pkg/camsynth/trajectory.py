# -*- coding: utf-8 -*-
# -*- mode: python -*-
"""
Scripted camera motions.

Every motion produces a TimedTrajectory: one (CameraPose, Intrinsics) pair per
frame, the motion kind, its generating parameters and seed. Public functions
take angles in degrees; they are converted to radians on entry.

Simple motions move the camera along its own forward/right/up axes (push,
pull, truck, pedestal) or rotate it about its up/right axes with the center
fixed (pan, tilt). Composed motions splice two simple motions at the middle of
the clip. The expressive and stylized families cover orbit, dolly zoom,
seek-then-focus, switch focus, handheld and explosive shake, and roll.
"""
import enum
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .config import MotionConfig, RenderConfig
from .geometry import (
    CameraPose,
    Intrinsics,
    axis_rotation,
    interpolate_pose,
    look_at,
    pose_from_record,
    pose_record,
)
from .scene import SceneSpec, focus_object, object_center, object_phrase

log = logging.getLogger("camsynth.trajectory")

_render = RenderConfig()
DEFAULT_INTRINSICS = Intrinsics.centered(
    _render.width, _render.height, _render.focal_px
)
SEEK_WINDOW = 0.15


class MotionKind(str, enum.Enum):
    PUSH_IN = "push_in"
    PULL_OUT = "pull_out"
    TRUCK_LEFT = "truck_left"
    TRUCK_RIGHT = "truck_right"
    PEDESTAL_UP = "pedestal_up"
    PEDESTAL_DOWN = "pedestal_down"
    PAN_LEFT = "pan_left"
    PAN_RIGHT = "pan_right"
    TILT_UP = "tilt_up"
    TILT_DOWN = "tilt_down"
    COMPOSED = "composed"
    SEEK_THEN_FOCUS = "seek_then_focus"
    SWITCH_FOCUS = "switch_focus"
    ORBIT = "orbit"
    HANDHELD_SHAKE = "handheld_shake"
    DOLLY_ZOOM = "dolly_zoom"
    EXPLOSIVE_SHAKE = "explosive_shake"
    ROLL_ROTATION = "roll_rotation"
    STATIC = "static"


# body-frame direction of travel
_TRANSLATIONS = {
    MotionKind.PUSH_IN: (0.0, 0.0, -1.0),
    MotionKind.PULL_OUT: (0.0, 0.0, 1.0),
    MotionKind.TRUCK_LEFT: (-1.0, 0.0, 0.0),
    MotionKind.TRUCK_RIGHT: (1.0, 0.0, 0.0),
    MotionKind.PEDESTAL_UP: (0.0, 1.0, 0.0),
    MotionKind.PEDESTAL_DOWN: (0.0, -1.0, 0.0),
}
# body-frame rotation axis; positive angles turn left / up
_ROTATIONS = {
    MotionKind.PAN_LEFT: ((0.0, 1.0, 0.0), 1.0),
    MotionKind.PAN_RIGHT: ((0.0, 1.0, 0.0), -1.0),
    MotionKind.TILT_UP: ((1.0, 0.0, 0.0), 1.0),
    MotionKind.TILT_DOWN: ((1.0, 0.0, 0.0), -1.0),
}
SIMPLE_KINDS = tuple(_TRANSLATIONS) + tuple(_ROTATIONS)
SIX_DIRECTIONS = tuple(_TRANSLATIONS)
ROLL_ANGLES = (90, 180)

_PHRASES = {
    MotionKind.PUSH_IN: "pushes forward",
    MotionKind.PULL_OUT: "pulls back",
    MotionKind.TRUCK_LEFT: "trucks left",
    MotionKind.TRUCK_RIGHT: "trucks right",
    MotionKind.PEDESTAL_UP: "pedestals up",
    MotionKind.PEDESTAL_DOWN: "pedestals down",
    MotionKind.PAN_LEFT: "pans left",
    MotionKind.PAN_RIGHT: "pans right",
    MotionKind.TILT_UP: "tilts up",
    MotionKind.TILT_DOWN: "tilts down",
}


class WrongKind(ValueError):
    """A motion kind was passed to a builder that does not realize it"""


class UnknownTarget(ValueError):
    """A focus target does not exist in the scene"""


class BadAngle(ValueError):
    """A roll angle other than 90 or 180 degrees was requested"""


Frame = Tuple[CameraPose, Intrinsics]


@dataclass(frozen=True)
class TimedTrajectory:
    frames: Tuple[Frame, ...]
    kind: MotionKind
    params: Dict[str, Any] = field(default_factory=dict)
    seed: Optional[int] = None
    fps: float = 8.0

    def __post_init__(self):
        frames = tuple((p, i) for p, i in self.frames)
        if not frames:
            raise ValueError("trajectory needs at least one frame")
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "kind", MotionKind(self.kind))
        if not self.varies_intrinsics:
            first = frames[0][1]
            if any(intr != first for _, intr in frames[1:]):
                raise ValueError(
                    f"{self.kind.value} trajectory must keep intrinsics constant"
                )

    @property
    def varies_intrinsics(self) -> bool:
        return (
            self.kind is MotionKind.DOLLY_ZOOM
            or self.params.get("base_kind") == MotionKind.DOLLY_ZOOM.value
        )

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def poses(self) -> List[CameraPose]:
        return [p for p, _ in self.frames]

    @property
    def intrinsics(self) -> List[Intrinsics]:
        return [i for _, i in self.frames]

    def records(self) -> List[Dict[str, Any]]:
        return [pose_record(p, i) for p, i in self.frames]


@dataclass(frozen=True)
class SimpleMotion:
    """A simple motion with its speed (m/s for translations, deg/s for rotations)"""

    kind: MotionKind
    speed: float = 1.0


@dataclass(frozen=True)
class MotionDescriptor:
    """A parsed motion name, e.g. ``push_in+truck_left`` or ``roll_rotation_180``"""

    kind: MotionKind
    parts: Tuple[MotionKind, ...] = ()
    degrees: Optional[int] = None
    base: Optional["MotionDescriptor"] = None

    @property
    def name(self) -> str:
        if self.kind is MotionKind.COMPOSED:
            return "+".join(p.value for p in self.parts)
        if self.kind is MotionKind.ROLL_ROTATION:
            return f"{self.kind.value}_{self.degrees}"
        if self.base is not None:
            return f"{self.kind.value}:{self.base.name}"
        return self.kind.value


def parse_motion(name: str) -> MotionDescriptor:
    """Parses a motion name.

    Accepted forms: a kind name (``orbit``), a composed pair of simple kinds
    joined by ``+``, ``roll_rotation_90`` / ``roll_rotation_180``, and a shake
    applied on a base motion (``handheld_shake:push_in``).
    """
    name = name.strip()
    if "+" in name:
        parts = tuple(name.split("+"))
        if len(parts) != 2:
            raise WrongKind(f"composed motion '{name}' must join exactly two kinds")
        kinds = []
        for p in parts:
            try:
                k = MotionKind(p)
            except ValueError as err:
                raise WrongKind(f"unknown motion kind '{p}'") from err
            if k not in SIMPLE_KINDS and k is not MotionKind.STATIC:
                raise WrongKind(f"'{p}' cannot be part of a composed motion")
            kinds.append(k)
        return MotionDescriptor(MotionKind.COMPOSED, parts=tuple(kinds))
    if name.startswith(MotionKind.ROLL_ROTATION.value):
        suffix = name[len(MotionKind.ROLL_ROTATION.value) :].lstrip("_")
        degrees = int(suffix) if suffix.isdigit() else 180
        if degrees not in ROLL_ANGLES:
            raise BadAngle(f"roll rotation must be 90 or 180 degrees, got {degrees}")
        return MotionDescriptor(MotionKind.ROLL_ROTATION, degrees=degrees)
    head, sep, rest = name.partition(":")
    try:
        kind = MotionKind(head)
    except ValueError as err:
        raise WrongKind(f"unknown motion kind '{head}'") from err
    if kind is MotionKind.COMPOSED:
        raise WrongKind("composed motions are written as 'first+second'")
    if sep:
        if kind not in (MotionKind.HANDHELD_SHAKE, MotionKind.EXPLOSIVE_SHAKE):
            raise WrongKind(f"only shakes take a base motion, not '{head}'")
        return MotionDescriptor(kind, base=parse_motion(rest))
    return MotionDescriptor(kind)


def _rotate_body(pose: CameraPose, Q: np.ndarray) -> CameraPose:
    """Rotates the camera by Q about its own center, Q given in the body frame"""
    return CameraPose(Q.T @ pose.rotation, Q.T @ pose.translation)


def _simple_frames(
    kind: MotionKind, start: CameraPose, speed: float, K: int, fps: float
) -> List[CameraPose]:
    if kind is MotionKind.STATIC:
        return [start] * K
    poses = [start]
    if kind in _TRANSLATIONS:
        direction = np.asarray(_TRANSLATIONS[kind])
        for k in range(1, K):
            s = speed * k / fps
            poses.append(CameraPose(start.rotation, start.translation - s * direction))
    elif kind in _ROTATIONS:
        axis, sign = _ROTATIONS[kind]
        rate = math.radians(speed) / fps
        for k in range(1, K):
            poses.append(_rotate_body(start, axis_rotation(axis, sign * rate * k)))
    else:
        raise WrongKind(f"'{kind.value}' is not a simple motion")
    return poses


def make_simple(
    kind: Union[MotionKind, str],
    start: CameraPose,
    speed: float,
    K: int,
    fps: float = 8.0,
    intr: Intrinsics = DEFAULT_INTRINSICS,
) -> TimedTrajectory:
    """Constant-speed translation along, or rotation about, a camera axis.

    speed is in m/s for push/pull/truck/pedestal and deg/s for pan/tilt.
    """
    try:
        kind = MotionKind(kind)
    except ValueError as err:
        raise WrongKind(f"unknown motion kind '{kind}'") from err
    if kind not in SIMPLE_KINDS:
        raise WrongKind(f"'{kind.value}' is not a simple motion")
    if K < 2:
        raise ValueError("a moving trajectory needs at least 2 frames")
    poses = _simple_frames(kind, start, speed, K, fps)
    return TimedTrajectory(
        tuple((p, intr) for p in poses), kind, {"speed": float(speed)}, None, fps
    )


def static_trajectory(
    pose: CameraPose, intr: Intrinsics, K: int, fps: float = 8.0
) -> TimedTrajectory:
    """K identical frames: the camera is fixed in place"""
    if K < 1:
        raise ValueError("trajectory needs at least one frame")
    frames = tuple((pose, intr) for _ in range(K))
    return TimedTrajectory(frames, MotionKind.STATIC, {}, None, fps)


def handoff_frame(K: int) -> int:
    """Index of the last frame driven by the first half of a composed motion"""
    return math.ceil(K / 2) - 1


def compose(
    m1: SimpleMotion,
    m2: SimpleMotion,
    K: int,
    start: CameraPose,
    intr: Intrinsics = DEFAULT_INTRINSICS,
    fps: float = 8.0,
) -> TimedTrajectory:
    """First half follows m1; the second half runs m2 from the handoff pose"""
    if K < 2:
        raise ValueError("a composed trajectory needs at least 2 frames")
    for m in (m1, m2):
        if MotionKind(m.kind) not in SIMPLE_KINDS + (MotionKind.STATIC,):
            raise WrongKind(f"'{MotionKind(m.kind).value}' cannot be composed")
    h = handoff_frame(K)
    first = _simple_frames(MotionKind(m1.kind), start, m1.speed, h + 1, fps)
    second = _simple_frames(MotionKind(m2.kind), first[h], m2.speed, K - h, fps)
    poses = first + second[1:]
    params = {
        "parts": [MotionKind(m1.kind).value, MotionKind(m2.kind).value],
        "speeds": [float(m1.speed), float(m2.speed)],
        "handoff": h,
    }
    frames = tuple((p, intr) for p in poses)
    return TimedTrajectory(frames, MotionKind.COMPOSED, params, None, fps)


def orbit(
    center: Sequence[float],
    radius: float,
    height: float,
    degrees: float,
    K: int,
    intr: Intrinsics = DEFAULT_INTRINSICS,
    fps: float = 8.0,
    start_degrees: float = 0.0,
) -> TimedTrajectory:
    """Circle the center at fixed radius and height, always looking at it"""
    if radius <= 0:
        raise ValueError("orbit radius must be positive")
    center = np.asarray(center, dtype=float)
    a0 = math.radians(start_degrees)
    sweep = math.radians(degrees)
    frames = []
    for k in range(K):
        a = a0 + (sweep * k / (K - 1) if K > 1 else 0.0)
        eye = center + np.array([radius * math.sin(a), height, radius * math.cos(a)])
        frames.append((look_at(eye, center), intr))
    params = {
        "center": center.tolist(),
        "radius": float(radius),
        "height": float(height),
        "degrees": float(degrees),
        "start_degrees": float(start_degrees),
    }
    return TimedTrajectory(tuple(frames), MotionKind.ORBIT, params, None, fps)


def dolly_zoom(
    target: Sequence[float],
    f0: float,
    d0: float,
    d1: float,
    K: int,
    intr: Intrinsics = DEFAULT_INTRINSICS,
    fps: float = 8.0,
    view_dir: Sequence[float] = (0.0, 0.0, 1.0),
) -> TimedTrajectory:
    """Move along the view axis while scaling focal length with distance.

    view_dir points from the target toward the camera. The focal length
    follows f = f0 * d / d0, so anything at the target keeps its image size.
    """
    if d0 <= 0 or d1 <= 0:
        raise ValueError("dolly distances must be positive")
    target = np.asarray(target, dtype=float)
    u = np.asarray(view_dir, dtype=float)
    u = u / np.linalg.norm(u)
    frames = []
    for k in range(K):
        d = d0 + (d1 - d0) * (k / (K - 1) if K > 1 else 0.0)
        pose = look_at(target + d * u, target)
        frames.append((pose, intr.with_focal(f0 * d / d0)))
    params = {
        "target": target.tolist(),
        "f0": float(f0),
        "d0": float(d0),
        "d1": float(d1),
        "view_dir": u.tolist(),
    }
    return TimedTrajectory(tuple(frames), MotionKind.DOLLY_ZOOM, params, None, fps)


def _smooth_noise(
    rng: np.random.Generator, K: int, smoothness: float, amplitude: float
) -> np.ndarray:
    """EMA-filtered Gaussian 3-vectors, rescaled so the largest norm is amplitude"""
    steps = rng.standard_normal((K, 3))
    out = np.empty_like(steps)
    acc = steps[0]
    for k in range(K):
        acc = smoothness * acc + (1.0 - smoothness) * steps[k]
        out[k] = acc
    peak = np.max(np.linalg.norm(out, axis=1))
    if peak == 0:
        return np.zeros_like(out)
    return out * (amplitude / peak)


def _derived_params(base: TimedTrajectory, extra: Mapping[str, Any]) -> Dict[str, Any]:
    params = {"base_kind": base.kind.value, "base_params": base.params}
    params.update(extra)
    return params


def handheld_shake(
    base: TimedTrajectory,
    amp_rot: float,
    amp_trans: float,
    smoothness: float,
    seed: int,
) -> TimedTrajectory:
    """Adds band-limited jitter with exact peak amplitudes to a trajectory.

    amp_rot is the largest angular deviation from the base in degrees and
    amp_trans the largest camera-center displacement in meters.
    """
    from scipy.spatial.transform import Rotation

    if amp_rot < 0 or amp_trans < 0:
        raise ValueError("shake amplitudes must be non-negative")
    if not 0 < smoothness < 1:
        raise ValueError("smoothness must be in (0, 1)")
    params = _derived_params(
        base,
        {
            "amp_rot": float(amp_rot),
            "amp_trans": float(amp_trans),
            "smoothness": float(smoothness),
        },
    )
    kind = MotionKind.HANDHELD_SHAKE
    if amp_rot == 0 and amp_trans == 0:
        return TimedTrajectory(base.frames, kind, params, seed, base.fps)
    K = len(base)
    rng = np.random.default_rng(seed)
    rotvecs = _smooth_noise(rng, K, smoothness, math.radians(amp_rot))
    offsets = _smooth_noise(rng, K, smoothness, amp_trans)
    frames = []
    for (pose, intr), rv, off in zip(base.frames, rotvecs, offsets):
        R = Rotation.from_rotvec(rv).as_matrix().T @ pose.rotation
        frames.append((CameraPose.from_center(R, pose.center + off), intr))
    return TimedTrajectory(tuple(frames), kind, params, seed, base.fps)


def explosive_shake(
    base: TimedTrajectory,
    t0: int,
    A: float,
    omega: float,
    decay: float,
    seed: int = 0,
) -> TimedTrajectory:
    """Damped oscillation about a seeded axis starting at frame t0.

    The angle at frame k >= t0 is A * exp(-decay * j) * sin(omega * j) degrees
    with j = k - t0; omega is in rad/frame and decay in 1/frame.
    """
    K = len(base)
    if not 0 <= t0 < K:
        raise ValueError(f"onset frame {t0} outside the clip")
    params = _derived_params(
        base,
        {"t0": int(t0), "A": float(A), "omega": float(omega), "decay": float(decay)},
    )
    kind = MotionKind.EXPLOSIVE_SHAKE
    rng = np.random.default_rng(seed)
    axis = rng.standard_normal(3)
    axis /= np.linalg.norm(axis)
    params["axis"] = axis.tolist()
    if A == 0:
        return TimedTrajectory(base.frames, kind, params, seed, base.fps)
    amp = math.radians(A)
    frames = list(base.frames[:t0])
    for k in range(t0, K):
        j = k - t0
        theta = amp * math.exp(-decay * j) * math.sin(omega * j)
        pose, intr = base.frames[k]
        frames.append((_rotate_body(pose, axis_rotation(axis, theta)), intr))
    return TimedTrajectory(tuple(frames), kind, params, seed, base.fps)


def _target(scene: SceneSpec, object_id: str, k: int, fps: float) -> np.ndarray:
    try:
        return object_center(scene, object_id, k, fps)
    except KeyError as err:
        raise UnknownTarget(f"scene has no object '{object_id}'") from err


def seek_then_focus(
    scene: SceneSpec,
    target_id: str,
    sweep_amp: float,
    n_sweeps: int,
    lock_frame: int,
    push_ratio: float,
    K: int,
    start: CameraPose,
    intr: Intrinsics = DEFAULT_INTRINSICS,
    fps: float = 8.0,
) -> TimedTrajectory:
    """Pan back and forth searching, lock onto the target, then push toward it.

    Frames before lock_frame yaw sinusoidally by sweep_amp degrees for n_sweeps
    periods. The aim then slerps onto the target over a window of 15% of the
    clip, and the remaining frames track the target while the distance to it
    shrinks to push_ratio times the starting distance at the last frame.
    """
    _target(scene, target_id, 0, fps)
    if not 0 < lock_frame < K:
        raise ValueError(f"lock frame {lock_frame} must lie in (0, {K})")
    if push_ratio <= 0:
        raise ValueError("push ratio must be positive")
    amp = math.radians(sweep_amp)
    window = max(1, round(SEEK_WINDOW * K))
    window = min(window, K - 1 - lock_frame) if lock_frame < K - 1 else 0
    c0 = start.center

    def sweep(k):
        psi = amp * math.sin(2.0 * math.pi * n_sweeps * k / lock_frame)
        return _rotate_body(start, axis_rotation((0.0, 1.0, 0.0), psi))

    frames = [(sweep(k), intr) for k in range(lock_frame)]
    locked = lock_frame + window
    for k in range(lock_frame, K):
        p = _target(scene, target_id, k, fps)
        if k > locked:
            u = (k - locked) / (K - 1 - locked)
            ratio = 1.0 + (push_ratio - 1.0) * u
            aim = look_at(p + (c0 - p) * ratio, p)
        else:
            aim = look_at(c0, p)
            if window > 0:
                u = (k - lock_frame) / window
                aim = interpolate_pose(sweep(lock_frame), aim, u)
        frames.append((aim, intr))
    params = {
        "target": target_id,
        "sweep_amp": float(sweep_amp),
        "n_sweeps": int(n_sweeps),
        "lock_frame": int(lock_frame),
        "push_ratio": float(push_ratio),
        "window": int(window),
    }
    return TimedTrajectory(tuple(frames), MotionKind.SEEK_THEN_FOCUS, params, None, fps)


def switch_focus(
    scene: SceneSpec,
    id_a: str,
    id_b: str,
    K: int,
    center: Sequence[float],
    intr: Intrinsics = DEFAULT_INTRINSICS,
    fps: float = 8.0,
    push: float = 0.0,
) -> TimedTrajectory:
    """Aim at A for the first third, slerp to B, aim at B for the last third.

    With push > 0 the camera also moves that many meters toward B's starting
    position over the clip.
    """
    _target(scene, id_a, 0, fps)
    pb0 = _target(scene, id_b, 0, fps)
    c0 = np.asarray(center, dtype=float)
    heading = pb0 - c0
    heading = heading / np.linalg.norm(heading)
    n1 = math.ceil(K / 3)
    lo, hi = n1 - 1, K - n1
    frames = []
    for k in range(K):
        c = c0 + push * (k / (K - 1) if K > 1 else 0.0) * heading if push else c0
        aim_a = look_at(c, _target(scene, id_a, k, fps))
        aim_b = look_at(c, _target(scene, id_b, k, fps))
        s = min(max((k - lo) / (hi - lo), 0.0), 1.0) if hi > lo else 0.0
        frames.append((interpolate_pose(aim_a, aim_b, s), intr))
    params = {"targets": [id_a, id_b], "center": c0.tolist(), "push": float(push)}
    return TimedTrajectory(tuple(frames), MotionKind.SWITCH_FOCUS, params, None, fps)


def roll_rotation(
    base_pose: CameraPose,
    degrees: int,
    K: int,
    intr: Intrinsics = DEFAULT_INTRINSICS,
    fps: float = 8.0,
) -> TimedTrajectory:
    """Roll linearly about the view axis from 0 to degrees, center fixed"""
    if degrees not in ROLL_ANGLES:
        raise BadAngle(f"roll rotation must be 90 or 180 degrees, got {degrees}")
    total = math.radians(degrees)
    frames = [(base_pose, intr)]
    for k in range(1, K):
        Q = axis_rotation((0.0, 0.0, 1.0), total * k / (K - 1))
        frames.append((_rotate_body(base_pose, Q), intr))
    return TimedTrajectory(
        tuple(frames), MotionKind.ROLL_ROTATION, {"degrees": int(degrees)}, None, fps
    )


def _simple_clause(kind: MotionKind, focus: Optional[str]) -> str:
    text = f"the camera {_PHRASES[kind]}"
    if focus:
        text += f", focusing on {focus}"
    return text


def _sentence(text: str) -> str:
    return text[0].upper() + text[1:] + "."


def camera_text(traj: TimedTrajectory, scene: Optional[SceneSpec] = None) -> str:
    """The camera instruction c_m, without the 'Camera:' label; empty when static"""
    kind = traj.kind
    params = traj.params

    def phrase(object_id):
        if scene is None or object_id is None or scene.find(object_id) is None:
            return None
        return object_phrase(scene, object_id)

    focus = phrase(params.get("focus"))
    if kind is MotionKind.STATIC:
        return ""
    if kind in SIMPLE_KINDS:
        return _sentence(_simple_clause(kind, focus))
    if kind is MotionKind.COMPOSED:
        first, second = (MotionKind(p) for p in params["parts"])
        if first is MotionKind.STATIC:
            if second is MotionKind.STATIC:
                return ""
            return _sentence(_simple_clause(second, focus))
        text = _sentence(_simple_clause(first, focus))
        if second is not MotionKind.STATIC:
            text += " Then " + _simple_clause(second, None) + "."
        return text
    if kind is MotionKind.ORBIT:
        return _sentence(f"the camera orbits around {focus or 'the scene'}")
    if kind is MotionKind.DOLLY_ZOOM:
        return _sentence(f"the camera performs a dolly zoom on {focus or 'the scene'}")
    if kind is MotionKind.SEEK_THEN_FOCUS:
        target = phrase(params.get("target")) or "an object"
        return (
            _sentence(f"the camera pans around, searching for {target}")
            + " Then the camera locks on and pushes toward it."
        )
    if kind is MotionKind.SWITCH_FOCUS:
        a, b = (phrase(t) or "an object" for t in params["targets"])
        then = f" Then the camera switches focus to {b}."
        return _sentence(f"the camera focuses on {a}") + then
    if kind is MotionKind.ROLL_ROTATION:
        return _sentence(f"the camera rolls {params['degrees']} degrees")
    if kind in (MotionKind.HANDHELD_SHAKE, MotionKind.EXPLOSIVE_SHAKE):
        base = TimedTrajectory(
            traj.frames[:1],
            params["base_kind"],
            params.get("base_params", {}),
            None,
            traj.fps,
        )
        base_text = camera_text(base, scene)
        if kind is MotionKind.HANDHELD_SHAKE:
            shake = "The camera shakes slightly, as if handheld."
        else:
            shake = "The camera shakes violently, as if hit by an explosion."
        return f"{base_text} {shake}" if base_text else shake
    raise WrongKind(f"no description for '{kind.value}'")


def describe(traj: TimedTrajectory, scene: Optional[SceneSpec] = None) -> str:
    """The labelled camera instruction, e.g. 'Camera: The camera trucks left.'"""
    text = camera_text(traj, scene)
    return f"Camera: {text}" if text else ""


def _second_target(scene: SceneSpec, first: str) -> str:
    for object_id in scene.object_ids():
        if object_id != first:
            return object_id
    return first


def make_motion(
    descriptor: Union[MotionDescriptor, str],
    scene: SceneSpec,
    start: CameraPose,
    intr: Intrinsics,
    K: int,
    fps: float,
    seed: int,
    cfg: Optional[MotionConfig] = None,
) -> TimedTrajectory:
    """Realizes any motion family for a scene, starting from a camera pose"""
    cfg = cfg or MotionConfig()
    if isinstance(descriptor, str):
        descriptor = parse_motion(descriptor)
    kind = descriptor.kind
    focus = focus_object(scene)
    if focus is None and scene.static_objects:
        focus = "static_0"

    def with_focus(traj):
        params = dict(traj.params, focus=focus)
        return TimedTrajectory(traj.frames, traj.kind, params, traj.seed, traj.fps)

    def speed(k):
        return cfg.angular_speed if k in _ROTATIONS else cfg.speed

    if kind is MotionKind.STATIC:
        return static_trajectory(start, intr, K, fps)
    if kind in SIMPLE_KINDS:
        return with_focus(make_simple(kind, start, speed(kind), K, fps, intr))
    if kind is MotionKind.COMPOSED:
        m1, m2 = (SimpleMotion(k, speed(k)) for k in descriptor.parts)
        return with_focus(compose(m1, m2, K, start, intr, fps))
    if kind is MotionKind.ROLL_ROTATION:
        return roll_rotation(start, descriptor.degrees, K, intr, fps)
    if kind in (MotionKind.HANDHELD_SHAKE, MotionKind.EXPLOSIVE_SHAKE):
        base_desc = descriptor.base or MotionDescriptor(MotionKind.STATIC)
        base = make_motion(base_desc, scene, start, intr, K, fps, seed, cfg)
        if kind is MotionKind.HANDHELD_SHAKE:
            return handheld_shake(
                base, cfg.shake_rot, cfg.shake_trans, cfg.shake_smoothness, seed
            )
        t0 = int(cfg.explosive_onset * K)
        return explosive_shake(
            base,
            t0,
            cfg.explosive_amplitude,
            cfg.explosive_omega,
            cfg.explosive_decay,
            seed,
        )

    c0 = start.center
    if focus is not None:
        target = object_center(scene, focus, 0, fps)
    else:
        target = c0 + cfg.dolly_start * start.forward
    if kind is MotionKind.ORBIT:
        offset = c0 - target
        radius = math.hypot(offset[0], offset[2]) or cfg.orbit_radius
        height = offset[1]
        start_deg = math.degrees(math.atan2(offset[0], offset[2]))
        return with_focus(
            orbit(target, radius, height, cfg.orbit_degrees, K, intr, fps, start_deg)
        )
    if kind is MotionKind.DOLLY_ZOOM:
        view = c0 - target
        if np.linalg.norm(view) == 0:
            view = -start.forward
        return with_focus(
            dolly_zoom(
                target,
                intr.focal_px,
                cfg.dolly_start,
                cfg.dolly_end,
                K,
                intr,
                fps,
                view,
            )
        )
    if focus is None:
        raise UnknownTarget(f"'{kind.value}' needs an object in the scene")
    if kind is MotionKind.SEEK_THEN_FOCUS:
        lock = min(max(1, int(round(cfg.lock_fraction * K))), K - 1)
        return seek_then_focus(
            scene,
            focus,
            cfg.sweep_amplitude,
            cfg.n_sweeps,
            lock,
            cfg.push_ratio,
            K,
            start,
            intr,
            fps,
        )
    if kind is MotionKind.SWITCH_FOCUS:
        second = _second_target(scene, focus)
        return switch_focus(scene, focus, second, K, c0, intr, fps)
    raise WrongKind(f"cannot realize motion '{kind.value}'")


def write_trajectory(path: Union[str, Path], traj: TimedTrajectory):
    """Writes a JSON Lines file: a header line, then one pose record per frame"""
    header = {
        "kind": traj.kind.value,
        "params": traj.params,
        "seed": traj.seed,
        "fps": traj.fps,
        "frames": len(traj),
    }
    with open(path, "w") as fp:
        fp.write(json.dumps(header, sort_keys=True) + "\n")
        for rec in traj.records():
            fp.write(json.dumps(rec) + "\n")


def read_trajectory(path: Union[str, Path]) -> TimedTrajectory:
    with open(path) as fp:
        lines = [line for line in fp if line.strip()]
    if not lines:
        raise ValueError(f"{path}: empty trajectory file")
    try:
        header = json.loads(lines[0])
        records = [json.loads(line) for line in lines[1:]]
    except json.JSONDecodeError as err:
        raise ValueError(f"{path}: malformed trajectory file ({err})") from err
    if header.get("frames", len(records)) != len(records):
        raise ValueError(
            f"{path}: header declares {header['frames']} frames, "
            f"found {len(records)}"
        )
    frames = tuple(pose_from_record(r) for r in records)
    return TimedTrajectory(
        frames,
        header["kind"],
        header.get("params", {}),
        header.get("seed"),
        header.get("fps", 8.0),
    )


# Variables:
# End:
