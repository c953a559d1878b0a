# -*- coding: utf-8 -*-
# -*- mode: python -*-
"""
Software rasterizer for low-poly scenes.

Triangles are transformed into the optical frame, clipped against the near
plane, projected with the pinhole model and filled with edge functions over
pixel centers. Visibility is resolved with a z-buffer holding perspective-
correct depth. Shading is flat: an ambient term plus a two-sided diffuse term
from one fixed directional light.

Object ids in the id buffer: 0 sky, 1 floor, 2 ridgelines, 10 + i static
object i, 100 + i moving object i.
"""
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union

import numpy as np

from . import io
from . import meshes as m
from .geometry import CameraPose, Intrinsics, to_optical
from .scene import Background, MovingObject, SceneSpec, object_position
from .trajectory import TimedTrajectory, read_trajectory, write_trajectory

log = logging.getLogger("camsynth.render")

NEAR = 0.05
AMBIENT = 0.35
DIFFUSE = 0.65
LIGHT_DIR = np.array([0.4, 1.0, 0.3]) / np.linalg.norm([0.4, 1.0, 0.3])

ID_SKY = 0
ID_FLOOR = 1
ID_RIDGE = 2
ID_STATIC = 10
ID_MOVING = 100

FLOOR_TILES = 20


@dataclass(frozen=True, eq=False)
class Frame:
    """One rendered image: H x W x 3 uint8, plus optional depth and id buffers"""

    rgb: np.ndarray
    depth: Optional[np.ndarray] = None
    ids: Optional[np.ndarray] = None


@dataclass(frozen=True, eq=False)
class VideoTensor:
    """K x H x W x 3 frames in [-1, 1]"""

    frames: np.ndarray
    fps: float = 8.0
    depth: Optional[np.ndarray] = None

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=float)
        if frames.ndim != 4 or frames.shape[0] < 1:
            raise ValueError("video must be K x H x W x C with K >= 1")
        object.__setattr__(self, "frames", frames)

    @classmethod
    def from_uint8(
        cls, frames: np.ndarray, fps: float = 8.0, depth=None
    ) -> "VideoTensor":
        return cls(np.asarray(frames, dtype=float) / 127.5 - 1.0, fps, depth)

    def to_uint8(self) -> np.ndarray:
        return np.clip(np.round((self.frames + 1.0) * 127.5), 0, 255).astype(np.uint8)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.frames.shape

    def __len__(self) -> int:
        return self.frames.shape[0]


def _ridge_seed(scene: SceneSpec, which: int) -> List[int]:
    return [scene.seed, which]


@lru_cache(maxsize=32)
def static_geometry(scene: SceneSpec) -> Tuple[m.Mesh, np.ndarray]:
    """Floor, ridgelines and static objects with their per-triangle ids"""
    floor_colors = m.FLOOR_COLORS[scene.floor.value]
    parts = [m.floor_grid(2 * scene.bounds + 10.0, FLOOR_TILES, floor_colors)]
    ids = [np.full(len(parts[0]), ID_FLOOR)]
    ridges = []
    if scene.background in (Background.FAR_MOUNTAINS, Background.BOTH_MOUNTAINS):
        ridges.append(
            m.ridgeline(
                m.FAR_RIDGE_RADIUS, 28, 40.0, m.FAR_RIDGE_COLOR, _ridge_seed(scene, 1)
            )
        )
    if scene.background in (Background.CLOSER_MOUNTAINS, Background.BOTH_MOUNTAINS):
        ridges.append(
            m.ridgeline(
                m.CLOSER_RIDGE_RADIUS,
                22,
                15.0,
                m.CLOSER_RIDGE_COLOR,
                _ridge_seed(scene, 2),
            )
        )
    for ridge in ridges:
        parts.append(ridge)
        ids.append(np.full(len(ridge), ID_RIDGE))
    builders = {"tree": m.tree, "bush": m.bush, "grass": m.grass}
    for i, obj in enumerate(scene.static_objects):
        mesh = builders[obj.kind](obj.scale).transformed(1.0, obj.position, obj.yaw)
        parts.append(mesh)
        ids.append(np.full(len(mesh), ID_STATIC + i))
    return m.concat(parts), np.concatenate(ids)


def moving_mesh(obj: MovingObject) -> m.Mesh:
    """Unit primitive for a moving object, colored and scaled, at the origin"""
    if obj.kind == "sphere":
        base = m.icosphere(2)
    elif obj.kind == "cube":
        base = m.cube()
    elif obj.kind == "polygon":
        base = m.polygon()
    else:
        base = m.cylinder(12)
    return base.with_color(obj.color).transformed(obj.scale)


def scene_meshes(
    scene: SceneSpec, frame_index: int, fps: float = 8.0
) -> Tuple[m.Mesh, np.ndarray]:
    """World-space geometry of the scene at a frame, with per-triangle ids"""
    mesh, ids = static_geometry(scene)
    parts, id_parts = [mesh], [ids]
    for i, obj in enumerate(scene.moving_objects):
        pos = object_position(obj, frame_index, fps, scene.bounds)
        moved = moving_mesh(obj).transformed(1.0, pos)
        parts.append(moved)
        id_parts.append(np.full(len(moved), ID_MOVING + i))
    return m.concat(parts), np.concatenate(id_parts)


def shade(triangles: np.ndarray, colors: np.ndarray) -> np.ndarray:
    """Flat two-sided Lambert shading of world-space triangles"""
    n = np.cross(triangles[:, 1] - triangles[:, 0], triangles[:, 2] - triangles[:, 0])
    n /= np.linalg.norm(n, axis=1, keepdims=True)
    lum = AMBIENT + DIFFUSE * np.abs(n @ LIGHT_DIR)
    return np.clip(colors * lum[:, None], 0.0, 1.0)


def clip_near(poly: np.ndarray, near: float = NEAR) -> np.ndarray:
    """Sutherland-Hodgman clip of an optical-frame polygon to z >= near"""
    out = []
    n = len(poly)
    for i in range(n):
        a, b = poly[i], poly[(i + 1) % n]
        ina, inb = a[2] >= near, b[2] >= near
        if ina:
            out.append(a)
        if ina != inb:
            s = (near - a[2]) / (b[2] - a[2])
            out.append(a + s * (b - a))
    return np.asarray(out).reshape(-1, 3)


def _fill(screen, z, color, oid, rgb, zbuf, idbuf):
    """Rasterizes one projected triangle into the buffers"""
    H, W = zbuf.shape
    (ax, ay), (bx, by), (cx, cy) = screen
    area = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    if abs(area) < 1e-12:
        return
    j0 = max(int(np.ceil(min(ax, bx, cx) - 0.5)), 0)
    j1 = min(int(np.floor(max(ax, bx, cx) - 0.5)), W - 1)
    i0 = max(int(np.ceil(min(ay, by, cy) - 0.5)), 0)
    i1 = min(int(np.floor(max(ay, by, cy) - 0.5)), H - 1)
    if j0 > j1 or i0 > i1:
        return
    px = np.arange(j0, j1 + 1)[None, :] + 0.5
    py = np.arange(i0, i1 + 1)[:, None] + 0.5
    w0 = ((cx - bx) * (py - by) - (cy - by) * (px - bx)) / area
    w1 = ((ax - cx) * (py - cy) - (ay - cy) * (px - cx)) / area
    w2 = ((bx - ax) * (py - ay) - (by - ay) * (px - ax)) / area
    inside = (w0 >= 0) & (w1 >= 0) & (w2 >= 0)
    if not inside.any():
        return
    inv_z = w0 / z[0] + w1 / z[1] + w2 / z[2]
    with np.errstate(divide="ignore"):
        depth = 1.0 / inv_z
    region = zbuf[i0 : i1 + 1, j0 : j1 + 1]
    hit = inside & (depth < region)
    region[hit] = depth[hit]
    rgb[i0 : i1 + 1, j0 : j1 + 1][hit] = color
    idbuf[i0 : i1 + 1, j0 : j1 + 1][hit] = oid


def rasterize(
    triangles: np.ndarray,
    colors: np.ndarray,
    ids: np.ndarray,
    pose: CameraPose,
    intr: Intrinsics,
    background=m.SKY_COLOR,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Renders world-space triangles; returns (rgb float, depth, ids)"""
    H, W = intr.height, intr.width
    rgb = np.empty((H, W, 3))
    rgb[:] = background
    zbuf = np.full((H, W), np.inf)
    idbuf = np.full((H, W), ID_SKY, dtype=np.int32)
    if len(triangles) == 0:
        return rgb, zbuf, idbuf
    shaded = shade(triangles, colors)
    cam = to_optical(pose, triangles)
    zmin = cam[:, :, 2].min(axis=1)
    zmax = cam[:, :, 2].max(axis=1)
    f, ccx, ccy = intr.focal_px, intr.cx, intr.cy

    def project(pts):
        x = ccx + f * pts[:, 0] / pts[:, 2]
        y = ccy + f * pts[:, 1] / pts[:, 2]
        return np.stack([x, y], axis=1)

    for t in np.flatnonzero(zmax >= NEAR):
        tri = cam[t]
        if zmin[t] >= NEAR:
            polys = [tri]
        else:
            poly = clip_near(tri)
            if len(poly) < 3:
                continue
            polys = [
                np.stack([poly[0], poly[k], poly[k + 1]])
                for k in range(1, len(poly) - 1)
            ]
        for p in polys:
            _fill(project(p), p[:, 2], shaded[t], ids[t], rgb, zbuf, idbuf)
    return rgb, zbuf, idbuf


def render_frame(
    scene: SceneSpec,
    pose: CameraPose,
    intr: Intrinsics,
    frame_index: int,
    fps: float = 8.0,
    with_depth: bool = False,
    with_ids: bool = False,
) -> Frame:
    """Renders the scene at a frame (which places the moving objects)"""
    if frame_index < 0:
        raise ValueError("frame index must be non-negative")
    mesh, ids = scene_meshes(scene, frame_index, fps)
    rgb, depth, idbuf = rasterize(mesh.triangles(), mesh.colors, ids, pose, intr)
    image = np.round(rgb * 255.0).astype(np.uint8)
    return Frame(image, depth if with_depth else None, idbuf if with_ids else None)


def render_video(
    scene: SceneSpec,
    traj: TimedTrajectory,
    workers: int = 1,
    with_depth: bool = False,
) -> Tuple[VideoTensor, List[Dict[str, Any]]]:
    """Renders one frame per trajectory entry; returns the video and pose records"""

    def one(k):
        pose, intr = traj.frames[k]
        return render_frame(scene, pose, intr, k, traj.fps, with_depth=with_depth)

    indices = range(len(traj))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            frames = list(pool.map(one, indices))
    else:
        frames = [one(k) for k in indices]
    log.debug("rendered %d frames of scene %d", len(frames), scene.seed)
    rgb = np.stack([fr.rgb for fr in frames])
    depth = np.stack([fr.depth for fr in frames]) if with_depth else None
    return VideoTensor.from_uint8(rgb, traj.fps, depth), traj.records()


def write_video(
    directory: Union[str, Path],
    video: VideoTensor,
    traj: TimedTrajectory,
    meta: Optional[Mapping[str, Any]] = None,
) -> Path:
    """Writes frame_NNNN.ppm (+ depth_NNNN.pfm), poses.jsonl and meta.json"""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for k, frame in enumerate(video.to_uint8()):
        with io.open(directory / f"frame_{k:04d}.ppm", mode="w") as fp:
            fp.write(frame)
    if video.depth is not None:
        for k, depth in enumerate(video.depth):
            with io.open(directory / f"depth_{k:04d}.pfm", mode="w") as fp:
                fp.write(depth)
    write_trajectory(directory / "poses.jsonl", traj)
    _, height, width, _ = video.shape
    info = {
        "width": width,
        "height": height,
        "frames": len(video),
        "fps": video.fps,
        "seed": traj.seed,
        "kind": traj.kind.value,
    }
    info.update(meta or {})
    text = json.dumps(info, indent=2, sort_keys=True)
    (directory / "meta.json").write_text(text + "\n")
    return directory


def read_video(
    directory: Union[str, Path],
) -> Tuple[VideoTensor, TimedTrajectory, Dict[str, Any]]:
    from natsort import natsorted

    directory = Path(directory)
    meta = json.loads((directory / "meta.json").read_text())
    frame_files = natsorted(directory.glob("frame_*.ppm"), key=str)
    if not frame_files:
        raise FileNotFoundError(f"{directory}: no frames")
    frames = []
    for path in frame_files:
        with io.open(path, mode="r") as fp:
            frames.append(fp.read())
    depth = None
    depth_files = natsorted(directory.glob("depth_*.pfm"), key=str)
    if depth_files:
        depth = []
        for path in depth_files:
            with io.open(path, mode="r") as fp:
                depth.append(fp.read())
        depth = np.stack(depth)
    traj = read_trajectory(directory / "poses.jsonl")
    video = VideoTensor.from_uint8(np.stack(frames), meta.get("fps", traj.fps), depth)
    return video, traj, meta


# Variables:
# End:
