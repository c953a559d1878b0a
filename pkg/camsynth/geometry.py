# -*- coding: utf-8 -*-
# -*- mode: python -*-
"""Rigid-body camera math, pinhole projection and Plücker embeddings.

Conventions used everywhere in camsynth:

- world coordinates are right-handed with +y up; units are meters
- a CameraPose maps world points into the camera *body* frame
  (x right, y up, the camera looks down -z): p_cam = R @ p_world + t
- the pinhole law is applied in the *optical* frame (x right, y down,
  z forward), which is the body frame flipped by diag(1, -1, -1). Image rows
  grow downward and pixel (u, v) has its center at (u + 0.5, v + 0.5).
- angles are radians inside this module
"""
import math
from dataclasses import dataclass
from typing import Any, Dict, Sequence, Tuple

import numpy as np
from scipy.spatial.transform import Rotation

ORTHO_TOL = 1e-9
BODY_TO_OPTICAL = np.diag([1.0, -1.0, -1.0])

Vector = Sequence[float]


class DegenerateFrame(ValueError):
    """look_at cannot build a frame (eye == target, or up parallel to the view)"""


class BehindCamera(ValueError):
    """a point does not have positive depth in front of the camera"""


class NotARotation(ValueError):
    """a matrix is not a proper rotation"""


class OutOfRange(ValueError):
    """an interpolation parameter lies outside [0, 1]"""


def check_rotation(matrix: np.ndarray) -> np.ndarray:
    """Returns matrix as a 3x3 float array, or raises NotARotation"""
    R = np.asarray(matrix, dtype=float)
    if R.shape != (3, 3):
        raise NotARotation(f"rotation must be 3x3, got shape {R.shape}")
    if not np.all(np.isfinite(R)):
        raise NotARotation("rotation has non-finite entries")
    err = np.max(np.abs(R.T @ R - np.eye(3)))
    if err >= ORTHO_TOL:
        raise NotARotation(f"rotation is not orthonormal (error {err:.3g})")
    if np.linalg.det(R) <= 0:
        raise NotARotation("rotation has negative determinant")
    return R


def axis_rotation(axis: Vector, angle: float) -> np.ndarray:
    """Rodrigues rotation matrix for a unit axis and an angle in radians"""
    k = np.asarray(axis, dtype=float)
    k = k / np.linalg.norm(k)
    K = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + math.sin(angle) * K + (1.0 - math.cos(angle)) * (K @ K)


@dataclass(frozen=True, eq=False)
class CameraPose:
    """World-to-camera rigid transform. Arrays are copied and made read-only."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = np.array(self.rotation, dtype=float).reshape(3, 3)
        t = np.array(self.translation, dtype=float).reshape(3)
        check_rotation(R)
        if not np.all(np.isfinite(t)):
            raise ValueError("translation has non-finite entries")
        R.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    def __eq__(self, other: Any) -> bool:
        if not isinstance(other, CameraPose):
            return NotImplemented
        return np.array_equal(self.rotation, other.rotation) and np.array_equal(
            self.translation, other.translation
        )

    __hash__ = None

    def __repr__(self) -> str:
        c = self.center
        return f"<CameraPose center=({c[0]:.3f}, {c[1]:.3f}, {c[2]:.3f})>"

    @classmethod
    def identity(cls) -> "CameraPose":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_center(cls, rotation: np.ndarray, center: Vector) -> "CameraPose":
        R = np.asarray(rotation, dtype=float)
        return cls(R, -(R @ np.asarray(center, dtype=float)))

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> "CameraPose":
        M = np.asarray(matrix, dtype=float)
        return cls(M[:3, :3], M[:3, 3])

    def to_matrix(self) -> np.ndarray:
        M = np.eye(4)
        M[:3, :3] = self.rotation
        M[:3, 3] = self.translation
        return M

    @property
    def center(self) -> np.ndarray:
        """Camera center in world coordinates"""
        return -(self.rotation.T @ self.translation)

    @property
    def right(self) -> np.ndarray:
        return self.rotation[0].copy()

    @property
    def up(self) -> np.ndarray:
        return self.rotation[1].copy()

    @property
    def forward(self) -> np.ndarray:
        return -self.rotation[2]


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole intrinsics in pixels"""

    focal_px: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (math.isfinite(self.focal_px) and self.focal_px > 0):
            raise ValueError(f"focal length must be positive, got {self.focal_px}")
        if int(self.width) <= 0 or int(self.height) <= 0:
            raise ValueError("image dimensions must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")

    @classmethod
    def centered(cls, width: int, height: int, focal_px: float) -> "Intrinsics":
        return cls(float(focal_px), width / 2.0, height / 2.0, int(width), int(height))

    @property
    def principal_point(self) -> Tuple[float, float]:
        return (self.cx, self.cy)

    @property
    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.focal_px, 0.0, self.cx], [0.0, self.focal_px, self.cy], [0, 0, 1]]
        )

    def with_focal(self, focal_px: float) -> "Intrinsics":
        return Intrinsics(float(focal_px), self.cx, self.cy, self.width, self.height)


@dataclass(frozen=True, eq=False)
class PluckerImage:
    """Per-pixel Plücker coordinates: unit directions d and moments m = o x d"""

    directions: np.ndarray
    moments: np.ndarray

    @property
    def shape(self) -> Tuple[int, int]:
        return self.directions.shape[:2]

    def as_array(self) -> np.ndarray:
        """H x W x 6 array with channels ordered (d, m)"""
        return np.concatenate([self.directions, self.moments], axis=-1)


def look_at(eye: Vector, target: Vector, up: Vector = (0.0, 1.0, 0.0)) -> CameraPose:
    """Pose of a camera at eye whose forward (-z) axis points at target"""
    eye = np.asarray(eye, dtype=float)
    f = np.asarray(target, dtype=float) - eye
    fn = np.linalg.norm(f)
    if fn == 0:
        raise DegenerateFrame("eye and target coincide")
    f = f / fn
    up = np.asarray(up, dtype=float)
    r = np.cross(f, up)
    rn = np.linalg.norm(r)
    if rn <= 1e-12 * max(np.linalg.norm(up), 1.0):
        raise DegenerateFrame("up vector is parallel to the view direction")
    r = r / rn
    u = np.cross(r, f)
    R = np.stack([r, u, -f])
    return CameraPose(R, -(R @ eye))


def relative_pose(a: CameraPose, b: CameraPose) -> CameraPose:
    """Transform taking points in a's camera frame to b's camera frame"""
    if a == b:
        return CameraPose.identity()
    R = b.rotation @ a.rotation.T
    return CameraPose(R, b.translation - R @ a.translation)


def compose_pose(a: CameraPose, rel: CameraPose) -> CameraPose:
    """Applies rel after a; compose_pose(a, relative_pose(a, b)) reproduces b"""
    return CameraPose(
        rel.rotation @ a.rotation, rel.rotation @ a.translation + rel.translation
    )


def invert_pose(pose: CameraPose) -> CameraPose:
    Rt = pose.rotation.T
    return CameraPose(Rt, -(Rt @ pose.translation))


def to_optical(pose: CameraPose, points: np.ndarray) -> np.ndarray:
    """World points (..., 3) in the optical frame (x right, y down, z forward)"""
    body = np.asarray(points, dtype=float) @ pose.rotation.T + pose.translation
    return body * np.array([1.0, -1.0, -1.0])


def project(intr: Intrinsics, pose: CameraPose, point: Vector) -> Tuple[float, float]:
    """Pixel coordinates (u, v) of a world point"""
    x, y, z = to_optical(pose, point)
    if not z > 0:
        raise BehindCamera(f"point has depth {z:.3g}")
    return (intr.cx + intr.focal_px * x / z, intr.cy + intr.focal_px * y / z)


def pixel_rays(intr: Intrinsics) -> np.ndarray:
    """Unnormalized body-frame ray directions through every pixel center (H x W x 3)"""
    u = np.arange(intr.width) + 0.5
    v = np.arange(intr.height) + 0.5
    uu, vv = np.meshgrid(u, v)
    x = (uu - intr.cx) / intr.focal_px
    y = (vv - intr.cy) / intr.focal_px
    return np.stack([x, -y, -np.ones_like(x)], axis=-1)


def plucker_map(intr: Intrinsics, pose: CameraPose) -> PluckerImage:
    """Plücker embedding of the ray through every pixel center"""
    d = pixel_rays(intr) @ pose.rotation
    d /= np.linalg.norm(d, axis=-1, keepdims=True)
    o = pose.center
    m = np.cross(np.broadcast_to(o, d.shape), d)
    return PluckerImage(d, m)


def pool_plucker(pmap: PluckerImage, factor: int) -> PluckerImage:
    """Average-pool a Plücker image by an integer factor.

    Directions are averaged and renormalized; moments are divided by the same
    norm, which keeps m = o x d exact for a single camera center.
    """
    if factor < 1:
        raise ValueError("pooling factor must be >= 1")
    H, W = pmap.shape
    h, w = H // factor, W // factor
    if h == 0 or w == 0:
        raise ValueError("pooling factor exceeds the image size")

    def pool(a):
        a = a[: h * factor, : w * factor]
        return a.reshape(h, factor, w, factor, 3).mean(axis=(1, 3))

    d = pool(pmap.directions)
    n = np.linalg.norm(d, axis=-1, keepdims=True)
    return PluckerImage(d / n, pool(pmap.moments) / n)


def rotation_angle(Ra: np.ndarray, Rb: np.ndarray) -> float:
    """Geodesic angle (radians, in [0, pi]) between two rotations.

    This is arccos((trace(Ra Rb^T) - 1) / 2). Small angles are computed from
    the chordal distance |Ra - Rb|_F = 2 sqrt(2) sin(angle / 2) instead, which
    stays accurate (and exactly zero for equal inputs) where arccos does not.
    """
    Ra = check_rotation(Ra)
    Rb = check_rotation(Rb)
    half_sin = np.linalg.norm(Ra - Rb) / (2.0 * math.sqrt(2.0))
    if half_sin < 0.7:
        return float(2.0 * np.arcsin(half_sin))
    # sum(Ra * Rb) is trace(Ra @ Rb.T) and is symmetric bit-for-bit
    c = (np.sum(Ra * Rb) - 1.0) / 2.0
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


def _log_rotation(R: np.ndarray) -> np.ndarray:
    """Rotation vector of R using the quaternion with non-negative scalar part.

    When the scalar part is zero (a half turn) the sign is fixed so that the
    first nonzero vector component is positive.
    """
    q = Rotation.from_matrix(R).as_quat()
    v, w = q[:3], q[3]
    if w < 0 or (w == 0 and v[np.flatnonzero(v)[0]] < 0):
        v, w = -v, -w
    s = np.linalg.norm(v)
    if s == 0:
        return np.zeros(3)
    return v / s * (2.0 * math.atan2(s, w))


def interpolate_pose(a: CameraPose, b: CameraPose, s: float) -> CameraPose:
    """Slerp the orientation and lerp the camera center between two poses"""
    if not 0.0 <= s <= 1.0:
        raise OutOfRange(f"interpolation parameter {s} outside [0, 1]")
    if s == 0.0 or a == b:
        return a
    if s == 1.0:
        return b
    # camera-to-world rotations
    Ca, Cb = a.rotation.T, b.rotation.T
    rotvec = _log_rotation(Ca.T @ Cb)
    Cs = Ca @ Rotation.from_rotvec(s * rotvec).as_matrix()
    center = (1.0 - s) * a.center + s * b.center
    return CameraPose.from_center(Cs.T, center)


def pose_features(a: CameraPose, b: CameraPose) -> np.ndarray:
    """Axis-angle and translation of relative_pose(a, b) as a 6-vector"""
    rel = relative_pose(a, b)
    return np.concatenate([_log_rotation(rel.rotation), rel.translation])


def pose_record(pose: CameraPose, intr: Intrinsics) -> Dict[str, Any]:
    """JSON-ready record for one frame"""
    return {
        "R": [float(x) for x in pose.rotation.ravel()],
        "t": [float(x) for x in pose.translation],
        "f_px": float(intr.focal_px),
        "cx": float(intr.cx),
        "cy": float(intr.cy),
        "w": int(intr.width),
        "h": int(intr.height),
    }


def pose_from_record(record: Dict[str, Any]) -> Tuple[CameraPose, Intrinsics]:
    try:
        pose = CameraPose(np.reshape(record["R"], (3, 3)), record["t"])
        intr = Intrinsics(
            float(record["f_px"]),
            float(record["cx"]),
            float(record["cy"]),
            int(record["w"]),
            int(record["h"]),
        )
    except KeyError as err:
        raise ValueError(f"pose record is missing field {err}") from err
    return pose, intr


# Variables:
# End:
