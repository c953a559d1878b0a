# -*- coding: utf-8 -*-
# -*- mode: python -*-
"""
Trajectory accuracy, frame-difference (flow) loss, and toy evaluation scores.

Trajectory errors re-base both sequences on their first frame, normalize
translations by the largest ground-truth translation, and average over
frames 1..K-1. The flow loss is the mean absolute difference between the
frame-to-frame changes of two videos, averaged over the K-1 gaps.
"""
import logging
import math
import warnings
from dataclasses import dataclass
from typing import Any, Dict, List, Sequence, Tuple, Union

import numpy as np

from .geometry import relative_pose, rotation_angle
from .render import VideoTensor
from .trajectory import TimedTrajectory

log = logging.getLogger("camsynth.metrics")

STATS_EPSILON = 1e-6

VideoLike = Union[VideoTensor, np.ndarray]


class LengthMismatch(ValueError):
    """Two trajectories have different numbers of frames"""


class ShapeMismatch(ValueError):
    """Two tensors that must match in shape do not"""


class DegenerateLength(ValueError):
    """A sequence is too short for the requested measure"""


class SingularStats(UserWarning):
    """Reference covariance is singular; the regularized inverse was used"""


class FlatVideo(UserWarning):
    """No motion could be estimated; the correlation is reported as 0"""


@dataclass(frozen=True)
class TrajectoryError:
    trans_err: float
    rot_err: float
    per_frame_trans: Tuple[float, ...]
    per_frame_rot: Tuple[float, ...]


def _frames(video: VideoLike) -> np.ndarray:
    if isinstance(video, VideoTensor):
        return video.frames
    return np.asarray(video, dtype=float)


def _rebased(traj: TimedTrajectory):
    first = traj.poses[0]
    return [relative_pose(first, p) for p in traj.poses]


def trajectory_error(gt: TimedTrajectory, est: TimedTrajectory) -> TrajectoryError:
    if len(gt) != len(est):
        raise LengthMismatch(f"trajectories have {len(gt)} and {len(est)} frames")
    if len(gt) < 2:
        raise DegenerateLength("trajectory errors need at least 2 frames")
    g = _rebased(gt)
    e = _rebased(est)
    scale = max(np.linalg.norm(p.translation) for p in g)
    if scale == 0:
        scale = 1.0
    trans = tuple(
        float(np.linalg.norm((pe.translation - pg.translation) / scale))
        for pg, pe in zip(g[1:], e[1:])
    )
    rot = tuple(
        math.degrees(rotation_angle(pe.rotation, pg.rotation))
        for pg, pe in zip(g[1:], e[1:])
    )
    return TrajectoryError(float(np.mean(trans)), float(np.mean(rot)), trans, rot)


def trans_err(gt: TimedTrajectory, est: TimedTrajectory) -> float:
    """Mean scale-normalized translation error over frames 1..K-1"""
    return trajectory_error(gt, est).trans_err


def rot_err(gt: TimedTrajectory, est: TimedTrajectory) -> float:
    """Mean rotation error in degrees over frames 1..K-1"""
    return trajectory_error(gt, est).rot_err


def flow_gaps(pred: VideoLike, gt: VideoLike) -> np.ndarray:
    """Per-gap mean absolute difference of consecutive-frame changes"""
    p, g = _frames(pred), _frames(gt)
    if p.shape != g.shape:
        raise ShapeMismatch(f"videos have shapes {p.shape} and {g.shape}")
    if p.shape[0] < 2:
        raise DegenerateLength("flow loss needs at least 2 frames")
    diff = np.abs((p[1:] - p[:-1]) - (g[1:] - g[:-1]))
    return diff.reshape(diff.shape[0], -1).mean(axis=1)


def flow_loss(pred: VideoLike, gt: VideoLike) -> float:
    return float(flow_gaps(pred, gt).mean())


@dataclass(frozen=True)
class ChannelStats:
    """Per-channel mean and channel covariance of a set of videos"""

    mean: np.ndarray
    cov: np.ndarray

    @classmethod
    def from_videos(cls, videos: Sequence[VideoLike]) -> "ChannelStats":
        frames = [_frames(v) for v in videos]
        pixels = np.concatenate([f.reshape(-1, f.shape[-1]) for f in frames])
        mean = pixels.mean(axis=0)
        centered = pixels - mean
        cov = centered.T @ centered / len(pixels)
        return cls(mean, cov)

    @classmethod
    def from_video(cls, video: VideoLike) -> "ChannelStats":
        return cls.from_videos([video])

    def to_dict(self) -> Dict[str, Any]:
        return {"mean": self.mean.tolist(), "cov": self.cov.tolist()}

    @classmethod
    def from_dict(cls, data) -> "ChannelStats":
        mean = np.asarray(data["mean"], dtype=float)
        return cls(mean, np.asarray(data["cov"], dtype=float))


def style_score(video: VideoLike, ref: ChannelStats) -> float:
    """Distance between a video's color statistics and reference statistics.

    Mahalanobis distance of the channel means under the regularized reference
    covariance (cov + 1e-6 I) plus the Frobenius norm of the covariance
    difference.
    """
    stats = ChannelStats.from_video(video)
    C = ref.cov
    if np.linalg.matrix_rank(C) < C.shape[0]:
        warnings.warn(
            SingularStats(
                "reference covariance is singular; using the regularized inverse"
            ),
            stacklevel=2,
        )
    C = C + STATS_EPSILON * np.eye(C.shape[0])
    d = stats.mean - ref.mean
    mahal = float(np.sqrt(max(d @ np.linalg.solve(C, d), 0.0)))
    return mahal + float(np.linalg.norm(stats.cov - ref.cov))


def _shift_candidates(max_shift: int) -> List[Tuple[int, int]]:
    r = range(-max_shift, max_shift + 1)
    shifts = ((dx, dy) for dy in r for dx in r)
    return sorted(shifts, key=lambda s: (abs(s[0]) + abs(s[1]), s[1], s[0]))


def estimate_shifts(video: VideoLike, max_shift: int = 3) -> np.ndarray:
    """Integer (dx, dy) global translation between consecutive frames.

    Each shift maximizes the circular cross-correlation of the mean-removed
    frames; ties go to the smallest shift.
    """
    frames = _frames(video)
    candidates = _shift_candidates(max_shift)
    out = np.zeros((frames.shape[0] - 1, 2))
    for k in range(frames.shape[0] - 1):
        a = frames[k] - frames[k].mean()
        b = frames[k + 1] - frames[k + 1].mean()
        best, best_score = (0, 0), -np.inf
        for dx, dy in candidates:
            score = float(np.sum(np.roll(a, (dy, dx), axis=(0, 1)) * b))
            if score > best_score + 1e-12:
                best, best_score = (dx, dy), score
        out[k] = best
    return out


def motion_correlation(
    video: VideoLike, target_disp: np.ndarray, max_shift: int = 3
) -> float:
    """Pearson correlation of estimated and target per-frame displacements.

    Returns 0.0 with a FlatVideo warning when either sequence is constant.
    """
    frames = _frames(video)
    if frames.shape[0] < 3:
        raise DegenerateLength("motion correlation needs at least 3 frames")
    target = np.asarray(target_disp, dtype=float)
    if target.shape != (frames.shape[0] - 1, 2):
        raise ShapeMismatch(f"target displacement must be {(frames.shape[0] - 1, 2)}")
    est = estimate_shifts(frames, max_shift)
    x = np.concatenate([est[:, 0], est[:, 1]])
    y = np.concatenate([target[:, 0], target[:, 1]])
    if np.std(x) == 0 or np.std(y) == 0:
        warnings.warn(
            FlatVideo("displacements are constant; correlation undefined"),
            stacklevel=2,
        )
        return 0.0
    return float(np.corrcoef(x, y)[0, 1])


def trajectory_report(gt: TimedTrajectory, est: TimedTrajectory) -> Dict[str, Any]:
    err = trajectory_error(gt, est)
    return {
        "trans_err": err.trans_err,
        "rot_err": err.rot_err,
        "per_frame": [
            {"frame": k + 1, "trans_err": t, "rot_err": r}
            for k, (t, r) in enumerate(zip(err.per_frame_trans, err.per_frame_rot))
        ],
    }


def flow_report(pred: VideoLike, gt: VideoLike) -> Dict[str, Any]:
    gaps = flow_gaps(pred, gt)
    return {
        "flow_loss": float(gaps.mean()),
        "per_frame": [{"gap": k, "flow_loss": float(v)} for k, v in enumerate(gaps)],
    }


# Variables:
# End:
