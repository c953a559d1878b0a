# -*- coding: utf-8 -*-
# -*- mode: python -*-
"""
A desk-scale video denoiser with appearance and camera adapters.

The denoiser is a two-layer perceptron over the flattened noisy video, a
sinusoidal time embedding and a condition vector. Its second layer estimates
the clean video; the noise prediction follows in closed form,

    eps_hat = (x_t - sqrt(abar_t) * x0_hat) / sqrt(1 - abar_t)

so the full-rank part of eps_hat never has to pass through the hidden layer.
Gradients are written out by hand. Low-rank adapters add (alpha/r)·B·A to
either affine layer, so an adapter whose B is zero leaves the base model
untouched.

Training runs in stages:

1. ``pretrain_base`` fits the base weights to neutral-style static clips.
2. ``train_appearance`` fits the appearance adapter to the static set X_a.
3. ``train_camera`` fits the camera adapter (text paradigm) or the encoder
   delta (trajectory paradigm) to the moving set X_c, with the appearance
   adapter frozen underneath and the loss L2 + lam * flow.

At inference the appearance adapter is left out.
"""
import csv
import hashlib
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from tqdm import tqdm

from . import io
from .config import TrainConfig
from .geometry import pose_features
from .metrics import ShapeMismatch
from .render import VideoTensor
from .trajectory import TimedTrajectory

log = logging.getLogger("camsynth.toytrain")

LAYERS = ("W1", "W2")
APPEARANCE = "appearance"
CAMERA = "camera"
ADAM_BETAS = (0.9, 0.95)
ADAM_EPSILON = 1e-8
MAX_PROBE_ELEMENTS = 512

VideoShape = Tuple[int, int, int, int]

# rng streams per stage, mixed with TrainConfig.seed
_STREAMS = {"init": 10, "base": 20, APPEARANCE: 21, CAMERA: 22}


class RankMismatch(ValueError):
    """An adapter's factor shapes do not fit the model it is applied to"""


class EmptyDataset(ValueError):
    """A training stage was given no samples"""


class MissingAppearanceAdapter(FileNotFoundError):
    """Camera learning was requested without a trained appearance adapter"""


class NoiseSchedule:
    """Linear beta schedule and the quantities derived from it"""

    def __init__(
        self, timesteps: int = 100, beta_start: float = 1e-4, beta_end: float = 0.02
    ):
        if timesteps < 1:
            raise ValueError("schedule needs at least one step")
        if not 0 < beta_start <= beta_end < 1:
            raise ValueError("betas must satisfy 0 < beta_start <= beta_end < 1")
        self.T = timesteps
        self.betas = np.linspace(beta_start, beta_end, timesteps)
        self.alphas = 1.0 - self.betas
        self.alpha_bars = np.cumprod(self.alphas)
        self.alpha_bars_prev = np.concatenate([[1.0], self.alpha_bars[:-1]])
        one_minus = 1.0 - self.alpha_bars
        self.posterior_variance = self.betas * (1.0 - self.alpha_bars_prev) / one_minus
        # mean of q(x_{t-1} | x_t, x0) = coef_x0 * x0 + coef_xt * x_t
        self.coef_x0 = self.betas * np.sqrt(self.alpha_bars_prev) / one_minus
        self.coef_xt = (1.0 - self.alpha_bars_prev) * np.sqrt(self.alphas) / one_minus

    @classmethod
    def from_config(cls, cfg: TrainConfig) -> "NoiseSchedule":
        return cls(cfg.timesteps, cfg.beta_start, cfg.beta_end)

    def check(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=int)
        if np.any(t < 0) or np.any(t >= self.T):
            raise ValueError(f"diffusion step must be in [0, {self.T})")
        return t


def time_embedding(t, dim: int) -> np.ndarray:
    """N x dim sinusoidal embedding of the steps t"""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    half = dim // 2
    freqs = np.exp(-math.log(10000.0) * np.arange(half) / half)
    args = t[:, None] * freqs[None, :]
    return np.concatenate([np.sin(args), np.cos(args)], axis=1)


@dataclass(eq=False)
class TrajectoryEncoder:
    """Affine map from K x 6 relative-pose features to the motion slot"""

    W: np.ndarray
    b: np.ndarray

    @classmethod
    def init(
        cls, frames: int, out_dim: int, rng: np.random.Generator
    ) -> "TrajectoryEncoder":
        n_in = 6 * frames
        W = rng.normal(0.0, 1.0 / math.sqrt(n_in), (out_dim, n_in))
        return cls(W, np.zeros(out_dim))

    def forward(
        self, features: np.ndarray, delta: Optional["EncoderDelta"] = None
    ) -> np.ndarray:
        W, b = self.W, self.b
        if delta is not None:
            W, b = W + delta.W, b + delta.b
        return np.atleast_2d(features) @ W.T + b


@dataclass(eq=False)
class EncoderDelta:
    """Dense fine-tuning delta for the trajectory encoder"""

    W: np.ndarray
    b: np.ndarray

    def arrays(self) -> Dict[str, np.ndarray]:
        return {"W": self.W, "b": self.b}


def init_encoder_delta(encoder: TrajectoryEncoder) -> EncoderDelta:
    return EncoderDelta(np.zeros_like(encoder.W), np.zeros_like(encoder.b))


@dataclass(eq=False)
class Denoiser:
    """Base weights of the noise predictor.

    The input is the flattened noisy video scaled by 1/sqrt(video_size), then
    the time embedding, then the condition vector (motion slot ⊕ one-hot
    content ⊕ virtual bit). The motion slot is a one-hot instruction id in the
    text paradigm and the encoder output in the trajectory paradigm; both
    have len(motions) entries. The output is the clean-video estimate, which
    the model's noise schedule turns into a noise prediction.
    """

    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    video_shape: VideoShape
    motions: Tuple[str, ...]
    n_contents: int
    temb_dim: int = 16
    paradigm: str = "text"
    nonlinearity: str = "tanh"
    encoder: Optional[TrajectoryEncoder] = None
    timesteps: int = 100
    beta_start: float = 1e-4
    beta_end: float = 0.02

    @property
    def video_size(self) -> int:
        return int(np.prod(self.video_shape))

    @property
    def video_gain(self) -> float:
        return 1.0 / math.sqrt(self.video_size)

    def noise_schedule(self) -> NoiseSchedule:
        return NoiseSchedule(self.timesteps, self.beta_start, self.beta_end)

    @property
    def cond_dim(self) -> int:
        return len(self.motions) + self.n_contents + 1

    @property
    def in_dim(self) -> int:
        return self.video_size + self.temb_dim + self.cond_dim

    def arrays(self) -> Dict[str, np.ndarray]:
        out = {"W1": self.W1, "b1": self.b1, "W2": self.W2, "b2": self.b2}
        if self.encoder is not None:
            out.update({"encoder.W": self.encoder.W, "encoder.b": self.encoder.b})
        return out

    def metadata(self) -> Dict[str, Any]:
        return {
            "kind": "denoiser",
            "video_shape": list(self.video_shape),
            "motions": list(self.motions),
            "n_contents": self.n_contents,
            "temb_dim": self.temb_dim,
            "paradigm": self.paradigm,
            "nonlinearity": self.nonlinearity,
            "schedule": [self.timesteps, self.beta_start, self.beta_end],
        }


def init_model(
    video_shape: Sequence[int],
    motions: Sequence[str],
    n_contents: int,
    cfg: TrainConfig,
) -> Denoiser:
    """Seeded initialization of a denoiser for the given video shape and vocabulary.

    The noisy-video block and the virtual-bit column of W1 start at zero.
    Neither is active in the neutral pretraining set (the bit is always 0
    there), so the base model stays exactly indifferent to the bit and only
    adapters learn what it means.
    """
    video_shape = tuple(int(d) for d in video_shape)
    if len(video_shape) != 4:
        raise ShapeMismatch("video shape must be K x H x W x C")
    rng = np.random.default_rng([cfg.seed, _STREAMS["init"]])
    size = int(np.prod(video_shape))
    # the scaled video block counts as one input
    fan_in = 1 + cfg.time_embedding + len(motions) + n_contents + 1
    in_dim = size + fan_in - 1
    encoder = None
    if cfg.paradigm == "trajectory":
        encoder = TrajectoryEncoder.init(video_shape[0], len(motions), rng)
    W1 = rng.normal(0.0, 1.0 / math.sqrt(fan_in), (cfg.hidden, in_dim))
    W1[:, :size] = 0.0
    W1[:, -1] = 0.0
    return Denoiser(
        W1=W1,
        b1=np.zeros(cfg.hidden),
        W2=rng.normal(0.0, 1.0 / math.sqrt(cfg.hidden), (size, cfg.hidden)),
        b2=np.zeros(size),
        video_shape=video_shape,
        motions=tuple(motions),
        n_contents=n_contents,
        temb_dim=cfg.time_embedding,
        paradigm=cfg.paradigm,
        nonlinearity=cfg.nonlinearity,
        encoder=encoder,
        timesteps=cfg.timesteps,
        beta_start=cfg.beta_start,
        beta_end=cfg.beta_end,
    )


@dataclass(eq=False)
class Adapter:
    """Low-rank deltas (alpha/rank)·B·A for each affine layer"""

    role: str
    rank: int
    alpha: float
    A: Dict[str, np.ndarray] = field(default_factory=dict)
    B: Dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def scale(self) -> float:
        return self.alpha / self.rank

    def delta(self, layer: str) -> np.ndarray:
        return self.scale * (self.B[layer] @ self.A[layer])

    def arrays(self) -> Dict[str, np.ndarray]:
        out = {}
        for layer in LAYERS:
            out[f"{layer}.A"] = self.A[layer]
            out[f"{layer}.B"] = self.B[layer]
        return out

    def metadata(self) -> Dict[str, Any]:
        return {
            "kind": "adapter",
            "role": self.role,
            "rank": self.rank,
            "alpha": self.alpha,
        }


def init_adapter(
    model: Denoiser, role: str, rank: int, alpha: float, seed=None
) -> Adapter:
    """A fresh adapter: A is random, B is zero, so the adapter starts as a no-op"""
    if rank < 1:
        raise RankMismatch("adapter rank must be at least 1")
    rng = np.random.default_rng(seed)
    adapter = Adapter(role, rank, float(alpha))
    for layer in LAYERS:
        n_out, n_in = getattr(model, layer).shape
        adapter.A[layer] = rng.normal(0.0, 1.0 / math.sqrt(n_in), (rank, n_in))
        adapter.B[layer] = np.zeros((n_out, rank))
    return adapter


def check_adapter(model: Denoiser, adapter: Adapter) -> None:
    for layer in LAYERS:
        n_out, n_in = getattr(model, layer).shape
        A, B = adapter.A.get(layer), adapter.B.get(layer)
        if A is None or B is None:
            raise RankMismatch(f"{adapter.role} adapter has no factors for {layer}")
        if A.shape != (adapter.rank, n_in) or B.shape != (n_out, adapter.rank):
            raise RankMismatch(
                f"{adapter.role} adapter factors {B.shape} x {A.shape} "
                f"do not fit {layer} {(n_out, n_in)}"
            )


def effective_weights(
    model: Denoiser, adapters: Sequence[Adapter] = ()
) -> Dict[str, np.ndarray]:
    """Layer weights with every active adapter's delta added"""
    weights = {}
    for layer in LAYERS:
        W = getattr(model, layer)
        for adapter in adapters:
            check_adapter(model, adapter)
            W = W + adapter.delta(layer)
        weights[layer] = W
    return weights


def checksum(arrays: Mapping[str, np.ndarray]) -> str:
    """sha256 over names, shapes and float64 contents, in name order"""
    h = hashlib.sha256()
    for name in sorted(arrays):
        a = np.ascontiguousarray(arrays[name], dtype="<f8")
        h.update(name.encode("utf-8"))
        h.update(repr(a.shape).encode("ascii"))
        h.update(a.tobytes())
    return h.hexdigest()


def condition_vector(
    paradigm: str,
    motion_id: Optional[int],
    content_id: int,
    virtual: bool,
    n_motions: int,
    n_contents: int,
    encoder: Optional[TrajectoryEncoder] = None,
    features: Optional[np.ndarray] = None,
    delta: Optional[EncoderDelta] = None,
) -> np.ndarray:
    """Condition for one sample: motion slot ⊕ one-hot content ⊕ virtual bit.

    In the text paradigm the motion slot is the one-hot instruction id (all
    zeros when motion_id is None). In the trajectory paradigm it is the
    encoder output for the sample's pose features.
    """
    if not 0 <= content_id < n_contents:
        raise ValueError(f"content id {content_id} out of range [0, {n_contents})")
    content = np.zeros(n_contents)
    content[content_id] = 1.0
    if paradigm == "text":
        slot = np.zeros(n_motions)
        if motion_id is not None and motion_id >= 0:
            slot[motion_id] = 1.0
    elif paradigm == "trajectory":
        if encoder is None or features is None:
            raise ValueError(
                "the trajectory paradigm needs an encoder and pose features"
            )
        slot = encoder.forward(features, delta)[0]
    else:
        raise ValueError(f"unknown conditioning paradigm '{paradigm}'")
    return np.concatenate([slot, content, [1.0 if virtual else 0.0]])


def trajectory_features(
    traj: TimedTrajectory, frames: Optional[int] = None
) -> np.ndarray:
    """Flattened K x 6 features of each frame relative to the first"""
    poses = traj.poses
    if frames is not None and frames != len(poses):
        idx = np.round(np.linspace(0, len(poses) - 1, frames)).astype(int)
        poses = [poses[i] for i in idx]
    return np.concatenate([pose_features(poses[0], p) for p in poses])


def forward_noise(x0, t: int, eps, sched: NoiseSchedule) -> np.ndarray:
    x0 = x0.frames if isinstance(x0, VideoTensor) else np.asarray(x0, dtype=float)
    eps = np.asarray(eps, dtype=float)
    if x0.shape != eps.shape:
        raise ShapeMismatch(f"video {x0.shape} and noise {eps.shape} differ in shape")
    t = int(sched.check(t))
    ab = sched.alpha_bars[t]
    return math.sqrt(ab) * x0 + math.sqrt(1.0 - ab) * eps


def predict_x0(x_t, eps_hat, t: int, sched: NoiseSchedule) -> np.ndarray:
    t = int(sched.check(t))
    ab = sched.alpha_bars[t]
    x_t = np.asarray(x_t, dtype=float)
    eps_hat = np.asarray(eps_hat, dtype=float)
    return (x_t - math.sqrt(1.0 - ab) * eps_hat) / math.sqrt(ab)


def _batch_inputs(model: Denoiser, x_t: np.ndarray, t, cond: np.ndarray) -> np.ndarray:
    n = x_t.shape[0]
    t = np.broadcast_to(np.asarray(t), (n,))
    cond = np.broadcast_to(np.atleast_2d(cond), (n, model.cond_dim))
    temb = time_embedding(t, model.temb_dim)
    return np.concatenate([x_t * model.video_gain, temb, cond], axis=1)


def _forward(model: Denoiser, weights: Mapping[str, np.ndarray], X: np.ndarray):
    """Hidden activations and the clean-video estimate"""
    a1 = X @ weights["W1"].T + model.b1
    h = np.tanh(a1) if model.nonlinearity == "tanh" else a1
    return h, h @ weights["W2"].T + model.b2


def _eps_from_x0(
    x_t: np.ndarray, x0_hat: np.ndarray, t, sched: NoiseSchedule
) -> np.ndarray:
    ab = sched.alpha_bars[np.asarray(t)]
    if np.ndim(ab):
        ab = np.broadcast_to(ab, (x_t.shape[0],))[:, None]
    return (x_t - np.sqrt(ab) * x0_hat) / np.sqrt(1.0 - ab)


def predict_eps(
    model: Denoiser, adapters: Sequence[Adapter], cond, x_t, t
) -> np.ndarray:
    """Noise prediction for one video (K x H x W x C) or a batch of them"""
    x = np.asarray(x_t, dtype=float)
    single = x.shape == model.video_shape
    if not single and x.shape[1:] != model.video_shape:
        raise ShapeMismatch(
            f"video shape {x.shape} does not match the model's {model.video_shape}"
        )
    x = x.reshape(-1, model.video_size)
    cond = np.asarray(cond, dtype=float)
    if cond.shape[-1] != model.cond_dim:
        raise ShapeMismatch(
            f"condition has {cond.shape[-1]} entries, "
            f"the model expects {model.cond_dim}"
        )
    sched = model.noise_schedule()
    t = sched.check(t)
    X = _batch_inputs(model, x, t, cond)
    _, x0_hat = _forward(model, effective_weights(model, adapters), X)
    out = _eps_from_x0(x, x0_hat, t, sched)
    return out.reshape(model.video_shape if single else (-1,) + model.video_shape)


@dataclass(frozen=True)
class LossTerms:
    total: float
    l2: float
    flow: float
    # sign pattern of the flow residuals; the loss is smooth while it holds
    signs: Optional[np.ndarray] = field(default=None, repr=False, compare=False)


def _flow_term(
    x0_hat: np.ndarray, x0: np.ndarray
) -> Tuple[float, np.ndarray, np.ndarray]:
    """Batch-mean flow loss on N x K x P arrays and its gradient wrt x0_hat"""
    N, K, P = x0_hat.shape
    r = (x0_hat[:, 1:] - x0_hat[:, :-1]) - (x0[:, 1:] - x0[:, :-1])
    value = float(np.abs(r).mean())
    s = np.sign(r) / (N * (K - 1) * P)
    grad = np.zeros_like(x0_hat)
    grad[:, 1:] += s
    grad[:, :-1] -= s
    return value, grad, np.sign(r)


def loss_and_grads(
    model: Denoiser,
    adapters: Sequence[Adapter],
    x0: np.ndarray,
    t: np.ndarray,
    eps: np.ndarray,
    cond: np.ndarray,
    sched: NoiseSchedule,
    lam: float = 0.0,
    need_grads: bool = True,
) -> Tuple[LossTerms, Dict[str, Any]]:
    """Diffusion loss plus lam times the flow loss of the reconstructed x0.

    Returns the loss terms and gradients for the base weights ("W1", "b1",
    "W2", "b2"), for each adapter (keyed by role, then "W1.A" etc.) and for
    the condition rows ("cond").
    """
    N = x0.shape[0]
    K = model.video_shape[0]
    D = model.video_size
    t = sched.check(t)
    x0f = x0.reshape(N, D)
    epsf = eps.reshape(N, D)
    sab = np.sqrt(sched.alpha_bars[t])[:, None]
    s1m = np.sqrt(1.0 - sched.alpha_bars[t])[:, None]
    xt = sab * x0f + s1m * epsf
    X = _batch_inputs(model, xt, t, cond)
    weights = effective_weights(model, adapters)
    h, x0_hat = _forward(model, weights, X)
    r = (xt - sab * x0_hat) / s1m - epsf
    l2 = float(np.mean(r**2))
    # predict_x0 of the noise prediction is the network output itself
    flow, gflow, signs = _flow_term(x0_hat.reshape(N, K, -1), x0.reshape(N, K, -1))
    terms = LossTerms(l2 + lam * flow, l2, flow, signs)
    if not need_grads:
        return terms, {}
    dout = -(sab / s1m) * 2.0 * r / (N * D)
    if lam:
        dout = dout + lam * gflow.reshape(N, D)
    grads: Dict[str, Any] = {"W2": dout.T @ h, "b2": dout.sum(axis=0)}
    dh = dout @ weights["W2"]
    da1 = dh * (1.0 - h**2) if model.nonlinearity == "tanh" else dh
    grads["W1"] = da1.T @ X
    grads["b1"] = da1.sum(axis=0)
    grads["cond"] = (da1 @ weights["W1"])[:, -model.cond_dim:]
    for adapter in adapters:
        g = {}
        for layer in LAYERS:
            dW = grads[layer]
            g[f"{layer}.A"] = adapter.scale * (adapter.B[layer].T @ dW)
            g[f"{layer}.B"] = adapter.scale * (dW @ adapter.A[layer].T)
        grads[adapter.role] = g
    return terms, grads


def encoder_delta_grads(
    model: Denoiser, dcond: np.ndarray, features: np.ndarray
) -> Dict[str, np.ndarray]:
    de = dcond[:, : len(model.motions)]
    return {"W": de.T @ np.atleast_2d(features), "b": de.sum(axis=0)}


@dataclass(eq=False)
class TrainingSet:
    """Videos in [-1, 1] with their condition fields.

    motion_ids holds -1 where the sample carries no motion instruction.
    """

    videos: np.ndarray
    motion_ids: np.ndarray
    content_ids: np.ndarray
    virtual: np.ndarray
    features: np.ndarray

    def __post_init__(self):
        self.videos = np.asarray(self.videos, dtype=float)
        n = self.videos.shape[0]
        self.motion_ids = np.asarray(self.motion_ids, dtype=int).reshape(n)
        self.content_ids = np.asarray(self.content_ids, dtype=int).reshape(n)
        self.virtual = np.asarray(self.virtual, dtype=bool).reshape(n)
        features = np.asarray(self.features, dtype=float)
        if features.ndim != 2 or len(features) != n:
            features = features.reshape(n, -1)
        self.features = features

    def __len__(self) -> int:
        return self.videos.shape[0]

    @property
    def static(self) -> bool:
        return bool(np.all(self.features == 0.0))

    @classmethod
    def from_manifest(
        cls,
        manifest,
        set_name: str,
        motions: Sequence[str],
        video_shape: Sequence[int],
        n_contents: int,
    ) -> "TrainingSet":
        """Loads one set of a dataset root, resampled to video_shape"""
        from scipy.ndimage import zoom

        from .config import FLOORS
        from .dataset import CAMERA_SET, iter_samples
        from .render import read_video
        from .scene import scene_from_json

        K, H, W, _ = video_shape
        videos, motion_ids, contents, virtual, features = [], [], [], [], []
        for entry, path in iter_samples(manifest, set_name):
            video, traj, meta = read_video(path)
            frames = video.frames
            idx = np.round(np.linspace(0, len(frames) - 1, K)).astype(int)
            frames = frames[idx]
            if frames.shape[1:3] != (H, W):
                factors = (1, H / frames.shape[1], W / frames.shape[2], 1)
                frames = zoom(frames, factors, order=1)
            videos.append(np.clip(frames, -1.0, 1.0))
            if "content" in meta:
                content = int(meta["content"])
            else:
                floor = scene_from_json((path / "scene.json").read_text()).floor.value
                content = FLOORS.index(floor)
            contents.append(content % n_contents)
            moving = set_name == CAMERA_SET
            motion_ids.append(motions.index(entry["motion"]) if moving else -1)
            virtual.append(bool(meta.get("virtual_indicator", False)))
            features.append(trajectory_features(traj, K))
        if not videos:
            raise EmptyDataset(f"dataset has no '{set_name}' samples")
        log.info("loaded %d '%s' samples", len(videos), set_name)
        return cls(np.stack(videos), motion_ids, contents, virtual, np.stack(features))


def batch_conditions(
    model: Denoiser,
    data: TrainingSet,
    idx: np.ndarray,
    delta: Optional[EncoderDelta] = None,
    virtual_indicator: bool = True,
) -> np.ndarray:
    n = len(idx)
    n_motions = len(model.motions)
    if model.paradigm == "trajectory":
        slot = model.encoder.forward(data.features[idx], delta)
    else:
        slot = np.zeros((n, n_motions))
        ids = data.motion_ids[idx]
        rows = np.flatnonzero(ids >= 0)
        slot[rows, ids[rows]] = 1.0
    content = np.zeros((n, model.n_contents))
    content[np.arange(n), data.content_ids[idx]] = 1.0
    bit = (data.virtual[idx] & virtual_indicator).astype(float)[:, None]
    return np.concatenate([slot, content, bit], axis=1)


class _Optimizer:
    """In-place gradient descent (or AdamW) with linear warm-up and optional decay"""

    def __init__(
        self, params: Mapping[str, np.ndarray], cfg: TrainConfig, lr: float, steps: int
    ):
        self.params = params
        self.kind = cfg.optimizer
        self.lr = lr
        self.steps = steps
        self.decay = cfg.lr_decay
        self.weight_decay = cfg.weight_decay
        self.warmup = 0
        if cfg.warmup_fraction > 0:
            self.warmup = max(1, math.ceil(cfg.warmup_fraction * steps))
        if self.kind == "adamw":
            self.m = {k: np.zeros_like(p) for k, p in params.items()}
            self.v = {k: np.zeros_like(p) for k, p in params.items()}

    def rate(self, step: int) -> float:
        if self.warmup and step < self.warmup:
            return self.lr * (step + 1) / self.warmup
        if self.decay:
            return self.lr * (self.steps - step) / max(1, self.steps - self.warmup)
        return self.lr

    def step(self, step: int, grads: Mapping[str, np.ndarray]):
        lr = self.rate(step)
        for name, p in self.params.items():
            g = grads[name]
            if self.kind == "gd":
                p -= lr * g
                continue
            b1, b2 = ADAM_BETAS
            self.m[name] = b1 * self.m[name] + (1.0 - b1) * g
            self.v[name] = b2 * self.v[name] + (1.0 - b2) * g**2
            m_hat = self.m[name] / (1.0 - b1 ** (step + 1))
            v_hat = self.v[name] / (1.0 - b2 ** (step + 1))
            p -= lr * (m_hat / (np.sqrt(v_hat) + ADAM_EPSILON) + self.weight_decay * p)


History = List[Dict[str, float]]


def _fit(
    stage: str,
    model: Denoiser,
    data: TrainingSet,
    cfg: TrainConfig,
    active: Sequence[Adapter],
    params: Mapping[str, np.ndarray],
    select_grads,
    steps: int,
    lr: float,
    lam: float,
    delta: Optional[EncoderDelta] = None,
    progress: bool = False,
) -> History:
    if len(data) == 0:
        raise EmptyDataset(f"{stage} stage has no training samples")
    sched = model.noise_schedule()
    rng = np.random.default_rng([cfg.seed, _STREAMS[stage]])
    opt = _Optimizer(params, cfg, lr, steps)
    history: History = []
    log.info("%s stage: %d steps on %d samples", stage, steps, len(data))
    for k in tqdm(range(steps), unit="step", desc=stage, disable=not progress):
        idx = rng.integers(0, len(data), size=cfg.batch_size)
        t = rng.integers(0, sched.T, size=cfg.batch_size)
        eps = rng.standard_normal((cfg.batch_size,) + model.video_shape)
        cond = batch_conditions(model, data, idx, delta, cfg.virtual_indicator)
        terms, grads = loss_and_grads(
            model, active, data.videos[idx], t, eps, cond, sched, lam
        )
        opt.step(k, select_grads(grads, idx))
        history.append(
            {"step": k, "loss": terms.total, "l2": terms.l2, "flow": terms.flow}
        )
        log.debug(
            "%s step %d: loss %.6f (l2 %.6f, flow %.6f)",
            stage,
            k,
            terms.total,
            terms.l2,
            terms.flow,
        )
    if history:
        first, last = history[0]["loss"], history[-1]["loss"]
        log.info("%s stage: loss %.5f -> %.5f", stage, first, last)
    return history


def _base_params(model: Denoiser) -> Dict[str, np.ndarray]:
    return {"W1": model.W1, "b1": model.b1, "W2": model.W2, "b2": model.b2}


def pretrain_base(
    data: TrainingSet, model: Denoiser, cfg: TrainConfig, progress: bool = False
) -> History:
    """Fits the base weights in place; the trajectory encoder stays fixed"""
    return _fit(
        "base",
        model,
        data,
        cfg,
        (),
        _base_params(model),
        lambda grads, idx: grads,
        cfg.base_steps,
        cfg.lr_base,
        0.0,
        progress=progress,
    )


def train_appearance(
    data: TrainingSet, model: Denoiser, cfg: TrainConfig, progress: bool = False
) -> Tuple[Adapter, History]:
    """Step 1: learns the appearance adapter on static clips; base weights stay put"""
    if len(data) == 0:
        raise EmptyDataset("appearance stage has no training samples")
    if not data.static:
        raise ValueError("appearance samples must have static trajectories")
    adapter = init_adapter(
        model,
        APPEARANCE,
        cfg.rank_appearance,
        cfg.alpha_appearance,
        [cfg.seed, _STREAMS[APPEARANCE]],
    )
    history = _fit(
        APPEARANCE,
        model,
        data,
        cfg,
        [adapter],
        adapter.arrays(),
        lambda grads, idx: grads[APPEARANCE],
        cfg.steps,
        cfg.lr_appearance,
        0.0,
        progress=progress,
    )
    return adapter, history


def train_camera(
    data: TrainingSet,
    model: Denoiser,
    appearance: Optional[Adapter],
    cfg: TrainConfig,
    require_appearance: bool = True,
    progress: bool = False,
) -> Tuple[Union[Adapter, EncoderDelta], History]:
    """Step 2: learns camera control on top of the frozen base and appearance adapter.

    The text paradigm trains a camera adapter; the trajectory paradigm
    fine-tunes the encoder through a dense delta. Passing appearance=None
    with require_appearance=False skips step 1 entirely.
    """
    if appearance is None and require_appearance:
        raise MissingAppearanceAdapter(
            "camera learning needs a trained appearance adapter"
        )
    if len(data) == 0:
        raise EmptyDataset("camera stage has no training samples")
    active = [appearance] if appearance is not None else []
    if model.paradigm == "trajectory":
        delta = init_encoder_delta(model.encoder)

        def select(grads, idx):
            return encoder_delta_grads(model, grads["cond"], data.features[idx])

        history = _fit(
            CAMERA, model, data, cfg, active, delta.arrays(), select,
            cfg.steps, cfg.lr_camera, cfg.lam, delta=delta, progress=progress,
        )
        return delta, history
    camera = init_adapter(
        model, CAMERA, cfg.rank_camera, cfg.alpha_camera, [cfg.seed, _STREAMS[CAMERA]]
    )
    history = _fit(
        CAMERA, model, data, cfg, active + [camera], camera.arrays(),
        lambda grads, idx: grads[CAMERA], cfg.steps, cfg.lr_camera, cfg.lam,
        progress=progress,
    )
    return camera, history


def sample(
    model: Denoiser,
    adapters: Sequence[Adapter],
    cond: np.ndarray,
    seed,
    sched: Optional[NoiseSchedule] = None,
    fps: float = 8.0,
) -> VideoTensor:
    """Seeded ancestral denoising from Gaussian noise through all T steps.

    Each step draws from the posterior q(x_{t-1} | x_t, x0_hat) with the
    clean-video estimate clipped to [-1, 1]. The schedule defaults to the
    one the model was trained with.
    """
    sched = sched or model.noise_schedule()
    rng = np.random.default_rng(seed)
    weights = effective_weights(model, adapters)
    cond = np.atleast_2d(np.asarray(cond, dtype=float))
    x = rng.standard_normal(model.video_size)[None, :]
    for t in reversed(range(sched.T)):
        _, x0_hat = _forward(model, weights, _batch_inputs(model, x, t, cond))
        mean = sched.coef_x0[t] * np.clip(x0_hat, -1.0, 1.0) + sched.coef_xt[t] * x
        if t > 0:
            noise = rng.standard_normal(x.shape)
            x = mean + math.sqrt(sched.posterior_variance[t]) * noise
        else:
            x = mean
    return VideoTensor(np.clip(x.reshape(model.video_shape), -1.0, 1.0), fps)


@dataclass(eq=False)
class Probe:
    """A small batch for gradient checking"""

    data: TrainingSet
    t: np.ndarray
    eps: np.ndarray
    sched: NoiseSchedule


def make_probe(
    video_shape: Sequence[int] = (2, 4, 4, 3),
    nonlinearity: str = "tanh",
    paradigm: str = "text",
    hidden: int = 6,
    batch: int = 2,
    seed: int = 0,
) -> Tuple[Denoiser, List[Adapter], Optional[EncoderDelta], Probe]:
    """A random model, two adapters with nonzero B, and a probe batch.

    The probe schedule is short and coarse (10 steps, beta 0.05 to 0.2) so
    the noise-space loss stays within an order of magnitude of the
    clean-video error.
    """
    if int(np.prod(video_shape)) > MAX_PROBE_ELEMENTS:
        raise ValueError(f"probe videos are limited to {MAX_PROBE_ELEMENTS} elements")
    cfg = TrainConfig(
        paradigm=paradigm,
        hidden=hidden,
        nonlinearity=nonlinearity,
        time_embedding=4,
        timesteps=10,
        beta_start=0.05,
        beta_end=0.2,
        seed=seed,
    )
    motions = ("truck_left", "pedestal_up")
    model = init_model(video_shape, motions, 2, cfg)
    rng = np.random.default_rng([seed, 1])
    model.W1[:] = rng.normal(0.0, 0.3, model.W1.shape)
    model.b1[:] = rng.normal(0.0, 0.1, model.b1.shape)
    model.b2[:] = rng.normal(0.0, 0.1, model.b2.shape)
    adapters = []
    for role, rank in ((APPEARANCE, 2), (CAMERA, 3)):
        adapter = init_adapter(model, role, rank, 2.0 * rank, rng)
        for layer in LAYERS:
            adapter.B[layer][:] = rng.normal(0.0, 0.2, adapter.B[layer].shape)
        adapters.append(adapter)
    delta = None
    if paradigm == "trajectory":
        delta = init_encoder_delta(model.encoder)
        delta.W[:] = rng.normal(0.0, 0.1, delta.W.shape)
        delta.b[:] = rng.normal(0.0, 0.1, delta.b.shape)
    K = video_shape[0]
    data = TrainingSet(
        videos=rng.uniform(-1.0, 1.0, (batch,) + tuple(video_shape)),
        motion_ids=rng.integers(-1, len(motions), batch),
        content_ids=rng.integers(0, 2, batch),
        virtual=rng.integers(0, 2, batch).astype(bool),
        features=rng.normal(0.0, 0.5, (batch, 6 * K)),
    )
    sched = NoiseSchedule.from_config(cfg)
    t = rng.integers(0, sched.T, batch)
    eps = rng.standard_normal((batch,) + tuple(video_shape))
    probe = Probe(data, t, eps, sched)
    return model, adapters, delta, probe


def grad_check(
    model: Denoiser,
    adapters: Sequence[Adapter],
    probe: Probe,
    lam: float = 0.1,
    delta: Optional[EncoderDelta] = None,
    h: float = 1e-5,
) -> float:
    """Largest per-tensor relative error of the analytic gradients.

    The analytic gradients are compared with central differences. For each
    tensor the error is the largest absolute difference between the two
    gradients divided by the largest gradient magnitude in that tensor, so
    near-zero entries are judged against the scale of their neighbours.
    Covers the base weights, every adapter factor and, for the trajectory
    paradigm, the encoder delta. Where a flow residual changes sign inside
    the stencil the derivative is taken from a one-sided second-order
    stencil on the side where the loss stays smooth.
    """
    if model.video_size > MAX_PROBE_ELEMENTS:
        raise ValueError(f"probe videos are limited to {MAX_PROBE_ELEMENTS} elements")
    data = probe.data
    idx = np.arange(len(data))

    def evaluate(need_grads):
        cond = batch_conditions(model, data, idx, delta)
        return loss_and_grads(
            model,
            adapters,
            data.videos,
            probe.t,
            probe.eps,
            cond,
            probe.sched,
            lam,
            need_grads,
        )

    def shifted(flat, i, orig, step):
        flat[i] = orig + step
        terms = evaluate(False)[0]
        return terms.total, terms.signs

    base_terms, grads = evaluate(True)
    f0, s0 = base_terms.total, base_terms.signs
    tensors = {f"base.{k}": (p, grads[k]) for k, p in _base_params(model).items()}
    for adapter in adapters:
        for k, p in adapter.arrays().items():
            tensors[f"{adapter.role}.{k}"] = (p, grads[adapter.role][k])
    if delta is not None and model.paradigm == "trajectory":
        for k, g in encoder_delta_grads(model, grads["cond"], data.features).items():
            tensors[f"encoder_delta.{k}"] = (delta.arrays()[k], g)
    worst = 0.0
    for name, (p, analytic) in tensors.items():
        numeric = np.zeros_like(p)
        flat, nflat = p.reshape(-1), numeric.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            f_plus, s_plus = shifted(flat, i, orig, h)
            f_minus, s_minus = shifted(flat, i, orig, -h)
            value = (f_plus - f_minus) / (2.0 * h)
            if lam and not np.array_equal(s_plus, s_minus):
                # a flow residual changes sign inside the stencil: use the smooth side
                if np.array_equal(s_minus, s0):
                    f_far, s_far = shifted(flat, i, orig, -2.0 * h)
                    if np.array_equal(s_far, s0):
                        value = (3.0 * f0 - 4.0 * f_minus + f_far) / (2.0 * h)
                elif np.array_equal(s_plus, s0):
                    f_far, s_far = shifted(flat, i, orig, 2.0 * h)
                    if np.array_equal(s_far, s0):
                        value = (-3.0 * f0 + 4.0 * f_plus - f_far) / (2.0 * h)
            flat[i] = orig
            nflat[i] = value
        scale = max(np.max(np.abs(analytic)), np.max(np.abs(numeric)))
        err = float(np.max(np.abs(analytic - numeric)) / scale) if scale > 0 else 0.0
        log.debug("grad check %s: relative error %.3g", name, err)
        worst = max(worst, err)
    return worst


def save_model(path: Union[str, Path], model: Denoiser) -> None:
    with io.open(path, mode="w") as fp:
        fp.write(model.arrays(), model.metadata())


def load_model(path: Union[str, Path]) -> Denoiser:
    with io.open(path, mode="r") as fp:
        meta, arrays = fp.read()
    if meta.get("kind") != "denoiser":
        raise ValueError(f"{path}: not a denoiser checkpoint")
    encoder = None
    if "encoder.W" in arrays:
        encoder = TrajectoryEncoder(arrays["encoder.W"], arrays["encoder.b"])
    timesteps, beta_start, beta_end = meta.get("schedule", (100, 1e-4, 0.02))
    return Denoiser(
        W1=arrays["W1"],
        b1=arrays["b1"],
        W2=arrays["W2"],
        b2=arrays["b2"],
        video_shape=tuple(meta["video_shape"]),
        motions=tuple(meta["motions"]),
        n_contents=meta["n_contents"],
        temb_dim=meta["temb_dim"],
        paradigm=meta["paradigm"],
        nonlinearity=meta["nonlinearity"],
        encoder=encoder,
        timesteps=int(timesteps),
        beta_start=float(beta_start),
        beta_end=float(beta_end),
    )


def save_adapter(path: Union[str, Path], adapter: Union[Adapter, EncoderDelta]) -> None:
    if isinstance(adapter, EncoderDelta):
        meta = {"kind": "encoder_delta", "role": CAMERA}
    else:
        meta = adapter.metadata()
    with io.open(path, mode="w") as fp:
        fp.write(adapter.arrays(), meta)


def load_adapter(path: Union[str, Path]) -> Union[Adapter, EncoderDelta]:
    with io.open(path, mode="r") as fp:
        meta, arrays = fp.read()
    kind = meta.get("kind")
    if kind == "encoder_delta":
        return EncoderDelta(arrays["W"], arrays["b"])
    if kind != "adapter":
        raise ValueError(f"{path}: not an adapter checkpoint")
    adapter = Adapter(meta["role"], meta["rank"], meta["alpha"])
    for layer in LAYERS:
        adapter.A[layer] = arrays[f"{layer}.A"]
        adapter.B[layer] = arrays[f"{layer}.B"]
    return adapter


def write_curve(path: Union[str, Path], history: History) -> Path:
    """Writes a training curve as CSV with columns step, loss, l2, flow"""
    path = Path(path)
    with open(path, "w", newline="") as fp:
        writer = csv.DictWriter(fp, fieldnames=["step", "loss", "l2", "flow"])
        writer.writeheader()
        writer.writerows(history)
    return path


# Variables:
# End:
