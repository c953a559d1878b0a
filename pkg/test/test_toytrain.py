# -*- coding: utf-8 -*-
# -*- mode: python -*-
import csv
import dataclasses

import numpy as np
import pytest

from camsynth import toytrain as tt
from camsynth import toyworld as tw
from camsynth.config import ToyWorldConfig, TrainConfig
from camsynth.dataset import APPEARANCE_SET, CAMERA_SET, NEUTRAL_SET
from camsynth.geometry import Intrinsics, look_at
from camsynth.metrics import ShapeMismatch
from camsynth.trajectory import make_simple, static_trajectory

SHAPE = (2, 4, 4, 3)
MOTIONS = ("truck_left", "pedestal_up")


def small_config(**kwargs):
    params = dict(
        hidden=8, steps=3, base_steps=2, batch_size=2, time_embedding=4, timesteps=10
    )
    params.update(kwargs)
    cfg = TrainConfig(**params)
    cfg.validate()
    return cfg


def training_set(n, static, seed=0):
    rng = np.random.default_rng(seed)
    K = SHAPE[0]
    features = np.zeros((n, 6 * K)) if static else rng.normal(0.0, 0.5, (n, 6 * K))
    return tt.TrainingSet(
        videos=rng.uniform(-1.0, 1.0, (n,) + SHAPE),
        motion_ids=np.full(n, -1) if static else rng.integers(0, len(MOTIONS), n),
        content_ids=rng.integers(0, 2, n),
        virtual=np.ones(n, dtype=bool),
        features=features,
    )


def test_grad_check_linear_model_is_exact():
    model, adapters, _, case = tt.make_probe(nonlinearity="linear")
    # without the flow term the loss is quadratic in every scalar
    assert tt.grad_check(model, adapters, case, lam=0.0) < 1e-7


def test_grad_check_with_flow_term():
    model, adapters, _, probe = tt.make_probe()
    assert tt.grad_check(model, adapters, probe, lam=0.1) < 1e-4


def test_grad_check_trajectory_paradigm():
    model, adapters, delta, probe = tt.make_probe(paradigm="trajectory", seed=3)
    assert delta is not None
    assert tt.grad_check(model, adapters, probe, lam=0.1, delta=delta) < 1e-4


def test_probe_size_is_capped():
    with pytest.raises(ValueError):
        tt.make_probe(video_shape=(4, 8, 8, 3))


def test_zero_adapter_is_a_noop():
    model = tt.init_model(SHAPE, MOTIONS, 2, small_config())
    adapter = tt.init_adapter(model, tt.APPEARANCE, 4, 4.0, seed=1)
    rng = np.random.default_rng(2)
    x = rng.normal(size=(3,) + SHAPE)
    cond = rng.normal(size=(3, model.cond_dim))
    bare = tt.predict_eps(model, [], cond, x, 4)
    assert np.array_equal(bare, tt.predict_eps(model, [adapter], cond, x, 4))


def test_adapters_match_materialized_weights():
    model, adapters, _, probe = tt.make_probe()
    merged = dataclasses.replace(
        model,
        W1=model.W1 + sum(a.delta("W1") for a in adapters),
        W2=model.W2 + sum(a.delta("W2") for a in adapters),
    )
    cond = tt.batch_conditions(model, probe.data, np.arange(len(probe.data)))
    x = probe.data.videos
    a = tt.predict_eps(model, adapters, cond, x, probe.t)
    b = tt.predict_eps(merged, [], cond, x, probe.t)
    assert np.max(np.abs(a - b)) < 1e-10


def test_adapter_shapes():
    model = tt.init_model(SHAPE, MOTIONS, 2, small_config())
    adapter = tt.init_adapter(model, tt.CAMERA, 4, 8.0, seed=0)
    assert adapter.scale == 2.0
    assert adapter.A["W1"].shape == (4, model.in_dim)
    assert adapter.B["W1"].shape == (8, 4)
    assert adapter.A["W2"].shape == (4, 8)
    assert adapter.B["W2"].shape == (model.video_size, 4)
    assert not np.any(adapter.B["W1"])
    with pytest.raises(tt.RankMismatch):
        tt.init_adapter(model, tt.CAMERA, 0, 1.0)
    other = tt.init_model(SHAPE, MOTIONS, 2, small_config(hidden=5))
    with pytest.raises(tt.RankMismatch):
        tt.check_adapter(other, adapter)


def test_init_model_shapes():
    model = tt.init_model(SHAPE, MOTIONS, 3, small_config())
    assert model.video_size == 96
    assert model.cond_dim == len(MOTIONS) + 3 + 1
    assert model.W1.shape == (8, 96 + 4 + model.cond_dim)
    assert model.encoder is None
    with pytest.raises(ShapeMismatch):
        tt.init_model((4, 4, 3), MOTIONS, 3, small_config())
    traj_model = tt.init_model(SHAPE, MOTIONS, 3, small_config(paradigm="trajectory"))
    assert traj_model.encoder.W.shape == (len(MOTIONS), 12)


def test_noise_schedule():
    sched = tt.NoiseSchedule()
    assert sched.T == 100
    assert np.all(np.diff(sched.alpha_bars) < 0)
    assert sched.alpha_bars_prev[0] == 1.0
    with pytest.raises(ValueError):
        tt.NoiseSchedule(beta_start=0.1, beta_end=0.01)
    with pytest.raises(ValueError):
        sched.check(100)


def test_forward_noise_identities():
    sched = tt.NoiseSchedule()
    rng = np.random.default_rng(4)
    x0 = rng.uniform(-1.0, 1.0, SHAPE)
    eps = rng.standard_normal(SHAPE)
    clean = tt.forward_noise(x0, 40, np.zeros(SHAPE), sched)
    assert np.allclose(clean, np.sqrt(sched.alpha_bars[40]) * x0)
    bound = np.sqrt(1.0 - sched.alpha_bars[0]) * np.max(np.abs(eps)) + 1e-4
    assert np.max(np.abs(tt.forward_noise(x0, 0, eps, sched) - x0)) <= bound
    for t in (0, 50, 99):
        x_t = tt.forward_noise(x0, t, eps, sched)
        assert np.allclose(tt.predict_x0(x_t, eps, t, sched), x0, atol=1e-12)
        x0_hat = tt.predict_x0(x_t, np.zeros(SHAPE), t, sched)
        assert np.allclose(x0_hat, x_t / np.sqrt(sched.alpha_bars[t]))
    with pytest.raises(ShapeMismatch):
        tt.forward_noise(x0, 3, eps[:1], sched)


def test_time_embedding():
    emb = tt.time_embedding([0, 5, 9], 6)
    assert emb.shape == (3, 6)
    assert np.array_equal(emb[0], [0, 0, 0, 1, 1, 1])


def test_condition_vector():
    cond = tt.condition_vector("text", 1, 0, True, 2, 3)
    assert np.array_equal(cond, [0, 1, 1, 0, 0, 1])
    cond = tt.condition_vector("text", None, 2, False, 2, 3)
    assert np.array_equal(cond, [0, 0, 0, 0, 1, 0])
    with pytest.raises(ValueError):
        tt.condition_vector("text", 0, 3, False, 2, 3)
    with pytest.raises(ValueError):
        tt.condition_vector("trajectory", 0, 0, False, 2, 3)


def test_trajectory_features():
    intr = Intrinsics.centered(16, 16, 16.0)
    start = look_at((0.0, 1.0, 5.0), (0.0, 0.0, 0.0))
    still = tt.trajectory_features(static_trajectory(start, intr, 5))
    assert still.shape == (30,)
    assert np.allclose(still, 0.0, atol=1e-12)
    traj = make_simple("truck_left", start, 1.0, 9, intr=intr)
    moving = tt.trajectory_features(traj, frames=3)
    assert moving.shape == (18,)
    assert np.any(np.abs(moving) > 0.1)


def test_flow_weight_is_additive():
    model, adapters, _, probe = tt.make_probe()
    data = probe.data
    cond = tt.batch_conditions(model, data, np.arange(len(data)))
    args = (model, adapters, data.videos, probe.t, probe.eps, cond, probe.sched)
    plain, _ = tt.loss_and_grads(*args, lam=0.0, need_grads=False)
    weighted, _ = tt.loss_and_grads(*args, lam=0.5, need_grads=False)
    assert plain.total == plain.l2
    assert weighted.l2 == plain.l2
    assert weighted.total == pytest.approx(plain.l2 + 0.5 * plain.flow)


def test_appearance_stage_freezes_base():
    cfg = small_config()
    model = tt.init_model(SHAPE, MOTIONS, 2, cfg)
    tt.pretrain_base(training_set(6, static=True), model, cfg)
    before = tt.checksum(model.arrays())
    data = training_set(6, static=True, seed=1)
    adapter, history = tt.train_appearance(data, model, cfg)
    assert tt.checksum(model.arrays()) == before
    assert len(history) == cfg.steps
    assert np.any(adapter.B["W1"])


@pytest.mark.parametrize("paradigm", ["text", "trajectory"])
def test_camera_stage_freezes_base_and_appearance(paradigm):
    cfg = small_config(paradigm=paradigm)
    model = tt.init_model(SHAPE, MOTIONS, 2, cfg)
    appearance, _ = tt.train_appearance(training_set(6, static=True), model, cfg)
    base_sum = tt.checksum(model.arrays())
    appearance_sum = tt.checksum(appearance.arrays())
    data = training_set(6, static=False, seed=2)
    camera, history = tt.train_camera(data, model, appearance, cfg)
    assert tt.checksum(model.arrays()) == base_sum
    assert tt.checksum(appearance.arrays()) == appearance_sum
    assert len(history) == cfg.steps
    if paradigm == "trajectory":
        assert isinstance(camera, tt.EncoderDelta)
        assert np.any(camera.W)
    else:
        assert camera.role == tt.CAMERA
        assert np.any(camera.B["W2"])


def test_training_is_deterministic():
    cfg = small_config()
    runs = []
    for _ in range(2):
        model = tt.init_model(SHAPE, MOTIONS, 2, cfg)
        adapter, history = tt.train_appearance(training_set(4, static=True), model, cfg)
        runs.append((tt.checksum(adapter.arrays()), history))
    assert runs[0] == runs[1]


def test_stage_errors():
    cfg = small_config()
    model = tt.init_model(SHAPE, MOTIONS, 2, cfg)
    empty = training_set(0, static=True)
    with pytest.raises(tt.EmptyDataset):
        tt.pretrain_base(empty, model, cfg)
    with pytest.raises(tt.EmptyDataset):
        tt.train_appearance(empty, model, cfg)
    with pytest.raises(ValueError):
        tt.train_appearance(training_set(4, static=False), model, cfg)
    with pytest.raises(tt.MissingAppearanceAdapter):
        tt.train_camera(training_set(4, static=False), model, None, cfg)
    camera, _ = tt.train_camera(
        training_set(4, static=False), model, None, cfg, require_appearance=False
    )
    assert camera.role == tt.CAMERA


def test_sample_is_seeded():
    model, adapters, _, probe = tt.make_probe()
    cond = tt.condition_vector("text", 0, 1, False, 2, 2)
    a = tt.sample(model, adapters, cond, 5, probe.sched)
    b = tt.sample(model, adapters, cond, 5, probe.sched)
    c = tt.sample(model, adapters, cond, 6, probe.sched)
    assert a.shape == SHAPE
    assert np.array_equal(a.frames, b.frames)
    assert not np.array_equal(a.frames, c.frames)
    assert a.frames.min() >= -1.0 and a.frames.max() <= 1.0


def test_checkpoints_round_trip(tmp_path):
    model, adapters, _, _ = tt.make_probe(paradigm="trajectory")
    tt.save_model(tmp_path / "model.ckpt", model)
    back = tt.load_model(tmp_path / "model.ckpt")
    assert back.metadata() == model.metadata()
    assert tt.checksum(back.arrays()) == tt.checksum(model.arrays())
    assert back.noise_schedule().T == 10
    betas = tt.NoiseSchedule(10, 0.05, 0.2).betas
    assert np.array_equal(back.noise_schedule().betas, betas)
    tt.save_adapter(tmp_path / "appearance.ckpt", adapters[0])
    adapter = tt.load_adapter(tmp_path / "appearance.ckpt")
    assert adapter.metadata() == adapters[0].metadata()
    assert tt.checksum(adapter.arrays()) == tt.checksum(adapters[0].arrays())
    delta = tt.init_encoder_delta(model.encoder)
    tt.save_adapter(tmp_path / "camera.ckpt", delta)
    assert isinstance(tt.load_adapter(tmp_path / "camera.ckpt"), tt.EncoderDelta)
    with pytest.raises(ValueError):
        tt.load_model(tmp_path / "camera.ckpt")
    with pytest.raises(ValueError):
        tt.load_adapter(tmp_path / "model.ckpt")


def test_write_curve(tmp_path):
    history = [
        {"step": 0, "loss": 1.5, "l2": 1.0, "flow": 5.0},
        {"step": 1, "loss": 1.25, "l2": 1.0, "flow": 2.5},
    ]
    path = tt.write_curve(tmp_path / "curve.csv", history)
    with open(path, newline="") as fp:
        rows = list(csv.DictReader(fp))
    assert [r["step"] for r in rows] == ["0", "1"]
    assert float(rows[1]["flow"]) == 2.5


def test_posterior_mean_coefficients():
    sched = tt.NoiseSchedule()
    assert sched.coef_x0[0] == pytest.approx(1.0)
    assert sched.coef_xt[0] == 0.0
    # a noiseless x_t steps back to the noiseless x_{t-1}
    stepped = sched.coef_x0 + sched.coef_xt * np.sqrt(sched.alpha_bars)
    assert np.allclose(stepped, np.sqrt(sched.alpha_bars_prev))


def test_zero_output_predicts_scaled_input():
    model = tt.init_model(SHAPE, MOTIONS, 2, small_config())
    model.W2[:] = 0.0
    sched = model.noise_schedule()
    x = np.random.default_rng(3).normal(size=SHAPE)
    cond = tt.condition_vector("text", 0, 1, True, 2, 2)
    for t in (0, 9):
        eps_hat = tt.predict_eps(model, [], cond, x, t)
        assert np.allclose(eps_hat, x / np.sqrt(1.0 - sched.alpha_bars[t]))
        assert np.allclose(tt.predict_x0(x, eps_hat, t, sched), 0.0)


def test_flow_gradient_is_independent_of_noise_level():
    model, adapters, _, probe = tt.make_probe()
    data = probe.data
    cond = tt.batch_conditions(model, data, np.arange(len(data)))
    K = model.video_shape[0]
    # each output gets at most two unit flow residuals per sample
    bound = 2.0 / ((K - 1) * (model.video_size // K))
    for step in (0, probe.sched.T - 1):
        t = np.full(len(data), step)
        args = (model, adapters, data.videos, t, probe.eps, cond, probe.sched)
        _, plain = tt.loss_and_grads(*args, lam=0.0)
        _, weighted = tt.loss_and_grads(*args, lam=1.0)
        diff = np.abs(weighted["b2"] - plain["b2"])
        assert 0.0 < np.max(diff) <= bound + 1e-12


@pytest.fixture(scope="module")
def toy_stages():
    world = tw.make_toy_world(ToyWorldConfig(size=8, frames=4, n_per_set=8))
    cfg = tw.toy_train_config(hidden=32, base_steps=300, steps=500)
    n_contents = world.config.n_contents
    model = tt.init_model(world.video_shape, world.motions, n_contents, cfg)
    tt.pretrain_base(world.training_set(NEUTRAL_SET), model, cfg)
    data = world.training_set(APPEARANCE_SET)
    appearance, history = tt.train_appearance(data, model, cfg)
    return world, cfg, model, appearance, history


def test_appearance_loss_decreases(toy_stages):
    history = toy_stages[-1]
    assert len(history) == 500
    assert tw.window_mean(history, start=-50) < tw.window_mean(history, n=20)


def test_camera_flow_decreases(toy_stages):
    world, cfg, model, appearance, _ = toy_stages
    _, history = tt.train_camera(world.training_set(CAMERA_SET), model, appearance, cfg)
    assert cfg.lam > 0
    assert tw.window_mean(history, start=-50) < tw.window_mean(history, n=20)
    late = tw.window_mean(history, "flow", start=-50)
    assert late < tw.window_mean(history, "flow", n=20)
