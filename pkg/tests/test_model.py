import numpy as np
import pytest

from midipose.autodiff import Tensor
from midipose.autodiff.layers import zero_
from midipose.checks import TINY
from midipose.csi import Pose2D
from midipose.model import (
    Baseline,
    MiDiPose,
    ModelConfig,
    Normalizer,
    PoseScaler,
    TrainConfig,
    TrainingError,
    baseline_forward,
    build_model,
    load_model,
    loss,
    predict,
    regress_pose,
    save_model,
    train,
)

D = TINY.latent


def _rows(n, seed=0, cfg=TINY):
    return np.random.default_rng(seed).normal(size=(n, cfg.n_subcarriers, cfg.n_rru, 7))


def test_encoder_zero_input_gives_zero_latent():
    model = MiDiPose(TINY)
    z = model.encode(np.zeros(TINY.domain_dim("phase")), "phase")
    assert z.shape == (D,) and not z.data.any()


def test_encoder_length_and_domain_checked():
    model = MiDiPose(TINY)
    with pytest.raises(ValueError, match="expected 96"):
        model.encode(np.zeros(95), "amplitude")
    with pytest.raises(ValueError, match="unknown domain"):
        model.encode(np.zeros(24), "velocity")
    with pytest.raises(ValueError, match="non-finite"):
        model.encode(np.full(24, np.nan), "doppler")


def test_domain_split_matches_channel_groups():
    model = MiDiPose(TINY)
    x = _rows(2)
    parts = model.split_domains(x)
    assert parts["amplitude"].shape == (2, 96)
    assert np.array_equal(parts["doppler"], x[..., 6].reshape(2, -1))
    assert np.array_equal(parts["phase"][0], x[0][..., [4, 5]].ravel())


def _identity_attention(model):
    for name in ("q", "k", "v", "o"):
        lin = getattr(model.attention, name)
        lin.W.data = np.eye(D)
        lin.b.data = np.zeros(D)


def test_fusion_identical_tokens():
    model = MiDiPose(TINY, seed=3)
    _identity_attention(model)
    t = np.random.default_rng(0).normal(size=D)
    out = model.fuse(Tensor(t), Tensor(t), Tensor(t)).data
    m = 2 * t
    image = m + model.token_mlp(Tensor(m)).data
    assert out.shape == (3 * D,)
    assert np.allclose(out.reshape(3, D), image)


def test_fusion_permutation_equivariant():
    model = MiDiPose(TINY, seed=4)
    rng = np.random.default_rng(1)
    z = [Tensor(rng.normal(size=(2, D))) for _ in range(3)]
    base = model.fuse_tokens(*z).data
    perm = model.fuse_tokens(z[2], z[0], z[1]).data
    assert np.allclose(perm, base[:, [2, 0, 1]])


def test_concat_fusion_is_plain_concatenation():
    cfg = ModelConfig(**{**TINY.__dict__, "fusion": "concat"})
    model = MiDiPose(cfg)
    z = [Tensor(np.full(D, float(i))) for i in range(3)]
    assert np.array_equal(model.fuse(*z).data, np.repeat([0.0, 1.0, 2.0], D))


def test_zero_head_regresses_origin():
    model = zero_(MiDiPose(TINY), "head")
    pose = regress_pose(model, np.random.default_rng(0).normal(size=3 * D))
    assert isinstance(pose, Pose2D) and not pose.keypoints.any()


def test_regress_pose_matches_batched_forward():
    model = MiDiPose(TINY, seed=2)
    model.pose_scaler = PoseScaler(np.linspace(0, 1, 34), np.full(34, 0.1))
    x = _rows(3, seed=5)
    parts = model.split_domains(x)
    fused = model.fuse(*(model.encode(parts[d], d) for d in ("amplitude", "phase", "doppler"))).data
    batch = predict(model, x)
    assert np.allclose(regress_pose(model, fused[1]).keypoints, batch[1])


def test_regress_rejects_non_finite():
    with pytest.raises(ValueError, match="non-finite"):
        regress_pose(MiDiPose(TINY), np.full(3 * D, np.inf))


def test_baseline_forward_shape_and_checks():
    model = Baseline(TINY, seed=1)
    pose = baseline_forward(model, _rows(1)[0])
    assert pose.keypoints.shape == (17, 2)
    with pytest.raises(ValueError, match="expected feature rows"):
        model(np.zeros((1, 7, 3, 7)))
    with pytest.raises(ValueError, match="non-finite"):
        model(np.full((1, 8, 3, 7), np.nan))


def test_loss_example():
    gt = Pose2D(np.full((17, 2), 0.5))
    assert loss(Pose2D(np.full((17, 2), 0.6)), gt).item() == pytest.approx(0.01)
    assert loss(gt, gt).item() == 0.0


def test_build_model_rejects_unknown():
    with pytest.raises(ValueError, match="unknown model kind"):
        build_model("transformer")
    with pytest.raises(ValueError):
        ModelConfig(latent=10, heads=4)


def test_normalizer_and_scaler():
    x = np.random.default_rng(0).normal(3, 2, size=(50, 4))
    x[:, 1] = 7.0
    norm = Normalizer.fit(x)
    z = norm(x)
    assert np.allclose(z.mean(0), 0) and np.allclose(z[:, [0, 2, 3]].std(0), 1)
    assert np.all(z[:, 1] == 0)
    y = np.random.default_rng(1).uniform(size=(20, 17, 2))
    s = PoseScaler.fit(y)
    assert np.allclose(s.decode(s.encode(y)), y.reshape(20, -1))


@pytest.mark.parametrize("kind", ["midipose", "baseline"])
def test_checkpoint_round_trip(tmp_path, kind):
    x = _rows(12, seed=6)
    y = np.random.default_rng(7).uniform(size=(12, 34))
    res = train(x, y, kind, TrainConfig(batch_size=4, epochs=2), TINY)
    path = tmp_path / "m.mdpw"
    save_model(res.model, res.normalizer, path)
    model, norm = load_model(path, TINY)
    assert model.kind == kind
    # Checkpoints hold f32, so compare at that precision.
    assert np.allclose(predict(model, x, norm), predict(res.model, x, res.normalizer), atol=1e-4)
    with pytest.raises(ValueError, match="expected"):
        load_model(path, TINY, kind="baseline" if kind == "midipose" else "midipose")


def test_checkpoint_shape_mismatch(tmp_path):
    res = train(_rows(8), np.zeros((8, 34)), "midipose", TrainConfig(batch_size=4, epochs=1), TINY)
    path = tmp_path / "m.mdpw"
    save_model(res.model, res.normalizer, path)
    with pytest.raises(ValueError):
        load_model(path, ModelConfig())


def test_training_is_deterministic():
    x = _rows(32, seed=9)
    y = np.random.default_rng(3).uniform(size=(32, 34))
    cfg = TrainConfig(batch_size=8, epochs=12, seed=2)
    a = train(x, y, "midipose", cfg, TINY)
    b = train(x, y, "midipose", cfg, TINY)
    assert a.history == b.history
    assert a.loss_log() == b.loss_log()
    assert a.lrs[0] == pytest.approx(0.008) and a.lrs[10] == pytest.approx(0.004)
    assert a.loss_log().splitlines()[0].startswith("0 0.008 ")


@pytest.mark.parametrize("kind", ["midipose", "baseline"])
def test_training_learns_a_simple_map(kind):
    x = _rows(64, seed=9)
    s = x[..., 0].mean(axis=(1, 2))
    y = 0.5 + 0.1 * np.outer(s, np.linspace(-1, 1, 34))
    res = train(x, y, kind, TrainConfig(batch_size=8, epochs=20, seed=2, base_lr=0.05), TINY)
    assert res.history[-1] < 0.25 * res.history[0]


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_training_errors():
    x = _rows(4)
    with pytest.raises(TrainingError, match="batch size"):
        train(x, np.zeros((4, 34)), "midipose", TrainConfig(batch_size=8, epochs=1), TINY)
    with pytest.raises(TrainingError, match="empty"):
        train(x[:0], np.zeros((0, 34)), "midipose", TrainConfig(epochs=1), TINY)
    with pytest.raises(TrainingError, match="non-finite"):
        y = np.random.default_rng(0).normal(size=(4, 34))
        train(x, y, "midipose", TrainConfig(batch_size=2, epochs=20, base_lr=1e8), TINY)
