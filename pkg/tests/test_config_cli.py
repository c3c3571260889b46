import numpy as np
import pytest

from conftest import random_pose
from midipose.autodiff.layers import zero_
from midipose.cli import infer_pose, main
from midipose.config import ConfigError, load_config
from midipose.csi import KEYPOINT_NAMES, MotionKind
from midipose.dataset import load_dataset
from midipose.features import WindowConfig, extract_features
from midipose.model import MiDiPose, Normalizer, PoseScaler, load_model, predict, save_model
from midipose.synth import SceneLayout, simulate_csi, static_script, synthesize
from midipose.dataset import write_dataset


def _toml(tmp_path, text):
    path = tmp_path / "run.toml"
    path.write_text(text)
    return str(path)


def test_defaults():
    cfg = load_config()
    assert (cfg.train.batch, cfg.train.epochs, cfg.train.lr, cfg.train.momentum) == (64, 100, 0.008, 0.9)
    assert (cfg.train.decay_factor, cfg.train.decay_every) == (0.5, 10)
    assert cfg.eval.thresholds == [5, 10, 20, 30]
    assert len(cfg.scene.motions) == 5 and cfg.features.window == 25


def test_unknown_key_names_offender(tmp_path):
    with pytest.raises(ConfigError, match=r"features\.windw"):
        load_config(_toml(tmp_path, "[features]\nwindw = 10\n"))
    with pytest.raises(ConfigError, match="section"):
        load_config(_toml(tmp_path, "[feature]\nwindow = 10\n"))


def test_type_and_value_validation(tmp_path):
    with pytest.raises(ConfigError, match="integer"):
        load_config(_toml(tmp_path, "[train]\nbatch = 6.5\n"))
    with pytest.raises(ConfigError, match="train.model"):
        load_config(overrides=["train.model=transformer"])
    with pytest.raises(ConfigError, match="eval.slices"):
        load_config(overrides=['eval.slices=["process:jog"]'])
    with pytest.raises(ConfigError, match="section.key=value"):
        load_config(overrides=["window=3"])


def test_precedence(tmp_path, monkeypatch):
    path = _toml(tmp_path, "[train]\nseed = 4\nepochs = 7\n[scene]\nsnr_db = \"none\"\n")
    cfg = load_config(path)
    assert cfg.train.seed == 4 and cfg.train.epochs == 7 and cfg.scene.snr_db is None
    monkeypatch.setenv("MIDIPOSE_SEED", "11")
    cfg = load_config(path)
    assert cfg.train.seed == 11 and cfg.scene.seed == 11
    cfg = load_config(path, ["train.seed=2"])
    assert cfg.train.seed == 2 and cfg.scene.seed == 11
    monkeypatch.setenv("MIDIPOSE_SEED", "x")
    with pytest.raises(ConfigError):
        load_config(path)


def _small_run(tmp_path):
    return [
        "--dataset", str(tmp_path / "d.mdp"),
        "--checkpoint", str(tmp_path / "m.mdpw"),
        "--set", f'paths.loss_log="{tmp_path / "loss.log"}"',
        "--set", f'paths.reports="{tmp_path / "reports"}"',
        "--set", 'scene.motions=["squat", "marktime"]',
        "--set", "scene.duration_s=4",
        "--set", "train.batch=16",
    ]


def test_cli_end_to_end(tmp_path, capsys):
    common = _small_run(tmp_path)
    assert main(["synth", *common]) == 0
    out = capsys.readouterr().out
    assert "200 CSI frames, 120 labels" in out and "marktime" in out
    assert (tmp_path / "d.mdp.manifest.json").exists()

    assert main(["train", *common, "--epochs", "2"]) == 0
    log = (tmp_path / "loss.log").read_text().splitlines()
    assert len(log) == 2 and float(log[1].split()[2]) < float(log[0].split()[2])
    first = (tmp_path / "m.mdpw").read_bytes()
    assert main(["train", *common, "--epochs", "2"]) == 0
    assert (tmp_path / "m.mdpw").read_bytes() == first

    assert main(["train", *common, "--epochs", "1", "--model", "baseline", "--checkpoint", str(tmp_path / "b.mdpw")]) == 0
    capsys.readouterr()
    assert main(["eval", *common, "--compare", str(tmp_path / "b.mdpw")]) == 0
    text = capsys.readouterr().out
    assert "midipose" in text and "baseline" in text and "PCK30" in text
    csv = (tmp_path / "reports" / "pck.csv").read_bytes()
    assert main(["eval", *common, "--compare", str(tmp_path / "b.mdpw")]) == 0
    assert (tmp_path / "reports" / "pck.csv").read_bytes() == csv

    capsys.readouterr()
    assert main(["infer", *common, "--index", "0"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 17 and lines[0].split()[0] == "nose"

    # The printed values are the library prediction for that frame's aligned row.
    model, norm = load_model(tmp_path / "m.mdpw")
    ds = load_dataset(tmp_path / "d.mdp")
    feats = extract_features(ds.frames, WindowConfig(25))
    want = predict(model, feats.data[[0]], norm)[0]
    got = np.array([[float(v) for v in l.split()[1:]] for l in lines])
    assert np.array_equal(got, want)

    assert main(["infer", *common, "--index", "200"]) == 1
    assert "0..199" in capsys.readouterr().err


def test_cli_errors(tmp_path, capsys):
    assert main(["synth", "--set", "features.windw=10"]) == 1
    assert "features.windw" in capsys.readouterr().err
    assert main(["train", "--dataset", str(tmp_path / "missing.mdp")]) == 2
    assert "does not exist" in capsys.readouterr().err
    with pytest.raises(SystemExit) as exc:
        main(["train", "--model", "transformer"])
    assert exc.value.code == 1
    bad = tmp_path / "bad.mdp"
    bad.write_bytes(b"junk")
    assert main(["eval", "--dataset", str(bad)]) == 2


def test_cli_gradcheck_fault_injection(capsys):
    assert main(["gradcheck", "--seeds", "1", "--inject-fault"]) == 3
    out = capsys.readouterr().out
    names = [l.split()[0] for l in out.splitlines()[:-1]]
    assert len(names) == len(set(names)) == 11
    assert "FAIL" in out


def test_infer_pose_uses_causal_slice():
    rec = synthesize(["lunge"], 3, seed=1)
    rng = np.random.default_rng(0)
    model = MiDiPose()
    model.pose_scaler = PoseScaler(rng.uniform(size=34), rng.uniform(0.01, 0.1, size=34))
    feats = extract_features(rec.frames)
    norm = Normalizer.fit(feats.data)
    for index in (0, 1, 10, 40, 74):
        pose = infer_pose(model, norm, rec.frames, index, WindowConfig())
        assert np.allclose(pose.keypoints, predict(model, feats.data[[index]], norm)[0])


def test_perfect_stub_checkpoint_scores_100(tmp_path, capsys):
    # A frozen skeleton and a model that ignores its input and emits that skeleton.
    layout = SceneLayout()
    pose = random_pose(np.random.default_rng(5))
    script = static_script(pose, 6, kind=MotionKind.SQUAT, layout=layout)
    frames = simulate_csi(script, layout, seed=2)
    from midipose.csi import LabeledFrame, Pose2D

    labels = [LabeledFrame(Pose2D(pose), t, MotionKind.SQUAT) for t in script.times]
    write_dataset(frames, labels, tmp_path / "s.mdp")
    model = zero_(MiDiPose())
    model.pose_scaler = PoseScaler(pose.ravel(), np.ones(34))
    feats = extract_features(frames)
    save_model(model, Normalizer.fit(feats.data), tmp_path / "s.mdpw")
    args = ["eval", "--dataset", str(tmp_path / "s.mdp"), "--checkpoint", str(tmp_path / "s.mdpw"),
            "--set", f'paths.reports="{tmp_path / "r"}"']
    assert main(args) == 0
    rows = (tmp_path / "r" / "pck.csv").read_text().splitlines()[1:]
    assert rows and all(r.endswith(",100.0000") for r in rows)
    assert {r.split(",")[2] for r in rows} == {"5", "10", "20", "30"}
    assert KEYPOINT_NAMES[0] == "nose"
