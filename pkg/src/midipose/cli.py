"""``midipose`` command-line entry point.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure,
3 gradient-check failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

from .alignment import SplitSpec
from .checks import TOLERANCE, run_gradchecks
from .config import ConfigError, RunConfig, load_config
from .csi import KEYPOINT_NAMES
from .dataset import DatasetFormatError, load_dataset, write_dataset
from .evaluation import EvalSlice, default_slices, evaluate, report
from .features import WindowConfig, extract_features
from .model import MiDiPose, TrainConfig, TrainingError, baseline_forward, load_model, predict, regress_pose, save_model, train
from .pipeline import prepare
from .synth import SceneLayout, make_dataset

log = logging.getLogger("midipose")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME, EXIT_CHECK = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 is reserved for runtime failures here.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def scene_layout(cfg: RunConfig) -> SceneLayout:
    s = cfg.scene
    return SceneLayout(
        width=s.width,
        depth=s.depth,
        device_height=s.device_height,
        carrier_hz=s.carrier_hz,
        subcarrier_spacing_hz=s.subcarrier_spacing_hz,
        csi_rate=s.csi_rate,
        label_rate=s.label_rate,
        snr_db=s.snr_db,
    )


def train_config(cfg: RunConfig) -> TrainConfig:
    t = cfg.train
    return TrainConfig(
        batch_size=t.batch,
        epochs=t.epochs,
        base_lr=t.lr,
        momentum=t.momentum,
        decay_factor=t.decay_factor,
        decay_every=t.decay_every,
        seed=t.seed,
    )


def split_spec(cfg: RunConfig) -> SplitSpec:
    return SplitSpec(seed=cfg.train.seed, temporal=cfg.train.split == "temporal")


def _prepared(cfg: RunConfig):
    path = Path(cfg.paths.dataset)
    if not path.exists():
        raise FileNotFoundError(f"dataset {path} does not exist (run `midipose synth` first)")
    ds = load_dataset(path)
    return prepare(ds.frames, ds.labels, WindowConfig(cfg.features.window), split_spec(cfg), ds.features)


def _manifest_path(dataset: str) -> Path:
    return Path(dataset + ".manifest.json")


# --------------------------------------------------------------------------
# Subcommands


def cmd_synth(cfg: RunConfig, args) -> int:
    layout = scene_layout(cfg)
    rec = make_dataset(cfg.scene.motions, cfg.scene.duration_s, layout, cfg.scene.seed, path=cfg.paths.dataset)
    _manifest_path(cfg.paths.dataset).write_text(json.dumps(rec.manifest, indent=2) + "\n")
    print(f"wrote {cfg.paths.dataset}: {len(rec.frames)} CSI frames, {len(rec.labels)} labels")
    for seg in rec.manifest["segments"]:
        tags = ", ".join(f"{k} {v}" for k, v in seg["tagged"].items())
        print(f"  {seg['motion']:<9} {seg['csi_frames']:>5} frames {seg['labels']:>5} labels  ({tags})")
    return EXIT_OK


def cmd_features(cfg: RunConfig, args) -> int:
    ds = load_dataset(cfg.paths.dataset)
    feats = extract_features(ds.frames, WindowConfig(cfg.features.window))
    out = args.out or cfg.paths.dataset
    write_dataset(ds.frames, ds.labels, out, features=feats)
    print(f"wrote {out} with a {feats.data.shape} feature section (window {feats.window_len})")
    return EXIT_OK


def cmd_train(cfg: RunConfig, args) -> int:
    data = _prepared(cfg)
    tc = train_config(cfg)
    idx = data.train
    t0 = time.perf_counter()

    def progress(epoch, lr, value):
        log.info("epoch %3d  lr %.6g  loss %.6e  (%.1fs)", epoch, lr, value, time.perf_counter() - t0)

    result = train(data.x[idx], data.y[idx].reshape(len(idx), -1), cfg.train.model, tc, on_epoch=progress)
    save_model(result.model, result.normalizer, cfg.paths.checkpoint)
    Path(cfg.paths.loss_log).write_text(result.loss_log())
    print(
        f"trained {cfg.train.model} on {len(idx)} frames for {tc.epochs} epochs "
        f"(loss {result.history[0]:.4g} -> {result.history[-1]:.4g}); "
        f"wrote {cfg.paths.checkpoint} and {cfg.paths.loss_log}"
    )
    return EXIT_OK


def cmd_eval(cfg: RunConfig, args) -> int:
    data = _prepared(cfg)
    idx = data.part(cfg.eval.split)
    if len(idx) == 0:
        raise RuntimeError(f"the {cfg.eval.split} split is empty")
    predictions = {}
    for path in [cfg.paths.checkpoint, *cfg.eval.compare]:
        model, norm = load_model(path)
        name = model.kind
        n = 2
        while name in predictions:
            name, n = f"{model.kind}{n}", n + 1
        predictions[name] = predict(model, data.x[idx], norm)
    slices = [EvalSlice.parse(s) for s in cfg.eval.slices] or default_slices()
    results = evaluate(predictions, data.y[idx], data.motions[idx], data.tags[idx], slices, cfg.eval.thresholds)
    text, csv = report(results)
    reports = Path(cfg.paths.reports)
    reports.mkdir(parents=True, exist_ok=True)
    (reports / "pck.txt").write_text(text)
    (reports / "pck.csv").write_text(csv)
    print(f"{cfg.eval.split} split, {len(idx)} frames")
    print(text)
    return EXIT_OK


def infer_pose(model, norm, frames, index: int, window: WindowConfig):
    """Pose for CSI frame ``index``; features use only the frames that row depends on."""
    if not 0 <= index < len(frames):
        raise IndexError(f"frame index {index} out of range; valid range is 0..{len(frames) - 1}")
    start = max(0, index - window.window_len)
    sub = frames[start : index + 1]
    if len(sub) < 2:
        sub = frames[: max(2, index + 1)]
    row = extract_features(sub, window).data[index - start]
    x = norm(row[None])
    if isinstance(model, MiDiPose):
        parts = model.split_domains(x)
        fused = model.fuse(*(model.encode(parts[d], d) for d in ("amplitude", "phase", "doppler")))
        return regress_pose(model, fused.data[0])
    return baseline_forward(model, x[0])


def cmd_infer(cfg: RunConfig, args) -> int:
    model, norm = load_model(cfg.paths.checkpoint)
    ds = load_dataset(cfg.paths.dataset)
    pose = infer_pose(model, norm, ds.frames, args.index, WindowConfig(cfg.features.window))
    for name, (x, y) in zip(KEYPOINT_NAMES, pose.keypoints):
        print(f"{name:<15} {float(x)!r} {float(y)!r}")
    return EXIT_OK


def cmd_gradcheck(cfg: RunConfig, args) -> int:
    scale = 1.01 if args.inject_fault else 1.0
    outcomes = run_gradchecks(seeds=args.seeds, grad_scale=scale)
    width = max(len(o.name) for o in outcomes)
    for o in outcomes:
        status = "pass" if o.passed else "FAIL"
        print(f"{o.name:<{width}}  max rel err {o.max_error:.3e}  {status}  ({o.seconds:.2f}s)")
    failed = [o.name for o in outcomes if not o.passed]
    if failed:
        print(f"{len(failed)} of {len(outcomes)} components exceed {TOLERANCE:g}: {', '.join(failed)}")
        return EXIT_CHECK
    print(f"all {len(outcomes)} components below {TOLERANCE:g}")
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "features": cmd_features,
    "train": cmd_train,
    "eval": cmd_eval,
    "infer": cmd_infer,
    "gradcheck": cmd_gradcheck,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML run configuration")
    common.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE", help="override one config value")
    common.add_argument("--dataset", help="dataset path (paths.dataset)")
    common.add_argument("--checkpoint", help="checkpoint path (paths.checkpoint)")
    common.add_argument("--seed", type=int, help="scene and training seed")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="midipose", description="Multi-domain CSI pose recognition on synthetic 5G scenes.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("synth", parents=[common], help="generate a synthetic dataset")
    p = sub.add_parser("features", parents=[common], help="store extracted features in a dataset file")
    p.add_argument("--out", help="output path (default: rewrite the dataset)")
    p = sub.add_parser("train", parents=[common], help="train a model")
    p.add_argument("--model", choices=("midipose", "baseline"))
    p.add_argument("--epochs", type=int)
    p.add_argument("--split", choices=("random", "temporal"))
    p = sub.add_parser("eval", parents=[common], help="PCK tables for one or more checkpoints")
    p.add_argument("--split", dest="eval_split", choices=("train", "test", "val"))
    p.add_argument("--compare", action="append", default=[], help="additional checkpoint to evaluate")
    p = sub.add_parser("infer", parents=[common], help="print the predicted keypoints of one CSI frame")
    p.add_argument("--index", type=int, required=True)
    p = sub.add_parser("gradcheck", parents=[common], help="finite-difference gradient checks")
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--inject-fault", action="store_true", help="scale analytic gradients by 1.01")
    return parser


def _overrides(args) -> list[str]:
    out = list(args.set)
    if args.dataset:
        out.append(f"paths.dataset={json.dumps(args.dataset)}")
    if args.checkpoint:
        out.append(f"paths.checkpoint={json.dumps(args.checkpoint)}")
    if args.seed is not None:
        out += [f"scene.seed={args.seed}", f"train.seed={args.seed}"]
    if getattr(args, "model", None):
        out.append(f'train.model="{args.model}"')
    if getattr(args, "epochs", None) is not None:
        out.append(f"train.epochs={args.epochs}")
    if getattr(args, "split", None):
        out.append(f'train.split="{args.split}"')
    if getattr(args, "eval_split", None):
        out.append(f'eval.split="{args.eval_split}"')
    if getattr(args, "compare", None):
        out.append(f"eval.compare={json.dumps(args.compare)}")
    return out


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = load_config(args.config, _overrides(args))
    except (ConfigError, OSError) as exc:
        print(f"midipose: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](cfg, args)
    except IndexError as exc:
        print(f"midipose: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, DatasetFormatError, TrainingError, ValueError, RuntimeError, FloatingPointError) as exc:
        print(f"midipose {args.command}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
