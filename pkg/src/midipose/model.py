"""MiDiPose network, a convolutional baseline, and training.

MiDiPose encodes the amplitude, phase and Doppler slices of a feature frame
with one MLP each into a shared latent space, fuses the three latents as
tokens with multi-head attention plus a per-token MLP, and regresses the 17
keypoints through a residual MLP backbone and an MLP head.

Both models regress standardized coordinates; ``PoseScaler`` maps them back
to normalized scene coordinates and travels with the checkpoint.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .autodiff import MLP, SGD, Conv1d, ConvResidualBlock, Linear, Module, MultiHeadAttention, ResidualBlock, Tensor
from .autodiff import load_checkpoint, lr_schedule, mse_loss, relu, save_checkpoint
from .autodiff.tensor import add, mean, reshape, stack
from .csi import N_FEATURES, N_KEYPOINTS, N_RRU, N_SUBCARRIERS, FeatureTensor, Pose2D

log = logging.getLogger(__name__)

DOMAINS = {"amplitude": (0, 1, 2, 3), "phase": (4, 5), "doppler": (6,)}
MODEL_KINDS = ("midipose", "baseline")


@dataclass(frozen=True)
class ModelConfig:
    n_subcarriers: int = N_SUBCARRIERS
    n_rru: int = N_RRU
    latent: int = 128
    heads: int = 4
    encoder_hidden: int = 512
    backbone_blocks: int = 2
    backbone_width: int = 256
    head_hidden: int = 256
    keypoints: int = N_KEYPOINTS
    fusion: str = "attention"  # or "concat"
    # baseline
    conv_channels: tuple = (32, 64, 128)
    conv_kernel: int = 5
    conv_stride: int = 2
    conv_res_blocks: int = 2

    def __post_init__(self):
        if self.latent % self.heads:
            raise ValueError(f"latent dim {self.latent} is not divisible by {self.heads} heads")
        if self.fusion not in ("attention", "concat"):
            raise ValueError(f"unknown fusion {self.fusion!r}")

    @property
    def output_dim(self) -> int:
        return 2 * self.keypoints

    def domain_dim(self, which: str) -> int:
        return len(DOMAINS[which]) * self.n_subcarriers * self.n_rru


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 64
    epochs: int = 100
    base_lr: float = 0.008
    momentum: float = 0.9
    decay_factor: float = 0.5
    decay_every: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.batch_size <= 0 or self.epochs <= 0 or self.decay_every <= 0:
            raise ValueError("batch size, epochs and decay period must be positive")
        if self.base_lr <= 0 or not 0 < self.decay_factor <= 1:
            raise ValueError("learning rate must be positive and decay factor in (0, 1]")

    def lr(self, epoch: int) -> float:
        return lr_schedule(epoch, self.base_lr, self.decay_factor, self.decay_every)


class TrainingError(RuntimeError):
    pass


def _check_finite(x: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(x)):
        raise ValueError(f"non-finite values in {what}")


@dataclass
class Normalizer:
    """Per-element z-score from training statistics."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, x: np.ndarray) -> "Normalizer":
        x = np.asarray(x, dtype=np.float64)
        std = x.std(axis=0)
        return cls(x.mean(axis=0), np.where(std < 1e-8, 1.0, std))

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.mean) / self.std


@dataclass
class PoseScaler:
    """Per-coordinate standardization of the flat ``2K`` regression targets."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def identity(cls, dim: int = 2 * N_KEYPOINTS) -> "PoseScaler":
        return cls(np.zeros(dim), np.ones(dim))

    @classmethod
    def fit(cls, y: np.ndarray) -> "PoseScaler":
        y = np.asarray(y, dtype=np.float64).reshape(len(y), -1)
        std = y.std(axis=0)
        return cls(y.mean(axis=0), np.where(std < 1e-8, 1.0, std))

    def encode(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=np.float64)
        return (y.reshape(len(y), -1) - self.mean) / self.std

    def decode(self, z: np.ndarray) -> np.ndarray:
        return np.asarray(z, dtype=np.float64) * self.std + self.mean



class MiDiPose(Module):
    kind = "midipose"

    def __init__(self, cfg: ModelConfig = ModelConfig(), seed: int = 0):
        super().__init__()
        self.cfg = cfg
        self.pose_scaler = PoseScaler.identity(cfg.output_dim)
        rng = np.random.default_rng(seed)
        d = cfg.latent
        self.encoders = {
            name: self.child(f"enc_{name}", MLP([cfg.domain_dim(name), cfg.encoder_hidden, d], rng)) for name in DOMAINS
        }
        self.attention = self.child("fusion_attn", MultiHeadAttention(d, cfg.heads, rng))
        self.token_mlp = self.child("fusion_mlp", MLP([d, 2 * d, d], rng))
        self.backbone = [
            self.child(f"backbone{i}", ResidualBlock(3 * d, cfg.backbone_width, rng)) for i in range(cfg.backbone_blocks)
        ]
        self.head = self.child("head", MLP([3 * d, cfg.head_hidden, cfg.output_dim], rng))

    def split_domains(self, x: np.ndarray) -> dict[str, np.ndarray]:
        x = np.asarray(x, dtype=np.float64)
        expect = (self.cfg.n_subcarriers, self.cfg.n_rru, N_FEATURES)
        if x.shape[1:] != expect:
            raise ValueError(f"expected feature rows of shape {expect}, got {x.shape[1:]}")
        return {name: x[..., list(ch)].reshape(x.shape[0], -1) for name, ch in DOMAINS.items()}

    def encode(self, domain_vec, which: str) -> Tensor:
        if which not in self.encoders:
            raise ValueError(f"unknown domain {which!r}")
        v = domain_vec if isinstance(domain_vec, Tensor) else Tensor(domain_vec)
        if v.shape[-1] != self.cfg.domain_dim(which):
            raise ValueError(f"{which} input has length {v.shape[-1]}, expected {self.cfg.domain_dim(which)}")
        _check_finite(v.data, f"{which} input")
        return self.encoders[which](v)

    def fuse_tokens(self, z_amp: Tensor, z_phase: Tensor, z_dop: Tensor) -> Tensor:
        """Fused tokens ``[..., 3, D]`` before flattening.

        Attention and the token MLP each sit on a skip connection, so the
        domain latents reach the backbone undiminished at initialization.
        """
        tokens = stack([z_amp, z_phase, z_dop], axis=-2)
        _check_finite(tokens.data, "domain latents")
        if self.cfg.fusion == "concat":
            return tokens
        mixed = add(tokens, self.attention(tokens))
        return add(mixed, self.token_mlp(mixed))

    def fuse(self, z_amp: Tensor, z_phase: Tensor, z_dop: Tensor) -> Tensor:
        t = self.fuse_tokens(z_amp, z_phase, z_dop)
        return reshape(t, t.shape[:-2] + (3 * self.cfg.latent,))

    def regress(self, fused: Tensor) -> Tensor:
        x = fused
        for block in self.backbone:
            x = block(x)
        return self.head(x)

    def forward(self, x: np.ndarray) -> Tensor:
        parts = self.split_domains(x)
        z = [self.encode(parts[name], name) for name in DOMAINS]
        return self.regress(self.fuse(*z))


class Baseline(Module):
    """Strided 1-D convolutions over subcarriers, residual blocks, global pooling, linear head.

    The 3 RRUs x 7 features of a frame are the input channels.
    """

    kind = "baseline"

    def __init__(self, cfg: ModelConfig = ModelConfig(), seed: int = 0):
        super().__init__()
        self.cfg = cfg
        self.pose_scaler = PoseScaler.identity(cfg.output_dim)
        rng = np.random.default_rng(seed)
        chans = (cfg.n_rru * N_FEATURES,) + tuple(cfg.conv_channels)
        self.convs = [
            self.child(
                f"conv{i}",
                Conv1d(a, b, cfg.conv_kernel, rng, stride=cfg.conv_stride, padding=cfg.conv_kernel // 2),
            )
            for i, (a, b) in enumerate(zip(chans[:-1], chans[1:]))
        ]
        self.blocks = [self.child(f"res{i}", ConvResidualBlock(chans[-1], rng)) for i in range(cfg.conv_res_blocks)]
        self.head = self.child("head", Linear(chans[-1], cfg.output_dim, rng))

    def forward(self, x: np.ndarray) -> Tensor:
        x = np.asarray(x, dtype=np.float64)
        expect = (self.cfg.n_subcarriers, self.cfg.n_rru, N_FEATURES)
        if x.shape[1:] != expect:
            raise ValueError(f"expected feature rows of shape {expect}, got {x.shape[1:]}")
        _check_finite(x, "baseline input")
        h = Tensor(x.reshape(x.shape[0], self.cfg.n_subcarriers, -1))
        for conv in self.convs:
            h = relu(conv(h))
        for block in self.blocks:
            h = block(h)
        return self.head(mean(h, axis=1))


def build_model(kind: str, cfg: ModelConfig = ModelConfig(), seed: int = 0) -> Module:
    if kind == "midipose":
        return MiDiPose(cfg, seed)
    if kind == "baseline":
        return Baseline(cfg, seed)
    raise ValueError(f"unknown model kind {kind!r} (expected one of {', '.join(MODEL_KINDS)})")


def loss(pred, gt) -> Tensor:
    """Mean squared error over all keypoint coordinates."""
    if isinstance(pred, Pose2D):
        pred = Tensor(pred.keypoints)
    if isinstance(gt, Pose2D):
        gt = gt.keypoints
    return mse_loss(pred if isinstance(pred, Tensor) else Tensor(pred), gt)


# --------------------------------------------------------------------------
# Checkpoints

_STATS = ("input.mean", "input.std", "target.mean", "target.std")


def save_model(model: Module, normalizer: Normalizer, path) -> None:
    params = {
        "input.mean": normalizer.mean,
        "input.std": normalizer.std,
        "target.mean": model.pose_scaler.mean,
        "target.std": model.pose_scaler.std,
    }
    params.update(model.state_dict())
    save_checkpoint(params, path)


def model_kind_of(names) -> str:
    names = set(names)
    if any(n.startswith("enc_amplitude.") for n in names):
        return "midipose"
    if any(n.startswith("conv0.") for n in names):
        return "baseline"
    raise ValueError("checkpoint does not match any known model")


def load_model(path, cfg: ModelConfig = ModelConfig(), kind: Optional[str] = None) -> tuple[Module, Normalizer]:
    """Rebuild a model from an MDPW checkpoint, validating every name and shape."""
    state = load_checkpoint(path)
    found = model_kind_of(state)
    if kind is not None and kind != found:
        raise ValueError(f"checkpoint holds a {found} model, expected {kind}")
    missing = [k for k in _STATS if k not in state]
    if missing:
        raise ValueError(f"checkpoint is missing normalization statistics {missing}")
    norm = Normalizer(state.pop("input.mean"), state.pop("input.std"))
    scaler = PoseScaler(state.pop("target.mean"), state.pop("target.std"))
    model = build_model(found, cfg)
    model.load_state_dict(state)
    if norm.mean.shape != (cfg.n_subcarriers, cfg.n_rru, N_FEATURES) or norm.std.shape != norm.mean.shape:
        raise ValueError(f"normalizer shape {norm.mean.shape} does not match the model input")
    if scaler.mean.shape != (cfg.output_dim,) or scaler.std.shape != scaler.mean.shape:
        raise ValueError(f"target scaler shape {scaler.mean.shape} does not match the model output")
    model.pose_scaler = scaler
    return model, norm


# --------------------------------------------------------------------------
# Training and inference


@dataclass
class TrainResult:
    model: Module
    normalizer: Optional[Normalizer]
    history: list[float] = field(default_factory=list)
    lrs: list[float] = field(default_factory=list)

    def loss_log(self) -> str:
        return "".join(f"{e} {lr:.6g} {l:.9e}\n" for e, (lr, l) in enumerate(zip(self.lrs, self.history)))


def train(
    x: np.ndarray,
    y: np.ndarray,
    kind: str = "midipose",
    cfg: TrainConfig = TrainConfig(),
    model_cfg: ModelConfig = ModelConfig(),
    normalizer: Optional[Normalizer] = None,
    on_epoch: Optional[Callable[[int, float, float], None]] = None,
) -> TrainResult:
    """Fit a model on feature rows ``x[n, 544, 3, 7]`` and flat poses ``y[n, 34]``.

    ``x`` is z-scored with ``normalizer`` (fitted on ``x`` when omitted). The
    loss is taken on standardized targets, so the logged values are in units
    of each coordinate's training variance.
    """
    x = np.asarray(x.data if isinstance(x, FeatureTensor) else x, dtype=np.float64)
    n = len(x)
    if n == 0:
        raise TrainingError("empty training split")
    y = np.asarray(y, dtype=np.float64).reshape(len(y), -1)
    if len(y) != n:
        raise ValueError(f"{n} feature rows but {len(y)} poses")
    if cfg.batch_size > n:
        raise TrainingError(f"batch size {cfg.batch_size} exceeds training split of {n}")
    normalizer = normalizer or Normalizer.fit(x)
    xn = normalizer(x)

    seeds = np.random.SeedSequence(cfg.seed).spawn(2)
    model = build_model(kind, model_cfg, seed=int(seeds[0].generate_state(1)[0]))
    model.pose_scaler = PoseScaler.fit(y)
    target = model.pose_scaler.encode(y)
    shuffle = np.random.default_rng(seeds[1])
    opt = SGD(model.named_parameters(), lr=cfg.base_lr, momentum=cfg.momentum)
    result = TrainResult(model, normalizer)

    for epoch in range(cfg.epochs):
        opt.state.lr = cfg.lr(epoch)
        order = shuffle.permutation(n)
        total = 0.0
        for b, start in enumerate(range(0, n, cfg.batch_size)):
            idx = order[start : start + cfg.batch_size]
            opt.zero_grad()
            try:
                batch_loss = loss(model(xn[idx]), target[idx])
            except FloatingPointError as exc:
                raise TrainingError(f"non-finite values at epoch {epoch} batch {b}: {exc}") from exc
            value = batch_loss.item()
            if not np.isfinite(value):
                raise TrainingError(f"non-finite loss at epoch {epoch} batch {b}")
            batch_loss.backward()
            try:
                opt.step()
            except FloatingPointError as exc:
                raise TrainingError(f"epoch {epoch} batch {b}: {exc}") from exc
            total += value * len(idx)
        mean_loss = total / n
        result.history.append(mean_loss)
        result.lrs.append(opt.state.lr)
        log.info("epoch %d lr %.6g loss %.6e", epoch, opt.state.lr, mean_loss)
        if on_epoch is not None:
            on_epoch(epoch, opt.state.lr, mean_loss)
    return result


def predict(model: Module, x: np.ndarray, normalizer: Optional[Normalizer] = None, batch_size: int = 256) -> np.ndarray:
    """Keypoints ``[n, 17, 2]`` for feature rows ``x``."""
    x = np.asarray(x.data if isinstance(x, FeatureTensor) else x, dtype=np.float64)
    if normalizer is not None:
        x = normalizer(x)
    out = [model(x[s : s + batch_size]).data for s in range(0, len(x), batch_size)]
    if not out:
        return np.zeros((0, N_KEYPOINTS, 2))
    return model.pose_scaler.decode(np.concatenate(out)).reshape(len(x), -1, 2)


def regress_pose(model: MiDiPose, fused) -> Pose2D:
    """One fused vector ``[3D]`` to a pose."""
    fused = fused if isinstance(fused, Tensor) else Tensor(np.asarray(fused, dtype=np.float64))
    _check_finite(fused.data, "fused representation")
    return Pose2D.from_flat(model.pose_scaler.decode(model.regress(fused).data))


def baseline_forward(model: Baseline, row) -> Pose2D:
    """One feature row ``[544, 3, 7]`` to a pose."""
    row = np.asarray(row.data if isinstance(row, FeatureTensor) else row, dtype=np.float64)
    return Pose2D.from_flat(model.pose_scaler.decode(model(row[None]).data[0]))
