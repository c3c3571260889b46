"""Finite-difference gradient checks for every layer and both full models."""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .autodiff import MLP, Conv1d, Linear, MultiHeadAttention, ResidualBlock, Tensor, grad_check, mse_loss
from .autodiff.tensor import relu, softmax
from .model import Baseline, MiDiPose, ModelConfig

TOLERANCE = 1e-4

# Small enough that every coordinate can be perturbed in well under a second.
TINY = ModelConfig(
    n_subcarriers=8,
    latent=8,
    heads=2,
    encoder_hidden=12,
    backbone_blocks=2,
    backbone_width=10,
    head_hidden=10,
    conv_channels=(4, 6, 8),
)


def _weighted(out: Tensor, w: np.ndarray) -> Tensor:
    return (out * w).sum()


def _case_linear(rng):
    x = Tensor(rng.normal(size=(3, 5)), requires_grad=True)
    layer = Linear(5, 4, rng)
    layer.b.data = rng.normal(size=4)
    w = rng.normal(size=(3, 4))
    return lambda: _weighted(layer(x), w), [x] + layer.parameters()


def _case_relu(rng):
    # Keep inputs away from the kink so central differences stay one-sided-free.
    v = rng.uniform(0.1, 1.0, size=(4, 6)) * rng.choice([-1.0, 1.0], size=(4, 6))
    x = Tensor(v, requires_grad=True)
    w = rng.normal(size=(4, 6))
    return lambda: _weighted(relu(x), w), [x]


def _case_softmax(rng):
    x = Tensor(rng.normal(size=(3, 5)), requires_grad=True)
    w = rng.normal(size=(3, 5))
    return lambda: _weighted(softmax(x), w), [x]


def _checked(module) -> list[Tensor]:
    # The key bias shifts every logit of a query row equally, so softmax makes
    # its gradient identically zero; only roundoff would be compared there.
    return [p for name, p in module.named_parameters() if not name.endswith("k.b")]


def _spread(module, rng, scale: float = 0.5) -> None:
    # At the default init attention logits are nearly flat and their gradients
    # sit within a few orders of magnitude of finite-difference roundoff.
    for p in module.parameters():
        p.data = rng.normal(scale=scale, size=p.shape)


def _case_attention(rng):
    x = Tensor(rng.normal(size=(3, 8)), requires_grad=True)
    mha = MultiHeadAttention(8, 2, rng)
    _spread(mha, rng)
    w = rng.normal(size=(3, 8))
    return lambda: _weighted(mha(x), w), [x] + _checked(mha)


def _case_residual(rng):
    x = Tensor(rng.normal(size=(4, 6)), requires_grad=True)
    block = ResidualBlock(6, 5, rng)
    w = rng.normal(size=(4, 6))
    return lambda: _weighted(block(x), w), [x] + block.parameters()


def _case_conv1d(rng):
    x = Tensor(rng.normal(size=(2, 11, 3)), requires_grad=True)
    conv = Conv1d(3, 4, 5, rng, stride=2, padding=2)
    conv.b.data = rng.normal(size=4)
    w = rng.normal(size=(2, 6, 4))
    return lambda: _weighted(conv(x), w), [x] + conv.parameters()


def _case_mse(rng):
    p = Tensor(rng.normal(size=(4, 34)), requires_grad=True)
    target = rng.normal(size=(4, 34))
    return lambda: mse_loss(p, target), [p]


def _case_encoder(rng):
    model = MiDiPose(TINY, seed=int(rng.integers(1 << 31)))
    x = rng.normal(size=(4, TINY.domain_dim("phase")))
    w = rng.normal(size=(4, TINY.latent))
    params = model.encoders["phase"].parameters()
    return lambda: _weighted(model.encode(x, "phase"), w), params


def _case_fusion(rng):
    model = MiDiPose(TINY, seed=int(rng.integers(1 << 31)))
    _spread(model, rng)
    z = [Tensor(rng.normal(size=(4, TINY.latent)), requires_grad=True) for _ in range(3)]
    w = rng.normal(size=(4, 3 * TINY.latent))
    params = z + _checked(model.attention) + model.token_mlp.parameters()
    return lambda: _weighted(model.fuse(*z), w), params


def _full(model_cls):
    def case(rng):
        model = model_cls(TINY, seed=int(rng.integers(1 << 31)))
        for p in model.parameters():
            if p.data.ndim == 1:
                p.data = rng.normal(scale=0.1, size=p.shape)
        if isinstance(model, MiDiPose):
            _spread(model.attention, rng)
        x = rng.normal(size=(4, TINY.n_subcarriers, TINY.n_rru, 7))
        y = rng.normal(size=(4, TINY.output_dim))
        return lambda: mse_loss(model(x), y), _checked(model)

    return case


CASES: dict[str, Callable] = {
    "linear": _case_linear,
    "relu": _case_relu,
    "softmax": _case_softmax,
    "multi_head_attention": _case_attention,
    "residual_block": _case_residual,
    "conv1d": _case_conv1d,
    "mse_loss": _case_mse,
    "encoder": _case_encoder,
    "fusion": _case_fusion,
    "midipose": _full(MiDiPose),
    "baseline": _full(Baseline),
}


# Coordinates sampled per parameter tensor; the full models are too large to
# perturb exhaustively on 10 seeds within the time budget.
MAX_COORDS = {"midipose": 12, "baseline": 12, "fusion": 24}


@dataclass
class CheckOutcome:
    name: str
    max_error: float
    seconds: float

    @property
    def passed(self) -> bool:
        return self.max_error < TOLERANCE


def run_gradchecks(seeds: int = 10, grad_scale: float = 1.0, names=None) -> list[CheckOutcome]:
    """Worst relative error per component over ``seeds`` random instances."""
    out = []
    for name in names or CASES:
        t0 = time.perf_counter()
        worst = 0.0
        for seed in range(seeds):
            fn, params = CASES[name](np.random.default_rng([seed, len(name)]))
            err = grad_check(fn, params, h=1e-5, max_coords=MAX_COORDS.get(name), seed=seed, grad_scale=grad_scale)
            worst = max(worst, err)
        out.append(CheckOutcome(name, worst, time.perf_counter() - t0))
    return out
