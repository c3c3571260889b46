"""Parameterized layers built on :mod:`midipose.autodiff.tensor`."""
from __future__ import annotations

import math
from typing import Iterator, Optional

import numpy as np

from .tensor import NonFiniteError, Tensor, add, conv1d, linear, matmul, relu, reshape, softmax, swapaxes


class Module:
    """Container with named parameters and submodules, kept in registration order."""

    def __init__(self):
        self._params: dict[str, Tensor] = {}
        self._children: dict[str, Module] = {}

    def param(self, name: str, value: np.ndarray) -> Tensor:
        t = Tensor(value, requires_grad=True)
        self._params[name] = t
        return t

    def child(self, name: str, module: "Module") -> "Module":
        self._children[name] = module
        return module

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        for name, p in self._params.items():
            yield prefix + name, p
        for name, m in self._children.items():
            yield from m.named_parameters(prefix + name + ".")

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        own = dict(self.named_parameters())
        missing = sorted(set(own) - set(state))
        extra = sorted(set(state) - set(own))
        if missing or extra:
            raise ValueError(f"parameter mismatch: missing {missing[:5]}, unexpected {extra[:5]}")
        for name, p in own.items():
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != p.shape:
                raise ValueError(f"shape mismatch for {name}: checkpoint {value.shape}, model {p.shape}")
            p.data = value.copy()

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def forward(self, *args, **kwargs) -> Tensor:
        raise NotImplementedError

    def __call__(self, *args, **kwargs) -> Tensor:
        try:
            return self.forward(*args, **kwargs)
        except NonFiniteError as exc:
            if getattr(exc, "layer", None) is None:
                exc.layer = type(self).__name__
                exc.args = (f"{exc.args[0]} in layer {exc.layer}",)
            raise


def uniform_init(rng: np.random.Generator, fan_in: int, shape) -> np.ndarray:
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Linear(Module):
    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator):
        super().__init__()
        self.W = self.param("W", uniform_init(rng, n_in, (n_in, n_out)))
        self.b = self.param("b", np.zeros(n_out))

    def forward(self, x) -> Tensor:
        return linear(x, self.W, self.b)


class MLP(Module):
    """Linear layers with ReLU between them (none after the last)."""

    def __init__(self, dims: list[int], rng: np.random.Generator):
        super().__init__()
        self.layers = [self.child(str(i), Linear(a, b, rng)) for i, (a, b) in enumerate(zip(dims[:-1], dims[1:]))]

    def forward(self, x) -> Tensor:
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1:
                x = relu(x)
        return x


class MultiHeadAttention(Module):
    """Scaled dot-product self-attention over tokens ``[..., T, D]``."""

    def __init__(self, dim: int, heads: int, rng: np.random.Generator):
        super().__init__()
        if dim % heads:
            raise ValueError(f"model dim {dim} is not divisible by {heads} heads")
        self.dim, self.heads = dim, heads
        self.q = self.child("q", Linear(dim, dim, rng))
        self.k = self.child("k", Linear(dim, dim, rng))
        self.v = self.child("v", Linear(dim, dim, rng))
        self.o = self.child("o", Linear(dim, dim, rng))

    def _split(self, x: Tensor) -> Tensor:
        lead = x.shape[:-2]
        t = x.shape[-2]
        x = reshape(x, lead + (t, self.heads, self.dim // self.heads))
        return swapaxes(x, -3, -2)  # [..., H, T, d_head]

    def attention_weights(self, tokens) -> Tensor:
        q, k = self._split(self.q(tokens)), self._split(self.k(tokens))
        scores = matmul(q, swapaxes(k, -1, -2)) * (1.0 / math.sqrt(self.dim // self.heads))
        return softmax(scores, axis=-1)

    def forward(self, tokens) -> Tensor:
        if not isinstance(tokens, Tensor):
            tokens = Tensor(tokens)
        if tokens.shape[-1] != self.dim:
            raise ValueError(f"attention expects width {self.dim}, got {tokens.shape[-1]}")
        weights = self.attention_weights(tokens)
        ctx = matmul(weights, self._split(self.v(tokens)))  # [..., H, T, d_head]
        ctx = swapaxes(ctx, -3, -2)
        ctx = reshape(ctx, ctx.shape[:-2] + (self.dim,))
        return self.o(ctx)


class ResidualBlock(Module):
    """``x + W2 relu(W1 x + b1) + b2``."""

    def __init__(self, dim: int, hidden: int, rng: np.random.Generator):
        super().__init__()
        self.fc1 = self.child("fc1", Linear(dim, hidden, rng))
        self.fc2 = self.child("fc2", Linear(hidden, dim, rng))

    def forward(self, x) -> Tensor:
        if not isinstance(x, Tensor):
            x = Tensor(x)
        return add(x, self.fc2(relu(self.fc1(x))))


class Conv1d(Module):
    def __init__(self, c_in: int, c_out: int, kernel: int, rng: np.random.Generator, stride: int = 1, padding: int = 0):
        super().__init__()
        self.stride, self.padding = stride, padding
        self.W = self.param("W", uniform_init(rng, c_in * kernel, (kernel, c_in, c_out)))
        self.b = self.param("b", np.zeros(c_out))

    def forward(self, x) -> Tensor:
        if not isinstance(x, Tensor):
            x = Tensor(x)
        return conv1d(x, self.W, self.b, self.stride, self.padding)


class ConvResidualBlock(Module):
    """``x + conv2(relu(conv1(x)))`` with same-length kernel-3 convolutions."""

    def __init__(self, channels: int, rng: np.random.Generator, kernel: int = 3):
        super().__init__()
        self.conv1 = self.child("conv1", Conv1d(channels, channels, kernel, rng, padding=kernel // 2))
        self.conv2 = self.child("conv2", Conv1d(channels, channels, kernel, rng, padding=kernel // 2))

    def forward(self, x) -> Tensor:
        if not isinstance(x, Tensor):
            x = Tensor(x)
        return add(x, self.conv2(relu(self.conv1(x))))


def zero_(module: Module, prefix: Optional[str] = None) -> Module:
    """Zero every parameter (or those under ``prefix``) in place."""
    for name, p in module.named_parameters():
        if prefix is None or name.startswith(prefix):
            p.data = np.zeros_like(p.data)
    return module


__all__ = [
    "Module",
    "Linear",
    "MLP",
    "MultiHeadAttention",
    "ResidualBlock",
    "Conv1d",
    "ConvResidualBlock",
    "uniform_init",
    "zero_",
]
