"""SGD with momentum and the step-decay learning-rate schedule."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

BASE_LR = 0.008
MOMENTUM = 0.9
DECAY_FACTOR = 0.5
DECAY_PERIOD = 10


@dataclass
class OptimState:
    lr: float = BASE_LR
    momentum: float = MOMENTUM
    velocity: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError(f"learning rate must be positive, got {self.lr}")
        if not 0 <= self.momentum < 1:
            raise ValueError(f"momentum must be in [0, 1), got {self.momentum}")


def sgd_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray], state: OptimState):
    """In-place ``v <- mu*v + g; p <- p - lr*v``. Returns ``(params, state)``."""
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            continue
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter {name} {p.shape}")
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient for {name}")
        v = state.velocity.get(name)
        if v is None:
            v = state.velocity[name] = np.zeros_like(p)
        elif v.shape != p.shape:
            raise ValueError(f"velocity shape {v.shape} does not match parameter {name} {p.shape}")
        v *= state.momentum
        v += g
        p -= state.lr * v
    return params, state


def lr_schedule(epoch: int, base_lr: float = BASE_LR, factor: float = DECAY_FACTOR, period: int = DECAY_PERIOD) -> float:
    if epoch < 0:
        raise ValueError(f"epoch must be non-negative, got {epoch}")
    return base_lr * factor ** (epoch // period)


class SGD:
    """Momentum SGD over a module's named parameters."""

    def __init__(self, named_params, lr: float = BASE_LR, momentum: float = MOMENTUM):
        self.named = dict(named_params)
        self.state = OptimState(lr=lr, momentum=momentum)

    def step(self) -> None:
        params = {n: t.data for n, t in self.named.items()}
        grads = {n: t.grad for n, t in self.named.items() if t.grad is not None}
        sgd_step(params, grads, self.state)

    def zero_grad(self) -> None:
        for t in self.named.values():
            t.grad = None
