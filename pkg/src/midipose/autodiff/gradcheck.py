"""Central finite-difference check of reverse-mode gradients."""
from __future__ import annotations

from typing import Callable, Mapping, Optional, Sequence, Union

import numpy as np

from .tensor import Tensor

Params = Union[Mapping[str, Tensor], Sequence[Tensor]]


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(1e-8, abs(analytic) + abs(numeric))


def grad_check(
    fn: Callable[[], Tensor],
    params: Params,
    h: float = 1e-5,
    max_coords: Optional[int] = None,
    seed: int = 0,
    grad_scale: float = 1.0,
) -> float:
    """Largest relative error between backprop and central differences.

    ``fn`` rebuilds the graph from ``params`` on each call and returns a scalar.
    ``max_coords`` samples that many coordinates per parameter (all when None).
    ``grad_scale`` multiplies the analytic gradient, which is how the detector's
    sensitivity is tested.
    """
    tensors = list(params.values()) if isinstance(params, Mapping) else list(params)
    for t in tensors:
        t.data = np.ascontiguousarray(t.data)
        t.grad = None
    out = fn()
    if out.data.size != 1:
        raise ValueError(f"grad_check needs a scalar loss, got shape {out.shape}")
    out.backward()
    analytic = [np.zeros_like(t.data) if t.grad is None else t.grad.copy() * grad_scale for t in tensors]

    rng = np.random.default_rng(seed)
    worst = 0.0
    for t, g in zip(tensors, analytic):
        flat = t.data.reshape(-1)
        if max_coords is None or max_coords >= flat.size:
            coords = range(flat.size)
        else:
            coords = rng.choice(flat.size, size=max_coords, replace=False)
        for i in coords:
            orig = flat[i]
            flat[i] = orig + h
            f_plus = fn().item()
            flat[i] = orig - h
            f_minus = fn().item()
            flat[i] = orig
            numeric = (f_plus - f_minus) / (2 * h)
            worst = max(worst, relative_error(float(g.reshape(-1)[i]), numeric))
    for t in tensors:
        t.grad = None
    return worst
