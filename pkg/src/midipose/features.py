"""Amplitude, phase and Doppler feature domains.

``extract_features`` turns a CSI recording into the ``n x 544 x 3 x 7``
tensor consumed by the models. The scalar helpers are exported separately
because tests and the simulator check them one at a time.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .csi import N_FEATURES, CsiFrame, FeatureTensor, amplitude, raw_phase, stack_frames

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class WindowConfig:
    window_len: int = 25
    epsilon: float = 1e-9

    def __post_init__(self):
        if self.window_len < 2:
            raise ValueError(f"window_len must be >= 2, got {self.window_len}")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")


def principal_value(x):
    """Reduce angles to (-pi, pi]."""
    r = np.remainder(np.asarray(x, dtype=np.float64) + np.pi, TWO_PI) - np.pi
    r = np.where(r <= -np.pi, r + TWO_PI, r)
    return r if r.ndim else float(r)


def _quantile_sorted(s: np.ndarray, q: float) -> np.ndarray:
    # Linear interpolation between order statistics (position q*(n-1)).
    n = s.shape[-1]
    pos = q * (n - 1)
    lo = int(np.floor(pos))
    hi = min(lo + 1, n - 1)
    frac = pos - lo
    return s[..., lo] + frac * (s[..., hi] - s[..., lo])


def window_stats_array(x: np.ndarray, epsilon: float = 1e-9) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Normalized std, median absolute deviation and IQR along the last axis."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] < 2:
        raise ValueError(f"window needs at least 2 samples, got {x.shape[-1]}")
    mean = x.mean(axis=-1)
    std = np.sqrt(((x - mean[..., None]) ** 2).mean(axis=-1))
    nstd = std / (np.abs(mean) + epsilon)

    s = np.sort(x, axis=-1)
    med = _quantile_sorted(s, 0.5)
    dev = np.sort(np.abs(x - med[..., None]), axis=-1)
    mad = _quantile_sorted(dev, 0.5)
    iqr = _quantile_sorted(s, 0.75) - _quantile_sorted(s, 0.25)
    return nstd, mad, iqr


def window_stats(series: Sequence[float], epsilon: float = 1e-9) -> tuple[float, float, float]:
    x = np.asarray(series, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("window_stats expects a 1-D series")
    if not np.all(np.isfinite(x)):
        raise ValueError("window contains non-finite values")
    nstd, mad, iqr = window_stats_array(x, epsilon)
    return float(nstd), float(mad), float(iqr)


def unwrap(phase, axis: int = -1) -> np.ndarray:
    """Remove 2*pi jumps so consecutive differences fall in (-pi, pi]."""
    p = np.asarray(phase, dtype=np.float64)
    if p.shape[axis] < 2:
        return p.copy()
    d = np.diff(p, axis=axis)
    correction = principal_value(d) - d
    # Snap to exact multiples of 2*pi so the output stays congruent to the input.
    correction = np.round(correction / TWO_PI) * TWO_PI
    cum = np.cumsum(correction, axis=axis)
    out = p.copy()
    idx = [slice(None)] * p.ndim
    idx[axis] = slice(1, None)
    out[tuple(idx)] += cum
    return out


def fit_line(phi, axis: int = -1) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares ``slope, intercept`` of ``phi`` against its index."""
    y = np.moveaxis(np.asarray(phi, dtype=np.float64), axis, -1)
    n = y.shape[-1]
    if n < 2:
        raise ValueError(f"line fit needs at least 2 samples, got {n}")
    k = np.arange(n, dtype=np.float64)
    kc = k - k.mean()
    ybar = y.mean(axis=-1)
    slope = ((y - ybar[..., None]) @ kc) / (kc @ kc)
    return slope, ybar - slope * k.mean()


def linear_detrend(phi, axis: int = -1) -> np.ndarray:
    """Subtract the least-squares line over the index; the residual has zero mean and slope."""
    y = np.moveaxis(np.asarray(phi, dtype=np.float64), axis, -1)
    n = y.shape[-1]
    if n < 2:
        raise ValueError(f"detrend needs at least 2 samples, got {n}")
    kc = np.arange(n, dtype=np.float64) - (n - 1) / 2.0
    ybar = y.mean(axis=-1, keepdims=True)
    slope = ((y - ybar) @ kc) / (kc @ kc)
    out = y - ybar - slope[..., None] * kc
    return np.moveaxis(out, -1, axis)


def phase_differential(phi_a, phi_b):
    return principal_value(np.asarray(phi_a, dtype=np.float64) - np.asarray(phi_b, dtype=np.float64))


def doppler(phi_prev, phi_cur, dt):
    """Doppler shift in Hz from the phase advance over ``dt`` seconds."""
    dt = np.asarray(dt, dtype=np.float64)
    if np.any(dt <= 0):
        raise ValueError(f"dt must be positive, got {dt}")
    f = principal_value(np.asarray(phi_cur, dtype=np.float64) - np.asarray(phi_prev, dtype=np.float64)) / (TWO_PI * dt)
    return f if np.ndim(f) else float(f)


def sanitize_phase(h: np.ndarray) -> np.ndarray:
    """Unwrap along subcarriers, then strip the linear (timing-offset) term."""
    return linear_detrend(unwrap(raw_phase(h), axis=-2), axis=-2)


def _amplitude_window_features(amp: np.ndarray, cfg: WindowConfig, chunk: int = 64) -> np.ndarray:
    n = amp.shape[0]
    w = cfg.window_len
    out = np.empty(amp.shape + (3,), dtype=np.float64)
    # Partial windows at the start of the recording (minimum length 2).
    for i in range(1, min(w - 1, n)):
        out[i] = np.stack(window_stats_array(np.moveaxis(amp[: i + 1], 0, -1), cfg.epsilon), axis=-1)
    if n >= w:
        view = np.lib.stride_tricks.sliding_window_view(amp, w, axis=0)
        for start in range(0, view.shape[0], chunk):
            block = view[start : start + chunk]
            out[w - 1 + start : w - 1 + start + block.shape[0]] = np.stack(
                window_stats_array(block, cfg.epsilon), axis=-1
            )
    out[0] = out[1]
    return out


FramesLike = Union[Sequence[CsiFrame], tuple]


def extract_features(frames: FramesLike, cfg: WindowConfig | None = None) -> FeatureTensor:
    """Build the 7-channel feature tensor for a recording.

    ``frames`` is either a sequence of :class:`CsiFrame` or a
    ``(timestamps, h)`` pair with ``h`` shaped ``[n, 544, 3]``.
    """
    cfg = cfg or WindowConfig()
    if isinstance(frames, tuple):
        ts, h = (np.asarray(a) for a in frames)
    else:
        ts, h = stack_frames(frames)
    n = h.shape[0]
    if n < 2:
        raise ValueError(f"feature extraction needs at least 2 frames, got {n}")

    feats = np.empty(h.shape + (N_FEATURES,), dtype=np.float64)
    amp = amplitude(h)
    feats[..., 0] = amp
    feats[..., 1:4] = _amplitude_window_features(amp, cfg)

    san = sanitize_phase(h)
    feats[..., 4] = san
    feats[..., 5] = phase_differential(san, np.roll(san, -1, axis=2))

    raw = raw_phase(h)
    feats[0, ..., 6] = 0.0
    dt = np.diff(ts)[:, None, None]
    feats[1:, ..., 6] = doppler(raw[:-1], raw[1:], dt)
    return FeatureTensor(feats, window_len=cfg.window_len)
