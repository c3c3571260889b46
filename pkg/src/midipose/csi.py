"""CSI, pose and label domain types.

A recording is a sequence of :class:`CsiFrame` (complex channel over 544
subcarriers and 3 receiving RRUs) plus a sequence of :class:`LabeledFrame`
carrying 2D poses from the camera stream.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

N_SUBCARRIERS = 544
N_RRU = 3
N_FEATURES = 7
N_KEYPOINTS = 17

# COCO-17 order.
KEYPOINT_NAMES = (
    "nose",
    "left_eye",
    "right_eye",
    "left_ear",
    "right_ear",
    "left_shoulder",
    "right_shoulder",
    "left_elbow",
    "right_elbow",
    "left_wrist",
    "right_wrist",
    "left_hip",
    "right_hip",
    "left_knee",
    "right_knee",
    "left_ankle",
    "right_ankle",
)
KP = {name: i for i, name in enumerate(KEYPOINT_NAMES)}


class MotionKind(enum.IntEnum):
    MARKTIME = 0
    LUNGE = 1
    RISEHAND = 2
    WALK = 3
    SQUAT = 4

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def parse(cls, name: str) -> "MotionKind":
        try:
            return cls[name.strip().upper()]
        except KeyError:
            valid = ", ".join(k.label for k in cls)
            raise ValueError(f"unknown motion {name!r} (expected one of {valid})") from None


class StateTag(enum.IntEnum):
    """Static poses within a motion. Code 0 is reserved for "untagged" on disk."""

    MARKTIME1 = 1
    MARKTIME2 = 2
    LUNGE1 = 3
    LUNGE2 = 4
    RISEHAND1 = 5
    RISEHAND2 = 6
    WALK = 7
    SQUAT = 8

    @property
    def label(self) -> str:
        return self.name.lower()

    @property
    def motion(self) -> MotionKind:
        return _TAG_MOTION[self]


_TAG_MOTION = {
    StateTag.MARKTIME1: MotionKind.MARKTIME,
    StateTag.MARKTIME2: MotionKind.MARKTIME,
    StateTag.LUNGE1: MotionKind.LUNGE,
    StateTag.LUNGE2: MotionKind.LUNGE,
    StateTag.RISEHAND1: MotionKind.RISEHAND,
    StateTag.RISEHAND2: MotionKind.RISEHAND,
    StateTag.WALK: MotionKind.WALK,
    StateTag.SQUAT: MotionKind.SQUAT,
}


def _frozen_array(a, dtype) -> np.ndarray:
    out = np.array(a, dtype=dtype, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class CsiFrame:
    """One timestamped channel snapshot, ``h[subcarrier, rru]``."""

    timestamp: float
    h: np.ndarray

    def __post_init__(self):
        h = _frozen_array(self.h, np.complex128)
        if h.shape != (N_SUBCARRIERS, N_RRU):
            raise ValueError(f"CSI frame must be {N_SUBCARRIERS}x{N_RRU}, got {h.shape}")
        if not np.all(np.isfinite(h)):
            raise ValueError("CSI frame contains non-finite entries")
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "timestamp", float(self.timestamp))

    def __eq__(self, other):
        if not isinstance(other, CsiFrame):
            return NotImplemented
        return self.timestamp == other.timestamp and np.array_equal(self.h, other.h)


@dataclass(frozen=True, eq=False)
class Pose2D:
    """17 keypoints as ``(x, y)`` in normalized scene coordinates, y pointing up."""

    keypoints: np.ndarray

    def __post_init__(self):
        kp = _frozen_array(self.keypoints, np.float64)
        if kp.shape != (N_KEYPOINTS, 2):
            raise ValueError(f"pose must be {N_KEYPOINTS}x2, got {kp.shape}")
        if not np.all(np.isfinite(kp)):
            raise ValueError("pose contains non-finite coordinates")
        object.__setattr__(self, "keypoints", kp)

    def __eq__(self, other):
        if not isinstance(other, Pose2D):
            return NotImplemented
        return np.array_equal(self.keypoints, other.keypoints)

    @classmethod
    def from_flat(cls, values) -> "Pose2D":
        return cls(np.asarray(values, dtype=np.float64).reshape(N_KEYPOINTS, 2))


@dataclass(frozen=True)
class LabeledFrame:
    pose: Pose2D
    timestamp: float
    motion: MotionKind
    state_tag: Optional[StateTag] = None

    def __post_init__(self):
        object.__setattr__(self, "motion", MotionKind(self.motion))
        if self.state_tag is not None:
            tag = StateTag(self.state_tag)
            object.__setattr__(self, "state_tag", tag)
            if tag.motion is not self.motion:
                raise ValueError(f"state tag {tag.label} is not a {self.motion.label} state")


@dataclass(frozen=True, eq=False)
class FeatureTensor:
    """Extracted features, ``data[frame, subcarrier, rru, channel]``.

    Channels: 0 amplitude, 1 normalized std, 2 MAD, 3 IQR (all over a trailing
    window of amplitudes), 4 sanitized phase, 5 inter-RRU phase differential,
    6 Doppler shift in Hz.
    """

    data: np.ndarray
    window_len: int = field(default=25)

    AMPLITUDE = (0, 1, 2, 3)
    PHASE = (4, 5)
    DOPPLER = (6,)

    def __post_init__(self):
        data = _frozen_array(self.data, np.float64)
        if data.ndim != 4 or data.shape[1:] != (N_SUBCARRIERS, N_RRU, N_FEATURES):
            raise ValueError(f"feature tensor must be n x {N_SUBCARRIERS} x {N_RRU} x {N_FEATURES}, got {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("feature tensor contains non-finite entries")
        object.__setattr__(self, "data", data)

    def __len__(self) -> int:
        return self.data.shape[0]

    @property
    def shape(self):
        return self.data.shape


def stack_frames(frames: Sequence[CsiFrame]) -> tuple[np.ndarray, np.ndarray]:
    """Timestamps ``[n]`` and channel ``[n, 544, 3]`` arrays for a frame sequence."""
    ts = np.array([f.timestamp for f in frames], dtype=np.float64)
    if len(frames) == 0:
        return ts, np.zeros((0, N_SUBCARRIERS, N_RRU), dtype=np.complex128)
    return ts, np.stack([f.h for f in frames])


def amplitude(frame: CsiFrame | np.ndarray) -> np.ndarray:
    h = frame.h if isinstance(frame, CsiFrame) else np.asarray(frame)
    return np.sqrt(h.real * h.real + h.imag * h.imag)


def raw_phase(frame: CsiFrame | np.ndarray) -> np.ndarray:
    """Complex argument in (-pi, pi]; zero entries have no phase and are rejected."""
    h = frame.h if isinstance(frame, CsiFrame) else np.asarray(frame)
    if np.any((h.real == 0) & (h.imag == 0)):
        raise ValueError("undefined phase: zero-magnitude channel entry")
    phi = np.arctan2(h.imag, h.real)
    # arctan2 returns -pi for (negative, -0.0); fold onto +pi.
    return np.where(phi == -np.pi, np.pi, phi)
