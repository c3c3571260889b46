"""MDP1 binary dataset container.

Layout (all little-endian)::

    b"MDP1"  u32 version
    u32 n_frames  u32 n_subcarriers  u32 n_rru
    u32 n_labels  u32 n_keypoints
    u32 n_feature_frames  u32 feature_window_len      (0, 0 when absent)
    n_frames  x { f64 timestamp, f32 h[subcarrier][rru][re, im] }
    n_labels  x { f64 timestamp, u32 motion, u32 state_tag (0 = none), f32 pose[kp][x, y] }
    optional:   f32 features[n_feature_frames][subcarrier][rru][channel]

Timestamps are kept in f64 so jittered 25 Hz timelines survive unchanged.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .csi import (
    N_FEATURES,
    N_KEYPOINTS,
    N_RRU,
    N_SUBCARRIERS,
    CsiFrame,
    FeatureTensor,
    LabeledFrame,
    MotionKind,
    Pose2D,
    StateTag,
)

MAGIC = b"MDP1"
VERSION = 1
_HEADER = struct.Struct("<4s8I")

FRAME_DTYPE = np.dtype([("t", "<f8"), ("h", "<f4", (N_SUBCARRIERS, N_RRU, 2))])
LABEL_DTYPE = np.dtype(
    [("t", "<f8"), ("motion", "<u4"), ("state", "<u4"), ("pose", "<f4", (N_KEYPOINTS, 2))]
)


class DatasetFormatError(ValueError):
    pass


@dataclass
class DatasetFile:
    frames: list[CsiFrame]
    labels: list[LabeledFrame]
    features: Optional[FeatureTensor] = None


def _frame_records(frames: Sequence[CsiFrame]) -> np.ndarray:
    rec = np.zeros(len(frames), dtype=FRAME_DTYPE)
    for i, f in enumerate(frames):
        rec["t"][i] = f.timestamp
        rec["h"][i, :, :, 0] = f.h.real
        rec["h"][i, :, :, 1] = f.h.imag
    return rec


def _label_records(labels: Sequence[LabeledFrame]) -> np.ndarray:
    rec = np.zeros(len(labels), dtype=LABEL_DTYPE)
    for i, lab in enumerate(labels):
        rec["t"][i] = lab.timestamp
        rec["motion"][i] = int(lab.motion)
        rec["state"][i] = 0 if lab.state_tag is None else int(lab.state_tag)
        rec["pose"][i] = lab.pose.keypoints
    return rec


def write_dataset(
    frames: Sequence[CsiFrame],
    labels: Sequence[LabeledFrame],
    path,
    features: Optional[FeatureTensor] = None,
) -> None:
    if len(frames) == 0 or len(labels) == 0:
        raise ValueError("empty dataset")
    n_feat, window = 0, 0
    if features is not None:
        n_feat, window = len(features), int(features.window_len)
        if n_feat != len(frames):
            raise ValueError(f"feature section has {n_feat} rows for {len(frames)} frames")
    header = _HEADER.pack(
        MAGIC, VERSION, len(frames), N_SUBCARRIERS, N_RRU, len(labels), N_KEYPOINTS, n_feat, window
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(_frame_records(frames).tobytes())
        fh.write(_label_records(labels).tobytes())
        if features is not None:
            fh.write(features.data.astype("<f4").tobytes())


def _check_monotonic(ts: np.ndarray, what: str) -> None:
    if ts.size > 1 and not np.all(np.diff(ts) > 0):
        bad = int(np.argmax(np.diff(ts) <= 0)) + 1
        raise DatasetFormatError(f"non-monotonic {what} timestamps at record {bad}")


def load_dataset(path) -> DatasetFile:
    """Read every section of an MDP1 file."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size:
        raise DatasetFormatError("truncated file: incomplete header")
    magic, version, n_frames, n_sc, n_rru, n_labels, n_kp, n_feat, window = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise DatasetFormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise DatasetFormatError(f"unsupported version {version}")
    if (n_sc, n_rru, n_kp) != (N_SUBCARRIERS, N_RRU, N_KEYPOINTS):
        raise DatasetFormatError(f"unsupported dimensions {n_sc}x{n_rru}, {n_kp} keypoints")
    if n_feat not in (0, n_frames):
        raise DatasetFormatError("feature section row count does not match frame count")

    feat_bytes = n_feat * N_SUBCARRIERS * N_RRU * N_FEATURES * 4
    expected = _HEADER.size + n_frames * FRAME_DTYPE.itemsize + n_labels * LABEL_DTYPE.itemsize + feat_bytes
    if len(blob) < expected:
        raise DatasetFormatError(f"truncated file: {len(blob)} bytes, header implies {expected}")
    if len(blob) > expected:
        raise DatasetFormatError(f"trailing data: {len(blob) - expected} unexpected bytes")

    off = _HEADER.size
    frec = np.frombuffer(blob, dtype=FRAME_DTYPE, count=n_frames, offset=off)
    off += n_frames * FRAME_DTYPE.itemsize
    lrec = np.frombuffer(blob, dtype=LABEL_DTYPE, count=n_labels, offset=off)
    off += n_labels * LABEL_DTYPE.itemsize

    _check_monotonic(frec["t"], "frame")
    _check_monotonic(lrec["t"], "label")

    h = np.empty((n_frames, N_SUBCARRIERS, N_RRU), dtype=np.complex128)
    h.real = frec["h"][..., 0]
    h.imag = frec["h"][..., 1]
    frames = [CsiFrame(t, h[i]) for i, t in enumerate(frec["t"])]
    labels = []
    for r in lrec:
        try:
            motion = MotionKind(int(r["motion"]))
            tag = StateTag(int(r["state"])) if r["state"] else None
        except ValueError as exc:
            raise DatasetFormatError(str(exc)) from None
        labels.append(LabeledFrame(Pose2D(r["pose"]), float(r["t"]), motion, tag))

    features = None
    if n_feat:
        raw = np.frombuffer(blob, dtype="<f4", count=feat_bytes // 4, offset=off)
        features = FeatureTensor(raw.reshape(n_feat, N_SUBCARRIERS, N_RRU, N_FEATURES), window_len=window)
    return DatasetFile(frames, labels, features)


def read_dataset(path) -> tuple[list[CsiFrame], list[LabeledFrame]]:
    ds = load_dataset(path)
    return ds.frames, ds.labels


def dataset_size(n_frames: int, n_labels: int, n_feature_frames: int = 0) -> int:
    """Byte size of an MDP1 file with the given record counts."""
    return (
        _HEADER.size
        + n_frames * FRAME_DTYPE.itemsize
        + n_labels * LABEL_DTYPE.itemsize
        + n_feature_frames * N_SUBCARRIERS * N_RRU * N_FEATURES * 4
    )

