"""Dataset file to model-ready arrays: align labels to CSI, extract features, split."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .alignment import AlignedSample, SplitSpec, align_nearest, split
from .csi import CsiFrame, FeatureTensor, LabeledFrame
from .dataset import load_dataset
from .features import WindowConfig, extract_features


@dataclass
class PreparedData:
    x: np.ndarray  # [n_labels, 544, 3, 7] feature row of the aligned CSI frame
    y: np.ndarray  # [n_labels, 17, 2]
    motions: np.ndarray  # [n_labels] MotionKind codes
    tags: np.ndarray  # [n_labels] StateTag codes, 0 when untagged
    aligned: list[AlignedSample]
    train: np.ndarray
    test: np.ndarray
    val: np.ndarray

    def part(self, name: str) -> np.ndarray:
        return {"train": self.train, "test": self.test, "val": self.val}[name]


def prepare(
    frames: list[CsiFrame],
    labels: list[LabeledFrame],
    window: WindowConfig = WindowConfig(),
    split_spec: SplitSpec = SplitSpec(),
    features: FeatureTensor | None = None,
) -> PreparedData:
    if features is None or features.window_len != window.window_len:
        features = extract_features(frames, window)
    aligned = align_nearest([l.timestamp for l in labels], [f.timestamp for f in frames])
    csi_idx = np.array([a.csi_index for a in aligned])
    x = features.data[csi_idx]
    y = np.stack([l.pose.keypoints for l in labels])
    motions = np.array([int(l.motion) for l in labels])
    tags = np.array([0 if l.state_tag is None else int(l.state_tag) for l in labels])
    train, test, val = split(len(labels), split_spec)
    return PreparedData(x, y, motions, tags, aligned, train, test, val)


def prepare_file(path, window: WindowConfig = WindowConfig(), split_spec: SplitSpec = SplitSpec()) -> PreparedData:
    ds = load_dataset(path)
    return prepare(ds.frames, ds.labels, window, split_spec, ds.features)
