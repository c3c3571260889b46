"""Nearest-timestamp pairing of pose labels with CSI frames, and dataset splits."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class AlignedSample:
    label_index: int
    csi_index: int
    gap: float


@dataclass(frozen=True)
class SplitSpec:
    ratios: tuple[float, float, float] = (0.7, 0.2, 0.1)
    seed: int = 0
    temporal: bool = False

    def __post_init__(self):
        if len(self.ratios) != 3 or any(r <= 0 for r in self.ratios):
            raise ValueError(f"need three positive ratios, got {self.ratios}")
        if abs(sum(self.ratios) - 1.0) > 1e-9:
            raise ValueError(f"split ratios must sum to 1, got {sum(self.ratios)}")


def _strictly_increasing(ts: np.ndarray, what: str) -> None:
    if ts.ndim != 1 or ts.size == 0:
        raise ValueError(f"{what} timestamps must be a non-empty 1-D sequence")
    if ts.size > 1 and not np.all(np.diff(ts) > 0):
        raise ValueError(f"{what} timestamps must be strictly increasing")


def align_nearest(label_ts: Sequence[float], csi_ts: Sequence[float]) -> list[AlignedSample]:
    """Pick, for each label, the CSI frame closest in time (ties go to the earlier frame)."""
    lt = np.asarray(label_ts, dtype=np.float64)
    ct = np.asarray(csi_ts, dtype=np.float64)
    _strictly_increasing(lt, "label")
    _strictly_increasing(ct, "CSI")

    right = np.searchsorted(ct, lt, side="left").clip(0, ct.size - 1)
    left = (right - 1).clip(0, ct.size - 1)
    gap_l = np.abs(lt - ct[left])
    gap_r = np.abs(lt - ct[right])
    idx = np.where(gap_r < gap_l, right, left)
    gaps = np.abs(lt - ct[idx])
    return [AlignedSample(i, int(j), float(g)) for i, (j, g) in enumerate(zip(idx, gaps))]


def split(n: int, spec: SplitSpec = SplitSpec()) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Partition ``range(n)`` into train / test / validation index arrays."""
    if n < 10:
        raise ValueError(f"need at least 10 samples to split, got {n}")
    n_train = int(np.floor(spec.ratios[0] * n + 1e-9))
    n_test = int(np.floor(spec.ratios[1] * n + 1e-9))
    if spec.temporal:
        order = np.arange(n)
    else:
        order = np.random.default_rng(spec.seed).permutation(n)
    return order[:n_train], order[n_train : n_train + n_test], order[n_train + n_test :]


def write_split_file(path, train, test, val) -> None:
    lines = []
    for name, idx in (("train", train), ("test", test), ("val", val)):
        lines.append(f"# {name} {len(idx)}")
        lines.extend(str(int(i)) for i in idx)
    Path(path).write_text("\n".join(lines) + "\n")


def read_split_file(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    sections: dict[str, list[int]] = {}
    current = None
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            current = line[1:].split()[0]
            sections[current] = []
        elif line.strip():
            if current is None:
                raise ValueError("index before first section header")
            sections[current].append(int(line))
    return tuple(np.array(sections.get(k, []), dtype=np.int64) for k in ("train", "test", "val"))
