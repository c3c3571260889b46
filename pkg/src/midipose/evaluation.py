"""PCK@alpha with torso normalization, motion state/process slices, and reports."""
from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .csi import KP, MotionKind, Pose2D, StateTag

ALPHAS = (5, 10, 20, 30)
_LS, _RS, _LH, _RH = KP["left_shoulder"], KP["right_shoulder"], KP["left_hip"], KP["right_hip"]


def _as_array(poses) -> np.ndarray:
    if isinstance(poses, Pose2D):
        return poses.keypoints[None]
    if len(poses) and isinstance(poses[0], Pose2D):
        return np.stack([p.keypoints for p in poses])
    return np.asarray(poses, dtype=np.float64)


def torso_lengths(gts) -> np.ndarray:
    g = _as_array(gts)
    mid_sh = (g[:, _LS] + g[:, _RS]) / 2
    mid_hip = (g[:, _LH] + g[:, _RH]) / 2
    d = mid_sh - mid_hip
    t = np.sqrt(d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1])
    if np.any(t < 1e-6):
        raise ValueError(f"degenerate pose: torso length {t.min():.3g} below 1e-6")
    return t


def torso_length(gt) -> float:
    """Distance from the mid-shoulder point to the mid-hip point."""
    return float(torso_lengths(gt)[0])


def correct_mask(preds, gts, alpha: float) -> np.ndarray:
    """Boolean ``[n, 17]``: keypoint within ``alpha`` percent of the frame's torso length."""
    p, g = _as_array(preds), _as_array(gts)
    if p.shape != g.shape:
        raise ValueError(f"prediction/ground-truth shape mismatch: {p.shape} vs {g.shape}")
    if len(p) == 0:
        raise ValueError("PCK needs at least one frame")
    e = p - g
    dist = np.sqrt(e[..., 0] * e[..., 0] + e[..., 1] * e[..., 1])
    thresh = (alpha / 100) * torso_lengths(g)
    return dist <= thresh[:, None]


def pck(preds, gts, alpha: float) -> float:
    mask = correct_mask(preds, gts, alpha)
    return 100.0 * int(mask.sum()) / mask.size


@dataclass(frozen=True, order=True)
class EvalSlice:
    kind: str  # "state" or "process"
    selector: str  # state tag or motion label

    def __post_init__(self):
        if self.kind not in ("state", "process"):
            raise ValueError(f"slice kind must be state or process, got {self.kind!r}")

    @classmethod
    def parse(cls, name: str) -> "EvalSlice":
        """``"state:lunge1"`` or ``"process:walk"``."""
        kind, sep, selector = name.partition(":")
        if not sep:
            raise ValueError(f"slice {name!r} must look like state:<tag> or process:<motion>")
        sl = cls(kind, selector.lower())
        valid = StateTag if kind == "state" else MotionKind
        if selector.upper() not in valid.__members__:
            raise ValueError(f"unknown {kind} {selector!r}; expected one of {', '.join(m.label for m in valid)}")
        return sl

    @property
    def name(self) -> str:
        return f"{self.kind}:{self.selector}"

    def select(self, motions: np.ndarray, tags: np.ndarray) -> np.ndarray:
        if self.kind == "state":
            return tags == int(StateTag[self.selector.upper()])
        return motions == int(MotionKind[self.selector.upper()])


def default_slices() -> list[EvalSlice]:
    return [EvalSlice("state", t.label) for t in StateTag] + [EvalSlice("process", m.label) for m in MotionKind]


class PckResult(dict):
    """``{(slice, model, alpha): percentage}``; slices with no frames are absent."""

    def slices(self) -> list[EvalSlice]:
        return sorted({k[0] for k in self})

    def models(self) -> list[str]:
        return list(dict.fromkeys(k[1] for k in self))

    def alphas(self) -> list[float]:
        return sorted({k[2] for k in self})


def evaluate(
    predictions: Mapping[str, np.ndarray],
    gts,
    motions: Sequence[int],
    tags: Sequence[int],
    slices: Optional[Sequence[EvalSlice]] = None,
    alphas: Sequence[float] = ALPHAS,
) -> PckResult:
    """PCK for every (slice, model, alpha).

    ``predictions`` maps a model name to its keypoints for the same frames as
    ``gts``. ``tags`` uses 0 for untagged frames.
    """
    g = _as_array(gts)
    motions = np.asarray(motions)
    tags = np.asarray([0 if t is None else int(t) for t in tags])
    slices = list(slices) if slices is not None else default_slices()
    if not slices:
        raise ValueError("no evaluation slices given")
    result = PckResult()
    for name, pred in predictions.items():
        p = _as_array(pred)
        for sl in slices:
            sel = sl.select(motions, tags)
            if not sel.any():
                continue
            for a in alphas:
                result[(sl, name, a)] = pck(p[sel], g[sel], a)
    return result


def _alpha_label(a) -> str:
    return f"{a:g}"


def report_csv(results: PckResult) -> str:
    buf = io.StringIO()
    buf.write("slice,model,alpha,pck\n")
    for sl in results.slices():
        for m in results.models():
            for a in results.alphas():
                v = results.get((sl, m, a))
                if v is not None:
                    buf.write(f"{sl.name},{m},{_alpha_label(a)},{v:.4f}\n")
    return buf.getvalue()


def report_text(results: PckResult) -> str:
    alphas = results.alphas()
    models = results.models()
    lines = []
    for kind, title in (("state", "Motion states"), ("process", "Motion processes")):
        slices = [s for s in results.slices() if s.kind == kind]
        if not slices:
            continue
        header = [title, "Method"] + [f"PCK{_alpha_label(a)}" for a in alphas]
        rows = []
        for sl in slices:
            for m in models:
                if (sl, m, alphas[0]) not in results:
                    continue
                rows.append([sl.selector, m] + [f"{results[(sl, m, a)]:.2f}" for a in alphas])
        widths = [max(len(r[i]) for r in [header] + rows) for i in range(len(header))]
        fmt = lambda r: "  ".join(c.ljust(w) if i < 2 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths)))
        lines.append(fmt(header))
        lines.append("  ".join("-" * w for w in widths))
        lines.extend(fmt(r) for r in rows)
        lines.append("")
    return "\n".join(lines)


def report(results: PckResult) -> tuple[str, str]:
    """Aligned text tables and CSV for ``results``."""
    if not results:
        raise ValueError("no results to report")
    return report_text(results), report_csv(results)


def monotone_in_alpha(results: PckResult) -> bool:
    for sl in results.slices():
        for m in results.models():
            vals = [results[(sl, m, a)] for a in results.alphas() if (sl, m, a) in results]
            if any(b < a for a, b in zip(vals, vals[1:])):
                return False
    return True
