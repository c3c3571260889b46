"""Synthetic stand-in for the 5G testbed.

A 2D skeleton performs one of five scripted motions in a vertical plane
through the middle of the sensing area. Twelve limb joints act as point
scatterers; the channel from the UE to each RRU is the direct path plus one
reflected path per scatterer, evaluated on 544 subcarriers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .csi import KP, N_KEYPOINTS, N_RRU, N_SUBCARRIERS, CsiFrame, LabeledFrame, MotionKind, Pose2D, StateTag
from .dataset import write_dataset

SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class SceneLayout:
    width: float = 3.3
    depth: float = 2.7
    device_height: float = 1.5
    carrier_hz: float = 3.5e9
    subcarrier_spacing_hz: float = 30e3
    csi_rate: float = 25.0
    label_rate: float = 15.0
    snr_db: Optional[float] = 25.0
    direct_gain: float = 1.0

    def __post_init__(self):
        if self.width <= 0 or self.depth <= 0:
            raise ValueError("scene dimensions must be positive")
        if self.csi_rate <= 0 or self.label_rate <= 0:
            raise ValueError("sampling rates must be positive")
        if self.carrier_hz <= 0 or self.subcarrier_spacing_hz <= 0:
            raise ValueError("carrier and subcarrier spacing must be positive")

    @property
    def ue(self) -> np.ndarray:
        return np.array([0.0, 0.0, self.device_height])

    @property
    def rrus(self) -> np.ndarray:
        """The three receivers, on the remaining corners of the area."""
        w, d, z = self.width, self.depth, self.device_height
        return np.array([[w, 0.0, z], [w, d, z], [0.0, d, z]])

    @property
    def subcarrier_freqs(self) -> np.ndarray:
        k = np.arange(N_SUBCARRIERS)
        return self.carrier_hz + (k - N_SUBCARRIERS // 2) * self.subcarrier_spacing_hz

    @property
    def wavelengths(self) -> np.ndarray:
        return SPEED_OF_LIGHT / self.subcarrier_freqs

    def to_metric(self, joints: np.ndarray) -> np.ndarray:
        """Normalized ``(x, y)`` pose coordinates to 3-D positions in the body plane."""
        joints = np.asarray(joints, dtype=np.float64)
        out = np.empty(joints.shape[:-1] + (3,))
        out[..., 0] = joints[..., 0] * self.width
        out[..., 1] = self.depth / 2.0
        out[..., 2] = joints[..., 1] * self.depth
        return out

    def to_normalized(self, x: np.ndarray, z: np.ndarray) -> np.ndarray:
        return np.stack([np.asarray(x) / self.width, np.asarray(z) / self.depth], axis=-1)


# One scatterer per major joint; larger limb segments reflect more.
SCATTERER_GAINS = {
    "left_shoulder": 0.25,
    "right_shoulder": 0.25,
    "left_elbow": 0.15,
    "right_elbow": 0.15,
    "left_wrist": 0.10,
    "right_wrist": 0.10,
    "left_hip": 0.30,
    "right_hip": 0.30,
    "left_knee": 0.20,
    "right_knee": 0.20,
    "left_ankle": 0.12,
    "right_ankle": 0.12,
}
SCATTERER_JOINTS = np.array([KP[n] for n in SCATTERER_GAINS])
SCATTERER_RHO = np.array(list(SCATTERER_GAINS.values()))


# --------------------------------------------------------------------------
# Skeleton kinematics (metres, x across the area, z up)

_BODY = dict(
    hip_half=0.11,
    shoulder_half=0.19,
    torso=0.49,
    upper_arm=0.30,
    forearm=0.27,
    thigh=0.43,
    shin=0.42,
    pelvis_z=0.93,
)
CENTER_X = 1.65


def _smooth_pos(x):
    """``max(0, x)**2``: zero on one half-cycle, C1 at the switch."""
    return np.maximum(0.0, x) ** 2


def _knee_ik(hip: np.ndarray, ankle: np.ndarray, side: float) -> np.ndarray:
    """Two-link leg solve; the knee bends outward (toward ``side``)."""
    b = _BODY
    d = ankle - hip
    dist = np.linalg.norm(d, axis=-1, keepdims=True)
    reach = b["thigh"] + b["shin"]
    dist_c = np.minimum(dist, reach - 1e-9)
    a = (b["thigh"] ** 2 - b["shin"] ** 2 + dist_c**2) / (2 * dist_c)
    hgt = np.sqrt(np.maximum(b["thigh"] ** 2 - a**2, 0.0))
    u = d / dist
    perp = np.stack([-u[..., 1], u[..., 0]], axis=-1)
    perp = perp * np.sign(perp[..., :1] * side + 1e-12)
    return hip + a * u + hgt * perp


def _assemble(
    root_x,
    pelvis_z,
    arm_angles: tuple,
    knee_lifts: Optional[tuple] = None,
    ankles: Optional[tuple] = None,
    arm_forward: tuple = (0.0, 0.0),
) -> np.ndarray:
    """Metric joints ``[..., 17, 2]`` from body parameters (arrays broadcast over time).

    Legs use one of two modes. ``knee_lifts`` swing each thigh toward the
    camera by an angle, so the knee rises and the shin hangs below it.
    ``ankles`` plant each foot at ``(x_offset, z)`` from its hip and solve the
    knee by two-link inverse kinematics. ``arm_angles`` abduct the arms in the
    body plane; ``arm_forward`` swings them toward the camera, which
    foreshortens them in projection.
    """
    b = _BODY
    root_x = np.asarray(root_x, dtype=np.float64)
    pelvis_z = np.asarray(pelvis_z, dtype=np.float64)
    params = [root_x, pelvis_z, *arm_angles, *arm_forward]
    if knee_lifts is not None:
        params += list(knee_lifts)
    if ankles is not None:
        params += [v for a in ankles for v in a]
    shape = np.broadcast(*params).shape
    J = np.zeros(shape + (N_KEYPOINTS, 2))

    def put(name, x, z):
        J[..., KP[name], 0] = x
        J[..., KP[name], 1] = z

    sh_z = pelvis_z + b["torso"]
    put("nose", root_x, sh_z + 0.18)
    put("left_eye", root_x + 0.035, sh_z + 0.21)
    put("right_eye", root_x - 0.035, sh_z + 0.21)
    put("left_ear", root_x + 0.075, sh_z + 0.19)
    put("right_ear", root_x - 0.075, sh_z + 0.19)

    for idx, (side, name) in enumerate(((1.0, "left"), (-1.0, "right"))):
        sx = root_x + side * b["shoulder_half"]
        put(f"{name}_shoulder", sx, sh_z)
        a = np.asarray(arm_angles[idx])
        fwd = np.cos(np.asarray(arm_forward[idx]))
        ex = sx + side * b["upper_arm"] * np.sin(a) * fwd
        ez = sh_z - b["upper_arm"] * np.cos(a) * fwd
        put(f"{name}_elbow", ex, ez)
        put(f"{name}_wrist", ex + side * b["forearm"] * np.sin(a) * fwd, ez - b["forearm"] * np.cos(a) * fwd)

        hx = root_x + side * b["hip_half"]
        put(f"{name}_hip", hx, pelvis_z)
        if ankles is None:
            lift = np.asarray(knee_lifts[idx]) if knee_lifts is not None else 0.0
            kz = pelvis_z - b["thigh"] * np.cos(lift)
            put(f"{name}_knee", hx, kz)
            put(f"{name}_ankle", hx, kz - b["shin"])
        else:
            ax_off, az = ankles[idx]
            hip = np.stack(np.broadcast_arrays(hx, pelvis_z), axis=-1)
            ankle = np.stack(np.broadcast_arrays(hx + side * np.asarray(ax_off), np.asarray(az)), axis=-1)
            knee = _knee_ik(hip, ankle, side)
            put(f"{name}_knee", knee[..., 0], knee[..., 1])
            put(f"{name}_ankle", ankle[..., 0], ankle[..., 1])
    return J


# --------------------------------------------------------------------------
# Motion scripts


@dataclass(frozen=True)
class _MotionModel:
    period: float
    pose: Callable[[np.ndarray], np.ndarray]  # local time [n] -> metric joints [n, 17, 2]
    tags: tuple  # (StateTag, phase time within the period)


def _marktime(t):
    u = 2 * np.pi * t / 1.2
    s = np.sin(u)
    return _assemble(
        CENTER_X + 0 * t,
        _BODY["pelvis_z"] + 0 * t,
        arm_angles=(0.12 + 0 * t, 0.12 + 0 * t),
        knee_lifts=(1.22 * _smooth_pos(s), 1.22 * _smooth_pos(-s)),
        arm_forward=(0.6 * _smooth_pos(-s), 0.6 * _smooth_pos(s)),
    )


def _lunge(t):
    u = 2 * np.pi * t / 4.0
    s_l, s_r = _smooth_pos(np.sin(u)), _smooth_pos(-np.sin(u))
    root = CENTER_X + 0.18 * (s_l - s_r)
    pelvis = _BODY["pelvis_z"] - 0.28 * (s_l + s_r)
    shift = CENTER_X - root
    ankles = ((shift + 0.5 * s_l, 0.08 + 0 * t), (-shift + 0.5 * s_r, 0.08 + 0 * t))
    arm = 0.3 + 0.5 * (s_l + s_r)
    return _assemble(root, pelvis, arm_angles=(arm, arm), ankles=ankles)


def _risehand(t):
    u = 2 * np.pi * t / 3.0
    s = np.sin(u)
    return _assemble(
        CENTER_X + 0 * t,
        _BODY["pelvis_z"] + 0 * t,
        arm_angles=(0.1 + 2.9 * _smooth_pos(s), 0.1 + 2.9 * _smooth_pos(-s)),
    )


def _walk(t):
    s = np.sin(2 * np.pi * t)
    return _assemble(
        CENTER_X + 0.6 * np.sin(2 * np.pi * t / 4.0),
        _BODY["pelvis_z"] + 0 * t,
        arm_angles=(0.1 + 0 * t, 0.1 + 0 * t),
        knee_lifts=(0.6 * _smooth_pos(s), 0.6 * _smooth_pos(-s)),
        arm_forward=(0.5 * _smooth_pos(-s), 0.5 * _smooth_pos(s)),
    )


def _squat(t):
    depth = (1 - np.cos(2 * np.pi * t / 3.0)) / 2
    zero = 0 * t
    return _assemble(
        CENTER_X + zero,
        _BODY["pelvis_z"] - 0.40 * depth,
        arm_angles=(0.1 + zero, 0.1 + zero),
        ankles=((zero, 0.08 + zero), (zero, 0.08 + zero)),
        arm_forward=(1.4 * depth, 1.4 * depth),
    )


MOTIONS = {
    MotionKind.MARKTIME: _MotionModel(1.2, _marktime, ((StateTag.MARKTIME1, 0.3), (StateTag.MARKTIME2, 0.9))),
    MotionKind.LUNGE: _MotionModel(4.0, _lunge, ((StateTag.LUNGE1, 1.0), (StateTag.LUNGE2, 3.0))),
    MotionKind.RISEHAND: _MotionModel(3.0, _risehand, ((StateTag.RISEHAND1, 0.75), (StateTag.RISEHAND2, 2.25))),
    MotionKind.WALK: _MotionModel(4.0, _walk, tuple((StateTag.WALK, 0.25 + k) for k in range(4))),
    MotionKind.SQUAT: _MotionModel(3.0, _squat, ((StateTag.SQUAT, 1.5),)),
}


@dataclass(frozen=True, eq=False)
class MotionScript:
    """A motion sampled at the label rate, plus its continuous trajectory."""

    kind: MotionKind
    duration: float
    label_rate: float
    times: np.ndarray
    joints: np.ndarray  # [n, 17, 2] normalized
    tags: tuple  # Optional[StateTag] per frame
    layout: SceneLayout = field(default_factory=SceneLayout)
    frozen_pose: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.times)

    @property
    def period(self) -> float:
        return MOTIONS[self.kind].period

    def pose_at(self, t) -> np.ndarray:
        """Normalized joints ``[n, 17, 2]`` at arbitrary local times."""
        t = np.atleast_1d(np.asarray(t, dtype=np.float64))
        if self.frozen_pose is not None:
            return np.broadcast_to(self.frozen_pose, t.shape + (N_KEYPOINTS, 2)).copy()
        metric = MOTIONS[self.kind].pose(t)
        return self.layout.to_normalized(metric[..., 0], metric[..., 1])


def gen_motion(kind, duration_s: float, label_rate: float = 15.0, layout: SceneLayout | None = None) -> MotionScript:
    """Sample ``kind`` for ``duration_s`` seconds, tagging frames nearest each pose extremum."""
    kind = MotionKind.parse(kind) if isinstance(kind, str) else MotionKind(kind)
    layout = layout or SceneLayout()
    if duration_s < 0:
        raise ValueError(f"duration must be non-negative, got {duration_s}")
    if label_rate <= 0:
        raise ValueError(f"label rate must be positive, got {label_rate}")
    n = int(math.floor(duration_s * label_rate + 1e-9))
    times = np.arange(n) / label_rate
    model = MOTIONS[kind]
    tags: list = [None] * n
    for tag, phase in model.tags:
        t_star = phase
        while t_star < duration_s:
            j = int(round(t_star * label_rate))
            if j < n:
                tags[j] = tag
            t_star += model.period
    script = MotionScript(kind, float(duration_s), float(label_rate), times, np.zeros((n, N_KEYPOINTS, 2)), tuple(tags), layout)
    if n:
        object.__setattr__(script, "joints", script.pose_at(times))
    return script


def static_script(pose, duration_s: float, label_rate: float = 15.0, kind=MotionKind.SQUAT, layout: SceneLayout | None = None) -> MotionScript:
    """A script whose skeleton never moves."""
    pose = np.asarray(pose.keypoints if isinstance(pose, Pose2D) else pose, dtype=np.float64)
    layout = layout or SceneLayout()
    n = int(math.floor(duration_s * label_rate + 1e-9))
    times = np.arange(n) / label_rate
    joints = np.broadcast_to(pose, (n, N_KEYPOINTS, 2)).copy()
    return MotionScript(MotionKind(kind), float(duration_s), float(label_rate), times, joints, (None,) * n, layout, pose.copy())


# --------------------------------------------------------------------------
# Channel simulation


def path_lengths(positions: np.ndarray, layout: SceneLayout) -> np.ndarray:
    """UE -> scatterer -> RRU path lengths ``[..., J, 3]`` for positions ``[..., J, 3]``."""
    positions = np.asarray(positions, dtype=np.float64)
    d_ue = np.linalg.norm(positions - layout.ue, axis=-1)
    d_rru = np.linalg.norm(positions[..., None, :] - layout.rrus, axis=-1)
    return d_ue[..., None] + d_rru


def simulate_paths(
    positions: np.ndarray,
    reflectivity: np.ndarray,
    layout: SceneLayout,
    direct_gain: Optional[float] = None,
    chunk: int = 64,
) -> np.ndarray:
    """Noise-free channel ``[n, 544, 3]`` for scatterers at ``positions[n, J, 3]``."""
    a0 = layout.direct_gain if direct_gain is None else direct_gain
    f = layout.subcarrier_freqs
    tau0 = np.linalg.norm(layout.rrus - layout.ue, axis=-1) / SPEED_OF_LIGHT
    direct = a0 * np.exp(-2j * np.pi * f[:, None] * tau0[None, :])
    rho = np.asarray(reflectivity, dtype=np.float64)
    n = positions.shape[0]
    h = np.empty((n, N_SUBCARRIERS, N_RRU), dtype=np.complex128)
    for start in range(0, n, chunk):
        tau = path_lengths(positions[start : start + chunk], layout) / SPEED_OF_LIGHT  # [c, J, 3]
        phase = -2 * np.pi * f[None, None, :, None] * tau[:, :, None, :]
        h[start : start + chunk] = direct + np.einsum("j,cjkr->ckr", rho, np.exp(1j * phase))
    return h


def add_noise(h: np.ndarray, snr_db: float, seed: int = 0, first_index: int = 0) -> np.ndarray:
    """Complex white noise at ``snr_db`` below the mean channel power, seeded per frame."""
    power = float(np.mean(np.abs(h) ** 2))
    sigma = math.sqrt(power / 10 ** (snr_db / 10) / 2)
    out = h.copy()
    for i in range(h.shape[0]):
        rng = np.random.default_rng([seed, first_index + i])
        w = rng.normal(0.0, sigma, size=h.shape[1:] + (2,))
        out[i] += w[..., 0] + 1j * w[..., 1]
    return out


def scatterer_positions(joints: np.ndarray, layout: SceneLayout) -> np.ndarray:
    return layout.to_metric(np.asarray(joints)[..., SCATTERER_JOINTS, :])


def simulate_csi(
    script: MotionScript,
    layout: SceneLayout | None = None,
    times: Optional[Sequence[float]] = None,
    seed: int = 0,
    noise: bool = True,
) -> list[CsiFrame]:
    """CSI frames for ``script`` at ``times`` (default: the layout's CSI rate over the script).

    ``times`` are local to the script; frames carry them as timestamps.
    """
    layout = layout or script.layout
    if times is None:
        n = int(math.floor(script.duration * layout.csi_rate + 1e-9))
        times = np.arange(n) / layout.csi_rate
    times = np.asarray(times, dtype=np.float64)
    if times.size == 0:
        return []
    h = csi_array(script, layout, times, seed=seed, noise=noise)
    return [CsiFrame(t, h[i]) for i, t in enumerate(times)]


def csi_array(script: MotionScript, layout: SceneLayout, times: np.ndarray, seed: int = 0, noise: bool = True, first_index: int = 0) -> np.ndarray:
    pos = scatterer_positions(script.pose_at(times), layout)
    h = simulate_paths(pos, SCATTERER_RHO, layout)
    if noise and layout.snr_db is not None:
        h = add_noise(h, layout.snr_db, seed=seed, first_index=first_index)
    return h


# --------------------------------------------------------------------------
# Datasets

JITTER_S = 0.002


@dataclass
class SynthRecording:
    frames: list[CsiFrame]
    labels: list[LabeledFrame]
    manifest: dict


def synthesize(
    kinds: Sequence,
    per_kind_duration: float,
    layout: SceneLayout | None = None,
    seed: int = 0,
    jitter_s: float = JITTER_S,
) -> SynthRecording:
    """Back-to-back motion segments with jittered 25 Hz CSI and 15 Hz labels."""
    if len(kinds) == 0:
        raise ValueError("need at least one motion kind")
    if per_kind_duration <= 0:
        raise ValueError(f"per-kind duration must be positive, got {per_kind_duration}")
    layout = layout or SceneLayout()
    kinds = [MotionKind.parse(k) if isinstance(k, str) else MotionKind(k) for k in kinds]
    rng = np.random.default_rng(seed)
    frames: list[CsiFrame] = []
    labels: list[LabeledFrame] = []
    manifest = {"seed": int(seed), "per_kind_duration_s": float(per_kind_duration), "segments": []}
    frame_index = 0
    for seg, kind in enumerate(kinds):
        start = seg * per_kind_duration
        script = gen_motion(kind, per_kind_duration, layout.label_rate, layout)
        n_csi = int(math.floor(per_kind_duration * layout.csi_rate + 1e-9))
        csi_local = np.arange(n_csi) / layout.csi_rate + rng.uniform(-jitter_s, jitter_s, n_csi)
        lab_local = script.times + rng.uniform(-jitter_s, jitter_s, len(script))

        h = csi_array(script, layout, csi_local, seed=seed, first_index=frame_index)
        frame_index += n_csi
        frames.extend(CsiFrame(start + t, h[i]) for i, t in enumerate(csi_local))

        poses = script.pose_at(lab_local)
        for i, t in enumerate(lab_local):
            labels.append(LabeledFrame(Pose2D(poses[i]), start + t, kind, script.tags[i]))
        manifest["segments"].append(
            {
                "motion": kind.label,
                "csi_frames": n_csi,
                "labels": len(script),
                "tagged": {tag.label: script.tags.count(tag) for tag in dict.fromkeys(t for t in script.tags if t)},
            }
        )
    manifest["csi_frames"] = len(frames)
    manifest["labels"] = len(labels)
    return SynthRecording(frames, labels, manifest)


def make_dataset(kinds: Sequence, per_kind_duration: float, layout: SceneLayout | None = None, seed: int = 0, path=None) -> SynthRecording:
    """Synthesize a recording and write it as an MDP1 file at ``path``."""
    rec = synthesize(kinds, per_kind_duration, layout, seed)
    if path is not None:
        write_dataset(rec.frames, rec.labels, path)
    return rec
