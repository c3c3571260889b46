import numpy as np
import pytest
from hypothesis import settings

from midipose.csi import N_RRU, N_SUBCARRIERS, CsiFrame, LabeledFrame, MotionKind, Pose2D, StateTag

settings.register_profile("midipose", deadline=None, max_examples=50, derandomize=True)
settings.load_profile("midipose")


def random_frames(n, seed=0, t0=0.0, dt=0.04):
    rng = np.random.default_rng(seed)
    h = rng.normal(size=(n, N_SUBCARRIERS, N_RRU)) + 1j * rng.normal(size=(n, N_SUBCARRIERS, N_RRU))
    return [CsiFrame(t0 + i * dt, h[i]) for i in range(n)]


def random_pose(rng, torso=0.2):
    kp = rng.uniform(0.2, 0.8, size=(17, 2))
    # Keep the torso well above the degeneracy floor.
    kp[5:7, 1] = 0.6
    kp[11:13, 1] = 0.6 - torso
    kp[5, 0], kp[6, 0] = 0.45, 0.55
    kp[11, 0], kp[12, 0] = 0.47, 0.53
    return kp


def random_labels(n, seed=0, dt=1 / 15):
    rng = np.random.default_rng(seed)
    out = []
    kinds = list(MotionKind)
    for i in range(n):
        motion = kinds[i % len(kinds)]
        tags = [t for t in StateTag if t.motion is motion]
        tag = tags[i % len(tags)] if i % 3 == 0 else None
        out.append(LabeledFrame(Pose2D(random_pose(rng)), i * dt, motion, tag))
    return out


@pytest.fixture
def frames():
    return random_frames(6)


@pytest.fixture
def labels():
    return random_labels(7)


ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
