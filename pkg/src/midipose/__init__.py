"""Multi-domain CSI pose recognition: features, model, training, evaluation and a synthetic scene."""
from .alignment import AlignedSample, SplitSpec, align_nearest, split
from .csi import (
    KEYPOINT_NAMES,
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
from .dataset import DatasetFormatError, load_dataset, read_dataset, write_dataset
from .evaluation import ALPHAS, EvalSlice, evaluate, pck, report, torso_length
from .features import WindowConfig, doppler, extract_features, linear_detrend, phase_differential, unwrap, window_stats
from .model import Baseline, MiDiPose, ModelConfig, TrainConfig, build_model, load_model, predict, save_model, train
from .synth import SceneLayout, gen_motion, make_dataset, simulate_csi, synthesize

__version__ = "0.1.0"
