"""Fixed-length signatures for 3D skeletal motion, with exact nearest-neighbour retrieval."""

from .errors import (
    ConfigError,
    DatasetError,
    LoadError,
    MetricError,
    MotionSigError,
    NumericalError,
    ParseError,
    ShapeError,
    ValidationError,
)
from .evaluation import dtw_distance, pr_curve, topn_accuracy
from .features import (
    PairLabel,
    build_encoder_input,
    frame_motion_field,
    motion_distance_profile,
    trajectory_similarity,
    trajectory_summary,
)
from .index import EmbeddingIndex, build_index, load_index, save_index
from .model import EncoderConfig, LossConfig, build_encoder, encode, load_params, save_params
from .motion_data import (
    SkeletonSequence,
    SkeletonTopology,
    drop_joints,
    load_sequence,
    normalize_bone_lengths,
    read_manifest,
    read_topology,
    save_sequence,
    speed_double,
    speed_half,
)
from .submotion import query_submotion, sample_subsequences, train_submotion
from .training import Regime, TrainConfig, train

__version__ = "0.1.0"
