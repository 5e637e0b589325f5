"""Continual concept learning over feature vectors.

Classes are modeled as sets of centroid/covariance clusters grown
incrementally; old classes are rebuilt for classifier training by sampling
their cluster Gaussians (pseudorehearsal); unlabeled data is prioritized by
centroid-distance curiosity scores.
"""

from .classifier import LinearClassifier, TrainConfig, train
from .clustering import (
    AggVarConfig,
    ClassModel,
    ClusterAction,
    ClusterEvent,
    ConceptCluster,
    MemoryStore,
)
from .curiosity import (
    NoveltyConfig,
    NoveltyResult,
    SelectionResult,
    detect_unknown,
    score,
    select_informative,
)
from .errors import (
    CentroidCLError,
    ConfigError,
    DataError,
    EmptyModelError,
    FormatError,
    IoError,
    NumericsError,
)
from .features import (
    Dataset,
    IncrementBatch,
    LabeledSample,
    LabelOracle,
    make_stream,
    read_feature_file,
    split_class_incremental,
    split_fsil,
    write_feature_file,
)
from .harness import (
    IncrementReport,
    ProtocolConfig,
    RunReport,
    TuneResult,
    run,
    run_with_state,
    tune_threshold,
)
from .modelio import load_model, save_model
from .rehearsal import (
    PseudoExemplar,
    RehearsalConfig,
    generate_for_class,
    generate_rehearsal_set,
)
from .rng import Xoshiro256StarStar, fnv1a64, subseed
from .synthetic import make_blob_dataset

__version__ = "0.1.0"
