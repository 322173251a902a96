"""MQAG: information-consistency scoring for summaries.

Multiple-choice questions are generated from one text and answered against
both; the expected statistical distance between the two answer
distributions measures how much information the texts disagree on.
"""

from ._kernels import KERNEL_BACKEND
from .backend import (
    AnswerRequest,
    Backend,
    BackendDescriptor,
    BackendError,
    BackendKind,
    BackendUnavailableError,
    GenerationRequest,
    InsufficientContentError,
    MCQuestion,
    MockBackend,
    ProtocolError,
    RemoteBackend,
    ShortGenerationError,
    make_backend,
)
from .distributions import (
    DistanceKind,
    OptionDistribution,
    distance,
    effective_options,
    hellinger,
    kl_divergence,
    one_best,
    total_variation,
)
from .harness import (
    CorrelationResult,
    CurvePoint,
    DatasetError,
    EvalDataset,
    EvalRecord,
    Level,
    SweepPoint,
    UndefinedCorrelationError,
    abstractiveness_split,
    answerability_sweep,
    convergence_curve,
    dataset_correlation,
    evaluate_dataset,
    filter_systems,
    load_dataset,
    pearson,
    spearman,
    summary_level_corr,
    system_level_corr,
)
from .scoring import (
    AnsweredQuestion,
    QuestionResult,
    ScoreConfig,
    ScoreReport,
    Variant,
    filter_answerable,
    inconsistency,
    mqag_f1,
    mqag_score,
    score_pair,
)
from .textmetrics import abstractiveness, rouge1_f1, rougeL_precision, tokenize

__version__ = "0.1.0"

__all__ = [
    "AnswerRequest",
    "AnsweredQuestion",
    "Backend",
    "BackendDescriptor",
    "BackendError",
    "BackendKind",
    "BackendUnavailableError",
    "CorrelationResult",
    "CurvePoint",
    "DatasetError",
    "DistanceKind",
    "EvalDataset",
    "EvalRecord",
    "GenerationRequest",
    "InsufficientContentError",
    "KERNEL_BACKEND",
    "Level",
    "MCQuestion",
    "MockBackend",
    "OptionDistribution",
    "ProtocolError",
    "QuestionResult",
    "RemoteBackend",
    "ScoreConfig",
    "ScoreReport",
    "ShortGenerationError",
    "SweepPoint",
    "UndefinedCorrelationError",
    "Variant",
    "abstractiveness",
    "abstractiveness_split",
    "answerability_sweep",
    "convergence_curve",
    "dataset_correlation",
    "distance",
    "effective_options",
    "evaluate_dataset",
    "filter_answerable",
    "filter_systems",
    "hellinger",
    "inconsistency",
    "kl_divergence",
    "load_dataset",
    "make_backend",
    "mqag_f1",
    "mqag_score",
    "one_best",
    "pearson",
    "rouge1_f1",
    "rougeL_precision",
    "score_pair",
    "spearman",
    "summary_level_corr",
    "system_level_corr",
    "tokenize",
    "total_variation",
]
