"""Data augmentation for few-shot text classification.

Generates label-preserved and label-flipped candidates by masking words in
cloze-rendered inputs and asking an infilling model to rewrite them, then
keeps only the candidates a task classifier scores as most probable for the
intended label. Includes word-level baselines (synonym/kNN/EDA replacement,
back-translation, masked-token resampling), deterministic stub backends,
task metrics, and a CLI pipeline (augment, select, evaluate, report, sweep).
"""

from __future__ import annotations

from .backends import (
    BackendConfig,
    BackendError,
    BackendUnavailableError,
    DecodeConfig,
    HttpBackend,
    IdentityTranslationBackend,
    KeywordClassifierBackend,
    ProtocolError,
    StubInfillBackend,
    stub_infill_fill,
)
from .cloze import (
    ClozeInstance,
    FillConfig,
    FlipNotAllowedError,
    MaskPlan,
    RenderError,
    consistency_check,
    fill,
    generate_candidates,
    plan_mask,
    render_cloze,
)
from .corpus import (
    CandidateRecord,
    DatasetFormatError,
    Example,
    GenerationInfo,
    LabelSet,
    TaskSpec,
    load_candidates,
    load_dataset,
    save_candidates,
    save_dataset,
)
from .evalkit import (
    TaskScore,
    accuracy,
    avg_score,
    build_report,
    composite_score,
    compute_metrics,
    macro_f1,
    max_drop,
)
from .hashing import derive_seed, fnv1a_64
from .lexops import LexiconIndex, TokenSeq, back_translate, eda_augment, knn_replace, synonym_replace, tokenize
from .select import (
    MixPolicy,
    ScoredCandidate,
    SelectionConfig,
    SelectionResult,
    assemble_training_set,
    run_selection,
    score_candidates,
)
from .tasks import TASK_ORDER, TASKS, get_task

__version__ = "0.1.0"

__all__ = [
    "BackendConfig",
    "BackendError",
    "BackendUnavailableError",
    "CandidateRecord",
    "ClozeInstance",
    "DatasetFormatError",
    "DecodeConfig",
    "Example",
    "FillConfig",
    "FlipNotAllowedError",
    "GenerationInfo",
    "HttpBackend",
    "IdentityTranslationBackend",
    "KeywordClassifierBackend",
    "LabelSet",
    "LexiconIndex",
    "MaskPlan",
    "MixPolicy",
    "ProtocolError",
    "RenderError",
    "ScoredCandidate",
    "SelectionConfig",
    "SelectionResult",
    "StubInfillBackend",
    "TASKS",
    "TASK_ORDER",
    "TaskScore",
    "TaskSpec",
    "TokenSeq",
    "accuracy",
    "assemble_training_set",
    "avg_score",
    "back_translate",
    "build_report",
    "composite_score",
    "compute_metrics",
    "consistency_check",
    "derive_seed",
    "eda_augment",
    "fill",
    "fnv1a_64",
    "generate_candidates",
    "get_task",
    "knn_replace",
    "load_candidates",
    "load_dataset",
    "macro_f1",
    "max_drop",
    "plan_mask",
    "render_cloze",
    "run_selection",
    "save_candidates",
    "save_dataset",
    "score_candidates",
    "stub_infill_fill",
    "synonym_replace",
    "tokenize",
]
