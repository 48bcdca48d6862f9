"""Multilingual dialog encoder pretraining toolkit.

Thin Python surface over the C++ core: corpus segmentation and windowing,
the synthetic bilingual corpus, vocabulary, corruption objectives, the
pretraining loop, probe-task generation and scoring, and the exact
mutual-information analysis.  Submodules: ``tasks``, ``mi``, ``toy``.
"""

from dialopre._dialopre import (  # noqa: F401
    AlignedContextPair,
    AlignmentLink,
    Context,
    Conversation,
    CorruptedContext,
    CorruptionMode,
    DataError,
    GradCheckResult,
    Lang,
    MaskPlan,
    MaskTarget,
    ModelConfig,
    ModelParams,
    NumericError,
    PretrainResult,
    Rng,
    StepLog,
    TimedUtterance,
    TokUtt,
    TrainBatch,
    TrainerConfig,
    TranslatedSlot,
    Vocabulary,
    context_loss,
    corrupt_context,
    eval_mug_loss,
    gradient_check,
    is_holdout_movie,
    join_alignments,
    lang_from_string,
    mi,
    plan_token_masks,
    pretrain,
    segment_conversations,
    substream_seed,
    tasks,
    toy,
    utterance_loss,
    window_contexts,
)

__version__ = "0.1.0"

__all__ = [
    "AlignedContextPair",
    "AlignmentLink",
    "Context",
    "Conversation",
    "CorruptedContext",
    "CorruptionMode",
    "DataError",
    "GradCheckResult",
    "Lang",
    "MaskPlan",
    "MaskTarget",
    "ModelConfig",
    "ModelParams",
    "NumericError",
    "PretrainResult",
    "Rng",
    "StepLog",
    "TimedUtterance",
    "TokUtt",
    "TrainBatch",
    "TrainerConfig",
    "TranslatedSlot",
    "Vocabulary",
    "context_loss",
    "corrupt_context",
    "eval_mug_loss",
    "gradient_check",
    "is_holdout_movie",
    "join_alignments",
    "lang_from_string",
    "mi",
    "plan_token_masks",
    "pretrain",
    "segment_conversations",
    "substream_seed",
    "tasks",
    "toy",
    "utterance_loss",
    "window_contexts",
]
